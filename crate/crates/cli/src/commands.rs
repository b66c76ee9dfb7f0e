//! Subcommand bodies. Each command first turns the merged configuration into
//! validated parameters, then runs; nothing is written until both succeed.

use rayon::prelude::*;
use serde_json::{json, Map, Value as Json};

use dysonlab::estimates::{condition_table, pv_semicircle, QuadratureSettings, TableSpec, DEFAULT_ALPHA};
use dysonlab::kernels::{Kernel, ScaledKernel, SineKernel};
use dysonlab::report::{Cell, Check, ExperimentReport};
use dysonlab::sampling::{bulk_scale, empirical_one_point, ks_semicircle, sample_gue_ensemble};
use dysonlab::sde::{
    drift_rate_estimate, girsanov_moments, gue_ensemble_inputs, run_ensemble, tagged_statistics, DriftSpec,
    IntegrateOptions, PathEnsemble, TAGGED_COLUMNS,
};

use crate::config::{Config, ConfigError};
use crate::svg::{Heatmap, LinePlot, Series};

type Prep<T> = std::result::Result<T, ConfigError>;

/// Result of one subcommand.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: &'static str,
    pub metadata: Map<String, Json>,
    pub tables: Vec<ExperimentReport>,
    pub checks: Vec<Check>,
    pub plot: Option<String>,
}

impl Outcome {
    fn new(command: &'static str) -> Self {
        Outcome {
            command,
            metadata: Map::new(),
            tables: Vec::new(),
            checks: Vec::new(),
            plot: None,
        }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Maps a library validation error to a configuration error on `key`.
fn lib_check<T>(cfg: &Config, key: &str, r: dysonlab::Result<T>) -> Prep<T> {
    r.map_err(|e| {
        let mut msg = e.to_string();
        if let Err(c) = cfg.require(false, key, &msg) {
            msg = c.0;
        }
        ConfigError(msg)
    })
}

fn check_theta(cfg: &Config, theta: f64) -> Prep<()> {
    cfg.require(theta.abs() < std::f64::consts::SQRT_2, "theta", "|theta| must be below sqrt(2)")
}

// ---------------------------------------------------------------- kernel-table

pub const KERNEL_TABLE_KEYS: [&str; 5] = ["theta", "n_list", "lo", "hi", "step"];

#[derive(Debug, Clone, PartialEq)]
pub struct KernelTableParams {
    pub theta: f64,
    pub n_list: Vec<usize>,
    pub grid: Vec<f64>,
}

pub fn prepare_kernel_table(cfg: &Config) -> Prep<KernelTableParams> {
    cfg.check_keys(&KERNEL_TABLE_KEYS)?;
    let theta = cfg.f64_or("theta", 0.0)?;
    check_theta(cfg, theta)?;
    let n_list = cfg.usize_list_or("n_list", &[256])?;
    cfg.require(!n_list.is_empty() && n_list.iter().all(|&n| n >= 1), "n_list", "needs N >= 1 entries")?;
    let lo = cfg.f64_or("lo", -5.0)?;
    let hi = cfg.f64_or("hi", 5.0)?;
    let step = cfg.f64_or("step", 0.25)?;
    cfg.require(hi > lo, "hi", "must exceed lo")?;
    cfg.require(step > 0.0, "step", "must be positive")?;
    let count = ((hi - lo) / step).round() as usize + 1;
    cfg.require(count <= 4001, "step", "grid would exceed 4001 points per axis")?;
    let grid = (0..count).map(|i| lo + i as f64 * step).collect();
    Ok(KernelTableParams { theta, n_list, grid })
}

pub fn run_kernel_table(p: &KernelTableParams) -> dysonlab::Result<Outcome> {
    let mut out = Outcome::new("kernel-table");
    let sine = SineKernel::new(p.theta)?;
    let mut table = ExperimentReport::new("kernel_table", &["N", "x", "y", "scaled", "sine", "abs_diff"]);
    let mut summary = ExperimentReport::new("kernel_summary", &["N", "sup_difference"]);
    let mut sups = Vec::new();
    let mut last_diff = Vec::new();
    for &n in &p.n_list {
        let k = ScaledKernel::new(n, p.theta)?;
        let rows: Vec<Vec<(f64, f64)>> = p
            .grid
            .par_iter()
            .map(|&x| p.grid.iter().map(|&y| (k.eval(x, y), sine.eval(x, y))).collect())
            .collect();
        let mut sup = 0.0f64;
        last_diff.clear();
        for (i, row) in rows.iter().enumerate() {
            for (j, &(a, b)) in row.iter().enumerate() {
                let d = (a - b).abs();
                sup = sup.max(d);
                last_diff.push(a - b);
                table.push_row(vec![Cell::from(n), p.grid[i].into(), p.grid[j].into(), a.into(), b.into(), d.into()])?;
            }
        }
        summary.push_row(vec![Cell::from(n), sup.into()])?;
        sups.push(sup);
    }
    if sups.len() > 1 {
        let dec = sups.windows(2).all(|w| w[1] < w[0]);
        out.check("sup difference decreases along N", dec, format!("{sups:?}"));
    }
    out.metadata.insert("theta".into(), json!(p.theta));
    let g = p.grid.len();
    out.plot = Some(
        Heatmap {
            title: format!("K_theta^N - sine kernel, N = {}, theta = {}", p.n_list.last().expect("non-empty"), p.theta),
            rows: g,
            cols: g,
            values: transpose(&last_diff, g),
        }
        .render(),
    );
    out.tables = vec![table, summary];
    Ok(out)
}

/// Rows indexed by y, columns by x, for plotting.
fn transpose(v: &[f64], g: usize) -> Vec<f64> {
    (0..g * g).map(|k| v[(k % g) * g + k / g]).collect()
}

// ---------------------------------------------------------------- conditions

pub const CONDITIONS_KEYS: [&str; 8] = ["theta", "n_list", "r_list", "x_radius", "x_points", "alpha", "rtol_1d", "rtol_2d"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionsParams {
    pub spec: TableSpec,
}

pub fn prepare_conditions(cfg: &Config) -> Prep<ConditionsParams> {
    cfg.check_keys(&CONDITIONS_KEYS)?;
    let theta = cfg.f64_or("theta", 0.5)?;
    check_theta(cfg, theta)?;
    let n_list = cfg.usize_list_or("n_list", &[64, 256, 1024])?;
    let r_list = cfg.f64_list_or("r_list", &[2.0, 8.0, 32.0])?;
    let mut spec = TableSpec::new(theta, n_list, r_list, cfg.f64_or("x_radius", 1.0)?);
    spec.x_points = cfg.usize_or("x_points", 41)?;
    spec.settings = QuadratureSettings {
        alpha: cfg.f64_or("alpha", DEFAULT_ALPHA)?,
        rtol_1d: cfg.f64_or("rtol_1d", 1e-7)?,
        rtol_2d: cfg.f64_or("rtol_2d", 1e-5)?,
        ..Default::default()
    };
    cfg.require(spec.settings.rtol_1d > 0.0, "rtol_1d", "must be positive")?;
    cfg.require(spec.settings.rtol_2d > 0.0, "rtol_2d", "must be positive")?;
    lib_check(cfg, "n_list", spec.validate())?;
    Ok(ConditionsParams { spec })
}

pub fn run_conditions(p: &ConditionsParams) -> dysonlab::Result<Outcome> {
    let mut out = Outcome::new("conditions");
    let table = condition_table(&p.spec)?;
    let theta = p.spec.theta;
    let pv = pv_semicircle(theta)?;
    let mut pv_table = ExperimentReport::new("pv_check", &["theta", "value", "error"]);
    pv_table.push_row(vec![theta.into(), pv.into(), (pv - theta).abs().into()])?;
    out.check("pv semicircle identity", (pv - theta).abs() <= 1e-6, format!("|{pv} - {theta}|"));

    let pd = table.column("palm_drift").expect("column");
    let nr = p.spec.r_list.len();
    for (a, &n) in p.spec.n_list.iter().enumerate() {
        let row = &pd[a * nr..(a + 1) * nr];
        let mono = row.windows(2).all(|w| w[1] <= w[0]);
        out.check(format!("palm_drift non-increasing in r at N = {n}"), mono, format!("{row:?}"));
    }
    let corner = *pd.last().expect("non-empty");
    let min = pd.iter().copied().fold(f64::INFINITY, f64::min);
    out.check(
        "palm_drift minimal at the largest (N, r)",
        corner <= min,
        format!("corner {corner:e}, table minimum {min:e}"),
    );
    out.metadata.insert("theta".into(), json!(theta));

    let mut series = Vec::new();
    for (a, &n) in p.spec.n_list.iter().enumerate() {
        let pts = (0..nr)
            .map(|b| (p.spec.r_list[b].ln(), pd[a * nr + b].max(1e-300).log10()))
            .collect();
        series.push(Series {
            name: format!("N = {n}"),
            points: pts,
            band: None,
        });
    }
    out.plot = Some(
        LinePlot {
            title: "palm drift tail, sup over x".into(),
            x_label: "ln r".into(),
            y_label: "log10 value".into(),
            series,
        }
        .render(),
    );
    out.tables = vec![table, pv_table];
    Ok(out)
}

// ---------------------------------------------------------------- pv-check

pub const PV_KEYS: [&str; 2] = ["theta_list", "tolerance"];

#[derive(Debug, Clone, PartialEq)]
pub struct PvParams {
    pub thetas: Vec<f64>,
    pub tolerance: f64,
}

pub fn prepare_pv(cfg: &Config) -> Prep<PvParams> {
    cfg.check_keys(&PV_KEYS)?;
    let thetas = cfg.f64_list_or("theta_list", &[-1.2, -0.7, 0.0, 0.3, 0.7, 1.2])?;
    cfg.require(!thetas.is_empty(), "theta_list", "must be non-empty")?;
    for &t in &thetas {
        cfg.require(t.abs() < std::f64::consts::SQRT_2, "theta_list", "entries need |theta| < sqrt(2)")?;
    }
    let tolerance = cfg.f64_or("tolerance", 1e-6)?;
    cfg.require(tolerance > 0.0, "tolerance", "must be positive")?;
    Ok(PvParams { thetas, tolerance })
}

pub fn run_pv(p: &PvParams) -> dysonlab::Result<Outcome> {
    let mut out = Outcome::new("pv-check");
    let mut table = ExperimentReport::new("pv_check", &["theta", "value", "error"]);
    let mut pts = Vec::new();
    for &t in &p.thetas {
        let v = pv_semicircle(t)?;
        let e = (v - t).abs();
        table.push_row(vec![t.into(), v.into(), e.into()])?;
        out.check(format!("pv identity at theta = {t}"), e <= p.tolerance, format!("error {e:e}"));
        pts.push((t, v));
    }
    out.metadata.insert("tolerance".into(), json!(p.tolerance));
    out.plot = Some(
        LinePlot {
            title: "principal value vs theta".into(),
            x_label: "theta".into(),
            y_label: "P.V. integral".into(),
            series: vec![Series {
                name: "P.V.".into(),
                points: pts,
                band: None,
            }],
        }
        .render(),
    );
    out.tables = vec![table];
    Ok(out)
}

// ---------------------------------------------------------------- sample

pub const SAMPLE_KEYS: [&str; 8] = ["n", "draws", "theta", "window_lo", "window_hi", "bins", "ks_threshold", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct SampleParams {
    pub n: usize,
    pub draws: usize,
    pub theta: f64,
    pub window: (f64, f64),
    pub bins: usize,
    pub ks_threshold: f64,
    pub seed: u64,
}

pub fn prepare_sample(cfg: &Config) -> Prep<SampleParams> {
    cfg.check_keys(&SAMPLE_KEYS)?;
    let n = cfg.usize_or("n", 200)?;
    cfg.require(n >= 1, "n", "must be at least 1")?;
    let draws = cfg.usize_or("draws", 200)?;
    cfg.require(draws >= 2, "draws", "must be at least 2")?;
    let theta = cfg.f64_or("theta", 0.0)?;
    check_theta(cfg, theta)?;
    let window = (cfg.f64_or("window_lo", -5.0)?, cfg.f64_or("window_hi", 5.0)?);
    cfg.require(window.1 > window.0, "window_hi", "must exceed window_lo")?;
    let bins = cfg.usize_or("bins", 20)?;
    cfg.require(bins >= 1, "bins", "must be at least 1")?;
    let ks_threshold = cfg.f64_or("ks_threshold", 0.03)?;
    Ok(SampleParams {
        n,
        draws,
        theta,
        window,
        bins,
        ks_threshold,
        seed: cfg.u64_or("seed", 1)?,
    })
}

pub fn run_sample(p: &SampleParams) -> dysonlab::Result<Outcome> {
    let mut out = Outcome::new("sample");
    let samples = sample_gue_ensemble(p.n, p.seed, p.draws)?;
    let ks = ks_semicircle(&samples)?;
    let mut ks_table = ExperimentReport::new("ks", &["N", "draws", "ks"]);
    ks_table.push_row(vec![Cell::from(p.n), Cell::from(p.draws), ks.into()])?;
    out.check(
        "KS distance to the semicircle",
        ks <= p.ks_threshold,
        format!("{ks:.5} (threshold {})", p.ks_threshold),
    );

    let mut eig = ExperimentReport::new("eigenvalues", &["draw", "index", "position"]);
    for (d, c) in samples.iter().enumerate() {
        for (i, &x) in c.positions().iter().enumerate() {
            eig.push_row(vec![Cell::from(d), Cell::from(i), x.into()])?;
        }
    }

    let scaled = samples
        .iter()
        .map(|c| bulk_scale(c, p.theta))
        .collect::<dysonlab::Result<Vec<_>>>()?;
    let dens = empirical_one_point(&scaled, p.window, p.bins)?;
    let k = ScaledKernel::new(p.n, p.theta)?;
    let sub = 32;
    let kernel: Vec<f64> = dens
        .grid
        .iter()
        .map(|&c| {
            (0..sub)
                .map(|i| k.diag(c - 0.5 * dens.bin_width + dens.bin_width * (i as f64 + 0.5) / sub as f64))
                .sum::<f64>()
                / sub as f64
        })
        .collect();
    let mut dt = ExperimentReport::new("density", &["bin_center", "empirical", "std_error", "kernel"]);
    let mut sup = 0.0f64;
    for b in 0..dens.grid.len() {
        sup = sup.max((dens.values[b] - kernel[b]).abs());
        dt.push_row(vec![dens.grid[b].into(), dens.values[b].into(), dens.std_errors[b].into(), kernel[b].into()])?;
    }
    let pooled = (dens.std_errors.iter().map(|s| s * s).sum::<f64>() / dens.std_errors.len() as f64).sqrt();
    out.check(
        "empirical density within 3 pooled SE of the kernel diagonal",
        sup <= 3.0 * pooled,
        format!("sup {sup:.5}, pooled SE {pooled:.5}"),
    );
    out.metadata.insert("seed".into(), json!(p.seed));
    out.metadata.insert("ks".into(), json!(ks));
    out.plot = Some(
        LinePlot {
            title: format!("one-point function, N = {}, theta = {}", p.n, p.theta),
            x_label: "bulk coordinate".into(),
            y_label: "density".into(),
            series: vec![
                Series {
                    name: "empirical".into(),
                    points: dens.grid.iter().copied().zip(dens.values.iter().copied()).collect(),
                    band: Some(dens.std_errors.iter().map(|s| 2.0 * s).collect()),
                },
                Series {
                    name: "kernel diagonal".into(),
                    points: dens.grid.iter().copied().zip(kernel).collect(),
                    band: None,
                },
            ],
        }
        .render(),
    );
    out.tables = vec![ks_table, dt, eig];
    Ok(out)
}

// ---------------------------------------------------------------- simulate

pub const SIMULATE_KEYS: [&str; 9] = ["theta", "n", "paths", "t_end", "dt", "tagged", "snapshots", "max_halvings", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateParams {
    pub theta: f64,
    pub n: usize,
    pub paths: usize,
    pub t_end: f64,
    pub dt: f64,
    pub tagged: usize,
    pub snapshots: usize,
    pub max_halvings: u32,
    pub seed: u64,
}

impl SimulateParams {
    fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.t_end / self.steps() as f64;
        let stride = self.steps() / self.snapshots;
        (1..=self.snapshots)
            .map(|k| if k == self.snapshots { self.t_end } else { (k * stride) as f64 * h })
            .collect()
    }

    pub fn options(&self) -> IntegrateOptions {
        IntegrateOptions {
            record_stride: self.steps() / self.snapshots,
            max_halvings: self.max_halvings,
            ..Default::default()
        }
    }
}

pub fn prepare_simulate(cfg: &Config) -> Prep<SimulateParams> {
    cfg.check_keys(&SIMULATE_KEYS)?;
    let p = SimulateParams {
        theta: cfg.f64_or("theta", 0.5)?,
        n: cfg.usize_or("n", 128)?,
        paths: cfg.usize_or("paths", 500)?,
        t_end: cfg.f64_or("t_end", 1.0)?,
        dt: cfg.f64_or("dt", 1e-3)?,
        tagged: cfg.usize_or("tagged", 4)?,
        snapshots: cfg.usize_or("snapshots", 4)?,
        max_halvings: cfg.u64_or("max_halvings", 12)?.min(64) as u32,
        seed: cfg.u64_or("seed", 1)?,
    };
    check_theta(cfg, p.theta)?;
    cfg.require(p.n >= 1, "n", "must be at least 1")?;
    cfg.require(p.paths >= 2, "paths", "must be at least 2")?;
    cfg.require(p.t_end > 0.0, "t_end", "must be positive")?;
    cfg.require(p.dt > 0.0 && p.dt <= p.t_end, "dt", "must lie in (0, t_end]")?;
    cfg.require(p.tagged >= 1 && p.tagged <= p.n, "tagged", "must lie in [1, n]")?;
    cfg.require(
        p.snapshots >= 1 && p.steps() % p.snapshots == 0,
        "snapshots",
        "must be positive and divide the number of steps",
    )?;
    lib_check(cfg, "theta", DriftSpec::FiniteTheta { theta: p.theta, n: p.n }.validate())?;
    Ok(p)
}

/// The paired ensembles: (finite-theta, plain), driven by identical initial
/// states and noise.
pub fn simulate_pair(p: &SimulateParams) -> dysonlab::Result<(PathEnsemble, PathEnsemble)> {
    let (initials, seeds) = gue_ensemble_inputs(p.n, p.theta, p.paths, p.seed)?;
    let opts = p.options();
    let a = run_ensemble(&DriftSpec::FiniteTheta { theta: p.theta, n: p.n }, &initials, p.t_end, p.dt, &seeds, &opts)?;
    let b = run_ensemble(&DriftSpec::FinitePlain { n: p.n }, &initials, p.t_end, p.dt, &seeds, &opts)?;
    Ok((a, b))
}

pub fn run_simulate(p: &SimulateParams) -> dysonlab::Result<Outcome> {
    let mut out = Outcome::new("simulate");
    let (with_theta, plain) = simulate_pair(p)?;
    let times = p.times();
    let mut columns = vec!["ensemble"];
    columns.extend(TAGGED_COLUMNS);
    let mut tagged = ExperimentReport::new("tagged", &columns);
    let mut series = Vec::new();
    for (name, e, other) in [("finite_theta", &with_theta, &plain), ("finite_plain", &plain, &with_theta)] {
        let stats = tagged_statistics(e, p.tagged, &times, Some(other))?;
        let (ti, li) = (stats.column_index("time").expect("column"), stats.column_index("label").expect("column"));
        let (di, si) = (
            stats.column_index("displacement").expect("column"),
            stats.column_index("displacement_se").expect("column"),
        );
        let mut pts = vec![(0.0, 0.0)];
        let mut band = vec![0.0];
        for row in stats.rows {
            if row[li].as_f64() == Some(0.0) {
                pts.push((row[ti].as_f64().expect("numeric"), row[di].as_f64().expect("numeric")));
                band.push(row[si].as_f64().expect("numeric"));
            }
            let mut full = vec![Cell::from(name)];
            full.extend(row);
            tagged.push_row(full)?;
        }
        series.push(Series {
            name: name.into(),
            points: pts,
            band: Some(band),
        });
    }
    let (est_theta, se_theta) = drift_rate_estimate(&with_theta, p.tagged, p.t_end)?;
    let (est_plain, se_plain) = drift_rate_estimate(&plain, p.tagged, p.t_end)?;
    out.check(
        "finite_theta tagged drift rate is zero",
        est_theta.abs() <= 3.0 * se_theta,
        format!("{est_theta:.5} +- {se_theta:.5}"),
    );
    out.check(
        "finite_plain tagged drift rate is theta",
        (est_plain - p.theta).abs() <= 3.0 * se_plain,
        format!("{est_plain:.5} +- {se_plain:.5} vs {}", p.theta),
    );
    let (gm, gse, gvar) = girsanov_moments(&plain, p.theta);
    out.check(
        "Girsanov density has mean one",
        (gm - 1.0).abs() <= 3.0 * gse,
        format!("{gm:.6} +- {gse:.6}"),
    );
    let mut gir = ExperimentReport::new("girsanov", &["theta", "N", "T", "mean", "se", "variance", "variance_exact"]);
    let exact = (p.theta * p.theta * p.t_end / p.n as f64).exp() - 1.0;
    gir.push_row(vec![
        p.theta.into(),
        Cell::from(p.n),
        p.t_end.into(),
        gm.into(),
        gse.into(),
        gvar.into(),
        exact.into(),
    ])?;
    let mut rates = ExperimentReport::new("drift_rates", &["ensemble", "estimate", "se", "target"]);
    rates.push_row(vec!["finite_theta".into(), est_theta.into(), se_theta.into(), 0.0.into()])?;
    rates.push_row(vec!["finite_plain".into(), est_plain.into(), se_plain.into(), p.theta.into()])?;
    out.metadata.insert("seed".into(), json!(p.seed));
    out.metadata.insert(
        "halvings".into(),
        json!({"finite_theta": with_theta.total_halvings(), "finite_plain": plain.total_halvings()}),
    );
    out.plot = Some(
        LinePlot {
            title: format!("tagged displacement (mean of {} central particles) +- 1 SE", p.tagged),
            x_label: "t".into(),
            y_label: "X_t - X_0".into(),
            series,
        }
        .render(),
    );
    out.tables = vec![tagged, rates, gir];
    Ok(out)
}
