//! Interacting-particle SDEs with logarithmic repulsion: the finite-N
//! systems with and without the macro-position drift, range-truncated
//! proxies of the infinite systems, the shift transform, and the Girsanov
//! weight between the two finite systems.
//!
//! Time stepping is tamed Euler-Maruyama. A step that would break the strict
//! ordering of the particles is split in two, with the midpoint of the
//! Brownian increment drawn from a Brownian bridge. Bridge draws use a
//! separate random stream, so two runs with the same seed see the same
//! coarse noise even if only one of them has to split a step.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_finite, Error, Result};
use crate::kernels::check_theta;
use crate::report::{format_real, Cell, ExperimentReport};
use crate::sampling::{bulk_scale, derive_seed, ks_two_sample, rng_from_seed, sample_gue_eigenvalues, ParticleConfiguration, Scaling};

/// Which drift the particles follow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DriftSpec {
    /// `sum_{j != i} 1/(x_i - x_j) - x_i/N - theta`.
    FiniteTheta { theta: f64, n: usize },
    /// `sum_{j != i} 1/(x_i - x_j) - x_i/N`.
    FinitePlain { n: usize },
    /// `sum_{0 < |x_i - x_j| < r} 1/(x_i - x_j)`.
    Truncated { r: f64 },
    /// `sum_{0 < |x_i - x_j| < r} 1/(x_i - x_j) + theta`.
    TruncatedTheta { r: f64, theta: f64 },
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DriftSpec::FiniteTheta { theta, n } => {
                check_theta(theta)?;
                check_particle_count(n)
            }
            DriftSpec::FinitePlain { n } => check_particle_count(n),
            DriftSpec::Truncated { r } => check_range(r),
            DriftSpec::TruncatedTheta { r, theta } => {
                check_theta(theta)?;
                check_range(r)
            }
        }
    }

    /// Constant part of the drift.
    pub fn constant(&self) -> f64 {
        match *self {
            DriftSpec::FiniteTheta { theta, .. } => -theta,
            DriftSpec::TruncatedTheta { theta, .. } => theta,
            _ => 0.0,
        }
    }

    /// `N` of the confining term `-x/N`, if any.
    pub fn confinement(&self) -> Option<usize> {
        match *self {
            DriftSpec::FiniteTheta { n, .. } | DriftSpec::FinitePlain { n } => Some(n),
            _ => None,
        }
    }

    /// Interaction range.
    pub fn range(&self) -> f64 {
        match *self {
            DriftSpec::Truncated { r } | DriftSpec::TruncatedTheta { r, .. } => r,
            _ => f64::INFINITY,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if let Some(n) = self.confinement() {
            if n != len {
                return Err(Error::domain("state", format!("{len} particles for a drift with N = {n}")));
            }
        }
        if len == 0 {
            return Err(Error::domain("state", "no particles"));
        }
        Ok(())
    }
}

fn check_particle_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("particle number", "N must be at least 1"));
    }
    Ok(())
}

fn check_range(r: f64) -> Result<()> {
    check_finite(r)?;
    if r <= 0.0 {
        return Err(Error::domain("interaction range", format!("r = {r} must be positive")));
    }
    Ok(())
}

/// Drift of particle `i`. The state need not be sorted.
pub fn drift(spec: &DriftSpec, i: usize, state: &[f64]) -> Result<f64> {
    spec.validate()?;
    spec.check_len(state.len())?;
    if i >= state.len() {
        return Err(Error::domain("particle index", format!("{i} out of {}", state.len())));
    }
    let xi = check_finite(state[i])?;
    let r = spec.range();
    let mut sum = 0.0;
    for (j, &xj) in state.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = xi - xj;
        if d == 0.0 {
            return Err(Error::Collision { i, j, position: xi });
        }
        if d.abs() < r {
            sum += 1.0 / d;
        }
    }
    let confinement = spec.confinement().map_or(0.0, |n| xi / n as f64);
    Ok(sum - confinement + spec.constant())
}

/// Drift of every particle of a sorted state, including repulsion from
/// static `reservoir` points.
fn drift_all(spec: &DriftSpec, state: &[f64], reservoir: &[f64], out: &mut [f64]) {
    let n = state.len();
    let r = spec.range();
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let xi = state[i];
        for j in i + 1..n {
            let d = xi - state[j];
            if -d >= r {
                break;
            }
            let v = 1.0 / d;
            out[i] += v;
            out[j] -= v;
        }
    }
    if !reservoir.is_empty() {
        for i in 0..n {
            for &p in reservoir {
                let d = state[i] - p;
                if d.abs() < r {
                    out[i] += 1.0 / d;
                }
            }
        }
    }
    let c = spec.constant();
    let inv_n = spec.confinement().map_or(0.0, |m| 1.0 / m as f64);
    for i in 0..n {
        out[i] += c - state[i] * inv_n;
    }
}

/// Static particles padding a truncated proxy on both sides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reservoir {
    pub points: Vec<f64>,
}

impl Reservoir {
    /// Lattice points at intensity `sqrt(2 - theta^2)/pi` filling a band of
    /// width `r` beyond each end of `config`, starting one spacing out.
    pub fn lattice(config: &ParticleConfiguration, theta: f64, r: f64) -> Result<Self> {
        check_theta(theta)?;
        check_range(r)?;
        let spacing = std::f64::consts::PI / (2.0 - theta * theta).sqrt();
        let count = (r / spacing).ceil() as usize;
        let (lo, hi) = (config.positions()[0], *config.positions().last().expect("non-empty"));
        let mut points: Vec<f64> = (1..=count).map(|k| lo - k as f64 * spacing).collect();
        points.reverse();
        points.extend((1..=count).map(|k| hi + k as f64 * spacing));
        Ok(Reservoir { points })
    }

    fn bounds(&self, lo: f64, hi: f64) -> (f64, f64) {
        let left = self.points.iter().copied().filter(|&p| p < lo).fold(f64::NEG_INFINITY, f64::max);
        let right = self.points.iter().copied().filter(|&p| p > hi).fold(f64::INFINITY, f64::min);
        (left, right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Taming {
    /// Plain Euler drift increment `b dt`.
    Off,
    /// `b dt / (1 + |b| dt / gamma)` with `gamma = 2 / sqrt(dt)`.
    Default,
    Gamma(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub taming: Taming,
    /// With `false` the Brownian increments are zero.
    pub noise: bool,
    /// Record every `record_stride` steps; `0` records only the endpoints.
    pub record_stride: usize,
    pub max_halvings: u32,
    pub reservoir: Option<Reservoir>,
    /// Each Brownian increment is the sum of this many sub-increments,
    /// drawn sub-step by sub-step. A run with `dt` and 2 sub-steps consumes
    /// the random stream exactly like a run with `dt/2` and 1, which couples
    /// the two for step-size comparisons.
    pub noise_substeps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            taming: Taming::Default,
            noise: true,
            record_stride: 0,
            max_halvings: 12,
            reservoir: None,
            noise_substeps: 1,
        }
    }
}

/// One trajectory. `states[k]` and `brownian[k]` are the positions and the
/// driving Brownian motions at `times[k]`; particles stay in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    pub seed: u64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub brownian: Vec<Vec<f64>>,
    /// Number of step splits performed.
    pub halvings: u64,
}

impl Path {
    pub fn terminal_brownian(&self) -> &[f64] {
        self.brownian.last().expect("paths record the initial time")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("paths record the initial time")
    }

    /// Index of the recorded time closest to `t` (within `1e-9 (1 + t)`).
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
    }

    /// `path.csv` rows `time, particle, position`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        w.write_record(["time", "particle", "position"])?;
        for (t, s) in self.times.iter().zip(&self.states) {
            for (i, x) in s.iter().enumerate() {
                w.write_record([format_real(*t), i.to_string(), format_real(*x)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

struct Stepper<'a> {
    spec: &'a DriftSpec,
    gamma: Option<f64>,
    noise: bool,
    max_halvings: u32,
    reservoir: &'a [f64],
    walls: (f64, f64),
    bridge: ChaCha8Rng,
    drift: Vec<f64>,
    proposal: Vec<f64>,
    halvings: u64,
}

impl Stepper<'_> {
    fn tame(&self, b: f64, h: f64) -> f64 {
        match self.gamma {
            None => b * h,
            Some(g) => b * h / (1.0 + b.abs() * h / g),
        }
    }

    fn ordered(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
            && x.windows(2).all(|w| w[0] < w[1])
            && x[0] > self.walls.0
            && x[x.len() - 1] < self.walls.1
    }

    /// Advances `state` over `h` with Brownian increment `dw`.
    fn advance(&mut self, state: &mut Vec<f64>, t: f64, h: f64, dw: &[f64], depth: u32) -> Result<()> {
        drift_all(self.spec, state, self.reservoir, &mut self.drift);
        let n = state.len();
        for i in 0..n {
            self.proposal[i] = state[i] + self.tame(self.drift[i], h) + dw[i];
        }
        if self.ordered(&self.proposal) {
            state.copy_from_slice(&self.proposal);
            return Ok(());
        }
        if depth >= self.max_halvings {
            return Err(Error::StepFailure {
                time: t,
                depth,
                state: state.clone(),
            });
        }
        self.halvings += 1;
        let half: Vec<f64> = dw
            .iter()
            .map(|&w| {
                let z: f64 = if self.noise { StandardNormal.sample(&mut self.bridge) } else { 0.0 };
                0.5 * w + (0.25 * h).sqrt() * z
            })
            .collect();
        let rest: Vec<f64> = dw.iter().zip(&half).map(|(w, a)| w - a).collect();
        self.advance(state, t, 0.5 * h, &half, depth + 1)?;
        self.advance(state, t + 0.5 * h, 0.5 * h, &rest, depth + 1)
    }
}

fn validate_run(spec: &DriftSpec, initial: &ParticleConfiguration, t_end: f64, dt: f64) -> Result<usize> {
    spec.validate()?;
    spec.check_len(initial.n())?;
    check_finite(t_end)?;
    check_finite(dt)?;
    if !(t_end > 0.0) || !(dt > 0.0) || dt > t_end {
        return Err(Error::domain("time grid", format!("need 0 < dt <= T, got dt = {dt}, T = {t_end}")));
    }
    Ok(((t_end / dt).round() as usize).max(1))
}

/// Integrates one path on `[0, t_end]` with `round(t_end/dt)` equal steps.
pub fn integrate(
    spec: &DriftSpec,
    initial: &ParticleConfiguration,
    t_end: f64,
    dt: f64,
    seed: u64,
    opts: &IntegrateOptions,
) -> Result<Path> {
    let steps = validate_run(spec, initial, t_end, dt)?;
    let h = t_end / steps as f64;
    let n = initial.n();
    let reservoir = opts.reservoir.as_ref().map_or(&[][..], |r| &r.points[..]);
    let walls = opts
        .reservoir
        .as_ref()
        .map_or((f64::NEG_INFINITY, f64::INFINITY), |r| {
            r.bounds(initial.positions()[0], initial.positions()[n - 1])
        });
    let gamma = match opts.taming {
        Taming::Off => None,
        Taming::Default => Some(2.0 / h.sqrt()),
        Taming::Gamma(g) => {
            if !(g > 0.0) {
                return Err(Error::domain("taming", format!("gamma = {g} must be positive")));
            }
            Some(g)
        }
    };
    let mut rng = rng_from_seed(seed);
    let mut stepper = Stepper {
        spec,
        gamma,
        noise: opts.noise,
        max_halvings: opts.max_halvings,
        reservoir,
        walls,
        bridge: rng_from_seed(derive_seed(seed, u64::MAX)),
        drift: vec![0.0; n],
        proposal: vec![0.0; n],
        halvings: 0,
    };

    let mut state = initial.positions().to_vec();
    let mut b = vec![0.0; n];
    let mut dw = vec![0.0; n];
    let mut path = Path {
        seed,
        times: vec![0.0],
        states: vec![state.clone()],
        brownian: vec![b.clone()],
        halvings: 0,
    };
    if opts.noise_substeps == 0 {
        return Err(Error::domain("noise_substeps", "must be at least 1"));
    }
    let sd = (h / opts.noise_substeps as f64).sqrt();
    for step in 1..=steps {
        dw.iter_mut().for_each(|w| *w = 0.0);
        for _ in 0..opts.noise_substeps {
            for w in dw.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                if opts.noise {
                    *w += sd * z;
                }
            }
        }
        let t = (step - 1) as f64 * h;
        stepper.advance(&mut state, t, h, &dw, 0)?;
        for (bi, wi) in b.iter_mut().zip(&dw) {
            *bi += wi;
        }
        let record = step == steps || (opts.record_stride > 0 && step % opts.record_stride == 0);
        if record {
            path.times.push(if step == steps { t_end } else { step as f64 * h });
            path.states.push(state.clone());
            path.brownian.push(b.clone());
        }
    }
    path.halvings = stepper.halvings;
    Ok(path)
}

/// `Y_t = X_t + theta t` at every recorded time.
pub fn shift_transform(path: &Path, theta: f64) -> Path {
    let mut out = path.clone();
    for (t, s) in out.times.iter().zip(out.states.iter_mut()) {
        for x in s.iter_mut() {
            *x += theta * t;
        }
    }
    out
}

/// Largest `|(dY - dB)/dt - expected(Y_t, t)|` over consecutive recorded
/// times, where `expected(y, t) = sum 1/(y_i - y_j) - y_i/N + theta t / N`
/// is the drift of a shifted finite-theta path.
pub fn shifted_drift_residual(shifted: &Path, theta: f64) -> Result<f64> {
    let n = shifted.states[0].len();
    let spec = DriftSpec::FinitePlain { n };
    let mut b = vec![0.0; n];
    let mut worst = 0.0f64;
    for k in 0..shifted.times.len() - 1 {
        let (t0, t1) = (shifted.times[k], shifted.times[k + 1]);
        let dt = t1 - t0;
        drift_all(&spec, &shifted.states[k], &[], &mut b);
        for i in 0..n {
            let dy = shifted.states[k + 1][i] - shifted.states[k][i];
            let db = shifted.brownian[k + 1][i] - shifted.brownian[k][i];
            let expected = b[i] + theta * t0 / n as f64;
            worst = worst.max(((dy - db) / dt - expected).abs());
        }
    }
    Ok(worst)
}

/// `log dQ/dP = (theta/N) sum_i B_T^i - theta^2 T / (2N)`.
pub fn girsanov_log_density(theta: f64, n: usize, brownian_terminals: &[f64], t: f64) -> f64 {
    let nf = n as f64;
    theta / nf * brownian_terminals.iter().sum::<f64>() - theta * theta * t / (2.0 * nf)
}

/// A Monte-Carlo collection of paths of one SDE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEnsemble {
    pub spec: DriftSpec,
    pub t_end: f64,
    pub dt: f64,
    pub seeds: Vec<u64>,
    pub paths: Vec<Path>,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn total_halvings(&self) -> u64 {
        self.paths.iter().map(|p| p.halvings).sum()
    }
}

/// Bulk-scaled GUE configuration around macro-position `theta`.
pub fn bulk_gue_start(n: usize, theta: f64, seed: u64) -> Result<ParticleConfiguration> {
    bulk_scale(&sample_gue_eigenvalues(n, seed)?, theta)
}

/// Runs one path per initial configuration; `seeds[k]` drives path `k`.
pub fn run_ensemble(
    spec: &DriftSpec,
    initials: &[ParticleConfiguration],
    t_end: f64,
    dt: f64,
    seeds: &[u64],
    opts: &IntegrateOptions,
) -> Result<PathEnsemble> {
    if initials.len() != seeds.len() {
        return Err(Error::domain("ensemble", "one seed per initial configuration is required"));
    }
    let paths = initials
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(init, &s)| integrate(spec, init, t_end, dt, s, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble {
        spec: *spec,
        t_end,
        dt,
        seeds: seeds.to_vec(),
        paths,
    })
}

/// Initial configurations and noise seeds for `paths` runs started from the
/// bulk-scaled GUE. Path `k` uses `derive_seed(seed, 2k)` for its initial
/// state and `derive_seed(seed, 2k + 1)` for its noise, so ensembles of
/// different drifts built from one seed are driven identically.
pub fn gue_ensemble_inputs(n: usize, theta: f64, paths: usize, seed: u64) -> Result<(Vec<ParticleConfiguration>, Vec<u64>)> {
    let initials = (0..paths as u64)
        .into_par_iter()
        .map(|k| bulk_gue_start(n, theta, derive_seed(seed, 2 * k)))
        .collect::<Result<Vec<_>>>()?;
    let seeds = (0..paths as u64).map(|k| derive_seed(seed, 2 * k + 1)).collect();
    Ok((initials, seeds))
}

/// Ensemble started from the bulk-scaled GUE at `theta`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_from_gue(
    spec: &DriftSpec,
    n: usize,
    theta: f64,
    paths: usize,
    t_end: f64,
    dt: f64,
    seed: u64,
    opts: &IntegrateOptions,
) -> Result<PathEnsemble> {
    let (initials, seeds) = gue_ensemble_inputs(n, theta, paths, seed)?;
    run_ensemble(spec, &initials, t_end, dt, &seeds, opts)
}

/// Indices of the `m` particles closest to the origin at time zero, in
/// center-outward order (ties to the negative side).
pub fn tagged_indices(path: &Path, m: usize) -> Vec<usize> {
    let s = &path.states[0];
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[a].abs().total_cmp(&s[b].abs()).then(s[a].total_cmp(&s[b])));
    idx.truncate(m);
    idx
}

/// Mean and standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Drift-rate estimate `E[(X_t - X_0)/t]` averaged over the `m` tagged
/// particles of each path, with its standard error across paths.
pub fn drift_rate_estimate(ensemble: &PathEnsemble, m: usize, t: f64) -> Result<(f64, f64)> {
    let rates = per_path_rates(ensemble, m, t)?;
    Ok(mean_and_se(&rates))
}

fn per_path_rates(ensemble: &PathEnsemble, m: usize, t: f64) -> Result<Vec<f64>> {
    check_tag_count(ensemble, m)?;
    ensemble
        .paths
        .iter()
        .map(|p| {
            let k = p.time_index(t).ok_or_else(|| Error::domain("time", format!("t = {t} was not recorded")))?;
            let tags = tagged_indices(p, m);
            let dt = p.times[k] - p.times[0];
            Ok(tags.iter().map(|&i| (p.states[k][i] - p.states[0][i]) / dt).sum::<f64>() / m as f64)
        })
        .collect()
}

fn check_tag_count(ensemble: &PathEnsemble, m: usize) -> Result<()> {
    let n = ensemble.paths.first().map_or(0, |p| p.states[0].len());
    if m == 0 || m > n {
        return Err(Error::domain("tagged particles", format!("m = {m} with {n} particles")));
    }
    Ok(())
}

pub const TAGGED_COLUMNS: [&str; 10] = [
    "time",
    "label",
    "mean",
    "variance",
    "displacement",
    "displacement_se",
    "drift_rate",
    "drift_rate_se",
    "ks",
    "ks_p",
];

/// Per-time statistics of the `m` tagged particles. Label `k >= 1` is the
/// `k`-th particle from the center; label `0` pools all tagged particles
/// (per-path average). With `other`, the KS columns compare positions of
/// the same label and time across the two ensembles; otherwise they are 0.
pub fn tagged_statistics(ensemble: &PathEnsemble, m: usize, times: &[f64], other: Option<&PathEnsemble>) -> Result<ExperimentReport> {
    check_tag_count(ensemble, m)?;
    if let Some(o) = other {
        check_tag_count(o, m)?;
    }
    let mut report = ExperimentReport::new("tagged", &TAGGED_COLUMNS);
    report.set_meta("paths", ensemble.len());
    report.set_meta("tagged", m);
    let collect = |e: &PathEnsemble, t: f64, label: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut pos = Vec::with_capacity(e.len());
        let mut disp = Vec::with_capacity(e.len());
        for p in &e.paths {
            let k = p.time_index(t).ok_or_else(|| Error::domain("time", format!("t = {t} was not recorded")))?;
            let tags = tagged_indices(p, m);
            let chosen: Vec<usize> = if label == 0 { tags } else { vec![tags[label - 1]] };
            let c = chosen.len() as f64;
            pos.push(chosen.iter().map(|&i| p.states[k][i]).sum::<f64>() / c);
            disp.push(chosen.iter().map(|&i| p.states[k][i] - p.states[0][i]).sum::<f64>() / c);
        }
        Ok((pos, disp))
    };
    for &t in times {
        for label in 0..=m {
            let (pos, disp) = collect(ensemble, t, label)?;
            let (mean, _) = mean_and_se(&pos);
            let (dm, dse) = mean_and_se(&disp);
            let (rate, rate_se) = if t > 0.0 { (dm / t, dse / t) } else { (0.0, 0.0) };
            let ks = match other {
                Some(o) => ks_two_sample(&pos, &collect(o, t, label)?.0),
                None => ks_two_sample(&pos, &pos),
            };
            report.push_row(vec![
                Cell::from(t),
                Cell::from(label),
                mean.into(),
                sample_variance(&pos).into(),
                dm.into(),
                dse.into(),
                rate.into(),
                rate_se.into(),
                ks.statistic.into(),
                ks.p_value.into(),
            ])?;
        }
    }
    Ok(report)
}

/// `E[dQ/dP]`, its standard error and the sample variance of `dQ/dP` over
/// an ensemble's Brownian terminals.
pub fn girsanov_moments(ensemble: &PathEnsemble, theta: f64) -> (f64, f64, f64) {
    let w: Vec<f64> = ensemble
        .paths
        .iter()
        .map(|p| {
            let n = p.states[0].len();
            girsanov_log_density(theta, n, p.terminal_brownian(), *p.times.last().expect("recorded")).exp()
        })
        .collect();
    let (m, se) = mean_and_se(&w);
    (m, se, sample_variance(&w))
}

/// Wraps positions into a configuration; useful for feeding an ensemble's
/// final states back in as initial conditions.
pub fn configuration_from_state(state: &[f64]) -> Result<ParticleConfiguration> {
    ParticleConfiguration::new(state.to_vec(), Scaling::Raw)
}
