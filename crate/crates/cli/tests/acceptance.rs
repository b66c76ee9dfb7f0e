//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Pass criterion numbers to run a subset:
//! `cargo test -p dysonlab-cli --test acceptance -- 3 7`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use dysonlab::estimates::{condition_table, kernel_bound_statistics, pv_semicircle, TableSpec, DEFAULT_ALPHA};
use dysonlab::hermite::OscillatorEvaluator;
use dysonlab::kernels::{kernel_cd, kernel_sum, FiniteKernel};
use dysonlab::quadrature::gauss_hermite;
use dysonlab::sampling::{ks_semicircle, rng_from_seed, sample_gue_ensemble};
use dysonlab::sde::{drift_rate_estimate, girsanov_moments, simulate_from_gue, DriftSpec, IntegrateOptions};
use dysonlab_cli::commands::{prepare_kernel_table, run_kernel_table, simulate_pair, SimulateParams};
use dysonlab_cli::config::Config;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn c1_christoffel_darboux() -> Verdict {
    let mut rng = rng_from_seed(101);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(1..=60usize);
        let x: f64 = rng.random_range(-9.0..9.0);
        let y: f64 = rng.random_range(-9.0..9.0);
        if x == y {
            continue;
        }
        let s = kernel_sum(n, x, y).expect("finite input");
        let c = kernel_cd(n, x, y).expect("finite input");
        worst = worst.max((s - c).abs() / s.abs().max(1.0));
        done += 1;
    }
    verdict(worst <= 1e-10, format!("worst relative gap {worst:.3e} over 1000 triples"))
}

fn c2_orthonormality_projection() -> Verdict {
    let gh = gauss_hermite(64).expect("rule");
    let ev = OscillatorEvaluator::new(30);
    let psi: Vec<Vec<f64>> = gh.nodes.iter().map(|&t| ev.batch(t).expect("finite")).collect();
    let mut ortho = 0.0f64;
    for i in 0..=30 {
        for j in 0..=30 {
            let g: f64 = psi.iter().zip(&gh.function_weights).map(|(p, w)| w * p[i] * p[j]).sum();
            ortho = ortho.max((g - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let mut rng = rng_from_seed(202);
    let (mut proj, mut trace) = (0.0f64, 0.0f64);
    for n in [1usize, 2, 5, 10, 20, 30] {
        let k = FiniteKernel::new(n).expect("n >= 1");
        let tr: f64 = gh.nodes.iter().zip(&gh.function_weights).map(|(&t, w)| w * k.sum(t, t)).sum();
        trace = trace.max((tr - n as f64).abs());
        for _ in 0..100 {
            let x: f64 = rng.random_range(-6.0..6.0);
            let y: f64 = rng.random_range(-6.0..6.0);
            let p: f64 = gh
                .nodes
                .iter()
                .zip(&gh.function_weights)
                .map(|(&t, w)| w * k.sum(x, t) * k.sum(t, y))
                .sum();
            proj = proj.max((p - k.sum(x, y)).abs());
        }
    }
    verdict(
        ortho <= 1e-8 && proj <= 1e-6 && trace <= 1e-6,
        format!("gram {ortho:.2e}, projection {proj:.2e}, trace {trace:.2e}"),
    )
}

fn c3_principal_value() -> Verdict {
    let mut worst = 0.0f64;
    for theta in [-1.2, -0.7, 0.0, 0.3, 0.7, 1.2] {
        let v = pv_semicircle(theta).expect("theta in range");
        worst = worst.max((v - theta).abs());
    }
    verdict(worst <= 1e-6, format!("max |pv - theta| = {worst:.3e}"))
}

fn c4_sine_kernel_convergence() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for theta in [0.0, 0.5, 1.0] {
        let mut cfg = Config::default();
        for s in [format!("theta={theta}"), "n_list=[64, 256, 1024]".into(), "step=0.1".into()] {
            cfg.apply_set(&s).expect("key=value");
        }
        let p = prepare_kernel_table(&cfg).expect("valid config");
        let out = run_kernel_table(&p).expect("kernel table");
        let sups = out.tables[1].column("sup_difference").expect("column");
        let dec = sups.windows(2).all(|w| w[1] < w[0]);
        ok &= dec && sups[2] <= 0.05;
        parts.push(format!("theta {theta}: {:.4} {:.4} {:.4}", sups[0], sups[1], sups[2]));
    }
    verdict(ok, parts.join("; "))
}

fn c5_condition_tables() -> Verdict {
    let spec = TableSpec::new(0.5, vec![64, 256, 1024], vec![2.0, 8.0, 32.0], 1.0);
    let table = condition_table(&spec).expect("condition table");
    let mut ok = true;
    let mut parts = Vec::new();
    for (col, bound) in [("drift", 0.1), ("palm_drift", 0.1), ("variance", 0.2), ("palm_variance", 0.2)] {
        let v = table.column(col).expect("column");
        let corner = *v.last().expect("rows");
        let (argmin, min) = v
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
        let at_corner = corner <= min;
        ok &= at_corner && corner <= bound;
        let (n, r) = (spec.n_list[argmin / 3], spec.r_list[argmin % 3]);
        parts.push(format!(
            "{col}: corner {corner:.3e} (bound {bound}), minimum {min:.3e} at N={n} r={r}{}",
            if at_corner { "" } else { " [not at corner]" }
        ));
    }
    verdict(ok, parts.join("; "))
}

fn c6_kernel_bounds() -> Verdict {
    let stats: Vec<_> = [64usize, 256, 1024]
        .iter()
        .map(|&n| kernel_bound_statistics(n, DEFAULT_ALPHA, 2001, 2.6).expect("grid"))
        .collect();
    let bounded = |f: &dyn Fn(usize) -> f64| {
        let first = f(0);
        (1..stats.len()).all(|k| f(k) <= 1.2 * first)
    };
    let checks = [
        ("sup|L|/N^(1/3)", bounded(&|k| stats[k].sup_scaled)),
        ("sup_U |L|", bounded(&|k| stats[k].sup_on_u)),
        ("sup_U N|x-y||L|", bounded(&|k| stats[k].sup_decay)),
    ];
    let detail = format!(
        "{}: {:.4} {:.4} {:.4}; {}: {:.4} {:.4} {:.4}; {}: {:.4} {:.4} {:.4} (argmax at N=1024: {:.4?})",
        checks[0].0,
        stats[0].sup_scaled,
        stats[1].sup_scaled,
        stats[2].sup_scaled,
        checks[1].0,
        stats[0].sup_on_u,
        stats[1].sup_on_u,
        stats[2].sup_on_u,
        checks[2].0,
        stats[0].sup_decay,
        stats[1].sup_decay,
        stats[2].sup_decay,
        stats[2].decay_argmax,
    );
    verdict(checks.iter().all(|c| c.1), detail)
}

fn c7_semicircle() -> Verdict {
    let ks50 = ks_semicircle(&sample_gue_ensemble(50, 701, 200).expect("sample")).expect("ks");
    let ks200 = ks_semicircle(&sample_gue_ensemble(200, 702, 200).expect("sample")).expect("ks");
    verdict(ks200 <= 0.03 && ks200 < ks50, format!("KS N=50 {ks50:.5}, N=200 {ks200:.5}"))
}

fn c8_sampler_calibration() -> Verdict {
    let one: Vec<f64> = sample_gue_ensemble(1, 801, 100_000)
        .expect("sample")
        .iter()
        .map(|c| c.positions()[0])
        .collect();
    let m = one.iter().sum::<f64>() / one.len() as f64;
    let var = one.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (one.len() - 1) as f64;

    // (x1 - x2)^2 under the density ~ (x1 - x2)^2 exp(-x1^2 - x2^2), by
    // rejection from independent standard normals
    let mut rng = rng_from_seed(802);
    let bound = 4.0 / std::f64::consts::E;
    let mut oracle = Vec::with_capacity(100_000);
    while oracle.len() < 100_000 {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let d2 = (a - b) * (a - b);
        if rng.random::<f64>() * bound < d2 * (-(a * a + b * b) / 2.0).exp() {
            oracle.push(d2);
        }
    }
    let two: Vec<f64> = sample_gue_ensemble(2, 803, 100_000)
        .expect("sample")
        .iter()
        .map(|c| (c.positions()[1] - c.positions()[0]).powi(2))
        .collect();
    let (om, ose) = mean_se(&oracle);
    let (sm, sse) = mean_se(&two);
    let se = (ose * ose + sse * sse).sqrt();
    verdict(
        (var - 0.5).abs() <= 0.01 && (sm - om).abs() <= 3.0 * se,
        format!("N=1 variance {var:.5}; N=2 E[d^2] {sm:.4} vs oracle {om:.4} (SE {se:.4})"),
    )
}

fn c9_girsanov() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for theta in [0.5, 1.0] {
        let mut vars = Vec::new();
        for n in [8usize, 32] {
            let e = simulate_from_gue(
                &DriftSpec::FinitePlain { n },
                n,
                theta,
                10_000,
                1.0,
                0.01,
                900 + n as u64,
                &IntegrateOptions::default(),
            )
            .expect("ensemble");
            let (m, se, var) = girsanov_moments(&e, theta);
            ok &= (m - 1.0).abs() <= 3.0 * se;
            parts.push(format!("theta {theta} N {n}: mean {m:.5} +- {se:.5}, var {var:.5}"));
            vars.push(var);
        }
        ok &= vars[1] < vars[0];
    }
    verdict(ok, parts.join("; "))
}

fn c10_sde_gap() -> Verdict {
    let p = SimulateParams {
        theta: 0.5,
        n: 128,
        paths: 500,
        t_end: 1.0,
        dt: 1e-3,
        tagged: 4,
        snapshots: 4,
        max_halvings: 12,
        seed: 1000,
    };
    let (with_theta, plain) = simulate_pair(&p).expect("ensembles");
    let (a, sa) = drift_rate_estimate(&with_theta, p.tagged, p.t_end).expect("estimate");
    let (b, sb) = drift_rate_estimate(&plain, p.tagged, p.t_end).expect("estimate");
    verdict(
        a.abs() <= 3.0 * sa && (b - 0.5).abs() <= 3.0 * sb,
        format!("finite_theta {a:.5} +- {sa:.5}; finite_plain {b:.5} +- {sb:.5}"),
    )
}

type Snapshot = BTreeMap<String, Vec<u8>>;

fn cli_run(dir: &Path, args: &[&str], threads: usize, format: &str) -> Snapshot {
    let status = Command::new(env!("CARGO_BIN_EXE_dysonlab"))
        .args(args)
        .args(["--threads", &threads.to_string(), "--format", format, "--out"])
        .arg(dir)
        .env_remove("DYSONLAB_THREADS")
        .output()
        .expect("binary runs");
    let code = status.status.code();
    assert!(matches!(code, Some(0) | Some(1)), "{args:?} exited with {code:?}");
    let mut out = Snapshot::new();
    for entry in std::fs::read_dir(dir).expect("output dir") {
        let p = entry.expect("entry").path();
        out.insert(
            p.file_name().expect("name").to_string_lossy().into_owned(),
            std::fs::read(&p).expect("readable"),
        );
    }
    out
}

fn c11_determinism() -> Verdict {
    let commands: [&[&str]; 5] = [
        &["kernel-table", "--set", "n_list=[16, 64]", "--set", "step=0.5"],
        &["conditions", "--set", "n_list=[16, 32]", "--set", "r_list=[2.0, 4.0]", "--set", "x_points=3"],
        &["simulate", "--set", "n=8", "--set", "paths=24", "--set", "t_end=0.2", "--set", "dt=0.01", "--seed", "5"],
        &["sample", "--set", "n=30", "--set", "draws=40", "--seed", "5"],
        &["pv-check"],
    ];
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, args) in commands.iter().enumerate() {
        for format in ["csv", "json", "svg"] {
            let dir = |tag: &str| tmp.path().join(format!("{k}-{format}-{tag}"));
            let a = cli_run(&dir("a"), args, 1, format);
            let b = cli_run(&dir("b"), args, 1, format);
            let c = cli_run(&dir("c"), args, 8, format);
            let same = !a.is_empty() && a == b && a == c;
            ok &= same;
            if !same {
                parts.push(format!("{} {format} differs", args[0]));
            }
        }
    }
    if ok {
        parts.push("5 subcommands x 3 formats byte-identical across reruns and 1/8 threads".into());
    }
    verdict(ok, parts.join("; "))
}

type Criterion = (usize, &'static str, Duration, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "Christoffel-Darboux identity", Duration::from_secs(1), c1_christoffel_darboux),
        (2, "orthonormality and projection", Duration::from_secs(10), c2_orthonormality_projection),
        (3, "principal-value semicircle identity", Duration::from_secs(1), c3_principal_value),
        (4, "sine-kernel convergence", Duration::from_secs(120), c4_sine_kernel_convergence),
        (5, "condition tables", Duration::from_secs(600), c5_condition_tables),
        (6, "kernel-bound sweeps", Duration::from_secs(120), c6_kernel_bounds),
        (7, "semicircle law", Duration::from_secs(60), c7_semicircle),
        (8, "sampler calibration", Duration::from_secs(60), c8_sampler_calibration),
        (9, "Girsanov density", Duration::from_secs(120), c9_girsanov),
        (10, "SDE gap desk check", Duration::from_secs(600), c10_sde_gap),
        (11, "determinism", Duration::MAX, c11_determinism),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for (k, name, ..) in &criteria {
            println!("criterion {k} ({name}): test");
        }
        return;
    }
    let selected: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (k, name, budget, f) in criteria {
        if !selected.is_empty() && !selected.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let v = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = v.passed && in_time;
        let budget_note = if budget == Duration::MAX {
            String::new()
        } else {
            format!(", budget {}s{}", budget.as_secs(), if in_time { "" } else { " EXCEEDED" })
        };
        println!(
            "{} criterion {k} ({name}): {} [{:.2}s{budget_note}]",
            if passed { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
        if !passed {
            failed.push(k);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
