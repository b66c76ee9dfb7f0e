use dysonlab::hermite::{eval_psi, eval_psi_batch, OscillatorEvaluator};
use dysonlab::quadrature::gauss_hermite;
use num::bigint::BigInt;
use num::{BigRational, One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

/// `psi_n(x)` from the exact rational Hermite polynomial `H_n(x)`; only the
/// Gaussian and the normalization are taken in floating point, on log scale.
fn psi_oracle(n: usize, x: f64) -> f64 {
    let xr = BigRational::from_float(x).unwrap();
    let two = BigRational::from_integer(BigInt::from(2));
    let (mut h0, mut h1) = (BigRational::one(), &two * &xr);
    if n == 0 {
        h1 = h0.clone();
    } else {
        for k in 1..n {
            let next = &two * &xr * &h1 - &two * BigRational::from_integer(BigInt::from(k)) * &h0;
            h0 = h1;
            h1 = next;
        }
    }
    if h1.is_zero() {
        return 0.0;
    }
    let sign = if h1.is_negative() { -1.0 } else { 1.0 };
    let ln_h = ln_big(&h1.abs());
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    let ln_norm = 0.25 * std::f64::consts::PI.ln() + 0.5 * (n as f64 * 2f64.ln() + ln_fact);
    sign * (ln_h - ln_norm - 0.5 * x * x).exp()
}

fn ln_big(v: &BigRational) -> f64 {
    // ln(p/q) with p, q rescaled to avoid overflow
    let ln_int = |b: &BigInt| {
        let bits = b.bits() as i64;
        let shift = (bits - 60).max(0);
        let top = (b >> shift as usize).to_f64().unwrap();
        top.ln() + shift as f64 * 2f64.ln()
    };
    ln_int(v.numer()) - ln_int(v.denom())
}

#[test]
fn rational_oracle_at_index_thirty() {
    let batch = eval_psi_batch(30, 1.7).unwrap();
    for (k, v) in batch.iter().enumerate() {
        let want = psi_oracle(k, 1.7);
        assert!((v - want).abs() <= 1e-12 * want.abs().max(1e-300), "k={k}: {v} vs {want}");
    }
    // frozen reference value
    assert!((batch[30] - (-0.23745066001574425)).abs() < 1e-13);
}

#[test]
fn rational_oracle_across_arguments() {
    for &x in &[0.0, 0.3, -1.1, 2.5, 4.75, -6.0] {
        for n in [0, 1, 5, 17, 40, 64] {
            let got = eval_psi(n, x).unwrap();
            let want = psi_oracle(n, x);
            let scale = (0..=n).map(|k| psi_oracle(k, x).abs()).fold(0.0, f64::max);
            assert!((got - want).abs() <= 1e-12 * scale, "n={n} x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn orthonormality_by_gauss_hermite() {
    let gh = gauss_hermite(200).unwrap();
    let ev = OscillatorEvaluator::new(30);
    let rows: Vec<Vec<f64>> = gh.nodes.iter().map(|&x| ev.batch(x).unwrap()).collect();
    for i in 0..=30 {
        for j in 0..=30 {
            let s: f64 = rows.iter().zip(&gh.function_weights).map(|(r, w)| w * r[i] * r[j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((s - want).abs() < 1e-8, "({i},{j}) -> {s}");
        }
    }
}

#[test]
fn uniform_bound_exponent() {
    let mut stats = Vec::new();
    for n in [16usize, 64, 256, 1024] {
        let ev = OscillatorEvaluator::new(n);
        let edge = (2.0 * n as f64).sqrt() + 3.0;
        let m = 20_000;
        let sup = (0..=m)
            .map(|k| ev.psi(n, -edge + 2.0 * edge * k as f64 / m as f64).unwrap().abs())
            .fold(0.0, f64::max);
        stats.push((n as f64).powf(1.0 / 12.0) * sup);
    }
    for s in &stats {
        assert!(*s <= 1.2, "{stats:?}");
    }
    for w in stats.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{stats:?}");
    }
}

proptest! {
    #[test]
    fn parity(n in 0usize..=200, x in -30.0f64..30.0) {
        let a = eval_psi(n, x).unwrap();
        let b = eval_psi(n, -x).unwrap();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((a - sign * b).abs() <= 1e-12 * a.abs() + 1e-300);
    }

    #[test]
    fn batch_matches_single(n in 0usize..=120, x in -20.0f64..20.0) {
        let batch = eval_psi_batch(n, x).unwrap();
        prop_assert_eq!(batch.len(), n + 1);
        for (k, v) in batch.iter().enumerate() {
            let single = eval_psi(k, x).unwrap();
            prop_assert!((v - single).abs() <= 1e-13 * single.abs() + 1e-300);
        }
    }
}
