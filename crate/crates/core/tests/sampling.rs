use dysonlab::kernels::{Kernel, ScaledKernel};
use dysonlab::sampling::{
    bulk_scale, bulk_unscale, central_spacings, derive_seed, empirical_one_point, ks_semicircle, ks_two_sample,
    label_center_outward, pair_correlation_ratio, rng_from_seed, sample_gue_ensemble, sample_gue_eigenvalues,
    sample_gue_with, DrawOrder, ParticleConfiguration, Scaling,
};
use rand::Rng;
use rand_distr::StandardNormal;

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `(x1 - x2)^2` under the two-particle density `~ (x1 - x2)^2 exp(-x1^2 - x2^2)`,
/// drawn by rejection from independent standard normals.
fn rejection_spacing_moments(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let bound = 4.0 / std::f64::consts::E;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let d2 = (a - b) * (a - b);
        let w = d2 * (-(a * a + b * b) / 2.0).exp();
        if rng.random::<f64>() * bound < w {
            out.push(d2);
        }
    }
    out
}

#[test]
fn one_particle_variance() {
    let s = sample_gue_ensemble(1, 17, 100_000).unwrap();
    let v: Vec<f64> = s.iter().map(|c| c.positions()[0]).collect();
    let (m, _) = mean_se(&v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    assert!((var - 0.5).abs() < 0.01, "{var}");
}

#[test]
fn two_particle_spacing_matches_rejection_oracle() {
    let oracle = rejection_spacing_moments(200_000, 5);
    let (om, ose) = mean_se(&oracle);
    // the exact value is E[d^4]/E[d^2] = 3 for d ~ N(0, 1)
    assert!((om - 3.0).abs() < 4.0 * ose);
    let s = sample_gue_ensemble(2, 23, 100_000).unwrap();
    let d: Vec<f64> = s.iter().map(|c| (c.positions()[1] - c.positions()[0]).powi(2)).collect();
    let (m, se) = mean_se(&d);
    assert!((m - om).abs() <= 3.0 * (se * se + ose * ose).sqrt(), "{m} vs {om}");
}

#[test]
fn semicircle_law_improves_with_n() {
    let ks50 = ks_semicircle(&sample_gue_ensemble(50, 1, 200).unwrap()).unwrap();
    let ks200 = ks_semicircle(&sample_gue_ensemble(200, 2, 200).unwrap()).unwrap();
    assert!(ks200 <= 0.03, "{ks200}");
    assert!(ks200 < ks50, "{ks50} -> {ks200}");
}

#[test]
fn bulk_scaling_examples() {
    // three particles: the window center theta sqrt(N) maps to the origin
    let c = ParticleConfiguration::new(vec![-1.0, 0.5 * 3f64.sqrt(), 3.0], Scaling::Raw).unwrap();
    let b = bulk_scale(&c, 0.5).unwrap();
    assert!(b.positions()[1].abs() < 1e-12);
    let back = bulk_unscale(&b).unwrap();
    for (x, y) in back.positions().iter().zip(c.positions()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn mean_bulk_spacing() {
    let samples = sample_gue_ensemble(400, 31, 500).unwrap();
    let mut all = Vec::new();
    for c in &samples {
        all.extend(central_spacings(&bulk_scale(c, 0.0).unwrap(), 30));
    }
    let (m, _) = mean_se(&all);
    let want = std::f64::consts::PI / 2f64.sqrt();
    assert!((m - want).abs() <= 0.1 * want, "{m}");
}

#[test]
fn empirical_density_tracks_kernel_diagonal() {
    let (n, theta) = (256usize, 0.5);
    let samples: Vec<_> = sample_gue_ensemble(n, 41, 500)
        .unwrap()
        .iter()
        .map(|c| bulk_scale(c, theta).unwrap())
        .collect();
    let d = empirical_one_point(&samples, (-5.0, 5.0), 20).unwrap();
    let k = ScaledKernel::new(n, theta).unwrap();
    let bin_mean = |c: f64| {
        let m = 64;
        (0..m)
            .map(|i| k.diag(c - 0.5 * d.bin_width + d.bin_width * (i as f64 + 0.5) / m as f64))
            .sum::<f64>()
            / m as f64
    };
    let pooled = (d.std_errors.iter().map(|s| s * s).sum::<f64>() / d.std_errors.len() as f64).sqrt();
    let sup = d
        .grid
        .iter()
        .zip(&d.values)
        .map(|(&c, &v)| (v - bin_mean(c)).abs())
        .fold(0.0, f64::max);
    assert!(sup <= 3.0 * pooled, "{sup} vs {pooled}");
    // mass in the window against the kernel integral
    let want: f64 = d.grid.iter().map(|&c| bin_mean(c) * d.bin_width).sum();
    let mass_se = d.std_errors.iter().map(|s| (s * d.bin_width).powi(2)).sum::<f64>().sqrt();
    assert!((d.mass() - want).abs() < 3.0 * mass_se, "{} vs {want}", d.mass());
    // a window outside the support sees nothing
    let empty = empirical_one_point(&samples, (1e4, 1e4 + 1.0), 4).unwrap();
    assert!(empty.values.iter().all(|&v| v == 0.0));
}

#[test]
fn two_point_repulsion() {
    let samples: Vec<_> = sample_gue_ensemble(200, 43, 2000)
        .unwrap()
        .iter()
        .map(|c| bulk_scale(c, 0.0).unwrap())
        .collect();
    for &(y, z) in &[(0.0, 0.3), (-0.2, 0.2), (1.0, 1.45)] {
        let p = pair_correlation_ratio(&samples, y, z, 0.2).unwrap();
        assert!(p.ratio < 1.0, "{y},{z}: {p:?}");
    }
}

#[test]
fn draw_order_does_not_change_the_law() {
    let stat = |order: DrawOrder, base: u64| -> Vec<f64> {
        (0..400u64)
            .flat_map(|k| {
                let c = sample_gue_with(64, &mut rng_from_seed(derive_seed(base, k)), order).unwrap();
                central_spacings(&bulk_scale(&c, 0.0).unwrap(), 6)
            })
            .collect()
    };
    let ks = ks_two_sample(&stat(DrawOrder::Forward, 1), &stat(DrawOrder::Reversed, 2));
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn seeds_are_reproducible() {
    assert_eq!(sample_gue_eigenvalues(50, 9).unwrap(), sample_gue_eigenvalues(50, 9).unwrap());
    assert_ne!(sample_gue_eigenvalues(50, 9).unwrap(), sample_gue_eigenvalues(50, 10).unwrap());
}

#[test]
fn center_outward_labels() {
    let c = |v: Vec<f64>| ParticleConfiguration::new(v, Scaling::Raw).unwrap();
    assert_eq!(label_center_outward(&c(vec![-3.0, -1.0, 2.0])), vec![-1.0, 2.0, -3.0]);
    assert_eq!(label_center_outward(&c(vec![-0.5, 0.5])), vec![-0.5, 0.5]);
    assert_eq!(label_center_outward(&c(vec![4.0])), vec![4.0]);
}
