//! GUE eigenvalue sampling through the tridiagonal beta = 2 model, bulk
//! scaling, and empirical statistics of the sampled configurations.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_finite, Error, Result};
use crate::kernels::check_theta;
use crate::linalg::symmetric_tridiagonal_eigenvalues;

/// Coordinate system of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Scaling {
    /// Eigenvalues of the matrix, density proportional to `exp(-sum x^2)`.
    Raw,
    /// `lambda / sqrt(N)`, supported on `[-sqrt 2, sqrt 2]` in the limit.
    Semicircle,
    /// `sqrt(N) lambda - theta N`.
    Bulk { theta: f64 },
}

/// Strictly increasing particle positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleConfiguration {
    positions: Vec<f64>,
    scaling: Scaling,
}

impl ParticleConfiguration {
    pub fn new(positions: Vec<f64>, scaling: Scaling) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::domain("configuration", "at least one particle is required"));
        }
        for &p in &positions {
            check_finite(p)?;
        }
        if let Some(i) = positions.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Collision {
                i,
                j: i + 1,
                position: positions[i + 1],
            });
        }
        Ok(ParticleConfiguration { positions, scaling })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }
}

/// SplitMix64 finalizer; derives independent stream seeds from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Order in which the tridiagonal entries are drawn. Both give the same law
/// of the spectrum; the alternative exists to test that claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrawOrder {
    #[default]
    Forward,
    Reversed,
}

/// Eigenvalues of an `N x N` GUE matrix with density proportional to
/// `prod |x_i - x_j|^2 exp(-sum x_i^2)`: diagonal `N(0, 1/2)`, off-diagonal
/// `chi_{2k} / 2` for `k = N-1, ..., 1`.
pub fn sample_gue_with<R: Rng + ?Sized>(n: usize, rng: &mut R, order: DrawOrder) -> Result<ParticleConfiguration> {
    if n == 0 {
        return Err(Error::domain("particle number", "N must be at least 1"));
    }
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    let chi = |k: usize, rng: &mut R| 0.5 * ChiSquared::new(2.0 * k as f64).expect("positive dof").sample(rng).sqrt();
    let (diag, off) = match order {
        DrawOrder::Forward => {
            let diag: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
            let off: Vec<f64> = (1..n).rev().map(|k| chi(k, rng)).collect();
            (diag, off)
        }
        DrawOrder::Reversed => {
            // off-diagonals first, smallest degree first, placed into the
            // reflected matrix; the spectrum is unchanged by the reflection
            let off: Vec<f64> = (1..n).map(|k| chi(k, rng)).collect();
            let diag: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
            (diag, off)
        }
    };
    let ev = symmetric_tridiagonal_eigenvalues(&diag, &off)?;
    ParticleConfiguration::new(ev, Scaling::Raw)
}

/// One GUE draw from a seed.
pub fn sample_gue_eigenvalues(n: usize, seed: u64) -> Result<ParticleConfiguration> {
    sample_gue_with(n, &mut rng_from_seed(seed), DrawOrder::Forward)
}

/// `draws` independent samples; draw `i` uses seed `derive_seed(seed, i)`.
/// Results are in draw order regardless of thread count.
pub fn sample_gue_ensemble(n: usize, seed: u64, draws: usize) -> Result<Vec<ParticleConfiguration>> {
    (0..draws as u64)
        .into_par_iter()
        .map(|i| sample_gue_eigenvalues(n, derive_seed(seed, i)))
        .collect()
}

fn expect_raw(config: &ParticleConfiguration) -> Result<()> {
    if config.scaling != Scaling::Raw {
        return Err(Error::domain("scaling", format!("expected raw eigenvalues, got {:?}", config.scaling)));
    }
    Ok(())
}

/// `y = sqrt(N) x - theta N`, centering the window at macro-position `theta`.
pub fn bulk_scale(config: &ParticleConfiguration, theta: f64) -> Result<ParticleConfiguration> {
    expect_raw(config)?;
    check_theta(theta)?;
    let n = config.n() as f64;
    let r = n.sqrt();
    let pos = config.positions.iter().map(|&x| r * x - theta * n).collect();
    ParticleConfiguration::new(pos, Scaling::Bulk { theta })
}

/// Inverse of [`bulk_scale`].
pub fn bulk_unscale(config: &ParticleConfiguration) -> Result<ParticleConfiguration> {
    let Scaling::Bulk { theta } = config.scaling else {
        return Err(Error::domain("scaling", "expected bulk coordinates"));
    };
    let n = config.n() as f64;
    let r = n.sqrt();
    let pos = config.positions.iter().map(|&y| (y + theta * n) / r).collect();
    ParticleConfiguration::new(pos, Scaling::Raw)
}

/// `lambda / sqrt(N)`.
pub fn semicircle_scale(config: &ParticleConfiguration) -> Result<ParticleConfiguration> {
    expect_raw(config)?;
    let r = (config.n() as f64).sqrt();
    ParticleConfiguration::new(config.positions.iter().map(|&x| x / r).collect(), Scaling::Semicircle)
}

/// Distribution function of the density `sqrt(2 - s^2) / pi`.
pub fn semicircle_cdf(s: f64) -> f64 {
    if s <= -SQRT_2 {
        0.0
    } else if s >= SQRT_2 {
        1.0
    } else {
        0.5 + ((s / 2.0) * (2.0 - s * s).sqrt() + (s / SQRT_2).asin()) / PI
    }
}

/// Kolmogorov-Smirnov distance between the pooled empirical distribution
/// of `lambda / sqrt(N)` and the semicircle law.
pub fn ks_semicircle(samples: &[ParticleConfiguration]) -> Result<f64> {
    let mut values = Vec::new();
    for c in samples {
        values.extend(semicircle_scale(c)?.positions);
    }
    Ok(ks_one_sample(values, semicircle_cdf))
}

/// `sup |F_n - F|` for the empirical distribution of `values`.
pub fn ks_one_sample(mut values: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    if a.is_empty() || b.is_empty() {
        return KsResult { statistic: 0.0, p_value: 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    KsResult {
        statistic: d,
        p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Histogram estimate of the one-point function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDensity {
    /// Bin centers.
    pub grid: Vec<f64>,
    pub bin_width: f64,
    /// Mean particle count per unit length.
    pub values: Vec<f64>,
    /// Standard error of each value across samples.
    pub std_errors: Vec<f64>,
    pub sample_count: usize,
}

impl EmpiricalDensity {
    /// Expected number of particles in the window.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.bin_width
    }
}

/// Uniform-bin histogram of particle positions over `[lo, hi)`, averaged
/// over samples.
pub fn empirical_one_point(samples: &[ParticleConfiguration], window: (f64, f64), bins: usize) -> Result<EmpiricalDensity> {
    let (lo, hi) = window;
    check_finite(lo)?;
    check_finite(hi)?;
    if !(hi > lo) || bins == 0 {
        return Err(Error::EmptyWindow { lo, hi });
    }
    let h = (hi - lo) / bins as f64;
    let mut sum = vec![0.0f64; bins];
    let mut sum_sq = vec![0.0f64; bins];
    let mut counts = vec![0.0f64; bins];
    for c in samples {
        counts.iter_mut().for_each(|v| *v = 0.0);
        for &p in c.positions() {
            if p >= lo && p < hi {
                let b = (((p - lo) / h) as usize).min(bins - 1);
                counts[b] += 1.0;
            }
        }
        for b in 0..bins {
            sum[b] += counts[b];
            sum_sq[b] += counts[b] * counts[b];
        }
    }
    let s = samples.len() as f64;
    let mut values = vec![0.0; bins];
    let mut std_errors = vec![0.0; bins];
    if !samples.is_empty() {
        for b in 0..bins {
            let mean = sum[b] / s;
            values[b] = mean / h;
            if samples.len() > 1 {
                let var = ((sum_sq[b] - s * mean * mean) / (s - 1.0)).max(0.0);
                std_errors[b] = (var / s).sqrt() / h;
            }
        }
    }
    Ok(EmpiricalDensity {
        grid: (0..bins).map(|b| lo + (b as f64 + 0.5) * h).collect(),
        bin_width: h,
        values,
        std_errors,
        sample_count: samples.len(),
    })
}

/// Positions ordered by distance from the origin; equal distances put the
/// negative particle first.
pub fn label_center_outward(config: &ParticleConfiguration) -> Vec<f64> {
    let mut v = config.positions.clone();
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    v
}

/// Estimate of `rho2(y, z) / (rho1(y) rho1(z))` from counts in windows of
/// width `h` centered at `y` and `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCorrelation {
    pub ratio: f64,
    pub rho1_y: f64,
    pub rho1_z: f64,
    pub rho2: f64,
}

pub fn pair_correlation_ratio(samples: &[ParticleConfiguration], y: f64, z: f64, h: f64) -> Result<PairCorrelation> {
    if !(h > 0.0) || samples.is_empty() {
        return Err(Error::domain("pair correlation", "need h > 0 and at least one sample"));
    }
    let in_win = |p: f64, c: f64| (p - c).abs() < 0.5 * h;
    let (mut cy, mut cz, mut pairs) = (0.0, 0.0, 0.0);
    for c in samples {
        let ny = c.positions().iter().filter(|&&p| in_win(p, y)).count() as f64;
        let nz = c.positions().iter().filter(|&&p| in_win(p, z)).count() as f64;
        let both = c.positions().iter().filter(|&&p| in_win(p, y) && in_win(p, z)).count() as f64;
        cy += ny;
        cz += nz;
        // ordered pairs of distinct particles, one in each window
        pairs += ny * nz - both;
    }
    let s = samples.len() as f64;
    let rho1_y = cy / (s * h);
    let rho1_z = cz / (s * h);
    let rho2 = pairs / (s * h * h);
    Ok(PairCorrelation {
        ratio: rho2 / (rho1_y * rho1_z),
        rho1_y,
        rho1_z,
        rho2,
    })
}

/// Nearest-neighbour spacings among the `count` particles closest to the
/// origin of a bulk-scaled configuration.
pub fn central_spacings(config: &ParticleConfiguration, count: usize) -> Vec<f64> {
    let mut near: Vec<f64> = label_center_outward(config).into_iter().take(count).collect();
    near.sort_by(|a, b| a.total_cmp(b));
    near.windows(2).map(|w| w[1] - w[0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let a = sample_gue_eigenvalues(20, 11).unwrap();
        let b = sample_gue_eigenvalues(20, 11).unwrap();
        let c = sample_gue_eigenvalues(20, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn configuration_rejects_ties() {
        assert!(ParticleConfiguration::new(vec![0.0, 0.0], Scaling::Raw).is_err());
        assert!(ParticleConfiguration::new(vec![1.0, 0.0], Scaling::Raw).is_err());
        assert!(ParticleConfiguration::new(vec![], Scaling::Raw).is_err());
        assert!(ParticleConfiguration::new(vec![f64::NAN], Scaling::Raw).is_err());
    }

    #[test]
    fn bulk_scaling_round_trip() {
        let c = sample_gue_eigenvalues(50, 3).unwrap();
        let b = bulk_scale(&c, 0.5).unwrap();
        let back = bulk_unscale(&b).unwrap();
        for (x, y) in c.positions().iter().zip(back.positions()) {
            assert!((x - y).abs() < 1e-12);
        }
        let center = ParticleConfiguration::new(vec![-1.0, 0.5 * 2.0, 3.0, 4.0], Scaling::Raw).unwrap();
        let s = bulk_scale(&center, 0.5).unwrap();
        assert!(s.positions()[1].abs() < 1e-15);
        assert!(bulk_scale(&s, 0.5).is_err());
    }

    #[test]
    fn center_outward_labels() {
        let c = ParticleConfiguration::new(vec![-3.0, -1.0, 2.0], Scaling::Raw).unwrap();
        assert_eq!(label_center_outward(&c), vec![-1.0, 2.0, -3.0]);
        let c = ParticleConfiguration::new(vec![-2.0, 2.0], Scaling::Raw).unwrap();
        assert_eq!(label_center_outward(&c), vec![-2.0, 2.0]);
        let c = ParticleConfiguration::new(vec![0.7], Scaling::Raw).unwrap();
        assert_eq!(label_center_outward(&c), vec![0.7]);
    }

    #[test]
    fn semicircle_cdf_shape() {
        assert_eq!(semicircle_cdf(-2.0), 0.0);
        assert_eq!(semicircle_cdf(2.0), 1.0);
        assert!((semicircle_cdf(0.0) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        let d = (semicircle_cdf(0.3 + h) - semicircle_cdf(0.3 - h)) / (2.0 * h);
        assert!((d - (2.0f64 - 0.09).sqrt() / PI).abs() < 1e-8);
    }

    #[test]
    fn ks_two_sample_basics() {
        let a = [0.1, 0.4, 0.2, 0.9];
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]);
        assert_eq!(r.statistic, 1.0);
        assert!((kolmogorov_q(1.36) - 0.049).abs() < 1e-3);
    }

    #[test]
    fn histogram_mass_and_empty_window() {
        let c = ParticleConfiguration::new(vec![-0.5, 0.25, 0.75, 3.0], Scaling::Raw).unwrap();
        let d = empirical_one_point(&[c.clone(), c], (-1.0, 1.0), 4).unwrap();
        assert!((d.mass() - 3.0).abs() < 1e-14);
        assert!(d.std_errors.iter().all(|&s| s == 0.0));
        let c = ParticleConfiguration::new(vec![0.0], Scaling::Raw).unwrap();
        let far = empirical_one_point(&[c], (5.0, 6.0), 3).unwrap();
        assert!(far.values.iter().all(|&v| v == 0.0));
        assert!(matches!(empirical_one_point(&[], (1.0, 1.0), 3), Err(Error::EmptyWindow { .. })));
    }
}
