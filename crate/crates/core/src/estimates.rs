//! Tail integrals of the macroscopic kernel that control the drift and
//! variance conditions, the band decomposition around the spectral edges,
//! and the semicircle principal value.
//!
//! All integrals live in macroscopic coordinates: the conditioning point is
//! `x_hat = x/N + theta` and the integration region is
//! `{y : |x_hat - y| >= r/N}`, truncated to `|y| <= sqrt(2) + 1`. The part
//! beyond the cutoff is bounded explicitly and added to the error estimate.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_finite, Error, Result};
use crate::kernels::{check_theta, MacroKernel};
use crate::quadrature::{adaptive, graded_panels, refine_until, tensor_sum, uniform_panels, AdaptiveOptions, PanelRule};
use crate::report::{Cell, ExperimentReport};

/// Default band exponent, inside the admissible range `(-2/3, -1/2)`.
pub const DEFAULT_ALPHA: f64 = -0.55;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, y: f64) -> bool {
        let above = if self.lo_closed { y >= self.lo } else { y > self.lo };
        let below = if self.hi_closed { y <= self.hi } else { y < self.hi };
        above && below
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Splits the line into the bulk `U1`, the two edge bands `B` of half-width
/// `N^alpha` around `+-sqrt 2`, and the outside `U2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandDecomposition {
    n: usize,
    alpha: f64,
}

impl BandDecomposition {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("particle number", "N must be at least 1"));
        }
        check_finite(alpha)?;
        if !(alpha > -2.0 / 3.0 && alpha < -0.5) {
            return Err(Error::domain("band exponent", format!("alpha = {alpha} outside (-2/3, -1/2)")));
        }
        Ok(BandDecomposition { n, alpha })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `N^alpha`.
    pub fn half_width(&self) -> f64 {
        (self.n as f64).powf(self.alpha)
    }

    /// `-sqrt2 - h, -sqrt2 + h, sqrt2 - h, sqrt2 + h`.
    pub fn edges(&self) -> [f64; 4] {
        let h = self.half_width();
        [-SQRT_2 - h, -SQRT_2 + h, SQRT_2 - h, SQRT_2 + h]
    }

    pub fn band(&self) -> [Interval; 2] {
        let [a, b, c, d] = self.edges();
        [
            Interval { lo: a, hi: b, lo_closed: false, hi_closed: false },
            Interval { lo: c, hi: d, lo_closed: false, hi_closed: false },
        ]
    }

    pub fn u1(&self) -> Interval {
        let [_, b, c, _] = self.edges();
        Interval { lo: b, hi: c, lo_closed: true, hi_closed: true }
    }

    pub fn u2(&self) -> [Interval; 2] {
        let [a, _, _, d] = self.edges();
        [
            Interval { lo: f64::NEG_INFINITY, hi: a, lo_closed: false, hi_closed: true },
            Interval { lo: d, hi: f64::INFINITY, lo_closed: true, hi_closed: false },
        ]
    }

    pub fn in_band(&self, y: f64) -> bool {
        self.band().iter().any(|i| i.contains(y))
    }

    pub fn in_u1(&self, y: f64) -> bool {
        self.u1().contains(y)
    }

    pub fn in_u2(&self, y: f64) -> bool {
        self.u2().iter().any(|i| i.contains(y))
    }

    /// Membership in `U = R \ B`.
    pub fn in_u(&self, y: f64) -> bool {
        !self.in_band(y)
    }

    pub fn band_measure(&self) -> f64 {
        self.band().iter().map(Interval::length).sum()
    }

    /// All five pieces, left to right.
    pub fn pieces(&self) -> [Interval; 5] {
        let [b0, b1] = self.band();
        let [u0, u3] = self.u2();
        [u0, b0, self.u1(), b1, u3]
    }

    /// True when the pieces tile the real line: they start at `-inf`, end at
    /// `+inf`, and every junction is owned by exactly one side.
    pub fn is_exact_partition(&self) -> bool {
        let p = self.pieces();
        if p[0].lo != f64::NEG_INFINITY || p[4].hi != f64::INFINITY {
            return false;
        }
        p.iter().all(|i| i.lo < i.hi)
            && p.windows(2)
                .all(|w| w[0].hi == w[1].lo && (w[0].hi_closed != w[1].lo_closed))
    }
}

/// `{y : |x_hat - y| >= r/N}` with `x_hat = x/N + theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRegion {
    pub n: usize,
    pub theta: f64,
    pub x: f64,
    pub r: f64,
}

impl TailRegion {
    pub fn new(n: usize, theta: f64, x: f64, r: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("particle number", "tail integrals need N >= 2"));
        }
        check_theta(theta)?;
        check_finite(x)?;
        check_finite(r)?;
        if r <= 0.0 {
            return Err(Error::domain("tail radius", format!("r = {r} must be positive")));
        }
        Ok(TailRegion { n, theta, x, r })
    }

    pub fn hat(&self) -> f64 {
        self.x / self.n as f64 + self.theta
    }

    pub fn gap(&self) -> f64 {
        self.r / self.n as f64
    }

    pub fn contains(&self, y: f64) -> bool {
        (self.hat() - y).abs() >= self.gap()
    }

    /// The region intersected with `[lo, hi]`.
    pub fn segments(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let (h, g) = (self.hat(), self.gap());
        let mut out = Vec::with_capacity(2);
        let left = (h - g).min(hi);
        if left > lo {
            out.push((lo, left));
        }
        let right = (h + g).max(lo);
        if right < hi {
            out.push((right, hi));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub rtol_1d: f64,
    pub rtol_2d: f64,
    pub atol: f64,
    /// Integration stops at `|y| = sqrt(2) + cutoff_margin`.
    pub cutoff_margin: f64,
    /// Base panel width in units of `1/N`.
    pub panel_width: f64,
    pub order: usize,
    pub max_levels_2d: usize,
    pub max_subdivisions: usize,
    pub alpha: f64,
    /// Evaluate only the upper triangle of symmetric double integrals.
    pub exploit_symmetry: bool,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            rtol_1d: 1e-7,
            rtol_2d: 1e-5,
            atol: 1e-12,
            cutoff_margin: 1.0,
            panel_width: 4.0,
            order: 8,
            max_levels_2d: 4,
            max_subdivisions: 200_000,
            alpha: DEFAULT_ALPHA,
            exploit_symmetry: true,
        }
    }
}

impl QuadratureSettings {
    pub fn cutoff(&self) -> f64 {
        SQRT_2 + self.cutoff_margin
    }
}

/// Raw tail integrals at one conditioning point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailIntegrals {
    pub hat: f64,
    /// `L(x_hat, x_hat)`.
    pub l_hat: f64,
    /// `int L(y,y) / (x_hat - y)`.
    pub drift: f64,
    /// `int L(x_hat,y)^2 / (L(x_hat,x_hat) |x_hat - y|)`.
    pub palm_drift: f64,
    /// `int L(y,y) / (N (x_hat - y)^2)`.
    pub v1: f64,
    /// `int L(x_hat,y)^2 / (L(x_hat,x_hat) N (x_hat - y)^2)`.
    pub p1: f64,
    /// `int L(x_hat,y)^2 / (L(x_hat,x_hat) (x_hat - y))`; its square is `p3`.
    pub palm_mean: f64,
    /// `iint L(y,z)^2 / ((x_hat - y)(x_hat - z))`.
    pub v2: Option<f64>,
    /// `iint L(y,z) L(x_hat,y) L(x_hat,z) / (L(x_hat,x_hat)(x_hat - y)(x_hat - z))`.
    pub p2: Option<f64>,
    /// Largest quadrature error estimate over all components.
    pub error: f64,
    /// Bound on what the cutoff at `sqrt(2) + margin` discards.
    pub truncation: f64,
}

impl TailIntegrals {
    pub fn p3(&self) -> f64 {
        self.palm_mean * self.palm_mean
    }

    pub fn conditions(&self, theta: f64) -> ConditionValues {
        let (v2, p2) = (self.v2, self.p2);
        ConditionValues {
            drift: self.drift - theta,
            palm_drift: self.palm_drift,
            variance: v2.map(|v2| self.v1 - v2),
            palm_variance: p2.map(|p2| self.p1 + 2.0 * p2 - self.p3()),
            palm_variance_alt: p2.map(|p2| -self.p1 + 2.0 * p2 - self.p3()),
        }
    }
}

/// The four condition values at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionValues {
    /// `int L(y,y)/(x_hat - y) - theta`.
    pub drift: f64,
    pub palm_drift: f64,
    /// `v1 - v2`.
    pub variance: Option<f64>,
    /// `p1 + 2 p2 - p3`.
    pub palm_variance: Option<f64>,
    /// `-p1 + 2 p2 - p3`, the combination obtained by expanding the
    /// Palm variance directly; reported for comparison.
    pub palm_variance_alt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceTail {
    pub v1: f64,
    pub v2: f64,
}

impl VarianceTail {
    pub fn condition(&self) -> f64 {
        self.v1 - self.v2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PalmVarianceTail {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl PalmVarianceTail {
    pub fn condition(&self) -> f64 {
        self.p1 + 2.0 * self.p2 - self.p3
    }

    pub fn condition_alt(&self) -> f64 {
        -self.p1 + 2.0 * self.p2 - self.p3
    }
}

/// Evaluates tail integrals of `L^N` for one `N`.
#[derive(Debug, Clone)]
pub struct TailEngine {
    kernel: MacroKernel,
    settings: QuadratureSettings,
}

struct NodeData {
    edge: Vec<[f64; 2]>,
    diag: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl TailEngine {
    pub fn new(n: usize, settings: QuadratureSettings) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("particle number", "tail integrals need N >= 2"));
        }
        BandDecomposition::new(n, settings.alpha)?;
        Ok(TailEngine {
            kernel: MacroKernel::new(n)?,
            settings,
        })
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }

    pub fn kernel(&self) -> &MacroKernel {
        &self.kernel
    }

    pub fn settings(&self) -> &QuadratureSettings {
        &self.settings
    }

    /// Panels covering `segments`, uniform of width `panel_width / N` inside
    /// `|y| <= sqrt2 + N^alpha` and growing geometrically outside. Band
    /// edges are always panel breaks.
    pub fn panels(&self, segments: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let n = self.n() as f64;
        let w = self.settings.panel_width / n;
        let edges = BandDecomposition::new(self.n(), self.settings.alpha)
            .expect("validated in constructor")
            .edges();
        let mut out = Vec::new();
        for &(a, b) in segments {
            let mut cuts = vec![a];
            cuts.extend(edges.iter().copied().filter(|&e| e > a && e < b));
            cuts.push(b);
            for c in cuts.windows(2) {
                let (u, v) = (c[0], c[1]);
                if v <= edges[0] {
                    out.extend(graded_panels(u, v, w, false));
                } else if u >= edges[3] {
                    out.extend(graded_panels(u, v, w, true));
                } else {
                    out.extend(uniform_panels(u, v, w));
                }
            }
        }
        out
    }

    /// Upper bound on `int_{|y| > cutoff} L(y,y) dy`. Beyond the turning
    /// point of `psi_{N}` each `psi_k^2` with `k < N` decays at least like
    /// `exp(-2 sqrt(Y^2 - 2N - 1) Y)` in `Y = sqrt(N) y`, so the tail is at most
    /// `2 L(c,c) / kappa` with `kappa = 2 sqrt(N) sqrt(N c^2 - 2N - 1)`.
    pub fn diagonal_tail_mass(&self) -> f64 {
        let n = self.n() as f64;
        let c = self.settings.cutoff();
        let q = n * c * c - 2.0 * n - 1.0;
        if q <= 0.0 {
            return f64::INFINITY;
        }
        let kappa = 2.0 * n.sqrt() * q.sqrt();
        2.0 * self.kernel.diag(c) / kappa
    }

    fn hat_data(&self, region: &TailRegion) -> Result<(f64, [f64; 2], f64)> {
        let hat = region.hat();
        let l_hat = self.kernel.diag(hat);
        if !(l_hat > 0.0) {
            return Err(Error::ConditioningPoint { x: region.x, diagonal: l_hat });
        }
        Ok((hat, self.kernel.edge(hat), l_hat))
    }

    fn check_region(&self, region: &TailRegion) -> Result<()> {
        if region.n != self.n() {
            return Err(Error::domain(
                "tail region",
                format!("region built for N = {} used with N = {}", region.n, self.n()),
            ));
        }
        Ok(())
    }

    /// All tail integrals at one point; the double integrals only if
    /// `with_double`.
    pub fn evaluate(&self, region: &TailRegion, with_double: bool) -> Result<TailIntegrals> {
        self.check_region(region)?;
        let s = &self.settings;
        let c = s.cutoff();
        let n = self.n() as f64;
        let (hat, ex, l_hat) = self.hat_data(region)?;
        let segments = region.segments(-c, c);
        let panels = self.panels(&segments);
        let k = &self.kernel;

        let integrand = |y: f64| -> [f64; 6] {
            let w = k.finite().evaluator().window::<4>(k.n() + 1, n.sqrt() * y);
            let d = 0.5 * n.sqrt() * four_term(n, w);
            let lxy = k.from_edges(hat, ex, y, [w[1], w[2]]);
            let inv = 1.0 / (hat - y);
            let palm = lxy * lxy / l_hat;
            [
                d * inv,
                palm * inv.abs(),
                d * inv * inv / n,
                palm * inv * inv / n,
                palm * inv,
                d * inv.abs(),
            ]
        };
        let opts = AdaptiveOptions {
            rtol: s.rtol_1d,
            atol: s.atol,
            order: s.order,
            max_subdivisions: s.max_subdivisions,
        };
        let est = adaptive(integrand, &panels, &opts)?;
        let [drift, palm_drift, v1, p1, palm_mean, abs_drift] = est.value;

        // region distance from x_hat to the discarded tail
        let dist = (c - hat.abs()).max(region.gap());
        let mass = self.diagonal_tail_mass();
        let t1 = mass / dist;
        let mut truncation = t1.max(mass / (n * dist * dist));
        let mut error = est.error[..5].iter().copied().fold(0.0, f64::max);

        let (mut v2, mut p2) = (None, None);
        if with_double {
            let [a, b] = self.double_integrals(&panels, hat, ex, l_hat)?;
            v2 = Some(a.0);
            p2 = Some(b.0);
            error = error.max(a.1).max(b.1);
            // Schwarz: both integrands are dominated by L(y,y) L(z,z) / (|.| |.|)
            truncation = truncation.max(2.0 * t1 * abs_drift + t1 * t1);
        }
        Ok(TailIntegrals {
            hat,
            l_hat,
            drift,
            palm_drift,
            v1,
            p1,
            palm_mean,
            v2,
            p2,
            error: error + truncation,
            truncation,
        })
    }

    fn node_data(&self, rule: &PanelRule, hat: f64, ex: [f64; 2], l_hat: f64) -> NodeData {
        let k = &self.kernel;
        let n = self.n() as f64;
        let len = rule.len();
        let mut data = NodeData {
            edge: Vec::with_capacity(len),
            diag: Vec::with_capacity(len),
            f: Vec::with_capacity(len),
            g: Vec::with_capacity(len),
        };
        for &y in &rule.nodes {
            let w = k.finite().evaluator().window::<4>(k.n() + 1, n.sqrt() * y);
            let e = [w[1], w[2]];
            let f = 1.0 / (hat - y);
            data.edge.push(e);
            data.diag.push(0.5 * n.sqrt() * four_term(n, w));
            data.f.push(f);
            data.g.push(f * k.from_edges(hat, ex, y, e) / l_hat);
        }
        data
    }

    /// `[(v2, err), (p2, err)]` by globally refined tensor Gauss rules.
    fn double_integrals(&self, panels: &[(f64, f64)], hat: f64, ex: [f64; 2], l_hat: f64) -> Result<[(f64, f64); 2]> {
        if panels.is_empty() {
            return Ok([(0.0, 0.0), (0.0, 0.0)]);
        }
        let s = &self.settings;
        let k = &self.kernel;
        let rule = PanelRule::new(panels.to_vec(), s.order);
        let est = refine_until(rule, s.rtol_2d, s.atol, s.max_levels_2d, |r| {
            let d = self.node_data(r, hat, ex, l_hat);
            let y = &r.nodes;
            let v = tensor_sum(r, s.exploit_symmetry, |i, j| {
                let l = if i == j {
                    d.diag[i]
                } else {
                    k.from_edges(y[i], d.edge[i], y[j], d.edge[j])
                };
                [l * l * d.f[i] * d.f[j], l * d.g[i] * d.g[j]]
            });
            [v[0], v[1] * l_hat]
        })?;
        Ok([(est.value[0], est.error[0]), (est.value[1], est.error[1])])
    }
}

#[inline]
fn four_term(n: f64, [pm2, pm1, p0, pp1]: [f64; 4]) -> f64 {
    pm1 * pm1 + p0 * p0 - (1.0 - 1.0 / n).sqrt() * pm2 * p0 - (1.0 + 1.0 / n).sqrt() * pm1 * pp1
}

fn engine_region(n: usize, theta: f64, x: f64, r: f64) -> Result<(TailEngine, TailRegion)> {
    let region = TailRegion::new(n, theta, x, r)?;
    Ok((TailEngine::new(n, QuadratureSettings::default())?, region))
}

/// `int_T L(y,y)/(x_hat - y) dy - theta`.
pub fn drift_tail_integral(n: usize, theta: f64, x: f64, r: f64) -> Result<f64> {
    let (e, region) = engine_region(n, theta, x, r)?;
    Ok(e.evaluate(&region, false)?.drift - theta)
}

/// `int_T L(x_hat,y)^2 / (L(x_hat,x_hat) |x_hat - y|) dy`.
pub fn palm_drift_tail_integral(n: usize, theta: f64, x: f64, r: f64) -> Result<f64> {
    let (e, region) = engine_region(n, theta, x, r)?;
    Ok(e.evaluate(&region, false)?.palm_drift)
}

pub fn variance_tail_integrals(n: usize, theta: f64, x: f64, r: f64) -> Result<VarianceTail> {
    let (e, region) = engine_region(n, theta, x, r)?;
    let t = e.evaluate(&region, true)?;
    Ok(VarianceTail {
        v1: t.v1,
        v2: t.v2.expect("double integrals requested"),
    })
}

pub fn palm_variance_tail_integrals(n: usize, theta: f64, x: f64, r: f64) -> Result<PalmVarianceTail> {
    let (e, region) = engine_region(n, theta, x, r)?;
    let t = e.evaluate(&region, true)?;
    Ok(PalmVarianceTail {
        p1: t.p1,
        p2: t.p2.expect("double integrals requested"),
        p3: t.p3(),
    })
}

/// Semicircle density `sqrt(2 - y^2)_+ / pi`.
pub fn semicircle_density(y: f64) -> f64 {
    let q = 2.0 - y * y;
    if q > 0.0 {
        q.sqrt() / PI
    } else {
        0.0
    }
}

/// `(f(y) - f(t)) / (t - y)` for the semicircle density, written without
/// cancellation as `(t + y) / (pi (sqrt(2 - y^2) + sqrt(2 - t^2)))`.
fn semicircle_quotient(t: f64, y: f64) -> f64 {
    (t + y) / (PI * ((2.0 - y * y).max(0.0).sqrt() + (2.0 - t * t).sqrt()))
}

/// Integral of the regular part over `y in [a, b]` inside the support,
/// substituting `y = sqrt2 sin(phi)`.
fn semicircle_regular_part(t: f64, segments: &[(f64, f64)]) -> Result<f64> {
    let panels: Vec<(f64, f64)> = segments
        .iter()
        .filter_map(|&(a, b)| {
            let a = a.max(-SQRT_2);
            let b = b.min(SQRT_2);
            (b > a).then(|| ((a / SQRT_2).clamp(-1.0, 1.0).asin(), (b / SQRT_2).clamp(-1.0, 1.0).asin()))
        })
        .collect();
    let est = adaptive(
        |phi: f64| {
            let y = SQRT_2 * phi.sin();
            [semicircle_quotient(t, y) * SQRT_2 * phi.cos()]
        },
        &panels,
        &AdaptiveOptions {
            rtol: 1e-13,
            atol: 1e-15,
            ..Default::default()
        },
    )?;
    Ok(est.value[0])
}

/// `P.V. int_{-sqrt2}^{sqrt2} semicircle(y) / (theta - y) dy`, by subtracting
/// `f(theta) P.V. int dy/(theta - y) = f(theta) ln((sqrt2 + theta)/(sqrt2 - theta))`
/// and integrating the smooth remainder.
pub fn pv_semicircle(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let singular = semicircle_density(theta) * ((SQRT_2 + theta) / (SQRT_2 - theta)).ln();
    Ok(singular + semicircle_regular_part(theta, &[(-SQRT_2, SQRT_2)])?)
}

/// The drift tail integral with `L(y,y)` replaced by the semicircle density:
/// `int_{|hat - y| >= gap} semicircle(y)/(hat - y) dy - theta`.
pub fn semicircle_drift_tail(theta: f64, hat: f64, gap: f64) -> Result<f64> {
    check_theta(theta)?;
    check_finite(hat)?;
    if hat.abs() >= SQRT_2 || !(gap > 0.0) {
        return Err(Error::domain("semicircle tail", format!("hat = {hat}, gap = {gap}")));
    }
    let segs = [(-SQRT_2, hat - gap), (hat + gap, SQRT_2)];
    let mut log_part = 0.0;
    if hat - gap > -SQRT_2 {
        log_part += ((hat + SQRT_2) / gap).ln();
    }
    if hat + gap < SQRT_2 {
        log_part -= ((SQRT_2 - hat) / gap).ln();
    }
    let regular = semicircle_regular_part(hat, &segs)?;
    Ok(semicircle_density(hat) * log_part + regular - theta)
}

/// `int_{R \ U1} L(y,y)^q / |x_hat - y| dy` plus the truncation bound of
/// the part beyond the cutoff.
pub fn outside_bulk_integral(engine: &TailEngine, theta: f64, x: f64, q: f64) -> Result<f64> {
    check_theta(theta)?;
    check_finite(x)?;
    if !(q > 0.0) {
        return Err(Error::domain("exponent q", format!("q = {q} must be positive")));
    }
    let s = engine.settings();
    let n = engine.n() as f64;
    let band = BandDecomposition::new(engine.n(), s.alpha)?;
    let hat = x / n + theta;
    let u1 = band.u1();
    if !u1.contains(hat) {
        return Err(Error::domain("conditioning point", format!("x_hat = {hat} lies outside U1")));
    }
    let c = s.cutoff();
    let panels = engine.panels(&[(-c, u1.lo), (u1.hi, c)]);
    let k = engine.kernel();
    let est = adaptive(
        |y: f64| [k.diag(y).max(0.0).powf(q) / (hat - y).abs()],
        &panels,
        &AdaptiveOptions {
            rtol: s.rtol_1d,
            atol: s.atol,
            order: s.order,
            max_subdivisions: s.max_subdivisions,
        },
    )?;
    // L(y,y)^q beyond the cutoff is below the q-th power of its value there
    // times the diagonal decay; bound crudely by the q = 1 mass rescaled
    let mass = engine.diagonal_tail_mass();
    let lc = k.diag(c).max(f64::MIN_POSITIVE);
    let tail = if q >= 1.0 {
        mass * lc.powf(q - 1.0)
    } else {
        mass * lc.powf(q - 1.0) / q
    };
    Ok(est.value[0] + tail / (c - hat.abs()))
}

/// Observed constants of the kernel bounds on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelBounds {
    pub n: usize,
    /// `max |L(x,y)| / N^(1/3)` over the whole grid.
    pub sup_scaled: f64,
    /// `max |L(x,y)|` over grid points in `U`.
    pub sup_on_u: f64,
    /// `max N |x - y| |L(x,y)|` over grid points in `U`.
    pub sup_decay: f64,
    pub decay_argmax: (f64, f64),
}

/// Kernel-bound statistics of `L^N` on an equispaced grid of `points`
/// points over `[-half_width, half_width]`, augmented by the band edges.
pub fn kernel_bound_statistics(n: usize, alpha: f64, points: usize, half_width: f64) -> Result<KernelBounds> {
    let band = BandDecomposition::new(n, alpha)?;
    if points < 2 || !(half_width > 0.0) {
        return Err(Error::domain("grid", format!("{points} points on half-width {half_width}")));
    }
    let k = MacroKernel::new(n)?;
    let mut grid: Vec<f64> = (0..points)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64)
        .collect();
    grid.extend(band.edges());
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let edges: Vec<[f64; 2]> = grid.iter().map(|&y| k.edge(y)).collect();
    let diag: Vec<f64> = grid.iter().map(|&y| k.diag(y)).collect();
    let in_u: Vec<bool> = grid.iter().map(|&y| band.in_u(y)).collect();
    let nf = n as f64;

    let rows: Vec<(f64, f64, f64, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (mut s1, mut s2, mut s3, mut arg) = (0.0f64, 0.0f64, 0.0f64, i);
            for j in 0..grid.len() {
                let l = if i == j {
                    diag[i]
                } else {
                    k.from_edges(grid[i], edges[i], grid[j], edges[j])
                }
                .abs();
                s1 = s1.max(l);
                if in_u[i] && in_u[j] {
                    s2 = s2.max(l);
                    let d = nf * (grid[i] - grid[j]).abs() * l;
                    if d > s3 {
                        s3 = d;
                        arg = j;
                    }
                }
            }
            (s1, s2, s3, arg)
        })
        .collect();
    let mut out = KernelBounds {
        n,
        sup_scaled: 0.0,
        sup_on_u: 0.0,
        sup_decay: 0.0,
        decay_argmax: (0.0, 0.0),
    };
    for (i, &(s1, s2, s3, j)) in rows.iter().enumerate() {
        out.sup_scaled = out.sup_scaled.max(s1 / nf.cbrt());
        out.sup_on_u = out.sup_on_u.max(s2);
        if s3 > out.sup_decay {
            out.sup_decay = s3;
            out.decay_argmax = (grid[i], grid[j]);
        }
    }
    Ok(out)
}

/// Equispaced grid of `points` values on `[-half, half]`.
pub fn symmetric_grid(half: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![0.0];
    }
    (0..points)
        .map(|i| -half + 2.0 * half * i as f64 / (points - 1) as f64)
        .collect()
}

/// Parameters of a condition table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub theta: f64,
    pub n_list: Vec<usize>,
    pub r_list: Vec<f64>,
    /// Sup over `|x| <= x_radius`.
    pub x_radius: f64,
    pub x_points: usize,
    pub settings: QuadratureSettings,
}

impl TableSpec {
    pub fn new(theta: f64, n_list: Vec<usize>, r_list: Vec<f64>, x_radius: f64) -> Self {
        TableSpec {
            theta,
            n_list,
            r_list,
            x_radius,
            x_points: 41,
            settings: QuadratureSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        if self.n_list.is_empty() || self.r_list.is_empty() {
            return Err(Error::domain("condition table", "N and r lists must be non-empty"));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(Error::domain("particle number", format!("N = {n} must be at least 2")));
        }
        if let Some(&r) = self.r_list.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::domain("tail radius", format!("r = {r} must be positive")));
        }
        check_finite(self.x_radius)?;
        if self.x_radius < 0.0 || self.x_points == 0 {
            return Err(Error::domain("x grid", "radius must be >= 0 and at least one point"));
        }
        BandDecomposition::new(2, self.settings.alpha)?;
        Ok(())
    }
}

pub const CONDITION_COLUMNS: [&str; 13] = [
    "N",
    "r",
    "drift",
    "drift_x",
    "palm_drift",
    "palm_drift_x",
    "variance",
    "variance_x",
    "palm_variance",
    "palm_variance_x",
    "palm_variance_alt",
    "palm_variance_alt_x",
    "max_error",
];

/// For each `(N, r)`, the sup over the x-grid of `|value|` of each
/// condition, with the maximizing `x`. Rows are ordered by `N`, then `r`.
/// Cells are evaluated in parallel; the output does not depend on the
/// number of worker threads.
pub fn condition_table(spec: &TableSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let xs = symmetric_grid(spec.x_radius, spec.x_points);
    let engines = spec
        .n_list
        .iter()
        .map(|&n| TailEngine::new(n, spec.settings))
        .collect::<Result<Vec<_>>>()?;
    let (nr, nx) = (spec.r_list.len(), xs.len());
    let jobs: Vec<(usize, usize, usize)> = (0..engines.len())
        .flat_map(|a| (0..nr).flat_map(move |b| (0..nx).map(move |c| (a, b, c))))
        .collect();
    let values: Vec<Result<(ConditionValues, f64)>> = jobs
        .par_iter()
        .map(|&(a, b, c)| {
            let e = &engines[a];
            let region = TailRegion::new(e.n(), spec.theta, xs[c], spec.r_list[b])?;
            let t = e.evaluate(&region, true)?;
            Ok((t.conditions(spec.theta), t.error))
        })
        .collect();

    let mut report = ExperimentReport::new("conditions", &CONDITION_COLUMNS);
    report.set_meta("theta", spec.theta);
    report.set_meta("x_radius", spec.x_radius);
    report.set_meta("x_points", spec.x_points);
    report.set_meta("alpha", spec.settings.alpha);
    report.set_meta("rtol_1d", spec.settings.rtol_1d);
    report.set_meta("rtol_2d", spec.settings.rtol_2d);
    let mut it = values.into_iter();
    for &n in &spec.n_list {
        for &r in &spec.r_list {
            let mut sup = [(f64::NEG_INFINITY, xs[0]); 5];
            let mut max_error = 0.0f64;
            for &x in &xs {
                let (v, err) = it.next().expect("one result per job")?;
                max_error = max_error.max(err);
                let vals = [
                    v.drift,
                    v.palm_drift,
                    v.variance.unwrap_or(f64::NAN),
                    v.palm_variance.unwrap_or(f64::NAN),
                    v.palm_variance_alt.unwrap_or(f64::NAN),
                ];
                for (s, val) in sup.iter_mut().zip(vals) {
                    if val.abs() > s.0 {
                        *s = (val.abs(), x);
                    }
                }
            }
            let mut row = vec![Cell::from(n), Cell::from(r)];
            for (v, x) in sup {
                row.push(v.into());
                row.push(x.into());
            }
            row.push(max_error.into());
            report.push_row(row)?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_partition_and_measure() {
        for &n in &[1usize, 2, 64, 1024, 1 << 20] {
            for &a in &[-0.66, -0.55, -0.51] {
                let b = BandDecomposition::new(n, a).unwrap();
                assert!(b.is_exact_partition(), "n={n} a={a}");
                let h = (n as f64).powf(a);
                assert!((b.band_measure() - 4.0 * h).abs() < 1e-14);
            }
        }
        assert!(BandDecomposition::new(10, -0.5).is_err());
        assert!(BandDecomposition::new(10, -0.7).is_err());
    }

    #[test]
    fn band_membership_at_edges() {
        let b = BandDecomposition::new(64, DEFAULT_ALPHA).unwrap();
        let [e0, e1, e2, e3] = b.edges();
        for &y in &[e0, e1, e2, e3] {
            assert!(!b.in_band(y));
            assert!(b.in_u(y));
        }
        assert!(b.in_u2(e0) && b.in_u1(e1) && b.in_u1(e2) && b.in_u2(e3));
        assert!(b.in_band(SQRT_2) && b.in_band(-SQRT_2));
        assert!(b.in_u1(0.0) && b.in_u2(5.0));
    }

    #[test]
    fn tail_region_segments() {
        let t = TailRegion::new(10, 0.5, 1.0, 2.0).unwrap();
        assert!((t.hat() - 0.6).abs() < 1e-15);
        let s = t.segments(-2.0, 2.0);
        assert_eq!(s.len(), 2);
        assert!((s[0].1 - 0.4).abs() < 1e-15 && (s[1].0 - 0.8).abs() < 1e-15);
        assert!(t.contains(0.39) && t.contains(0.81) && !t.contains(0.6));
        assert_eq!(t.segments(0.5, 0.7).len(), 0);
        assert!(TailRegion::new(10, 0.5, 0.0, 0.0).is_err());
        assert!(TailRegion::new(1, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn pv_identity() {
        assert!(pv_semicircle(0.0).unwrap().abs() < 1e-14);
        for &t in &[-1.2, -0.7, 0.3, 0.7, 1.2, 1.4] {
            let v = pv_semicircle(t).unwrap();
            assert!((v - t).abs() < 1e-9, "{t}: {v}");
        }
        assert!(pv_semicircle(SQRT_2).is_err());
    }

    #[test]
    fn semicircle_tail_vanishes_as_gap_shrinks() {
        let theta = 0.5;
        let mut prev = f64::INFINITY;
        for &g in &[0.1, 0.01, 0.001, 1e-5] {
            let v = semicircle_drift_tail(theta, theta, g).unwrap().abs();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn drift_is_odd_at_the_center() {
        let v = drift_tail_integral(64, 0.0, 0.0, 2.0).unwrap();
        assert!(v.abs() < 1e-9, "{v}");
    }

    #[test]
    fn palm_drift_nonnegative_and_monotone_in_r() {
        let a = palm_drift_tail_integral(64, 0.5, 0.0, 2.0).unwrap();
        let b = palm_drift_tail_integral(64, 0.5, 0.0, 8.0).unwrap();
        assert!(a >= b && b >= 0.0);
    }

    #[test]
    fn symmetric_and_full_double_sums_agree() {
        let region = TailRegion::new(32, 0.5, 0.3, 3.0).unwrap();
        let sym = TailEngine::new(32, QuadratureSettings::default()).unwrap();
        let full = TailEngine::new(
            32,
            QuadratureSettings {
                exploit_symmetry: false,
                ..Default::default()
            },
        )
        .unwrap();
        let a = sym.evaluate(&region, true).unwrap();
        let b = full.evaluate(&region, true).unwrap();
        assert!((a.v2.unwrap() - b.v2.unwrap()).abs() < 1e-10);
        assert!((a.p2.unwrap() - b.p2.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn kernel_bound_grid_contains_band_edges() {
        let s = kernel_bound_statistics(16, DEFAULT_ALPHA, 101, 2.6).unwrap();
        assert!(s.sup_scaled > 0.0 && s.sup_on_u > 0.0 && s.sup_decay > 0.0);
        assert!(s.sup_on_u <= s.sup_scaled * 16f64.cbrt() + 1e-15);
    }
}
