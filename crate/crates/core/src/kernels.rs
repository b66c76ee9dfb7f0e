//! GUE determinantal kernels: the finite-N kernel `K^N`, its macroscopic
//! rescaling `L^N`, the bulk kernel `K_theta^N`, the sine kernel, and the
//! reduced Palm kernel, together with correlation functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::error::{check_finite, Error, Result};
use crate::hermite::OscillatorEvaluator;
use crate::linalg::determinant_in_place;

/// Below this separation the Christoffel-Darboux quotient is replaced by the
/// diagonal formula at the midpoint.
pub const NEAR_DIAGONAL: f64 = 1e-8;

/// Largest point count accepted by [`correlation`].
pub const MAX_CORRELATION_POINTS: usize = 8;

/// A symmetric real kernel.
pub trait Kernel: Sync {
    fn eval(&self, x: f64, y: f64) -> f64;

    fn diag(&self, x: f64) -> f64 {
        self.eval(x, x)
    }
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn eval(&self, x: f64, y: f64) -> f64 {
        (**self).eval(x, y)
    }
    fn diag(&self, x: f64) -> f64 {
        (**self).diag(x)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("particle number", "N must be at least 1"));
    }
    Ok(())
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    check_finite(theta)?;
    if theta.abs() >= SQRT_2 {
        return Err(Error::domain(
            "macro-position",
            format!("|theta| = {} must be below sqrt(2)", theta.abs()),
        ));
    }
    Ok(())
}

/// `K^N(x, y) = sum_{k<N} psi_k(x) psi_k(y)`.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    n: usize,
    ev: OscillatorEvaluator,
}

impl FiniteKernel {
    pub fn new(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(FiniteKernel {
            n,
            ev: OscillatorEvaluator::new(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn evaluator(&self) -> &OscillatorEvaluator {
        &self.ev
    }

    /// Direct summation over the `N` wave functions.
    pub fn sum(&self, x: f64, y: f64) -> f64 {
        let mut a = vec![0.0; self.n];
        let mut b = vec![0.0; self.n];
        self.ev.batch_into(x, &mut a);
        self.ev.batch_into(y, &mut b);
        a.iter().zip(&b).map(|(p, q)| p * q).sum()
    }

    /// `(psi_{N-1}(x), psi_N(x))`.
    #[inline]
    pub fn edge(&self, x: f64) -> [f64; 2] {
        self.ev.window::<2>(self.n, x)
    }

    /// Christoffel-Darboux quotient from precomputed edge pairs.
    #[inline]
    pub fn cd_from_edges(&self, x: f64, ex: [f64; 2], y: f64, ey: [f64; 2]) -> f64 {
        (self.n as f64 / 2.0).sqrt() * (ex[1] * ey[0] - ex[0] * ey[1]) / (x - y)
    }

    /// Christoffel-Darboux form; falls back to the diagonal at the midpoint
    /// when `|x - y| < 1e-8`. The kernel is symmetric, so the first-order
    /// Taylor term vanishes about the midpoint.
    pub fn cd(&self, x: f64, y: f64) -> f64 {
        if (x - y).abs() < NEAR_DIAGONAL {
            return self.diag(0.5 * (x + y));
        }
        self.cd_from_edges(x, self.edge(x), y, self.edge(y))
    }

    /// `K^N(x, x) = sqrt(N/2) (psi_N'(x) psi_{N-1}(x) - psi_{N-1}'(x) psi_N(x))`,
    /// with the derivatives taken from the ladder identity.
    pub fn diag(&self, x: f64) -> f64 {
        let n = self.n as f64;
        let [pm2, pm1, p0, pp1] = self.ev.window::<4>(self.n + 1, x);
        let d_n = FRAC_1_SQRT_2 * (n.sqrt() * pm1 - (n + 1.0).sqrt() * pp1);
        let d_nm1 = FRAC_1_SQRT_2 * ((n - 1.0).sqrt() * pm2 - n.sqrt() * p0);
        (n / 2.0).sqrt() * (d_n * pm1 - d_nm1 * p0)
    }

    /// The expanded four-term diagonal,
    /// `(N/2)[psi_{N-1}^2 + psi_N^2 - sqrt(1-1/N) psi_{N-2} psi_N - sqrt(1+1/N) psi_{N-1} psi_{N+1}]`.
    pub fn diag_four_term(&self, x: f64) -> f64 {
        let n = self.n as f64;
        let w = self.ev.window::<4>(self.n + 1, x);
        0.5 * n * four_term(n, w)
    }
}

#[inline]
fn four_term(n: f64, [pm2, pm1, p0, pp1]: [f64; 4]) -> f64 {
    pm1 * pm1 + p0 * p0 - (1.0 - 1.0 / n).sqrt() * pm2 * p0 - (1.0 + 1.0 / n).sqrt() * pm1 * pp1
}

impl Kernel for FiniteKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.cd(x, y)
    }
    fn diag(&self, x: f64) -> f64 {
        FiniteKernel::diag(self, x)
    }
}

/// Macroscopic kernel `L^N(x, y) = K^N(sqrt(N) x, sqrt(N) y) / sqrt(N)`,
/// supported on roughly `[-sqrt 2, sqrt 2]`.
#[derive(Debug, Clone)]
pub struct MacroKernel {
    finite: FiniteKernel,
    root_n: f64,
}

impl MacroKernel {
    pub fn new(n: usize) -> Result<Self> {
        Ok(MacroKernel {
            finite: FiniteKernel::new(n)?,
            root_n: (n as f64).sqrt(),
        })
    }

    pub fn n(&self) -> usize {
        self.finite.n
    }

    pub fn finite(&self) -> &FiniteKernel {
        &self.finite
    }

    /// `(psi_{N-1}, psi_N)` at `sqrt(N) y`.
    #[inline]
    pub fn edge(&self, y: f64) -> [f64; 2] {
        self.finite.edge(self.root_n * y)
    }

    /// `L^N(y, z)` from precomputed edge pairs (`y != z`).
    #[inline]
    pub fn from_edges(&self, y: f64, ey: [f64; 2], z: f64, ez: [f64; 2]) -> f64 {
        FRAC_1_SQRT_2 * (ey[1] * ez[0] - ey[0] * ez[1]) / (self.root_n * (y - z))
    }

    /// `L^N(y, y)` from the four-term form at `sqrt(N) y`.
    #[inline]
    pub fn diag(&self, y: f64) -> f64 {
        let n = self.finite.n as f64;
        let w = self.finite.ev.window::<4>(self.finite.n + 1, self.root_n * y);
        0.5 * self.root_n * four_term(n, w)
    }
}

impl Kernel for MacroKernel {
    fn eval(&self, y: f64, z: f64) -> f64 {
        if (self.root_n * (y - z)).abs() < NEAR_DIAGONAL {
            return self.diag(0.5 * (y + z));
        }
        self.from_edges(y, self.edge(y), z, self.edge(z))
    }
    fn diag(&self, y: f64) -> f64 {
        MacroKernel::diag(self, y)
    }
}

/// Bulk kernel `K_theta^N(x, y) = L^N(x/N + theta, y/N + theta)`.
#[derive(Debug, Clone)]
pub struct ScaledKernel {
    macro_kernel: MacroKernel,
    theta: f64,
}

impl ScaledKernel {
    pub fn new(n: usize, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(ScaledKernel {
            macro_kernel: MacroKernel::new(n)?,
            theta,
        })
    }

    pub fn n(&self) -> usize {
        self.macro_kernel.n()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn macro_kernel(&self) -> &MacroKernel {
        &self.macro_kernel
    }

    /// Macroscopic position `x/N + theta` of a bulk coordinate.
    #[inline]
    pub fn hat(&self, x: f64) -> f64 {
        x / self.n() as f64 + self.theta
    }

    /// The defining formula `(1/sqrt N) K^N((x + N theta)/sqrt N, ...)`,
    /// evaluated without passing through `L^N`.
    pub fn via_finite(&self, x: f64, y: f64) -> f64 {
        let n = self.n() as f64;
        let r = n.sqrt();
        let f = self.macro_kernel.finite();
        f.cd((x + n * self.theta) / r, (y + n * self.theta) / r) / r
    }
}

impl Kernel for ScaledKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let n = self.n() as f64;
        if ((x - y) / n.sqrt()).abs() < NEAR_DIAGONAL {
            return self.macro_kernel.diag(self.hat(0.5 * (x + y)));
        }
        self.macro_kernel.eval(self.hat(x), self.hat(y))
    }
    fn diag(&self, x: f64) -> f64 {
        self.macro_kernel.diag(self.hat(x))
    }
}

/// `sin(sqrt(2 - theta^2)(x - y)) / (pi (x - y))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineKernel {
    theta: f64,
    rate: f64,
}

impl SineKernel {
    pub fn new(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(SineKernel {
            theta,
            rate: (2.0 - theta * theta).sqrt(),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Diagonal value `sqrt(2 - theta^2) / pi`, the particle intensity.
    pub fn density(&self) -> f64 {
        self.rate / PI
    }
}

impl Kernel for SineKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        let t = self.rate * d;
        if t.abs() < 1e-4 {
            // sin(t)/t series, exact to rounding at this size
            self.density() * (1.0 - t * t / 6.0 * (1.0 - t * t / 20.0))
        } else {
            t.sin() / (PI * d)
        }
    }
    fn diag(&self, _x: f64) -> f64 {
        self.density()
    }
}

/// Reduced Palm kernel `K_x(y, z) = K(y, z) - K(y, x) K(x, z) / K(x, x)`.
#[derive(Debug, Clone)]
pub struct PalmKernel<K> {
    base: K,
    x: f64,
    kxx: f64,
}

impl<K: Kernel> PalmKernel<K> {
    pub fn new(base: K, x: f64) -> Result<Self> {
        check_finite(x)?;
        let kxx = base.diag(x);
        if !(kxx > 0.0) {
            return Err(Error::ConditioningPoint { x, diagonal: kxx });
        }
        Ok(PalmKernel { base, x, kxx })
    }

    pub fn base(&self) -> &K {
        &self.base
    }

    pub fn point(&self) -> f64 {
        self.x
    }

    pub fn base_diagonal(&self) -> f64 {
        self.kxx
    }
}

impl<K: Kernel> Kernel for PalmKernel<K> {
    fn eval(&self, y: f64, z: f64) -> f64 {
        self.base.eval(y, z) - self.base.eval(y, self.x) * self.base.eval(self.x, z) / self.kxx
    }
    fn diag(&self, y: f64) -> f64 {
        let k = self.base.eval(y, self.x);
        self.base.diag(y) - k * k / self.kxx
    }
}

/// Any of the kernels above behind one evaluation interface.
#[derive(Debug, Clone)]
pub enum KernelHandle {
    Finite(FiniteKernel),
    Macro(MacroKernel),
    Scaled(ScaledKernel),
    Sine(SineKernel),
    Palm(Box<PalmKernel<KernelHandle>>),
}

impl KernelHandle {
    /// Conditions this kernel on a particle at `x`.
    pub fn palm(self, x: f64) -> Result<KernelHandle> {
        Ok(KernelHandle::Palm(Box::new(PalmKernel::new(self, x)?)))
    }
}

impl Kernel for KernelHandle {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            KernelHandle::Finite(k) => k.eval(x, y),
            KernelHandle::Macro(k) => k.eval(x, y),
            KernelHandle::Scaled(k) => k.eval(x, y),
            KernelHandle::Sine(k) => k.eval(x, y),
            KernelHandle::Palm(k) => k.eval(x, y),
        }
    }
    fn diag(&self, x: f64) -> f64 {
        match self {
            KernelHandle::Finite(k) => Kernel::diag(k, x),
            KernelHandle::Macro(k) => Kernel::diag(k, x),
            KernelHandle::Scaled(k) => k.diag(x),
            KernelHandle::Sine(k) => k.diag(x),
            KernelHandle::Palm(k) => k.diag(x),
        }
    }
}

impl From<FiniteKernel> for KernelHandle {
    fn from(k: FiniteKernel) -> Self {
        KernelHandle::Finite(k)
    }
}
impl From<MacroKernel> for KernelHandle {
    fn from(k: MacroKernel) -> Self {
        KernelHandle::Macro(k)
    }
}
impl From<ScaledKernel> for KernelHandle {
    fn from(k: ScaledKernel) -> Self {
        KernelHandle::Scaled(k)
    }
}
impl From<SineKernel> for KernelHandle {
    fn from(k: SineKernel) -> Self {
        KernelHandle::Sine(k)
    }
}

fn check_points(pts: &[f64]) -> Result<()> {
    for &p in pts {
        check_finite(p)?;
    }
    Ok(())
}

/// `K^N(x, y)` by direct summation.
pub fn kernel_sum(n: usize, x: f64, y: f64) -> Result<f64> {
    check_points(&[x, y])?;
    Ok(FiniteKernel::new(n)?.sum(x, y))
}

/// `K^N(x, y)` by the Christoffel-Darboux formula.
pub fn kernel_cd(n: usize, x: f64, y: f64) -> Result<f64> {
    check_points(&[x, y])?;
    Ok(FiniteKernel::new(n)?.cd(x, y))
}

/// `K^N(x, x)` from the derivative form.
pub fn kernel_diag(n: usize, x: f64) -> Result<f64> {
    check_points(&[x])?;
    Ok(FiniteKernel::new(n)?.diag(x))
}

/// `L^N(y, y) = K^N(sqrt(N) y, sqrt(N) y) / sqrt(N)`.
pub fn scaled_diag(n: usize, y: f64) -> Result<f64> {
    check_points(&[y])?;
    Ok(MacroKernel::new(n)?.diag(y))
}

/// `K_theta^N(x, y)`.
pub fn scaled_kernel(n: usize, theta: f64, x: f64, y: f64) -> Result<f64> {
    check_points(&[x, y])?;
    Ok(ScaledKernel::new(n, theta)?.eval(x, y))
}

/// Sine kernel with intensity `sqrt(2 - theta^2) / pi`.
pub fn sine_kernel(theta: f64, x: f64, y: f64) -> Result<f64> {
    check_points(&[x, y])?;
    Ok(SineKernel::new(theta)?.eval(x, y))
}

/// Reduced Palm kernel of `base` at `x`.
pub fn palm_kernel<K: Kernel>(base: K, x: f64) -> Result<PalmKernel<K>> {
    PalmKernel::new(base, x)
}

/// `det[K(x_i, x_j)]`, the correlation function at `points`.
pub fn correlation<K: Kernel + ?Sized>(kernel: &K, points: &[f64]) -> Result<f64> {
    let n = points.len();
    if n > MAX_CORRELATION_POINTS {
        return Err(Error::domain(
            "correlation order",
            format!("{n} points exceeds the cap of {MAX_CORRELATION_POINTS}"),
        ));
    }
    check_points(points)?;
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = kernel.diag(points[i]);
        for j in i + 1..n {
            let v = kernel.eval(points[i], points[j]);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    Ok(determinant_in_place(&mut m, n))
}

/// Differences between Palm and plain correlation functions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CorrelationDifferences {
    /// One-point: `-K(x,y)^2 / K(x,x)`.
    pub d1: f64,
    /// Two-point interaction term: `-K(y,z)^2`.
    pub d2: f64,
    /// Palm pair term: `2 K(y,z) K(x,y) K(x,z) / K(x,x) - K(x,y)^2 K(x,z)^2 / K(x,x)^2`.
    pub d3: f64,
}

/// Correlation differences for `K_theta^N` conditioned at `x`.
pub fn correlation_differences(n: usize, theta: f64, x: f64, y: f64, z: f64) -> Result<CorrelationDifferences> {
    check_points(&[x, y, z])?;
    let k = ScaledKernel::new(n, theta)?;
    let kxx = k.diag(x);
    if !(kxx > 0.0) {
        return Err(Error::ConditioningPoint { x, diagonal: kxx });
    }
    let kxy = k.eval(x, y);
    let kxz = k.eval(x, z);
    let kyz = k.eval(y, z);
    let a = kxy * kxz / kxx;
    Ok(CorrelationDifferences {
        d1: -kxy * kxy / kxx,
        d2: -kyz * kyz,
        d3: 2.0 * kyz * a - a * a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

    #[test]
    fn small_n_values() {
        assert!((kernel_sum(1, 0.0, 0.0).unwrap() - INV_SQRT_PI).abs() < 1e-15);
        assert!((kernel_sum(2, 0.0, 0.0).unwrap() - INV_SQRT_PI).abs() < 1e-15);
        assert!((kernel_diag(1, 0.0).unwrap() - INV_SQRT_PI).abs() < 1e-15);
        let l4 = scaled_diag(4, 0.0).unwrap();
        assert!((l4 - 0.75 * INV_SQRT_PI).abs() < 1e-14, "{l4}");
        assert!((l4 - 0.423_142_1).abs() < 1e-7);
    }

    #[test]
    fn cd_matches_sum_and_is_symmetric() {
        let a = kernel_sum(4, 0.3, -0.5).unwrap();
        assert!((a - kernel_cd(4, 0.3, -0.5).unwrap()).abs() < 1e-12);
        let a = kernel_sum(3, 0.5, -0.2).unwrap();
        assert!((a - kernel_cd(3, 0.5, -0.2).unwrap()).abs() < 1e-12);
        let p0 = |x: f64| crate::hermite::eval_psi(0, x).unwrap();
        assert!((kernel_cd(1, 1.0, 2.0).unwrap() - p0(1.0) * p0(2.0)).abs() < 1e-12);
        assert_eq!(kernel_cd(17, 0.4, 1.9).unwrap(), kernel_cd(17, 1.9, 0.4).unwrap());
    }

    #[test]
    fn near_diagonal_fallback_is_continuous() {
        let k = FiniteKernel::new(40).unwrap();
        let x = 1.3;
        // the quotient loses about eps / |x - y| relative accuracy
        let far = k.cd(x, x + 1e-6);
        let near = k.cd(x, x + 1e-9);
        assert!((far - near).abs() < 1e-6 * near, "{far} vs {near}");
        assert!((near - k.sum(x, x + 1e-9)).abs() < 1e-11);
    }

    #[test]
    fn diagonal_forms_agree() {
        for n in [1, 2, 5, 31, 200] {
            let k = FiniteKernel::new(n).unwrap();
            for &x in &[0.0, 0.7, -3.1, 9.0] {
                let s = k.sum(x, x);
                assert!((k.diag(x) - s).abs() < 1e-11 * s.max(1.0), "n={n} x={x}");
                assert!((k.diag_four_term(x) - s).abs() < 1e-11 * s.max(1.0), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn macro_diagonal_approaches_semicircle() {
        let v = scaled_diag(500, 0.0).unwrap();
        assert!((v - SQRT_2 / PI).abs() <= 0.05);
    }

    #[test]
    fn scaled_kernel_routes_agree() {
        let k = ScaledKernel::new(64, 0.5).unwrap();
        for &(x, y) in &[(0.0, 1.0), (-3.2, 2.5), (10.0, -7.5)] {
            assert!((k.eval(x, y) - k.via_finite(x, y)).abs() < 1e-10);
        }
        let k0 = ScaledKernel::new(9, 0.0).unwrap();
        let f = FiniteKernel::new(9).unwrap();
        assert!((k0.eval(0.4, -1.1) - f.cd(0.4 / 3.0, -1.1 / 3.0) / 3.0).abs() < 1e-14);
        assert!(ScaledKernel::new(8, 1.5).is_err());
    }

    #[test]
    fn sine_kernel_values() {
        let k = SineKernel::new(0.0).unwrap();
        assert!((k.eval(2.0, 2.0) - 0.450_158_2).abs() < 1e-7);
        assert!(sine_kernel(1.0, 0.0, PI).unwrap().abs() < 1e-16);
        let s = SineKernel::new(0.5).unwrap();
        assert!((s.eval(1e-7, 0.0) - s.density()).abs() < 1e-13);
        assert!((s.eval(3.0, 1.0) - s.eval(2.0, 0.0)).abs() < 1e-15);
    }

    #[test]
    fn palm_kernel_vanishes_at_conditioning_point() {
        let base = FiniteKernel::new(8).unwrap();
        let p = palm_kernel(&base, 0.4).unwrap();
        assert!(p.eval(0.4, 0.4).abs() < 1e-15);
        assert!(p.diag(0.4).abs() < 1e-15);
        for &y in &[-2.0, 0.1, 1.7] {
            assert!(p.eval(y, 0.4).abs() < 1e-15);
            assert!((p.eval(y, 0.9) - p.eval(0.9, y)).abs() < 1e-15);
        }
        let far = palm_kernel(FiniteKernel::new(2).unwrap(), 60.0);
        assert!(matches!(far, Err(Error::ConditioningPoint { .. })));
    }

    #[test]
    fn handle_dispatch_and_nested_palm() {
        let h: KernelHandle = ScaledKernel::new(32, 0.2).unwrap().into();
        let direct = ScaledKernel::new(32, 0.2).unwrap();
        assert_eq!(h.eval(0.3, -0.8), direct.eval(0.3, -0.8));
        let p = h.palm(0.0).unwrap().palm(1.0).unwrap();
        assert!(p.eval(0.0, 0.5).abs() < 1e-14);
        assert!(p.eval(1.0, 0.5).abs() < 1e-14);
    }

    #[test]
    fn correlation_basics() {
        let k = FiniteKernel::new(10).unwrap();
        assert!((correlation(&k, &[0.3]).unwrap() - k.diag(0.3)).abs() < 1e-15);
        let (y, z) = (0.2, -0.9);
        let rho2 = correlation(&k, &[y, z]).unwrap();
        let expected = k.diag(y) * k.diag(z) - k.cd(y, z).powi(2);
        assert!((rho2 - expected).abs() < 1e-14);
        let rho1 = k.diag(0.5);
        let close = correlation(&k, &[0.5, 0.5 + 1e-3]).unwrap();
        assert!(close.abs() < 1e-4 * rho1 * rho1, "{close}");
        assert!(correlation(&k, &[0.5, 0.5 + 1e-10]).unwrap().abs() < 1e-8);
        assert!(correlation(&k, &[0.0; 9]).is_err());
    }

    #[test]
    fn correlation_difference_identities() {
        let (n, theta, x) = (64, 0.5, 0.3);
        let k = ScaledKernel::new(n, theta).unwrap();
        let d = correlation_differences(n, theta, x, x, 1.0).unwrap();
        assert!((d.d1 + k.diag(x)).abs() < 1e-14);
        let (y, z) = (-0.7, 1.9);
        let d = correlation_differences(n, theta, x, y, z).unwrap();
        assert!(d.d1 <= 0.0 && d.d2 <= 0.0);
        let p = palm_kernel(&k, x).unwrap();
        let oracle = -p.eval(y, z).powi(2) + k.eval(y, z).powi(2);
        assert!((d.d3 - oracle).abs() < 1e-13);
    }
}
