//! Oscillator wave functions
//!
//! `psi_n(x) = (sqrt(pi) 2^n n!)^(-1/2) exp(-x^2/2) H_n(x)` evaluated by the
//! normalized three-term recurrence
//!
//! ```text
//! psi_{k+1}(x) = x sqrt(2/(k+1)) psi_k(x) - sqrt(k/(k+1)) psi_{k-1}(x)
//! ```
//!
//! started from `psi_0(x) = pi^(-1/4) exp(-x^2/2)`. Forward recurrence is
//! stable in the oscillatory region `|x| <= sqrt(2n)`; past the turning point
//! the values decay and only absolute accuracy is retained.
//!
//! For large `|x|` the Gaussian prefactor underflows long before the
//! polynomial growth catches up, so the recurrence can run on a mantissa with
//! a separately tracked binary exponent.

use std::f64::consts::{FRAC_PI_2, LN_2, PI, SQRT_2};

use crate::error::{check_finite, Error, Result};

/// `pi^(-1/4)`
pub const PSI0_AT_ZERO: f64 = 0.751_125_544_464_942_5;

/// Beyond this `|x|`, `exp(-x^2/2)` drops below ~1e-136 and the automatic
/// policy switches to exponent tracking.
pub const AUTO_TRACKING_ONSET: f64 = 25.0;

const RESCALE_BITS: i64 = 256;
const RESCALE_LIMIT: f64 = 1.157_920_892_373_162e77; // 2^256
const RESCALE_FACTOR: f64 = 8.636_168_555_094_445e-78; // 2^-256

/// Underflow guard used while running the recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalingPolicy {
    /// Plain double precision; `exp(-x^2/2)` underflows for `|x| > ~38`.
    Direct,
    /// Mantissa plus integer binary exponent throughout.
    ExponentTracked,
    /// Direct for `|x| <= AUTO_TRACKING_ONSET`, tracked beyond.
    #[default]
    Auto,
}

/// A value `mantissa * 2^exponent` with `|mantissa|` in `[1, 2)` (or zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledValue {
    pub mantissa: f64,
    pub exponent: i64,
}

impl ScaledValue {
    fn normalized(m: f64, e: i64) -> Self {
        if m == 0.0 || !m.is_finite() {
            return ScaledValue {
                mantissa: m,
                exponent: 0,
            };
        }
        let shift = m.abs().log2().floor() as i64;
        let mut mantissa = m * pow2(-shift);
        let mut exponent = e + shift;
        // log2 can be off by one ulp at exact powers of two
        if mantissa.abs() >= 2.0 {
            mantissa *= 0.5;
            exponent += 1;
        } else if mantissa.abs() < 1.0 {
            mantissa *= 2.0;
            exponent -= 1;
        }
        ScaledValue { mantissa, exponent }
    }

    /// The value as an `f64`, flushing to (signed) zero on underflow.
    pub fn value(&self) -> f64 {
        ldexp(self.mantissa, self.exponent)
    }

    /// `ln |value|`, finite even when `value()` underflows.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.exponent as f64 * LN_2
    }
}

fn pow2(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// `m * 2^e` without intermediate overflow; underflows gracefully.
pub(crate) fn ldexp(m: f64, e: i64) -> f64 {
    if m == 0.0 {
        return m;
    }
    let mut m = m;
    let mut e = e;
    while e > 1000 {
        m *= pow2(1000);
        e -= 1000;
    }
    while e < -1000 {
        m *= pow2(-1000);
        e += 1000;
        if m == 0.0 {
            return m;
        }
    }
    m * pow2(e)
}

/// Stable evaluator of `psi_0 .. psi_{n_max}` and their derivatives.
///
/// Recurrence coefficients are tabulated once; the evaluator is immutable and
/// can be shared freely between threads.
#[derive(Debug, Clone)]
pub struct OscillatorEvaluator {
    n_max: usize,
    policy: ScalingPolicy,
    // up[k] = sqrt(2/(k+1)), down[k] = sqrt(k/(k+1))
    up: Vec<f64>,
    down: Vec<f64>,
}

impl OscillatorEvaluator {
    pub fn new(n_max: usize) -> Self {
        Self::with_policy(n_max, ScalingPolicy::Auto)
    }

    pub fn with_policy(n_max: usize, policy: ScalingPolicy) -> Self {
        // one spare index so derivatives of psi_{n_max} need no second table
        let len = n_max + 2;
        let up = (0..len).map(|k| (2.0 / (k as f64 + 1.0)).sqrt()).collect();
        let down = (0..len)
            .map(|k| (k as f64 / (k as f64 + 1.0)).sqrt())
            .collect();
        OscillatorEvaluator {
            n_max,
            policy,
            up,
            down,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn policy(&self) -> ScalingPolicy {
        self.policy
    }

    fn tracks(&self, x: f64) -> bool {
        match self.policy {
            ScalingPolicy::Direct => false,
            ScalingPolicy::ExponentTracked => true,
            ScalingPolicy::Auto => x.abs() > AUTO_TRACKING_ONSET,
        }
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            return Err(Error::domain(
                "oscillator index",
                format!("n = {n} exceeds n_max = {}", self.n_max),
            ));
        }
        Ok(())
    }

    /// Runs the recurrence up to index `top` and hands each `(k, mantissa,
    /// exponent)` to `sink`. The exponent is shared by consecutive entries
    /// until the next rescale.
    #[inline]
    fn run(&self, top: usize, x: f64, mut sink: impl FnMut(usize, f64, i64)) {
        debug_assert!(top < self.up.len());
        let tracked = self.tracks(x);
        let (mut prev, mut exp2) = if tracked {
            let t = -0.5 * x * x / LN_2;
            let e = t.floor();
            (PSI0_AT_ZERO * (t - e).exp2(), e as i64)
        } else {
            (PSI0_AT_ZERO * (-0.5 * x * x).exp(), 0)
        };
        sink(0, prev, exp2);
        if top == 0 {
            return;
        }
        let mut cur = SQRT_2 * x * prev;
        sink(1, cur, exp2);
        for k in 1..top {
            let mut next = x * self.up[k] * cur - self.down[k] * prev;
            if tracked && next.abs() > RESCALE_LIMIT {
                next *= RESCALE_FACTOR;
                cur *= RESCALE_FACTOR;
                exp2 += RESCALE_BITS;
            }
            prev = cur;
            cur = next;
            sink(k + 1, cur, exp2);
        }
    }

    /// `psi_n(x)`.
    pub fn psi(&self, n: usize, x: f64) -> Result<f64> {
        self.check_index(n)?;
        check_finite(x)?;
        Ok(self.psi_unchecked(n, x))
    }

    pub(crate) fn psi_unchecked(&self, n: usize, x: f64) -> f64 {
        let mut out = 0.0;
        self.run(n, x, |k, m, e| {
            if k == n {
                out = ldexp(m, e);
            }
        });
        out
    }

    /// `psi_n(x)` as mantissa and binary exponent; never underflows.
    pub fn psi_scaled(&self, n: usize, x: f64) -> Result<ScaledValue> {
        self.check_index(n)?;
        check_finite(x)?;
        // always tracked here, regardless of policy
        let t = -0.5 * x * x / LN_2;
        let e0 = t.floor();
        let mut prev = PSI0_AT_ZERO * (t - e0).exp2();
        let mut exp2 = e0 as i64;
        if n == 0 {
            return Ok(ScaledValue::normalized(prev, exp2));
        }
        let mut cur = SQRT_2 * x * prev;
        for k in 1..n {
            let mut next = x * self.up[k] * cur - self.down[k] * prev;
            if next.abs() > RESCALE_LIMIT {
                next *= RESCALE_FACTOR;
                cur *= RESCALE_FACTOR;
                exp2 += RESCALE_BITS;
            }
            prev = cur;
            cur = next;
        }
        Ok(ScaledValue::normalized(cur, exp2))
    }

    /// `[psi_0(x), .., psi_{n_max}(x)]` from a single recurrence pass.
    pub fn batch(&self, x: f64) -> Result<Vec<f64>> {
        check_finite(x)?;
        let mut out = vec![0.0; self.n_max + 1];
        self.batch_into(x, &mut out);
        Ok(out)
    }

    /// Fills `out[k] = psi_k(x)` for `k < out.len()`; `out.len() <= n_max + 2`.
    pub fn batch_into(&self, x: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        let top = out.len() - 1;
        let mut exps = if self.tracks(x) {
            Some(vec![0i64; out.len()])
        } else {
            None
        };
        self.run(top, x, |k, m, e| {
            out[k] = m;
            if let Some(ex) = exps.as_mut() {
                ex[k] = e;
            }
        });
        if let Some(ex) = exps {
            for (v, e) in out.iter_mut().zip(ex) {
                *v = ldexp(*v, e);
            }
        }
    }

    /// `[psi_{top+1-K}(x), .., psi_top(x)]`, with `psi_{-1} = psi_{-2} = .. = 0`.
    /// Requires `top <= n_max + 1`.
    #[inline]
    pub fn window<const K: usize>(&self, top: usize, x: f64) -> [f64; K] {
        let mut m = [0.0; K];
        let mut e = [0i64; K];
        let first = (top + 1).saturating_sub(K);
        let offset = K - (top + 1 - first);
        self.run(top, x, |k, mk, ek| {
            if k >= first {
                m[offset + k - first] = mk;
                e[offset + k - first] = ek;
            }
        });
        let mut out = [0.0; K];
        for i in 0..K {
            out[i] = ldexp(m[i], e[i]);
        }
        out
    }

    /// `psi_n'(x)` from `sqrt(2) psi_n' = sqrt(n) psi_{n-1} - sqrt(n+1) psi_{n+1}`.
    pub fn derivative(&self, n: usize, x: f64) -> Result<f64> {
        self.check_index(n)?;
        check_finite(x)?;
        let [below, _, above] = self.window::<3>(n + 1, x);
        let nf = n as f64;
        Ok((nf.sqrt() * below - (nf + 1.0).sqrt() * above) / SQRT_2)
    }
}

/// `psi_n(x)`.
pub fn eval_psi(n: usize, x: f64) -> Result<f64> {
    OscillatorEvaluator::new(n).psi(n, x)
}

/// `[psi_0(x), .., psi_{n_max}(x)]` in a single recurrence pass.
pub fn eval_psi_batch(n_max: usize, x: f64) -> Result<Vec<f64>> {
    OscillatorEvaluator::new(n_max).batch(x)
}

/// `psi_n'(x)`.
pub fn eval_psi_derivative(n: usize, x: f64) -> Result<f64> {
    OscillatorEvaluator::new(n).derivative(n, x)
}

/// Leading-order Plancherel-Rotach approximation of `psi_{N+l}(sqrt(2N) cos tau)`
/// in the oscillatory regime:
///
/// ```text
/// (pi sin tau)^(-1/2) (2/N)^(1/4) sin( N(2 tau - sin 2 tau)/2 + (l + 1/2) tau + pi/4 )
/// ```
///
/// The relative error is `O(1/(N sin tau))`. Requires `N sin^3 tau >= 1`.
pub fn plancherel_rotach_bulk(n: usize, l: i32, tau: f64) -> Result<f64> {
    check_finite(tau)?;
    if !(-1..=1).contains(&l) {
        return Err(Error::domain("index shift l", format!("{l} not in {{-1, 0, 1}}")));
    }
    if !(tau > 0.0 && tau <= FRAC_PI_2 + 1e-15) {
        return Err(Error::domain("tau", format!("{tau} not in (0, pi/2]")));
    }
    if n == 0 {
        return Err(Error::domain("N", "must be positive"));
    }
    let nf = n as f64;
    let s = tau.sin();
    let regime = nf * s * s * s;
    if regime < 1.0 {
        return Err(Error::OutOfRegime { value: regime });
    }
    let amplitude = (PI * s).powf(-0.5) * (2.0 / nf).powf(0.25);
    let phase = 0.5 * nf * (2.0 * tau - (2.0 * tau).sin())
        + (l as f64 + 0.5) * tau
        + 0.25 * PI;
    Ok(amplitude * phase.sin())
}
