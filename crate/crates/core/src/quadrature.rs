//! Gauss rules, composite panel rules and adaptive drivers.
//!
//! The adaptive 1-D driver integrates `K` integrands at once on a shared node
//! set; refinement is driven by the worst component. Multi-dimensional
//! integrals use tensor products of a composite rule refined globally until
//! two successive levels agree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::hermite::OscillatorEvaluator;
use crate::linalg::symmetric_tridiagonal_eigenvalues;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // P_n(z) and P_n'(z) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss-Hermite rule for the weight `exp(-x^2)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    /// Classical weights: `sum w_m g(x_m) ~ int exp(-x^2) g(x) dx`.
    pub weights: Vec<f64>,
    /// Weights for integrands that already carry the Gaussian:
    /// `sum W_m F(x_m) ~ int F(x) dx`, exact for `F = exp(-x^2) * poly` of
    /// degree `< 2n`. Equal to `1 / (n psi_{n-1}(x_m)^2)`.
    pub function_weights: Vec<f64>,
}

/// `n`-point Gauss-Hermite rule (Golub-Welsch nodes polished by Newton on
/// `psi_n`).
pub fn gauss_hermite(n: usize) -> Result<GaussHermite> {
    if n == 0 {
        return Err(Error::domain("Gauss-Hermite order", "must be positive"));
    }
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mut nodes = symmetric_tridiagonal_eigenvalues(&vec![0.0; n], &off)?;
    let ev = OscillatorEvaluator::new(n);
    let nf = n as f64;
    let mut function_weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let [pm, p] = ev.window::<2>(n, *x);
            let dp = (2.0 * nf).sqrt() * pm - *x * p;
            if dp == 0.0 {
                break;
            }
            *x -= p / dp;
        }
        let [pm, _] = ev.window::<2>(n, *x);
        function_weights.push(1.0 / (nf * pm * pm));
    }
    // symmetrize to remove last-bit asymmetry
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (function_weights[i] + function_weights[j]);
        function_weights[i] = w;
        function_weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .zip(&function_weights)
        .map(|(x, w)| w * (-x * x).exp())
        .collect();
    Ok(GaussHermite {
        nodes,
        weights,
        function_weights,
    })
}

/// Composite Gauss-Legendre rule over a list of panels.
#[derive(Debug, Clone)]
pub struct PanelRule {
    panels: Vec<(f64, f64)>,
    order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelRule {
    pub fn new(panels: Vec<(f64, f64)>, order: usize) -> Self {
        let (g, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(panels.len() * order);
        let mut weights = Vec::with_capacity(panels.len() * order);
        for &(a, b) in &panels {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (gi, wi) in g.iter().zip(&w) {
                nodes.push(mid + half * gi);
                weights.push(half * wi);
            }
        }
        PanelRule {
            panels,
            order,
            nodes,
            weights,
        }
    }

    pub fn panels(&self) -> &[(f64, f64)] {
        &self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Every panel bisected.
    pub fn refined(&self) -> Self {
        let panels = self
            .panels
            .iter()
            .flat_map(|&(a, b)| {
                let m = 0.5 * (a + b);
                [(a, m), (m, b)]
            })
            .collect();
        PanelRule::new(panels, self.order)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Splits `[a, b]` into panels no wider than `width`, all of equal size.
pub fn uniform_panels(a: f64, b: f64, width: f64) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let count = ((b - a) / width).ceil().max(1.0) as usize;
    let h = (b - a) / count as f64;
    (0..count)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == count { b } else { a + (i + 1) as f64 * h };
            (lo, hi)
        })
        .collect()
}

/// Panels on `[a, b]` growing geometrically away from `a` (if `from_left`) or
/// from `b`, starting at width `first` and doubling.
pub fn graded_panels(a: f64, b: f64, first: f64, from_left: bool) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let mut widths = Vec::new();
    let mut covered = 0.0;
    let mut w = first;
    let len = b - a;
    while covered + w < len {
        widths.push(w);
        covered += w;
        w *= 2.0;
    }
    widths.push(len - covered);
    let mut out = Vec::with_capacity(widths.len());
    if from_left {
        let mut x = a;
        for (i, w) in widths.iter().enumerate() {
            let hi = if i + 1 == widths.len() { b } else { x + w };
            out.push((x, hi));
            x = hi;
        }
    } else {
        let mut x = b;
        for (i, w) in widths.iter().enumerate() {
            let lo = if i + 1 == widths.len() { a } else { x - w };
            out.push((lo, x));
            x = lo;
        }
        out.reverse();
    }
    out
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<const K: usize> {
    pub value: [f64; K],
    pub error: [f64; K],
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub order: usize,
    pub max_subdivisions: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            rtol: 1e-7,
            atol: 1e-13,
            order: 8,
            max_subdivisions: 200_000,
        }
    }
}

struct Gauss {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Gauss {
    fn apply<const K: usize>(&self, f: &impl Fn(f64) -> [f64; K], a: f64, b: f64) -> ([f64; K], [f64; K]) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut v = [0.0; K];
        let mut abs = [0.0; K];
        for (g, w) in self.nodes.iter().zip(&self.weights) {
            let y = f(mid + half * g);
            for c in 0..K {
                v[c] += w * half * y[c];
                abs[c] += w * half * y[c].abs();
            }
        }
        (v, abs)
    }
}

struct Panel<const K: usize> {
    a: f64,
    b: f64,
    left: [f64; K],
    right: [f64; K],
    error: [f64; K],
    priority: f64,
}

impl<const K: usize> PartialEq for Panel<K> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const K: usize> Eq for Panel<K> {}
impl<const K: usize> PartialOrd for Panel<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Panel<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

/// Globally adaptive integration of `K` integrands over the union of
/// `panels`. Each panel is compared against its two halves; the panel with
/// the largest error is bisected until every component meets
/// `max(atol, rtol * max(|I|, 1e-3 * int |f|))`.
pub fn adaptive<const K: usize>(
    f: impl Fn(f64) -> [f64; K],
    panels: &[(f64, f64)],
    opts: &AdaptiveOptions,
) -> Result<Estimate<K>> {
    let (nodes, weights) = gauss_legendre(opts.order);
    let gauss = Gauss { nodes, weights };
    let mut evaluations = 0usize;

    struct Raw<const K: usize> {
        a: f64,
        b: f64,
        left: [f64; K],
        right: [f64; K],
        error: [f64; K],
    }
    let split = |a: f64, b: f64, whole: [f64; K], evals: &mut usize| -> (Raw<K>, [f64; K]) {
        let m = 0.5 * (a + b);
        let (l, la) = gauss.apply(&f, a, m);
        let (r, ra) = gauss.apply(&f, m, b);
        *evals += 2 * opts.order;
        let mut error = [0.0; K];
        let mut abs = [0.0; K];
        for c in 0..K {
            error[c] = (l[c] + r[c] - whole[c]).abs();
            abs[c] = la[c] + ra[c];
        }
        (
            Raw {
                a,
                b,
                left: l,
                right: r,
                error,
            },
            abs,
        )
    };

    let mut raws = Vec::with_capacity(panels.len());
    let mut abs_total = [0.0; K];
    for &(a, b) in panels {
        if b <= a {
            continue;
        }
        let (whole, _) = gauss.apply(&f, a, b);
        evaluations += opts.order;
        let (raw, abs) = split(a, b, whole, &mut evaluations);
        for c in 0..K {
            abs_total[c] += abs[c];
        }
        raws.push(raw);
    }

    let mut value = [0.0; K];
    let mut error = [0.0; K];
    for r in &raws {
        for c in 0..K {
            value[c] += r.left[c] + r.right[c];
            error[c] += r.error[c];
        }
    }
    let tol = |value: &[f64; K]| -> [f64; K] {
        let mut t = [0.0; K];
        for c in 0..K {
            t[c] = opts
                .atol
                .max(opts.rtol * value[c].abs().max(1e-3 * abs_total[c]));
        }
        t
    };
    let scale = tol(&value);
    let priority = |e: &[f64; K]| -> f64 {
        (0..K).map(|c| e[c] / scale[c]).fold(0.0, f64::max)
    };
    let mut heap: BinaryHeap<Panel<K>> = raws
        .into_iter()
        .map(|r| Panel {
            priority: priority(&r.error),
            a: r.a,
            b: r.b,
            left: r.left,
            right: r.right,
            error: r.error,
        })
        .collect();

    let converged = |value: &[f64; K], error: &[f64; K]| {
        let t = tol(value);
        (0..K).all(|c| error[c] <= t[c])
    };

    let mut subdivisions = 0usize;
    while !converged(&value, &error) {
        if subdivisions >= opts.max_subdivisions {
            let t = tol(&value);
            let worst = (0..K)
                .max_by(|&i, &j| (error[i] / t[i]).total_cmp(&(error[j] / t[j])))
                .unwrap_or(0);
            return Err(Error::Tolerance {
                estimate: error[worst],
                tolerance: t[worst],
            });
        }
        let Some(p) = heap.pop() else { break };
        subdivisions += 1;
        let m = 0.5 * (p.a + p.b);
        let (l, _) = split(p.a, m, p.left, &mut evaluations);
        let (r, _) = split(m, p.b, p.right, &mut evaluations);
        for c in 0..K {
            value[c] += l.left[c] + l.right[c] + r.left[c] + r.right[c] - p.left[c] - p.right[c];
            error[c] += l.error[c] + r.error[c] - p.error[c];
        }
        for raw in [l, r] {
            heap.push(Panel {
                priority: priority(&raw.error),
                a: raw.a,
                b: raw.b,
                left: raw.left,
                right: raw.right,
                error: raw.error,
            });
        }
    }
    // recompute the error sum to shed accumulated round-off in the updates
    let mut error = [0.0; K];
    let mut value = [0.0; K];
    for p in heap.iter() {
        for c in 0..K {
            error[c] += p.error[c];
        }
    }
    let mut sorted: Vec<&Panel<K>> = heap.iter().collect();
    sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
    for p in sorted {
        for c in 0..K {
            value[c] += p.left[c] + p.right[c];
        }
    }
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

/// `sum_i sum_j w_i w_j f(i, j)` over the tensor product of `rule` with
/// itself. With `symmetric`, `f(i, j) == f(j, i)` is assumed and only the
/// upper triangle is evaluated.
pub fn tensor_sum<const K: usize>(
    rule: &PanelRule,
    symmetric: bool,
    f: impl Fn(usize, usize) -> [f64; K],
) -> [f64; K] {
    let n = rule.len();
    let w = &rule.weights;
    let mut total = [0.0; K];
    for i in 0..n {
        let mut row = [0.0; K];
        if symmetric {
            let d = f(i, i);
            for c in 0..K {
                row[c] += 0.5 * w[i] * d[c];
            }
            for j in i + 1..n {
                let v = f(i, j);
                for c in 0..K {
                    row[c] += w[j] * v[c];
                }
            }
            for c in 0..K {
                total[c] += 2.0 * w[i] * row[c];
            }
        } else {
            for j in 0..n {
                let v = f(i, j);
                for c in 0..K {
                    row[c] += w[j] * v[c];
                }
            }
            for c in 0..K {
                total[c] += w[i] * row[c];
            }
        }
    }
    total
}

/// Repeatedly evaluates `eval` on `rule`, `rule.refined()`, ... until two
/// successive levels agree to `max(atol, rtol * |value|)` in every component.
/// Returns the finer of the last two levels.
pub fn refine_until<const K: usize>(
    rule: PanelRule,
    rtol: f64,
    atol: f64,
    max_levels: usize,
    mut eval: impl FnMut(&PanelRule) -> [f64; K],
) -> Result<Estimate<K>> {
    let mut coarse = eval(&rule);
    let mut evaluations = rule.len();
    let mut current = rule;
    let mut last_error = [f64::INFINITY; K];
    for _ in 0..max_levels {
        let fine_rule = current.refined();
        let fine = eval(&fine_rule);
        evaluations += fine_rule.len();
        let mut ok = true;
        for c in 0..K {
            last_error[c] = (fine[c] - coarse[c]).abs();
            if last_error[c] > atol.max(rtol * fine[c].abs()) {
                ok = false;
            }
        }
        if ok {
            return Ok(Estimate {
                value: fine,
                error: last_error,
                evaluations,
            });
        }
        coarse = fine;
        current = fine_rule;
    }
    let worst = (0..K)
        .max_by(|&i, &j| last_error[i].total_cmp(&last_error[j]))
        .unwrap_or(0);
    Err(Error::Tolerance {
        estimate: last_error[worst],
        tolerance: atol.max(rtol * coarse[worst].abs()),
    })
}
