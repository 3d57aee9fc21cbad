//! Gauss–Legendre rules and a bisection-adaptive integrator.
//!
//! The integrator works on any value type that can be scaled and summed, so
//! the same machinery handles real power densities, complex path integrals
//! and small fixed-size vectors of channel powers.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait QuadValue: Copy {
    fn zero() -> Self;
    /// `self + w * x`
    fn axpy(self, w: f64, x: Self) -> Self;
    fn norm(self) -> f64;
    fn dist(self, other: Self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn axpy(self, w: f64, x: Self) -> Self {
        self + w * x
    }
    fn norm(self) -> f64 {
        self.abs()
    }
    fn dist(self, other: Self) -> f64 {
        (self - other).abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn axpy(self, w: f64, x: Self) -> Self {
        self + x * w
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
    fn dist(self, other: Self) -> f64 {
        (self - other).norm()
    }
}

impl<const N: usize> QuadValue for [f64; N] {
    fn zero() -> Self {
        [0.0; N]
    }
    fn axpy(mut self, w: f64, x: Self) -> Self {
        for (a, b) in self.iter_mut().zip(x) {
            *a += w * b;
        }
        self
    }
    fn norm(self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
    fn dist(self, other: Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Nodes and weights of an `n`-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Rule shared across the crate for adaptive panels.
    pub fn panel() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
    }

    pub fn integrate<T: QuadValue>(&self, a: f64, b: f64, f: &mut impl FnMut(f64) -> T) -> T {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc.axpy(w * half, f(mid + half * x));
        }
        acc
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const PANEL_ORDER: usize = 16;
const MAX_PANELS: usize = 20_000;
const ROUNDOFF: f64 = 256.0 * f64::EPSILON;
const MIN_PANEL: f64 = 1e-14;

/// Adaptive integration tolerances.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-9, abs: 1e-12 }
    }
}

/// Integrates `f` over `[a, b]` split at `breaks`, bisecting panels until
/// the one-level refinement changes each panel by less than its share of
/// the tolerance, by less than `rel` of its own magnitude, or by less than
/// roundoff on the global scale.
pub fn adaptive<T: QuadValue>(
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
    mut f: impl FnMut(f64) -> T,
) -> Result<T> {
    let rule = GaussLegendre::panel();
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    edges.extend(inner);
    edges.push(b);

    // Coarse pass for a global magnitude estimate.
    let mut stack: Vec<(f64, f64, T, usize)> = Vec::new();
    let mut scale = 0.0;
    for w in edges.windows(2) {
        let v = rule.integrate(w[0], w[1], &mut f);
        scale += v.norm();
        stack.push((w[0], w[1], v, 0));
    }
    let width = (b - a).abs().max(f64::MIN_POSITIVE);
    let mut total = T::zero();
    let mut worst: f64 = 0.0;
    let mut panels = 0usize;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, &mut f);
        let right = rule.integrate(mid, hi, &mut f);
        let refined = left.axpy(1.0, right);
        let err = refined.dist(whole);
        let share = (hi - lo).abs() / width;
        let allowed =
            ((tol.rel * scale).max(tol.abs) * share.max(1e-6)).max(ROUNDOFF * scale).max(tol.rel * refined.norm());
        panels += 1;
        if err <= allowed || depth >= 50 || (hi - lo).abs() < MIN_PANEL * width {
            if err > allowed {
                worst = worst.max(err);
            }
            total = total.axpy(1.0, refined);
        } else if panels > MAX_PANELS {
            return Err(Error::Quadrature { achieved: err / scale.max(f64::MIN_POSITIVE), requested: tol.rel });
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    if worst > (tol.rel * scale).max(tol.abs) * 10.0 {
        return Err(Error::Quadrature { achieved: worst / scale.max(f64::MIN_POSITIVE), requested: tol.rel });
    }
    Ok(total)
}
