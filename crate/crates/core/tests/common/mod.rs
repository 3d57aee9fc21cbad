//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Fundamental TE mode of an asymmetric slab (film `nf` of thickness `d`
/// between cover `nc` and substrate `ns`): returns `(n_eff, n_g)`.
///
/// Dispersion relation `k0 a d = atan(g/a) + atan(q/a)` with
/// `a = sqrt(nf^2 - n^2)`, `g = sqrt(n^2 - nc^2)`, `q = sqrt(n^2 - ns^2)`,
/// solved by bisection; the group index comes from implicit
/// differentiation of the same relation.
pub fn slab_te0(nf: f64, nc: f64, ns: f64, d: f64, wavelength: f64) -> (f64, f64) {
    let k0 = 2.0 * PI / wavelength;
    let f = |n: f64| {
        let a = (nf * nf - n * n).sqrt();
        let g = (n * n - nc * nc).sqrt();
        let q = (n * n - ns * ns).sqrt();
        k0 * a * d - (g / a).atan() - (q / a).atan()
    };
    let (mut lo, mut hi) = (nc.max(ns) + 1e-12, nf - 1e-12);
    assert!(f(lo) > 0.0 && f(hi) < 0.0, "no guided TE0 mode");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let n = 0.5 * (lo + hi);
    let a = (nf * nf - n * n).sqrt();
    let g = (n * n - nc * nc).sqrt();
    let q = (n * n - ns * ns).sqrt();
    let f_k0 = a * d;
    let f_n = -k0 * d * n / a - n / (a * g) - n / (a * q);
    let dn_dk0 = -f_k0 / f_n;
    (n, n + k0 * dn_dk0)
}

/// Arithmetic mean and standard error.
pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn slab_oracle_self_check() {
    // symmetric slab limit: thick film pushes n_eff toward the film index
    let (n, ng) = slab_te0(2.0, 1.0, 1.51, 175.0, 785.0);
    assert!(n > 1.51 && n < 2.0 && ng > n);
    let (thick, _) = slab_te0(2.0, 1.0, 1.51, 20000.0, 785.0);
    assert!((thick - 2.0).abs() < 1e-3);
}

/// One-sample Kolmogorov-Smirnov test of `samples` against an exponential
/// distribution with the given rate; returns the asymptotic p-value.
pub fn ks_exponential(samples: &[f64], rate: f64) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = 1.0 - (-rate * v).exp();
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    if lambda < 0.3 {
        // the series converges slowly here and the p-value is 1 to 1e-9
        return 1.0;
    }
    let p: f64 = (1..=100).map(|k| 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp()).sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn ks_oracle_self_check() {
    // exact exponential quantiles pass, a wrong rate fails
    let n = 2000;
    let q: Vec<f64> = (0..n).map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln()).collect();
    assert!(ks_exponential(&q, 1.0) > 0.99);
    assert!(ks_exponential(&q, 1.3) < 1e-6);
}

/// Standard deviation of `f` over `n` draws of independent Gaussian inputs.
pub fn monte_carlo_sigma(f: impl Fn(&[f64]) -> f64, inputs: &[(f64, f64)], n: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; inputs.len()];
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            for (xi, &(m, s)) in x.iter_mut().zip(inputs) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *xi = m + s * z;
            }
            f(&x)
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}
