//! Shift-invert Arnoldi for the few eigenvalues of a sparse real matrix
//! closest to a shift, with explicit restarts and re-shifting.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct EigenOptions {
    pub krylov_dim: usize,
    pub tol: f64,
    pub max_restarts: usize,
    /// Restarts at one shift before moving it next to the leading estimate.
    pub restarts_per_shift: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

pub(crate) struct SparseMatrix {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    #[cfg(test)]
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    fn shifted_lu(&self, sigma: f64) -> Result<faer::sparse::linalg::solvers::Lu<usize, f64>> {
        let mut t: Vec<Triplet<usize, usize, f64>> =
            self.entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        t.extend((0..self.n).map(|i| Triplet::new(i, i, -sigma)));
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| Error::Format(format!("sparse assembly: {e:?}")))?;
        m.sp_lu().map_err(|e| {
            Error::Eigen { iterations: 0, residual: f64::NAN }.context(format!("LU at shift {sigma}: {e:?}"))
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Ritz {
    theta: f64,
    y: Vec<f64>,
    residual: f64,
}

/// Eigenpairs of `a` nearest `sigma` (at most `nev`), sorted by distance to
/// the final shift. Deterministic for identical inputs.
pub(crate) fn nearest_eigenpairs(
    a: &SparseMatrix,
    sigma: f64,
    nev: usize,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>> {
    let n = a.n;
    let nev = nev.min(n);
    if nev == 0 {
        return Ok(Vec::new());
    }
    let m = opts.krylov_dim.max(2 * nev + 10).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut shift = sigma;
    let mut lu = a.shifted_lu(shift)?;
    let mut since_shift = 0;
    let mut worst = f64::INFINITY;

    for restart in 0..opts.max_restarts {
        let s = norm(&start);
        start.iter_mut().for_each(|v| *v /= s);
        let mut basis = vec![start.clone()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut dim = m;
        for j in 0..m {
            let mut w = basis[j].clone();
            lu.solve_in_place(faer::MatMut::from_column_major_slice_mut(&mut w, n, 1));
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    h[i][j] += c;
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let beta = norm(&w);
            h[j + 1][j] = beta;
            if beta < 1e-14 * h[j][j].abs().max(1e-300) {
                dim = j + 1;
                break;
            }
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        }

        let ritz = ritz_pairs(&h, dim)?;
        let wanted = &ritz[..nev.min(ritz.len())];
        worst = wanted.iter().map(|r| r.residual).fold(0.0, f64::max);
        let vector = |r: &Ritz| {
            let mut x = vec![0.0; n];
            for (k, c) in r.y.iter().enumerate() {
                x.iter_mut().zip(&basis[k]).for_each(|(a, b)| *a += c * b);
            }
            x
        };
        if worst <= opts.tol || dim < m {
            log::debug!("arnoldi converged after {} restarts at shift {shift}", restart);
            return Ok(wanted.iter().map(|r| EigenPair { value: shift + 1.0 / r.theta, vector: vector(r) }).collect());
        }
        start = vec![0.0; n];
        for r in wanted {
            let x = vector(r);
            start.iter_mut().zip(&x).for_each(|(a, b)| *a += b);
        }
        since_shift += 1;
        if since_shift >= opts.restarts_per_shift {
            // move the shift just above the leading estimate to separate a tight cluster
            let lead = wanted.iter().map(|r| shift + 1.0 / r.theta).fold(f64::NEG_INFINITY, f64::max);
            let gap = (shift - lead).abs().max(1e-12 * shift.abs());
            let next = lead + 0.05 * gap;
            if (next - shift).abs() > 1e-12 * shift.abs() {
                log::debug!("re-shifting {shift} -> {next}");
                shift = next;
                lu = a.shifted_lu(shift)?;
            }
            since_shift = 0;
        }
    }
    Err(Error::Eigen { iterations: opts.max_restarts, residual: worst })
}

/// Ritz pairs of the leading `dim x dim` block of the Hessenberg matrix,
/// ordered by decreasing magnitude, with relative residual estimates.
fn ritz_pairs(h: &[Vec<f64>], dim: usize) -> Result<Vec<Ritz>> {
    let hm = Mat::<f64>::from_fn(dim, dim, |i, j| h[i][j]);
    let eig = hm.eigen().map_err(|e| Error::Format(format!("dense eigensolver: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let beta = h[dim][dim - 1];
    let mut out: Vec<Ritz> = (0..dim)
        .map(|k| {
            let theta = s[k];
            // take the real part of the eigenvector after rotating away its global phase
            let col: Vec<num_complex::Complex64> = (0..dim)
                .map(|i| {
                    let z = u[(i, k)];
                    num_complex::Complex64::new(z.re, z.im)
                })
                .collect();
            let pivot = col.iter().copied().fold(num_complex::Complex64::new(0.0, 0.0), |a, b| {
                if b.norm() > a.norm() {
                    b
                } else {
                    a
                }
            });
            let phase =
                if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { num_complex::Complex64::new(1.0, 0.0) };
            let mut y: Vec<f64> = col.iter().map(|z| (z * phase).re).collect();
            let ny = norm(&y);
            y.iter_mut().for_each(|v| *v /= ny);
            let residual = (beta * y[dim - 1]).abs() / theta.norm().max(1e-300);
            Ritz { theta: theta.re, y, residual: residual + theta.im.abs() / theta.norm().max(1e-300) }
        })
        .collect();
    out.sort_by(|a, b| b.theta.abs().total_cmp(&a.theta.abs()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, -2.0));
            if i > 0 {
                entries.push((i, i - 1, 1.0));
            }
            if i + 1 < n {
                entries.push((i, i + 1, 1.0));
            }
        }
        SparseMatrix { n, entries }
    }

    fn opts() -> EigenOptions {
        EigenOptions { krylov_dim: 30, tol: 1e-12, max_restarts: 50, restarts_per_shift: 4 }
    }

    #[test]
    fn finds_top_of_discrete_laplacian() {
        let n = 400;
        let a = laplacian_1d(n);
        let pairs = nearest_eigenpairs(&a, 0.0, 3, &opts()).unwrap();
        for (k, p) in pairs.iter().enumerate() {
            let exact = -4.0 * ((k + 1) as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin().powi(2);
            assert!((p.value - exact).abs() < 1e-10 * exact.abs().max(1e-3), "{k}: {} {exact}", p.value);
            let r = a.apply(&p.vector);
            let res: f64 = r.iter().zip(&p.vector).map(|(x, v)| (x - p.value * v).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-8 * norm(&p.vector));
        }
    }

    #[test]
    fn nonsymmetric_matrix_with_real_spectrum() {
        // similarity transform D L D^-1 of a tridiagonal matrix keeps its eigenvalues
        let n = 200;
        let l = laplacian_1d(n);
        let d = |i: usize| 1.0 + 0.5 * (i as f64 * 0.3).sin();
        let entries = l.entries.iter().map(|&(r, c, v)| (r, c, d(r) * v / d(c))).collect();
        let a = SparseMatrix { n, entries };
        let p = nearest_eigenpairs(&a, 0.1, 1, &opts()).unwrap();
        let exact = -4.0 * (std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin().powi(2);
        assert!((p[0].value - exact).abs() < 1e-10);
    }
}
