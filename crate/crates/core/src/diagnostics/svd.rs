//! One-sided (Hestenes) Jacobi SVD. Used as the reference decomposition for
//! round-trip and spectrum checks; it shares no code with the reflector
//! kernels.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

const TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U·diag(σ)·Vᵀ` with `p = min(m, n)` singular values sorted
/// descending; `U` is `m×p`, `V` is `n×p`, both with orthonormal columns.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for j in 0..self.sigma.len() {
            for i in 0..us.rows() {
                us[(i, j)] *= self.sigma[j];
            }
        }
        us.matmul(&self.v.transpose())
    }

    pub fn spectral_norm(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }
}

pub fn jacobi_svd(a: &Matrix) -> Result<Svd> {
    if a.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("jacobi_svd: non-finite entry".into()));
    }
    if a.rows() >= a.cols() {
        tall_svd(a)
    } else {
        let t = tall_svd(&a.transpose())?;
        Ok(Svd { u: t.v, sigma: t.sigma, v: t.u })
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    Ok(jacobi_svd(a)?.spectral_norm())
}

fn tall_svd(a: &Matrix) -> Result<Svd> {
    let (m, n) = a.shape();
    // work on columns stored contiguously
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, i, j, c, s);
                rotate(&mut vcols, i, j, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numerical(format!("jacobi_svd did not converge in {MAX_SWEEPS} sweeps")));
    }

    let mut sigma: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));

    let smax = order.first().map_or(0.0, |&i| sigma[i]);
    let cutoff = smax * (m.max(n) as f64) * f64::EPSILON;
    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    let mut rank = 0;
    for (dst, &src) in order.iter().enumerate() {
        let s = sigma[src];
        if s > cutoff && s > 0.0 {
            let col: Vec<f64> = cols[src].iter().map(|x| x / s).collect();
            u.set_column(dst, &col);
            rank += 1;
        } else {
            sigma[src] = 0.0;
        }
        sorted.push(sigma[src]);
        v.set_column(dst, &vcols[src]);
    }
    complete_orthonormal(&mut u, rank);
    Ok(Svd { u, sigma: sorted, v })
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills columns `filled..` of `q` so that all its columns are orthonormal,
/// assuming the first `filled` already are. Candidates are standard basis
/// vectors, orthogonalized twice.
pub fn complete_orthonormal(q: &mut Matrix, filled: usize) {
    let (m, p) = q.shape();
    let mut basis: Vec<Vec<f64>> = (0..filled).map(|j| q.column(j)).collect();
    let mut candidate = 0;
    while basis.len() < p && candidate < m {
        let mut e = vec![0.0; m];
        e[candidate] = 1.0;
        candidate += 1;
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &e);
                for (x, y) in e.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nrm = dot(&e, &e).sqrt();
        if nrm > 1e-3 {
            e.iter_mut().for_each(|x| *x /= nrm);
            basis.push(e);
        }
    }
    for (j, b) in basis.iter().enumerate().skip(filled) {
        q.set_column(j, b);
    }
}

/// Extends an `m×p` matrix with orthonormal columns to an `m×m` orthogonal
/// matrix whose first `p` columns are unchanged.
pub fn extend_to_orthogonal(q: &Matrix) -> Matrix {
    let (m, p) = q.shape();
    let mut full = Matrix::zeros(m, m);
    for j in 0..p {
        full.set_column(j, &q.column(j));
    }
    complete_orthonormal(&mut full, p);
    full
}
