//! Householder reflector kernels.
//!
//! A reflector of index `k` in ambient dimension `n` stores only `u ∈ ℝᵏ`; the
//! operator is `I − 2ûûᵀ/ûᵀû` with `û = (0ₙ₋ₖ, u)`, so it touches only the
//! trailing `k` coordinates. A zero `u` stands for the identity.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diagnostics::flops::{FlopCounter, Kernel};
use crate::error::{invalid, Error, Result};
use crate::matrix::{dot, Matrix};

/// `‖u‖²` at or below this is treated as the identity reflector.
pub const ZERO_NORM_SQ: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq)]
pub struct HouseholderVector {
    u: Vec<f64>,
}

impl HouseholderVector {
    /// The reflector index `k` is the vector length.
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(invalid("householder vector must have length >= 1"));
        }
        Ok(HouseholderVector { u })
    }

    pub fn zero(k: usize) -> Self {
        assert!(k >= 1);
        HouseholderVector { u: vec![0.0; k] }
    }

    pub fn gaussian<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        assert!(k >= 1);
        HouseholderVector { u: (0..k).map(|_| StandardNormal.sample(rng)).collect() }
    }

    pub fn k(&self) -> usize {
        self.u.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.u
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.u, &self.u)
    }

    pub fn is_identity(&self) -> bool {
        self.norm_sq() <= ZERO_NORM_SQ
    }

    /// `û`: the vector zero-padded at the front to length `n`.
    pub fn padded(&self, n: usize) -> Result<Vec<f64>> {
        check_dim(self.k(), n)?;
        let mut out = vec![0.0; n - self.k()];
        out.extend_from_slice(&self.u);
        Ok(out)
    }

    /// Dense `n×n` operator.
    pub fn to_dense(&self, n: usize) -> Result<Matrix> {
        let uh = self.padded(n)?;
        let nsq = self.norm_sq();
        if nsq <= ZERO_NORM_SQ {
            return Ok(Matrix::identity(n));
        }
        Ok(Matrix::from_fn(n, n, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            delta - 2.0 * uh[i] * uh[j] / nsq
        }))
    }
}

fn check_dim(k: usize, n: usize) -> Result<()> {
    if k > n || k == 0 {
        return Err(invalid(format!("reflector index k={k} incompatible with dimension n={n}")));
    }
    Ok(())
}

/// Reflects `h` in place using a precomputed `‖u‖²`.
///
/// Returns `ûᵀh` taken before the reflection (zero for an identity reflector).
/// Costs `4k` flops.
#[inline]
pub fn reflect_in_place(h: &mut [f64], u: &[f64], norm_sq: f64, flops: &mut FlopCounter) -> f64 {
    if norm_sq <= ZERO_NORM_SQ {
        return 0.0;
    }
    let k = u.len();
    let start = h.len() - k;
    let tail = &mut h[start..];
    let d = dot(u, tail);
    if k == 1 {
        // exact sign flip; avoids rounding in 2u²/u²
        tail[0] = -tail[0];
        flops.add(Kernel::Hprod, 4);
        return d;
    }
    let c = 2.0 * d / norm_sq;
    for (t, &ui) in tail.iter_mut().zip(u) {
        *t -= c * ui;
    }
    flops.add(Kernel::Hprod, 4 * k as u64);
    d
}

/// Backward step through one reflector using the cached forward output.
///
/// `h_out` is `ĥ = H(u)h` (the full vector or just its trailing `k`
/// entries), `alpha` is `ûᵀĥ` (equal to minus the value
/// returned by [`reflect_in_place`]). On return `g` holds `H(u)ᵀg` and
/// `du` holds `∂L/∂u = (2/‖u‖²)(αg − βĥ)` on the trailing `k` coordinates,
/// with `β = ûᵀg`. Costs `7k` flops.
#[inline]
pub fn reflect_grad_from_output(
    h_out: &[f64],
    u: &[f64],
    norm_sq: f64,
    alpha: f64,
    g: &mut [f64],
    du: &mut [f64],
    flops: &mut FlopCounter,
) {
    let k = u.len();
    if norm_sq <= ZERO_NORM_SQ {
        du.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let n = g.len();
    let g_tail = &mut g[n - k..];
    if k == 1 {
        // H₁(u) = diag(1, …, 1, −1) for every u ≠ 0, so ∂L/∂u vanishes
        du[0] = 0.0;
        g_tail[0] = -g_tail[0];
        flops.add(Kernel::Hgrad, 7);
        return;
    }
    let h_tail = &h_out[h_out.len() - k..];
    let beta = dot(u, g_tail);
    let c1 = 2.0 * alpha / norm_sq;
    let c2 = 2.0 * beta / norm_sq;
    for i in 0..k {
        du[i] = c1 * g_tail[i] - c2 * h_tail[i];
        g_tail[i] -= c2 * u[i];
    }
    flops.add(Kernel::Hgrad, 7 * k as u64);
}

/// `H_kⁿ(u)·h`.
pub fn hprod(h: &[f64], u: &HouseholderVector) -> Result<Vec<f64>> {
    check_dim(u.k(), h.len())?;
    let mut out = h.to_vec();
    reflect_in_place(&mut out, u.as_slice(), u.norm_sq(), &mut FlopCounter::new());
    Ok(out)
}

/// Gradient through `ĥ = H(u)h` given `g = ∂L/∂ĥ`.
///
/// With `ref_is_output = false`, `h_ref` is the input `h` and the direct
/// form `−2a·g − 2b·h + 4ab·û` (`a = ûᵀh/‖û‖²`, `b = ûᵀg/‖û‖²`) is used.
/// With `ref_is_output = true`, `h_ref` is `ĥ` and the involution identity
/// `ûᵀh = −ûᵀĥ` gives `(2/‖û‖²)(αg − βĥ)`.
///
/// Returns `(∂L/∂h, ∂L/∂u)`; `∂L/∂u` has length `k`. For an identity
/// reflector the result is `(g, 0)`.
pub fn hgrad(
    h_ref: &[f64],
    u: &HouseholderVector,
    g: &[f64],
    ref_is_output: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = h_ref.len();
    check_dim(u.k(), n)?;
    if g.len() != n {
        return Err(invalid(format!("gradient length {} != {}", g.len(), n)));
    }
    let k = u.k();
    let us = u.as_slice();
    let nsq = u.norm_sq();
    let mut dh = g.to_vec();
    let mut du = vec![0.0; k];
    if nsq <= ZERO_NORM_SQ {
        return Ok((dh, du));
    }
    let h_tail = &h_ref[n - k..];
    if k == 1 {
        dh[n - 1] = -dh[n - 1];
        return Ok((dh, du));
    }
    if ref_is_output {
        let alpha = dot(us, h_tail);
        reflect_grad_from_output(h_ref, us, nsq, alpha, &mut dh, &mut du, &mut FlopCounter::new());
    } else {
        let g_tail = &g[n - k..];
        let a = dot(us, h_tail) / nsq;
        let b = dot(us, g_tail) / nsq;
        for i in 0..k {
            du[i] = -2.0 * a * g_tail[i] - 2.0 * b * h_tail[i] + 4.0 * a * b * us[i];
        }
        for (d, &ui) in dh[n - k..].iter_mut().zip(us) {
            *d -= 2.0 * b * ui;
        }
    }
    Ok((dh, du))
}

/// An orthogonal matrix `H_n(u_n)···H_{k_min}(u_{k_min})` stored as its
/// reflector vectors in increasing index order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectorStack {
    n: usize,
    k_min: usize,
    vectors: Vec<HouseholderVector>,
}

impl ReflectorStack {
    /// `vectors[i]` must have length `k_min + i`, ending at length `n`. An
    /// empty list gives the empty stack (`k_min = n + 1`).
    pub fn from_vectors(n: usize, vectors: Vec<HouseholderVector>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("stack dimension must be >= 1"));
        }
        if vectors.len() > n {
            return Err(invalid(format!("{} reflectors exceed dimension {}", vectors.len(), n)));
        }
        let k_min = n + 1 - vectors.len();
        for (i, v) in vectors.iter().enumerate() {
            if v.k() != k_min + i {
                return Err(invalid(format!(
                    "reflector slot {} has length {}, expected {}",
                    i,
                    v.k(),
                    k_min + i
                )));
            }
        }
        Ok(ReflectorStack { n, k_min, vectors })
    }

    /// `count` zero (identity) reflectors with indices `n−count+1..=n`.
    pub fn identity(n: usize, count: usize) -> Self {
        assert!(count <= n && n >= 1);
        let k_min = n + 1 - count;
        ReflectorStack { n, k_min, vectors: (k_min..=n).map(HouseholderVector::zero).collect() }
    }

    /// `count` reflectors with standard Gaussian entries.
    pub fn gaussian<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Self {
        assert!(count <= n && n >= 1);
        let k_min = n + 1 - count;
        ReflectorStack {
            n,
            k_min,
            vectors: (k_min..=n).map(|k| HouseholderVector::gaussian(k, rng)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[HouseholderVector] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [HouseholderVector] {
        &mut self.vectors
    }

    /// Reflector with index `k`.
    pub fn get(&self, k: usize) -> Option<&HouseholderVector> {
        if k < self.k_min || k > self.n {
            None
        } else {
            self.vectors.get(k - self.k_min)
        }
    }

    pub fn scalar_count(&self) -> usize {
        self.vectors.iter().map(HouseholderVector::k).sum()
    }

    pub fn norms_sq(&self) -> Vec<f64> {
        self.vectors.iter().map(HouseholderVector::norm_sq).collect()
    }

    /// Applies the stack to `h` in place. `transpose = false` applies
    /// `H_n···H_{k_min}` (lowest index first); `transpose = true` applies the
    /// reverse product.
    pub fn apply_in_place(&self, h: &mut [f64], transpose: bool) {
        let mut flops = FlopCounter::new();
        if transpose {
            for v in self.vectors.iter().rev() {
                reflect_in_place(h, v.as_slice(), v.norm_sq(), &mut flops);
            }
        } else {
            for v in &self.vectors {
                reflect_in_place(h, v.as_slice(), v.norm_sq(), &mut flops);
            }
        }
    }
}

/// Action of the stack on `h` without materializing it.
pub fn stack_apply(s: &ReflectorStack, h: &[f64], transpose: bool) -> Result<Vec<f64>> {
    if h.len() != s.dim() {
        return Err(invalid(format!("vector length {} != stack dimension {}", h.len(), s.dim())));
    }
    let mut out = h.to_vec();
    s.apply_in_place(&mut out, transpose);
    Ok(out)
}

/// Dense orthogonal matrix represented by the stack.
pub fn stack_materialize(s: &ReflectorStack) -> Matrix {
    let n = s.dim();
    let mut q = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0;
        s.apply_in_place(&mut e, false);
        q.set_column(j, &e);
    }
    q
}

/// Householder QR with reflectors in the stack convention: `B = Q·R` where
/// `Q = H_n(u_n)···H_1(u_1)` and `R` is upper triangular with positive
/// diagonal.
///
/// Column `j` is reduced by `u = x − ‖x‖e₁` on its trailing `n−j` entries, so
/// a column that is already a positive multiple of `e₁` gets the zero
/// (identity) reflector.
pub fn householder_qr(b: &Matrix) -> Result<(ReflectorStack, Matrix)> {
    if !b.is_square() || b.rows() == 0 {
        return Err(invalid(format!("householder_qr needs a non-empty square matrix, got {:?}", b.shape())));
    }
    let n = b.rows();
    let scale = b.frobenius();
    let mut r = b.clone();
    // reflectors[j] has index k = n − j
    let mut reflectors: Vec<HouseholderVector> = Vec::with_capacity(n);
    for j in 0..n {
        let k = n - j;
        let x: Vec<f64> = (j..n).map(|i| r[(i, j)]).collect();
        let tail_sq: f64 = x[1..].iter().map(|v| v * v).sum();
        let xnorm = (x[0] * x[0] + tail_sq).sqrt();
        if !(xnorm > 1e-14 * scale) {
            return Err(Error::Factorization(format!("column {j} is degenerate (norm {xnorm:e})")));
        }
        let mut u = x;
        // x₁ − ‖x‖ without cancellation when x₁ > 0
        u[0] = if u[0] > 0.0 { -tail_sq / (u[0] + xnorm) } else { u[0] - xnorm };
        let hv = HouseholderVector::new(u)?;
        let nsq = hv.norm_sq();
        if nsq > ZERO_NORM_SQ {
            let mut flops = FlopCounter::new();
            let mut col = vec![0.0; n];
            for c in j..n {
                for i in 0..n {
                    col[i] = r[(i, c)];
                }
                reflect_in_place(&mut col, hv.as_slice(), nsq, &mut flops);
                for i in j..n {
                    r[(i, c)] = col[i];
                }
            }
        }
        r[(j, j)] = xnorm;
        for i in j + 1..n {
            r[(i, j)] = 0.0;
        }
        debug_assert_eq!(hv.k(), k);
        reflectors.push(hv);
    }
    reflectors.reverse();
    let stack = ReflectorStack::from_vectors(n, reflectors)?;
    Ok((stack, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense oracle `I − 2ûûᵀ/ûᵀû`, independent of the kernel code path.
    fn dense_reflector(u: &[f64], n: usize) -> Matrix {
        let k = u.len();
        let mut uh = vec![0.0; n];
        uh[n - k..].copy_from_slice(u);
        let nsq: f64 = u.iter().map(|x| x * x).sum();
        if nsq == 0.0 {
            return Matrix::identity(n);
        }
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - 2.0 * uh[i] * uh[j] / nsq)
    }

    fn hv(u: &[f64]) -> HouseholderVector {
        HouseholderVector::new(u.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn hprod_zero_vector_is_identity() {
        let out = hprod(&[2.0, 4.0, 6.0], &HouseholderVector::zero(2)).unwrap();
        assert_eq!(out, vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn hprod_axis_reflector() {
        assert_eq!(hprod(&[3.0, 5.0], &hv(&[1.0, 0.0])).unwrap(), vec![-3.0, 5.0]);
    }

    #[test]
    fn hprod_padded_matches_dense() {
        let oracle = dense_reflector(&[1.0, 1.0], 3).matvec(&[2.0, 4.0, 6.0]);
        assert!(close(&oracle, &[2.0, -6.0, -4.0], 1e-15));
        let out = hprod(&[2.0, 4.0, 6.0], &hv(&[1.0, 1.0])).unwrap();
        assert!(close(&out, &[2.0, -6.0, -4.0], 1e-15));
    }

    #[test]
    fn hprod_rejects_oversized_reflector() {
        assert!(matches!(hprod(&[1.0, 2.0], &hv(&[1.0, 1.0, 1.0])), Err(Error::InvalidArgument(_))));
        assert!(hgrad(&[1.0], &hv(&[1.0, 1.0]), &[1.0], false).is_err());
        assert!(hgrad(&[1.0, 2.0], &hv(&[1.0]), &[1.0], false).is_err());
    }

    #[test]
    fn tiny_vector_treated_as_identity() {
        let out = hprod(&[1.0, 2.0], &hv(&[1e-13, 0.0])).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn hgrad_identity_reflector() {
        let (dh, du) = hgrad(&[1.0, 2.0, 3.0], &HouseholderVector::zero(2), &[0.5, -1.0, 2.0], false).unwrap();
        assert_eq!(dh, vec![0.5, -1.0, 2.0]);
        assert_eq!(du, vec![0.0, 0.0]);
    }

    #[test]
    fn hgrad_worked_example_both_forms() {
        let u = hv(&[1.0, 0.0]);
        let (dh, du) = hgrad(&[3.0, 5.0], &u, &[1.0, 1.0], false).unwrap();
        assert!(close(&dh, &[-1.0, 1.0], 1e-15));
        assert!(close(&du, &[0.0, -16.0], 1e-14));
        let (dh2, du2) = hgrad(&[-3.0, 5.0], &u, &[1.0, 1.0], true).unwrap();
        assert!(close(&dh2, &[-1.0, 1.0], 1e-15));
        assert!(close(&du2, &[0.0, -16.0], 1e-14));
    }

    fn fd_grad_u(h: &[f64], u: &[f64], g: &[f64], step: f64) -> Vec<f64> {
        let n = h.len();
        (0..u.len())
            .map(|i| {
                let eval = |delta: f64| {
                    let mut up = u.to_vec();
                    up[i] += delta;
                    let y = dense_reflector(&up, n).matvec(h);
                    dot(g, &y)
                };
                (eval(step) - eval(-step)) / (2.0 * step)
            })
            .collect()
    }

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn hgrad_matches_finite_differences_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(1..=16);
            let k = rng.random_range(1..=n);
            let u = HouseholderVector::gaussian(k, &mut rng);
            let h: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let fd = fd_grad_u(&h, u.as_slice(), &g, 1e-5);
            let (dh_in, du_in) = hgrad(&h, &u, &g, false).unwrap();
            let out = hprod(&h, &u).unwrap();
            let (dh_out, du_out) = hgrad(&out, &u, &g, true).unwrap();
            assert!(max_rel(&du_in, &fd) < 1e-6, "input form vs fd: n={n} k={k} {du_in:?} {fd:?}");
            assert!(max_rel(&du_out, &fd) < 1e-6, "output form vs fd");
            let scale = du_in.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            assert!(close(&du_in, &du_out, 1e-13 * scale));
            let dense_t = dense_reflector(u.as_slice(), n).transpose().matvec(&g);
            assert!(close(&dh_in, &dense_t, 1e-13));
            assert!(close(&dh_out, &dense_t, 1e-13));
        }
    }

    #[test]
    fn stack_apply_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = ReflectorStack::gaussian(4, 4, &mut rng);
        let h = [0.3, -1.2, 2.0, 0.7];
        let mut dense = Matrix::identity(4);
        for v in s.vectors() {
            // H_n···H_kmin: each higher index multiplies on the left
            dense = dense_reflector(v.as_slice(), 4).matmul(&dense);
        }
        let out = stack_apply(&s, &h, false).unwrap();
        assert!(close(&out, &dense.matvec(&h), 1e-13));
        let out_t = stack_apply(&s, &h, true).unwrap();
        assert!(close(&out_t, &dense.transpose().matvec(&h), 1e-13));
    }

    #[test]
    fn stack_single_equals_hprod() {
        let u = hv(&[0.4, -0.2, 1.5]);
        let s = ReflectorStack::from_vectors(3, vec![u.clone()]).unwrap();
        assert_eq!(stack_apply(&s, &[1.0, 2.0, 3.0], false).unwrap(), hprod(&[1.0, 2.0, 3.0], &u).unwrap());
    }

    #[test]
    fn stack_identity_and_materialize() {
        let s = ReflectorStack::identity(3, 3);
        assert_eq!(stack_apply(&s, &[1.0, 2.0, 3.0], false).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(stack_materialize(&s), Matrix::identity(3));
        let s = ReflectorStack::from_vectors(2, vec![hv(&[1.0]), hv(&[1.0, 0.0])]).unwrap();
        // H_2((1,0)) = diag(−1,1); H_1((1)) = diag(1,−1)
        let q = stack_materialize(&s);
        assert!(close(q.as_slice(), &[-1.0, 0.0, 0.0, -1.0], 1e-15));
        let s = ReflectorStack::from_vectors(2, vec![hv(&[1.0, 0.0])]).unwrap();
        assert!(close(stack_materialize(&s).as_slice(), &[-1.0, 0.0, 0.0, 1.0], 1e-15));
    }

    #[test]
    fn stack_from_vectors_validates_lengths() {
        assert!(ReflectorStack::from_vectors(3, vec![hv(&[1.0, 2.0])]).is_err());
        assert!(ReflectorStack::from_vectors(3, vec![hv(&[1.0, 2.0]), hv(&[1.0, 2.0])]).is_err());
        let s = ReflectorStack::from_vectors(3, vec![]).unwrap();
        assert_eq!(s.k_min(), 4);
        assert!(s.get(3).is_none());
        assert!(stack_apply(&s, &[1.0], false).is_err());
    }

    #[test]
    fn materialized_stack_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = ReflectorStack::gaussian(5, 5, &mut rng);
        let q = stack_materialize(&s);
        assert!(q.orthogonality_defect() <= 5.0 * 1e-12);
    }

    #[test]
    fn qr_of_identity() {
        let (s, r) = householder_qr(&Matrix::identity(4)).unwrap();
        assert!(s.vectors().iter().all(HouseholderVector::is_identity));
        assert_eq!(r, Matrix::identity(4));
    }

    #[test]
    fn qr_of_orthogonal_gives_identity_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=8 {
            let q = stack_materialize(&ReflectorStack::gaussian(n, n, &mut rng));
            let (s, r) = householder_qr(&q).unwrap();
            assert!(r.sub(&Matrix::identity(n)).frobenius() < 1e-10);
            assert!(stack_materialize(&s).sub(&q).frobenius() < 1e-10);
        }
    }

    #[test]
    fn qr_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = Matrix::gaussian(3, 3, 1.0, &mut rng);
        let (s, r) = householder_qr(&b).unwrap();
        assert!(r.is_upper_triangular(0.0));
        assert!((0..3).all(|i| r[(i, i)] > 0.0));
        let rec = stack_materialize(&s).matmul(&r);
        assert!(rec.sub(&b).frobenius() / b.frobenius() < 1e-12);
    }

    #[test]
    fn qr_one_by_one_sign_rule() {
        let (s, r) = householder_qr(&Matrix::from_vec(1, 1, vec![2.0]).unwrap()).unwrap();
        assert!(s.vectors()[0].is_identity());
        assert_eq!(r[(0, 0)], 2.0);
        let (s, r) = householder_qr(&Matrix::from_vec(1, 1, vec![-2.0]).unwrap()).unwrap();
        assert!(!s.vectors()[0].is_identity());
        assert_eq!(r[(0, 0)], 2.0);
    }

    #[test]
    fn qr_rejects_singular() {
        let b = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(householder_qr(&b), Err(Error::Factorization(_))));
        assert!(householder_qr(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn reflect_counts_four_k() {
        let mut f = FlopCounter::new();
        let u = vec![1.0; 32];
        let mut h = vec![1.0; 64];
        reflect_in_place(&mut h, &u, 32.0, &mut f);
        assert_eq!(f.get(Kernel::Hprod), 128);
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, len)
    }

    fn case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..=16)
            .prop_flat_map(|n| (Just(n), 1..=n))
            .prop_flat_map(|(n, k)| (vec_strategy(n), vec_strategy(k)))
    }

    proptest! {
        #[test]
        fn involution_isometry_scale_invariance((h, u) in case(), c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
            let hvec = HouseholderVector::new(u.clone()).unwrap();
            let hn = crate::matrix::norm(&h).max(1e-300);
            let once = hprod(&h, &hvec).unwrap();
            let twice = hprod(&once, &hvec).unwrap();
            for (a, b) in twice.iter().zip(&h) {
                prop_assert!((a - b).abs() <= 1e-13 * hn.max(1.0));
            }
            prop_assert!((crate::matrix::norm(&once) - crate::matrix::norm(&h)).abs() <= 1e-13 * hn.max(1.0));
            let scaled = HouseholderVector::new(u.iter().map(|x| c * x).collect()).unwrap();
            if !hvec.is_identity() && !scaled.is_identity() {
                let other = hprod(&h, &scaled).unwrap();
                for (a, b) in other.iter().zip(&once) {
                    prop_assert!((a - b).abs() <= 1e-13 * hn.max(1.0));
                }
            }
        }
    }
}
