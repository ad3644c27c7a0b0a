//! SVD parameterization of a weight matrix: `W = U·Σ̂·Vᵀ` with `U`, `V`
//! reflector stacks and singular values confined to `[σ* − r, σ* + r]`
//! through a sigmoid.

use std::fmt::Write as _;

use rand::Rng;

use crate::diagnostics::svd::{extend_to_orthogonal, jacobi_svd};
use crate::error::{invalid, Error, Result};
use crate::householder::{householder_qr, stack_materialize, HouseholderVector, ReflectorStack};
use crate::matrix::Matrix;

/// Saturation limit for σ̂ when inverting the sigmoid at the interval edge.
pub const SIGMA_HAT_CLAMP: f64 = 30.0;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Free singular-value parameters `σ̂` with radius `r` and center `σ*`.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaParam {
    pub sigma_hat: Vec<f64>,
    pub radius: f64,
    pub center: f64,
}

impl SigmaParam {
    pub fn new(sigma_hat: Vec<f64>, radius: f64, center: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(invalid(format!("radius must be finite and >= 0, got {radius}")));
        }
        if !center.is_finite() {
            return Err(invalid("center must be finite"));
        }
        Ok(SigmaParam { sigma_hat, radius, center })
    }

    /// `σ̂ = 0` everywhere, so every σ starts at the center.
    pub fn centered(len: usize, radius: f64, center: f64) -> Result<Self> {
        Self::new(vec![0.0; len], radius, center)
    }

    pub fn len(&self) -> usize {
        self.sigma_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_hat.is_empty()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        sigma_from_hat(self)
    }
}

/// `σᵢ = 2r(f(σ̂ᵢ) − ½) + σ*`.
pub fn sigma_from_hat(p: &SigmaParam) -> Vec<f64> {
    p.sigma_hat.iter().map(|&s| 2.0 * p.radius * (sigmoid(s) - 0.5) + p.center).collect()
}

/// Chain rule through the sigmoid constraint: `∂L/∂σ̂ᵢ = ∂L/∂σᵢ · 2r f(σ̂ᵢ)(1 − f(σ̂ᵢ))`.
pub fn sigma_hat_grad(p: &SigmaParam, dl_dsigma: &[f64]) -> Result<Vec<f64>> {
    if dl_dsigma.len() != p.len() {
        return Err(invalid(format!("gradient length {} != {}", dl_dsigma.len(), p.len())));
    }
    Ok(p.sigma_hat
        .iter()
        .zip(dl_dsigma)
        .map(|(&s, &g)| {
            let f = sigmoid(s);
            g * 2.0 * p.radius * f * (1.0 - f)
        })
        .collect())
}

/// Inverse of [`sigma_from_hat`] for a single value.
pub fn sigma_hat_for(sigma: f64, center: f64, radius: f64) -> Option<f64> {
    let lo = center - radius;
    let hi = center + radius;
    let slack = 1e-12 * (center.abs() + radius).max(1.0);
    if sigma < lo - slack || sigma > hi + slack {
        return None;
    }
    if radius == 0.0 {
        return Some(0.0);
    }
    let below = sigma - lo;
    let above = hi - sigma;
    let hat = if below <= 0.0 {
        -SIGMA_HAT_CLAMP
    } else if above <= 0.0 {
        SIGMA_HAT_CLAMP
    } else {
        (below / above).ln()
    };
    Some(hat.clamp(-SIGMA_HAT_CLAMP, SIGMA_HAT_CLAMP))
}

/// A center/radius pair whose interval strictly contains all of `sigmas`.
pub fn fit_interval(sigmas: &[f64]) -> (f64, f64) {
    let lo = sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sigmas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return (1.0, 0.0);
    }
    let center = 0.5 * (lo + hi);
    let radius = (0.5 * (hi - lo) * 1.001).max(1e-9 * hi.abs().max(1.0));
    (center, radius)
}

/// `m×n` matrix `H_m(u_m)···H_{k1}(u_{k1}) · Σ̂ · H_{k2}(v_{k2})···H_n(v_n)`.
///
/// `Σ̂` is `diag(σ)` padded with zero columns (`m < n`) or zero rows
/// (`m > n`).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMatrix {
    u: ReflectorStack,
    v: ReflectorStack,
    sigma: SigmaParam,
}

impl SpectralMatrix {
    pub fn new(u: ReflectorStack, v: ReflectorStack, sigma: SigmaParam) -> Result<Self> {
        let (m, n) = (u.dim(), v.dim());
        let p = m.min(n);
        if sigma.len() != p {
            return Err(invalid(format!("sigma has {} entries, expected min({m},{n}) = {p}", sigma.len())));
        }
        if m != n && v.len() > p {
            return Err(invalid(format!(
                "rectangular {m}x{n} matrix allows at most {p} right reflectors, got {}",
                v.len()
            )));
        }
        Ok(SpectralMatrix { u, v, sigma })
    }

    /// Gaussian reflectors, `σ̂ = 0`.
    pub fn random<R: Rng + ?Sized>(
        m: usize,
        n: usize,
        m1: usize,
        m2: usize,
        radius: f64,
        center: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if m == 0 || n == 0 || m1 > m || m2 > n {
            return Err(invalid(format!("invalid reflector counts m1={m1}, m2={m2} for {m}x{n}")));
        }
        let u = ReflectorStack::gaussian(m, m1, rng);
        let v = ReflectorStack::gaussian(n, m2, rng);
        Self::new(u, v, SigmaParam::centered(m.min(n), radius, center)?)
    }

    /// Zero reflectors, `σ̂ = 0`: the matrix `σ*·I` (padded when rectangular).
    pub fn identity_like(m: usize, n: usize, m1: usize, m2: usize, radius: f64, center: f64) -> Result<Self> {
        if m == 0 || n == 0 || m1 > m || m2 > n {
            return Err(invalid(format!("invalid reflector counts m1={m1}, m2={m2} for {m}x{n}")));
        }
        Self::new(
            ReflectorStack::identity(m, m1),
            ReflectorStack::identity(n, m2),
            SigmaParam::centered(m.min(n), radius, center)?,
        )
    }

    pub fn rows(&self) -> usize {
        self.u.dim()
    }

    pub fn cols(&self) -> usize {
        self.v.dim()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn m1(&self) -> usize {
        self.u.len()
    }

    pub fn m2(&self) -> usize {
        self.v.len()
    }

    pub fn u_stack(&self) -> &ReflectorStack {
        &self.u
    }

    pub fn v_stack(&self) -> &ReflectorStack {
        &self.v
    }

    pub fn u_stack_mut(&mut self) -> &mut ReflectorStack {
        &mut self.u
    }

    pub fn v_stack_mut(&mut self) -> &mut ReflectorStack {
        &mut self.v
    }

    pub fn sigma_param(&self) -> &SigmaParam {
        &self.sigma
    }

    pub fn sigma_param_mut(&mut self) -> &mut SigmaParam {
        &mut self.sigma
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.sigma.sigmas()
    }

    /// Stored trainable scalars: reflector entries plus `σ̂`.
    pub fn scalar_count(&self) -> usize {
        self.u.scalar_count() + self.v.scalar_count() + self.sigma.len()
    }

    /// `W·h` applied reflector by reflector.
    pub fn apply(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.cols() {
            return Err(invalid(format!("input length {} != {}", h.len(), self.cols())));
        }
        let mut z = h.to_vec();
        self.v.apply_in_place(&mut z, true);
        let mut x = vec![0.0; self.rows()];
        for (i, s) in self.sigmas().into_iter().enumerate() {
            x[i] = s * z[i];
        }
        self.u.apply_in_place(&mut x, false);
        Ok(x)
    }

    pub fn materialize(&self) -> Matrix {
        let (m, n) = (self.rows(), self.cols());
        let mut w = Matrix::zeros(m, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.apply(&e).expect("dimension checked");
            w.set_column(j, &col);
        }
        w
    }

    /// Optional `coef·‖σ − 1‖²` regularizer and its gradient with respect
    /// to `σ̂`.
    pub fn sigma_penalty(&self, coef: f64) -> (f64, Vec<f64>) {
        if coef == 0.0 {
            return (0.0, vec![0.0; self.sigma.len()]);
        }
        let sig = self.sigmas();
        let value = coef * sig.iter().map(|s| (s - 1.0) * (s - 1.0)).sum::<f64>();
        let dsig: Vec<f64> = sig.iter().map(|s| 2.0 * coef * (s - 1.0)).collect();
        let grad = sigma_hat_grad(&self.sigma, &dsig).expect("lengths match");
        (value, grad)
    }

    /// Parameter slices in a fixed order: u reflectors, v reflectors, σ̂.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for v in self.u.vectors_mut() {
            out.push(v.as_mut_slice());
        }
        for v in self.v.vectors_mut() {
            out.push(v.as_mut_slice());
        }
        out.push(&mut self.sigma.sigma_hat);
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "spectral-matrix v1").unwrap();
        writeln!(s, "rows {}", self.rows()).unwrap();
        writeln!(s, "cols {}", self.cols()).unwrap();
        writeln!(s, "m1 {}", self.m1()).unwrap();
        writeln!(s, "m2 {}", self.m2()).unwrap();
        writeln!(s, "radius {}", self.sigma.radius).unwrap();
        writeln!(s, "center {}", self.sigma.center).unwrap();
        writeln!(s, "sigma_hat{}", join(&self.sigma.sigma_hat)).unwrap();
        for v in self.u.vectors() {
            writeln!(s, "u {}{}", v.k(), join(v.as_slice())).unwrap();
        }
        for v in self.v.vectors() {
            writeln!(s, "v {}{}", v.k(), join(v.as_slice())).unwrap();
        }
        writeln!(s, "end").unwrap();
        s
    }

    /// Parses a record written by [`SpectralMatrix::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_lines(&mut text.lines())
    }

    /// Parses one record from a line stream, stopping after its `end` line.
    pub(crate) fn from_lines<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Self> {
        let mut next = |what: &str| -> Result<&'a str> {
            loop {
                let line = lines.next().ok_or_else(|| Error::Parse(format!("unexpected end, expected {what}")))?;
                let t = line.trim();
                if !t.is_empty() && !t.starts_with('#') {
                    return Ok(t);
                }
            }
        };
        if next("header")? != "spectral-matrix v1" {
            return Err(Error::Parse("missing 'spectral-matrix v1' header".into()));
        }
        let rows: usize = keyed(next("rows")?, "rows")?;
        let cols: usize = keyed(next("cols")?, "cols")?;
        let m1: usize = keyed(next("m1")?, "m1")?;
        let m2: usize = keyed(next("m2")?, "m2")?;
        let radius: f64 = keyed(next("radius")?, "radius")?;
        let center: f64 = keyed(next("center")?, "center")?;
        if rows == 0 || cols == 0 || m1 > rows || m2 > cols {
            return Err(Error::Parse(format!("bad dimensions {rows}x{cols} with m1={m1}, m2={m2}")));
        }
        let sigma_hat = floats(next("sigma_hat")?, "sigma_hat")?;
        let mut read_stack = |tag: &str, n: usize, count: usize| -> Result<ReflectorStack> {
            let mut vecs = Vec::with_capacity(count);
            for i in 0..count {
                let line = next(tag)?;
                let mut parts = line.splitn(3, ' ');
                if parts.next() != Some(tag) {
                    return Err(Error::Parse(format!("expected '{tag}' line, got '{line}'")));
                }
                let k: usize = parse_tok(parts.next().unwrap_or(""))?;
                let vals: Vec<f64> =
                    parts.next().unwrap_or("").split_whitespace().map(parse_tok).collect::<Result<_>>()?;
                if k != n + 1 - count + i || vals.len() != k {
                    return Err(Error::Parse(format!("{tag} reflector {i}: index {k} with {} values", vals.len())));
                }
                vecs.push(HouseholderVector::new(vals)?);
            }
            ReflectorStack::from_vectors(n, vecs)
        };
        let u = read_stack("u", rows, m1)?;
        let v = read_stack("v", cols, m2)?;
        if next("end")? != "end" {
            return Err(Error::Parse("missing 'end'".into()));
        }
        SpectralMatrix::new(u, v, SigmaParam::new(sigma_hat, radius, center)?)
    }
}

fn join(vals: &[f64]) -> String {
    let mut s = String::new();
    for v in vals {
        write!(s, " {v:e}").unwrap();
    }
    s
}

fn parse_tok<T: std::str::FromStr>(tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse(format!("cannot parse '{tok}'")))
}

fn keyed<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::Parse(format!("expected '{key}', got '{line}'")));
    }
    let val = parts.next().ok_or_else(|| Error::Parse(format!("missing value for {key}")))?;
    parse_tok(val)
}

fn floats(line: &str, key: &str) -> Result<Vec<f64>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::Parse(format!("expected '{key}', got '{line}'")));
    }
    parts.map(parse_tok).collect()
}

/// `max_i |σ_i − 1|`.
pub fn spectral_margin(w: &SpectralMatrix) -> f64 {
    w.sigmas().iter().fold(0.0, |m, s| m.max((s - 1.0).abs()))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DecomposeOptions {
    /// σ*; derived from the observed singular values when absent.
    pub center: Option<f64>,
    /// r; derived from the observed singular values when absent.
    pub radius: Option<f64>,
}

/// Full-expressivity decomposition of an arbitrary matrix.
///
/// Reference SVD, then Householder QR of the (completed) singular-vector
/// factors. For `m ≤ n` the result keeps `m` left and `m` right reflectors
/// (`k₁ = 1`, `k₂ = n − m + 1`); for `m > n`, `n` and `n`.
pub fn decompose(w: &Matrix, opts: DecomposeOptions) -> Result<SpectralMatrix> {
    let (m, n) = w.shape();
    if m == 0 || n == 0 {
        return Err(invalid("cannot decompose an empty matrix"));
    }
    let svd = jacobi_svd(w)?;
    let (fit_c, fit_r) = fit_interval(&svd.sigma);
    let center = opts.center.unwrap_or(fit_c);
    let radius = match (opts.center, opts.radius) {
        (_, Some(r)) => r,
        (None, None) => fit_r,
        // center pinned: widen the radius to reach every value
        (Some(c), None) => svd.sigma.iter().fold(0.0f64, |acc, s| acc.max((s - c).abs())) * 1.001 + 1e-12,
    };
    if !(radius >= 0.0) {
        return Err(invalid(format!("radius must be >= 0, got {radius}")));
    }
    let mut sigma_hat = Vec::with_capacity(svd.sigma.len());
    for &s in &svd.sigma {
        match sigma_hat_for(s, center, radius) {
            Some(h) => sigma_hat.push(h),
            None => {
                return Err(Error::Range {
                    value: s,
                    lo: center - radius,
                    hi: center + radius,
                    suggested_center: fit_c,
                    suggested_radius: fit_r,
                })
            }
        }
    }
    let p = m.min(n);
    let u = reflectors_of(&extend_to_orthogonal(&svd.u), p)?;
    let v = reflectors_of(&extend_to_orthogonal(&svd.v), p)?;
    SpectralMatrix::new(u, v, SigmaParam::new(sigma_hat, radius, center)?)
}

/// Stack for an orthogonal `q`, keeping only the `keep` highest-index
/// reflectors. Those alone reproduce the first `keep` columns of `q`.
fn reflectors_of(q: &Matrix, keep: usize) -> Result<ReflectorStack> {
    let (stack, _r) = householder_qr(q)?;
    let n = stack.dim();
    let vecs = stack.vectors()[n - keep..].to_vec();
    ReflectorStack::from_vectors(n, vecs)
}

/// Square decomposition with `m₁ = m₂ = n` (the only reflector counts for
/// which every square matrix is reachable).
pub fn decompose_square(w: &Matrix, m1: usize, m2: usize, opts: DecomposeOptions) -> Result<SpectralMatrix> {
    if !w.is_square() {
        return Err(invalid(format!("decompose_square needs a square matrix, got {:?}", w.shape())));
    }
    let n = w.rows();
    if m1 != n || m2 != n {
        return Err(Error::Unsupported(format!(
            "square decomposition requires m1 = m2 = n = {n}, got m1={m1}, m2={m2}"
        )));
    }
    decompose(w, opts)
}

/// Embeds an orthogonal `A = H_n(a_n)···H_1(a_1)` into the parameterization
/// with left reflectors `k₁..n`, right reflectors `k₂..n` and `σ ≡ 1`.
///
/// When `k₂ ≥ k₁ − 1` the low-index `a_k` move onto the right stack at
/// shifted (zero-padded) indices; otherwise the same is done with the stack
/// of `Aᵀ`, whose reflectors appear in reverse order in `A`.
pub fn embed_orthogonal(a_stack: &ReflectorStack, k1: usize, k2: usize) -> Result<SpectralMatrix> {
    let n = a_stack.dim();
    if k1 == 0 || k2 == 0 || k1 > n + 1 || k2 > n + 1 {
        return Err(invalid(format!("reflector start indices must be in [1, {}], got k1={k1}, k2={k2}", n + 1)));
    }
    if k1 + k2 > n + 2 {
        return Err(Error::Unsupported(format!(
            "k1 + k2 = {} exceeds n + 2 = {}; orthogonal matrices are not all reachable",
            k1 + k2,
            n + 2
        )));
    }
    let (source, near_start, far_start, swap) = if k2 + 1 >= k1 {
        (pad_stack(a_stack), k1, k2, false)
    } else {
        let at = stack_materialize(a_stack).transpose();
        (householder_qr(&at)?.0, k2, k1, true)
    };
    // near stack keeps indices near_start..=n; the rest shift onto the far side
    let near_vecs: Vec<HouseholderVector> = source.vectors()[near_start - 1..].to_vec();
    let mut far_vecs: Vec<HouseholderVector> = (far_start..=n).map(HouseholderVector::zero).collect();
    for k in 1..near_start {
        let target = far_start + near_start - k - 1;
        let src = source.vectors()[k - 1].as_slice();
        let mut padded = vec![0.0; target - k];
        padded.extend_from_slice(src);
        far_vecs[target - far_start] = HouseholderVector::new(padded)?;
    }
    let near_stack = ReflectorStack::from_vectors(n, near_vecs)?;
    let far_stack = ReflectorStack::from_vectors(n, far_vecs)?;
    let sigma = SigmaParam::centered(n, 0.0, 1.0)?;
    if swap {
        SpectralMatrix::new(far_stack, near_stack, sigma)
    } else {
        SpectralMatrix::new(near_stack, far_stack, sigma)
    }
}

/// Same operator with explicit zero reflectors for indices below `k_min`.
fn pad_stack(s: &ReflectorStack) -> ReflectorStack {
    let n = s.dim();
    let mut vecs: Vec<HouseholderVector> = (1..s.k_min()).map(HouseholderVector::zero).collect();
    vecs.extend(s.vectors().iter().cloned());
    ReflectorStack::from_vectors(n, vecs).expect("padded stack is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    #[test]
    fn sigma_examples() {
        let p = SigmaParam::new(vec![0.0], 0.01, 1.0).unwrap();
        assert_eq!(sigma_from_hat(&p), vec![1.0]);
        let p = SigmaParam::new(vec![40.0], 0.1, 1.0).unwrap();
        assert!((sigma_from_hat(&p)[0] - 1.1).abs() < 1e-12);
        let p = SigmaParam::new(vec![-3.0, 0.5, 7.0], 0.0, 0.9).unwrap();
        assert_eq!(sigma_from_hat(&p), vec![0.9, 0.9, 0.9]);
        assert!(SigmaParam::new(vec![0.0], -1.0, 1.0).is_err());
    }

    #[test]
    fn sigma_monotone_and_bounded() {
        let hats: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.75).collect();
        let p = SigmaParam::new(hats, 0.2, 1.0).unwrap();
        let s = sigma_from_hat(&p);
        assert!(s.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.iter().all(|&x| (0.8..=1.2).contains(&x)));
    }

    #[test]
    fn sigma_hat_grad_examples() {
        let p = SigmaParam::new(vec![0.0], 0.01, 1.0).unwrap();
        assert!((sigma_hat_grad(&p, &[1.0]).unwrap()[0] - 0.005).abs() < 1e-16);
        let p = SigmaParam::new(vec![0.3, -2.0], 0.0, 1.0).unwrap();
        assert_eq!(sigma_hat_grad(&p, &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert!(sigma_hat_grad(&p, &[1.0]).is_err());
    }

    #[test]
    fn sigma_hat_grad_matches_finite_differences() {
        let mut r = rng(4);
        let hats: Vec<f64> = (0..20).map(|_| r.random_range(-4.0..4.0)).collect();
        let dl: Vec<f64> = (0..20).map(|_| r.random_range(-2.0..2.0)).collect();
        let p = SigmaParam::new(hats.clone(), 0.3, 1.0).unwrap();
        let analytic = sigma_hat_grad(&p, &dl).unwrap();
        let step = 1e-5;
        for i in 0..20 {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus.sigma_hat[i] += step;
            minus.sigma_hat[i] -= step;
            let fd = dl[i] * (sigma_from_hat(&plus)[i] - sigma_from_hat(&minus)[i]) / (2.0 * step);
            let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-8);
            assert!(rel < 1e-8, "coordinate {i}: {rel}");
        }
    }

    #[test]
    fn inversion_round_trip_and_range() {
        for &s in &[0.25, 0.5, 1.0, 2.0, 2.25] {
            let h = sigma_hat_for(s, 1.25, 1.0).unwrap();
            let p = SigmaParam::new(vec![h], 1.0, 1.25).unwrap();
            assert!((sigma_from_hat(&p)[0] - s).abs() < 1e-12, "{s}");
        }
        assert!(sigma_hat_for(2.5, 1.25, 1.0).is_none());
        assert_eq!(sigma_hat_for(1.0, 1.0, 0.0), Some(0.0));
        assert!(sigma_hat_for(1.1, 1.0, 0.0).is_none());
    }

    #[test]
    fn diagonal_case() {
        let mut w = SpectralMatrix::identity_like(3, 3, 0, 0, 0.5, 1.0).unwrap();
        w.sigma_param_mut().sigma_hat = vec![1.0, -1.0, 0.0];
        let sig = w.sigmas();
        assert_eq!(w.materialize(), Matrix::diag(&sig));
    }

    #[test]
    fn random_square_spectrum_matches_sigma() {
        let mut r = rng(21);
        let mut w = SpectralMatrix::random(4, 4, 4, 4, 0.5, 1.0, &mut r).unwrap();
        w.sigma_param_mut().sigma_hat = vec![2.0, -1.0, 0.3, -3.0];
        let oracle = jacobi_svd(&w.materialize()).unwrap().sigma;
        let expect = sorted_desc(w.sigmas());
        for (a, b) in oracle.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_sigma_with_enough_reflectors_is_orthogonal() {
        let mut r = rng(22);
        let w = SpectralMatrix::random(6, 6, 3, 3, 0.0, 1.0, &mut r).unwrap();
        assert!(w.materialize().orthogonality_defect() < 1e-10);
    }

    #[test]
    fn rectangular_spectrum_matches_sigma() {
        let mut r = rng(23);
        for (m, n) in [(2, 5), (5, 2), (3, 4), (4, 3)] {
            let p = m.min(n);
            let mut w = SpectralMatrix::random(m, n, m, p, 0.4, 1.0, &mut r).unwrap();
            w.sigma_param_mut().sigma_hat = (0..p).map(|i| i as f64 - 1.0).collect();
            let oracle = jacobi_svd(&w.materialize()).unwrap().sigma;
            let expect = sorted_desc(w.sigmas());
            for (a, b) in oracle.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-10, "{m}x{n}");
            }
        }
    }

    #[test]
    fn rectangular_right_reflectors_capped() {
        let u = ReflectorStack::identity(2, 2);
        let v = ReflectorStack::identity(4, 3);
        assert!(SpectralMatrix::new(u, v, SigmaParam::centered(2, 0.1, 1.0).unwrap()).is_err());
    }

    #[test]
    fn decompose_identity() {
        let w = decompose_square(&Matrix::identity(4), 4, 4, DecomposeOptions::default()).unwrap();
        assert!(w.sigmas().iter().all(|&s| s == 1.0));
        assert!(w.u_stack().vectors().iter().all(HouseholderVector::is_identity));
        assert!(w.v_stack().vectors().iter().all(HouseholderVector::is_identity));
        assert!(w.materialize().sub(&Matrix::identity(4)).frobenius() < 1e-14);
    }

    #[test]
    fn decompose_diag_pinned_interval() {
        let a = Matrix::diag(&[2.0, 0.5]);
        let opts = DecomposeOptions { center: Some(1.25), radius: Some(1.0) };
        let w = decompose_square(&a, 2, 2, opts).unwrap();
        assert!(w.materialize().sub(&a).frobenius() < 1e-10);
    }

    #[test]
    fn decompose_random_8x8() {
        let mut r = rng(24);
        let a = Matrix::gaussian(8, 8, 1.0, &mut r);
        let w = decompose_square(&a, 8, 8, DecomposeOptions::default()).unwrap();
        assert!(w.materialize().sub(&a).frobenius() / a.frobenius() < 1e-8);
    }

    #[test]
    fn decompose_errors() {
        let a = Matrix::diag(&[2.0, 0.5]);
        let opts = DecomposeOptions { center: Some(1.0), radius: Some(0.1) };
        match decompose_square(&a, 2, 2, opts) {
            Err(Error::Range { suggested_center, suggested_radius, .. }) => {
                assert!(suggested_center - suggested_radius <= 0.5);
                assert!(suggested_center + suggested_radius >= 2.0);
            }
            other => panic!("expected range error, got {other:?}"),
        }
        assert!(matches!(decompose_square(&a, 1, 2, DecomposeOptions::default()), Err(Error::Unsupported(_))));
        assert!(decompose_square(&Matrix::zeros(2, 3), 2, 2, DecomposeOptions::default()).is_err());
    }

    #[test]
    fn embed_k1_equal_one_copies_stack() {
        let mut r = rng(25);
        let a = ReflectorStack::gaussian(5, 5, &mut r);
        let w = embed_orthogonal(&a, 1, 4).unwrap();
        assert_eq!(w.u_stack(), &a);
        assert!(w.v_stack().vectors().iter().all(HouseholderVector::is_identity));
    }

    #[test]
    fn embed_rotation_90() {
        // 90° rotation is a product of two reflections
        let rot = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let (a, _) = householder_qr(&rot).unwrap();
        let w = embed_orthogonal(&a, 2, 2).unwrap();
        assert!(w.materialize().sub(&rot).frobenius() < 1e-12);
    }

    #[test]
    fn embed_random_5() {
        let mut r = rng(26);
        let a = ReflectorStack::gaussian(5, 5, &mut r);
        let target = stack_materialize(&a);
        let w = embed_orthogonal(&a, 3, 4).unwrap();
        assert!(w.materialize().sub(&target).frobenius() < 5.0 * 1e-10);
        let w = embed_orthogonal(&a, 5, 2).unwrap();
        assert!(w.materialize().sub(&target).frobenius() < 5.0 * 1e-10);
        assert!(matches!(embed_orthogonal(&a, 4, 4), Err(Error::Unsupported(_))));
    }

    #[test]
    fn margin_examples() {
        let mut w = SpectralMatrix::identity_like(3, 3, 0, 0, 0.05, 1.0).unwrap();
        assert_eq!(spectral_margin(&w), 0.0);
        w.sigma_param_mut().sigma_hat = vec![10.0, -10.0, 0.0];
        assert!(spectral_margin(&w) <= 0.05);
        let s = SigmaParam::new(vec![], 0.0, 1.0).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn margin_of_explicit_sigmas() {
        // σ = (1.01, 0.99, 1.0) realized with r = 0.02 around 1
        let hats: Vec<f64> = [1.01, 0.99, 1.0].iter().map(|&s| sigma_hat_for(s, 1.0, 0.02).unwrap()).collect();
        let w = SpectralMatrix::new(
            ReflectorStack::identity(3, 0),
            ReflectorStack::identity(3, 0),
            SigmaParam::new(hats, 0.02, 1.0).unwrap(),
        )
        .unwrap();
        assert!((spectral_margin(&w) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let mut r = rng(27);
        let mut w = SpectralMatrix::random(3, 5, 2, 3, 0.1, 0.95, &mut r).unwrap();
        w.sigma_param_mut().sigma_hat = vec![0.1, -1e-17, 3.5];
        let text = w.to_text();
        let back = SpectralMatrix::from_text(&text).unwrap();
        assert_eq!(back, w);
        assert!(SpectralMatrix::from_text("spectral-matrix v1\nrows 2\n").is_err());
        assert!(SpectralMatrix::from_text(&text.replace("u 3 ", "u 2 ")).is_err());
    }

    #[test]
    fn penalty_gradient_direction() {
        let mut w = SpectralMatrix::identity_like(2, 2, 0, 0, 0.5, 1.0).unwrap();
        w.sigma_param_mut().sigma_hat = vec![1.0, -1.0];
        let (val, g) = w.sigma_penalty(1.0);
        assert!(val > 0.0);
        assert!(g[0] > 0.0 && g[1] < 0.0);
        assert_eq!(w.sigma_penalty(0.0).0, 0.0);
    }
}
