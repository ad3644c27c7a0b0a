//! Local forward/backward propagation through a [`SpectralMatrix`]:
//! `C = W·h` is computed reflector by reflector, caching each reflector's
//! output so the backward pass can run every reflector gradient from the
//! cache without recomputation.

use crate::diagnostics::flops::{Composite, FlopCounter, Kernel};
use crate::error::{invalid, Result};
use crate::householder::{reflect_grad_from_output, reflect_in_place};
use crate::svd_param::SpectralMatrix;

/// Intermediates of one forward application.
///
/// Reflector outputs are cached as their trailing `k` entries (the only part
/// the backward pass reads), packed by stack slot (`slot = k − k_min`) into one
/// buffer per stack.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTape {
    input: Vec<f64>,
    v_out: Vec<f64>,
    v_k_min: usize,
    v_alpha: Vec<f64>,
    /// `Vᵀh`
    z: Vec<f64>,
    u_out: Vec<f64>,
    u_k_min: usize,
    u_alpha: Vec<f64>,
    output: Vec<f64>,
}

impl SpectralTape {
    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// `Vᵀh`, the vector the diagonal acts on.
    pub fn rotated_input(&self) -> &[f64] {
        &self.z
    }

    /// Trailing entries of the output of left reflector `slot`.
    pub fn u_output(&self, slot: usize) -> &[f64] {
        packed(&self.u_out, self.u_k_min, slot)
    }

    /// Trailing entries of the output of right reflector `slot`.
    pub fn v_output(&self, slot: usize) -> &[f64] {
        packed(&self.v_out, self.v_k_min, slot)
    }

    /// Rebuilds `C` from `Vᵀh` by replaying the cached left-reflector chain.
    pub fn replay(&self, w: &SpectralMatrix) -> Vec<f64> {
        let sig = w.sigmas();
        let mut x = vec![0.0; w.rows()];
        for (i, s) in sig.iter().enumerate() {
            x[i] = s * self.z[i];
        }
        let mut flops = FlopCounter::new();
        for v in w.u_stack().vectors() {
            reflect_in_place(&mut x, v.as_slice(), v.norm_sq(), &mut flops);
        }
        x
    }
}

fn slot_offset(k_min: usize, slot: usize) -> usize {
    slot * k_min + slot * slot.saturating_sub(1) / 2
}

fn packed(buf: &[f64], k_min: usize, slot: usize) -> &[f64] {
    let start = slot_offset(k_min, slot);
    &buf[start..start + k_min + slot]
}

/// Gradients of one local backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrads {
    /// `∂L/∂u_k` by left-stack slot.
    pub du: Vec<Vec<f64>>,
    /// `∂L/∂v_k` by right-stack slot.
    pub dv: Vec<Vec<f64>>,
    /// `∂L/∂σ` before the sigmoid chain rule.
    pub d_sigma: Vec<f64>,
    pub d_sigma_hat: Vec<f64>,
    /// `∂L/∂h = Wᵀg`.
    pub dh: Vec<f64>,
}

impl SpectralGrads {
    pub fn zeros_like(w: &SpectralMatrix) -> Self {
        SpectralGrads {
            du: w.u_stack().vectors().iter().map(|v| vec![0.0; v.k()]).collect(),
            dv: w.v_stack().vectors().iter().map(|v| vec![0.0; v.k()]).collect(),
            d_sigma: vec![0.0; w.sigma_param().len()],
            d_sigma_hat: vec![0.0; w.sigma_param().len()],
            dh: vec![0.0; w.cols()],
        }
    }
}

/// A [`SpectralMatrix`] with per-pass constants (`‖u‖²` of each reflector and
/// the derived σ) computed once and shared by every application.
#[derive(Clone, Debug)]
pub struct PreparedSpectral<'a> {
    w: &'a SpectralMatrix,
    u_norms: Vec<f64>,
    v_norms: Vec<f64>,
    sigma: Vec<f64>,
    /// `2r·f(σ̂)(1 − f(σ̂))`
    sigma_slope: Vec<f64>,
}

impl<'a> PreparedSpectral<'a> {
    pub fn new(w: &'a SpectralMatrix, flops: &mut FlopCounter) -> Self {
        let u_norms = w.u_stack().norms_sq();
        let v_norms = w.v_stack().norms_sq();
        let k_total = (w.u_stack().scalar_count() + w.v_stack().scalar_count()) as u64;
        flops.add(Kernel::ReflectorNorm, 2 * k_total);
        let p = w.sigma_param();
        let sigma = w.sigmas();
        let sigma_slope = p
            .sigma_hat
            .iter()
            .map(|&s| {
                let f = crate::svd_param::sigmoid(s);
                2.0 * p.radius * f * (1.0 - f)
            })
            .collect();
        PreparedSpectral { w, u_norms, v_norms, sigma, sigma_slope }
    }

    pub fn matrix(&self) -> &'a SpectralMatrix {
        self.w
    }

    /// `C = W·h` with its tape. Leading cost `4n(m₁+m₂) − 2m₁² − 2m₂²`.
    pub fn forward(&self, h: &[f64], flops: &mut FlopCounter) -> Result<(Vec<f64>, SpectralTape)> {
        let (m, n) = (self.w.rows(), self.w.cols());
        if h.len() != n {
            return Err(invalid(format!("input length {} != {}", h.len(), n)));
        }
        Ok(flops.scoped(Composite::SpectralForward, |flops| {
            let vs = self.w.v_stack().vectors();
            let mut z = h.to_vec();
            let v_k_min = self.w.v_stack().k_min();
            let mut v_out = vec![0.0; self.w.v_stack().scalar_count()];
            let mut v_alpha = vec![0.0; vs.len()];
            for slot in (0..vs.len()).rev() {
                let u = vs[slot].as_slice();
                let d = reflect_in_place(&mut z, u, self.v_norms[slot], flops);
                v_alpha[slot] = -d;
                let start = slot_offset(v_k_min, slot);
                v_out[start..start + u.len()].copy_from_slice(&z[n - u.len()..]);
            }
            let mut x = vec![0.0; m];
            for (i, s) in self.sigma.iter().enumerate() {
                x[i] = s * z[i];
            }
            flops.add(Kernel::Diagonal, self.sigma.len() as u64);
            let us = self.w.u_stack().vectors();
            let u_k_min = self.w.u_stack().k_min();
            let mut u_out = Vec::with_capacity(self.w.u_stack().scalar_count());
            let mut u_alpha = Vec::with_capacity(us.len());
            for (slot, v) in us.iter().enumerate() {
                let u = v.as_slice();
                let d = reflect_in_place(&mut x, u, self.u_norms[slot], flops);
                u_alpha.push(-d);
                u_out.extend_from_slice(&x[m - u.len()..]);
            }
            let tape = SpectralTape {
                input: h.to_vec(),
                v_out,
                v_k_min,
                v_alpha,
                z,
                u_out,
                u_k_min,
                u_alpha,
                output: x.clone(),
            };
            (x, tape)
        }))
    }

    /// Backward pass for `g = ∂L/∂C`. Writes into `out` (overwriting).
    pub fn backward_into(
        &self,
        tape: &SpectralTape,
        g: &[f64],
        out: &mut SpectralGrads,
        flops: &mut FlopCounter,
    ) -> Result<()> {
        let (m, n) = (self.w.rows(), self.w.cols());
        let us = self.w.u_stack().vectors();
        let vs = self.w.v_stack().vectors();
        if g.len() != m
            || tape.input.len() != n
            || tape.u_alpha.len() != us.len()
            || tape.v_alpha.len() != vs.len()
            || tape.u_out.len() != self.w.u_stack().scalar_count()
            || tape.v_out.len() != self.w.v_stack().scalar_count()
            || (!us.is_empty() && tape.u_k_min != self.w.u_stack().k_min())
            || (!vs.is_empty() && tape.v_k_min != self.w.v_stack().k_min())
            || tape.z.len() != n
            || out.du.len() != us.len()
            || out.dv.len() != vs.len()
        {
            return Err(invalid("tape or gradient does not match the spectral matrix"));
        }
        flops.scoped(Composite::SpectralBackward, |flops| {
            let mut gu = g.to_vec();
            for slot in (0..us.len()).rev() {
                reflect_grad_from_output(
                    tape.u_output(slot),
                    us[slot].as_slice(),
                    self.u_norms[slot],
                    tape.u_alpha[slot],
                    &mut gu,
                    &mut out.du[slot],
                    flops,
                );
            }
            let p = self.sigma.len();
            let gz = &mut out.dh;
            gz.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..p {
                out.d_sigma[i] = gu[i] * tape.z[i];
                out.d_sigma_hat[i] = out.d_sigma[i] * self.sigma_slope[i];
                gz[i] = self.sigma[i] * gu[i];
            }
            flops.add(Kernel::Diagonal, 3 * p as u64);
            for (slot, v) in vs.iter().enumerate() {
                reflect_grad_from_output(
                    tape.v_output(slot),
                    v.as_slice(),
                    self.v_norms[slot],
                    tape.v_alpha[slot],
                    gz,
                    &mut out.dv[slot],
                    flops,
                );
            }
        });
        Ok(())
    }

    pub fn backward(&self, tape: &SpectralTape, g: &[f64], flops: &mut FlopCounter) -> Result<SpectralGrads> {
        let mut out = SpectralGrads::zeros_like(self.w);
        self.backward_into(tape, g, &mut out, flops)?;
        Ok(out)
    }
}

/// `C = W·h` with the tape needed by [`spectral_backward`].
pub fn spectral_apply(w: &SpectralMatrix, h: &[f64]) -> Result<(Vec<f64>, SpectralTape)> {
    let mut flops = FlopCounter::new();
    PreparedSpectral::new(w, &mut flops).forward(h, &mut flops)
}

/// Gradients of `L` with respect to every reflector, `σ̂`, and `h`, given
/// `g = ∂L/∂C` and the tape of the matching [`spectral_apply`] call.
pub fn spectral_backward(w: &SpectralMatrix, tape: &SpectralTape, g: &[f64]) -> Result<SpectralGrads> {
    let mut flops = FlopCounter::new();
    PreparedSpectral::new(w, &mut flops).backward(tape, g, &mut flops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::householder::hgrad;
    use crate::matrix::{dot, norm, Matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randvec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn with_random_sigma(mut w: SpectralMatrix, rng: &mut ChaCha8Rng) -> SpectralMatrix {
        for s in w.sigma_param_mut().sigma_hat.iter_mut() {
            *s = rng.random_range(-2.0..2.0);
        }
        w
    }

    #[test]
    fn diagonal_only() {
        let mut w = SpectralMatrix::identity_like(3, 3, 0, 0, 0.5, 1.0).unwrap();
        w.sigma_param_mut().sigma_hat = vec![1.0, 0.0, -2.0];
        let sig = w.sigmas();
        let h = [1.0, -2.0, 3.0];
        let (c, tape) = spectral_apply(&w, &h).unwrap();
        let expect: Vec<f64> = sig.iter().zip(&h).map(|(s, x)| s * x).collect();
        assert_eq!(c, expect);
        let g = [0.5, 1.0, -1.0];
        let grads = spectral_backward(&w, &tape, &g).unwrap();
        let d_sigma: Vec<f64> = g.iter().zip(&h).map(|(a, b)| a * b).collect();
        assert_eq!(grads.d_sigma, d_sigma);
        let dh: Vec<f64> = sig.iter().zip(&g).map(|(s, x)| s * x).collect();
        assert_eq!(grads.dh, dh);
    }

    #[test]
    fn unit_sigma_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = SpectralMatrix::random(7, 7, 4, 5, 0.0, 1.0, &mut rng).unwrap();
        let h = randvec(7, &mut rng);
        let (c, _) = spectral_apply(&w, &h).unwrap();
        assert!((norm(&c) - norm(&h)).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_materialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (m, n, m1, m2) in [(8, 8, 4, 4), (8, 8, 8, 8), (3, 5, 3, 3), (5, 3, 5, 3), (6, 6, 0, 2)] {
            let w = with_random_sigma(SpectralMatrix::random(m, n, m1, m2, 0.3, 1.0, &mut rng).unwrap(), &mut rng);
            let h = randvec(n, &mut rng);
            let (c, tape) = spectral_apply(&w, &h).unwrap();
            let dense = w.materialize().matvec(&h);
            for (a, b) in c.iter().zip(&dense) {
                assert!((a - b).abs() <= n as f64 * 1e-12);
            }
            assert_eq!(tape.replay(&w), c);
            let g = randvec(m, &mut rng);
            let grads = spectral_backward(&w, &tape, &g).unwrap();
            let dense_t = w.materialize().matvec_t(&g);
            for (a, b) in grads.dh.iter().zip(&dense_t) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_upstream_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = SpectralMatrix::random(5, 5, 3, 3, 0.1, 1.0, &mut rng).unwrap();
        let (_, tape) = spectral_apply(&w, &randvec(5, &mut rng)).unwrap();
        let grads = spectral_backward(&w, &tape, &[0.0; 5]).unwrap();
        assert!(grads.du.iter().chain(&grads.dv).flatten().all(|&x| x == 0.0));
        assert!(grads.d_sigma_hat.iter().chain(&grads.dh).all(|&x| x == 0.0));
    }

    /// Central differences of `gᵀ·W(θ)·h` over every parameter coordinate.
    fn fd_check(w: &SpectralMatrix, h: &[f64], g: &[f64]) -> f64 {
        let (_, tape) = spectral_apply(w, h).unwrap();
        let grads = spectral_backward(w, &tape, g).unwrap();
        let mut analytic: Vec<f64> = Vec::new();
        grads.du.iter().chain(&grads.dv).for_each(|d| analytic.extend(d));
        analytic.extend(&grads.d_sigma_hat);
        let mut base = w.clone();
        let mut flat: Vec<f64> = Vec::new();
        base.param_slices_mut().iter().for_each(|s| flat.extend(s.iter()));
        let loss = |theta: &[f64]| {
            let mut m = w.clone();
            let mut off = 0;
            for s in m.param_slices_mut() {
                s.copy_from_slice(&theta[off..off + s.len()]);
                off += s.len();
            }
            dot(g, &m.apply(h).unwrap())
        };
        let step = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..flat.len() {
            let mut p = flat.clone();
            p[i] += step;
            let mut q = flat.clone();
            q[i] -= step;
            let fd = (loss(&p) - loss(&q)) / (2.0 * step);
            let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-8);
            worst = worst.max(rel);
        }
        // h-gradient
        for i in 0..h.len() {
            let mut hp = h.to_vec();
            hp[i] += step;
            let mut hm = h.to_vec();
            hm[i] -= step;
            let fd = (dot(g, &w.apply(&hp).unwrap()) - dot(g, &w.apply(&hm).unwrap())) / (2.0 * step);
            let rel = (fd - grads.dh[i]).abs() / fd.abs().max(grads.dh[i].abs()).max(1e-8);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (m, n, m1, m2) in [(6, 6, 3, 3), (6, 6, 6, 6), (2, 3, 2, 2), (3, 2, 3, 2), (4, 4, 1, 0)] {
            let w = with_random_sigma(SpectralMatrix::random(m, n, m1, m2, 0.4, 1.0, &mut rng).unwrap(), &mut rng);
            let h = randvec(n, &mut rng);
            let g = randvec(m, &mut rng);
            let err = fd_check(&w, &h, &g);
            assert!(err < 1e-6, "{m}x{n} m1={m1} m2={m2}: {err}");
        }
    }

    #[test]
    fn right_side_input_form_agrees() {
        // Recompute the right-stack gradients with the input-form Hgrad: the
        // reflector input is the next-higher slot's output (or h itself).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = with_random_sigma(SpectralMatrix::random(6, 6, 3, 4, 0.3, 1.0, &mut rng).unwrap(), &mut rng);
        let h = randvec(6, &mut rng);
        let g = randvec(6, &mut rng);
        let (_, tape) = spectral_apply(&w, &h).unwrap();
        let grads = spectral_backward(&w, &tape, &g).unwrap();
        // gradient arriving at the right stack: Σ̂ᵀ·Uᵀg
        let mut gu = g.clone();
        w.u_stack().apply_in_place(&mut gu, true);
        let sig = w.sigmas();
        let mut gz: Vec<f64> = gu.iter().zip(&sig).map(|(a, s)| a * s).collect();
        let vs = w.v_stack().vectors();
        // full vectors at each right-reflector input, in application order
        let mut inputs = Vec::new();
        let mut cur = h.clone();
        for v in vs.iter().rev() {
            inputs.push(cur.clone());
            cur = crate::householder::hprod(&cur, v).unwrap();
        }
        inputs.reverse();
        for slot in 0..vs.len() {
            let (dh, du) = hgrad(&inputs[slot], &vs[slot], &gz, false).unwrap();
            for (a, b) in du.iter().zip(&grads.dv[slot]) {
                assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            }
            gz = dh;
        }
        for (a, b) in gz.iter().zip(&grads.dh) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stale_tape_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = SpectralMatrix::random(4, 4, 2, 2, 0.1, 1.0, &mut rng).unwrap();
        let other = SpectralMatrix::random(5, 5, 2, 2, 0.1, 1.0, &mut rng).unwrap();
        let (_, tape) = spectral_apply(&other, &[0.0; 5]).unwrap();
        assert!(spectral_backward(&w, &tape, &[0.0; 4]).is_err());
        assert!(spectral_apply(&w, &[0.0; 3]).is_err());
    }

    #[test]
    fn flop_counts_follow_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, m1, m2) = (64usize, 8usize, 8usize);
        let w = SpectralMatrix::random(n, n, m1, m2, 0.1, 1.0, &mut rng).unwrap();
        let mut flops = FlopCounter::new();
        let prep = PreparedSpectral::new(&w, &mut flops);
        let mut fwd = FlopCounter::new();
        let (_, tape) = prep.forward(&randvec(n, &mut rng), &mut fwd).unwrap();
        let sum_k: u64 = ((n - m1 + 1)..=n).chain((n - m2 + 1)..=n).map(|k| k as u64).sum();
        assert_eq!(fwd.composite(Composite::SpectralForward), 4 * sum_k + n as u64);
        let mut bwd = FlopCounter::new();
        prep.backward(&tape, &randvec(n, &mut rng), &mut bwd).unwrap();
        assert_eq!(bwd.composite(Composite::SpectralBackward), 7 * sum_k + 3 * n as u64);
        let _ = Matrix::identity(1);
    }
}
