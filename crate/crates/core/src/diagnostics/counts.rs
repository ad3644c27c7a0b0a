//! Closed-form parameter and flop counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::flops::{Composite, FlopCounter, Kernel};
use crate::error::{invalid, Result};
use crate::householder::{reflect_grad_from_output, reflect_in_place, HouseholderVector};
use crate::layers::PreparedSpectral;
use crate::svd_param::SpectralMatrix;
use crate::training::ModelKind;

/// Trainable scalars of a recurrent model with hidden size `n`, input size
/// `n_i`, output size `n_y`. Reflector counts are ignored for vanilla models.
pub fn param_count(n: usize, n_i: usize, n_y: usize, m1: usize, m2: usize, kind: ModelKind) -> usize {
    match kind {
        ModelKind::SpectralRnn => (n_y + n_i + m1 + m2 + 2) * n - (m1 * m1 + m2 * m2 - m1 - m2) / 2,
        ModelKind::VanillaRnn => (n_y + n_i + n + 1) * n,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlopKernel {
    /// One reflector applied to a vector.
    Hprod { k: usize },
    /// Gradient through one reflector.
    Hgrad { n: usize, k: usize },
    SpectralForward { n: usize, m1: usize, m2: usize },
    SpectralBackward { n: usize, m1: usize, m2: usize },
}

/// Closed-form reference costs, without their unspecified `O(n)` terms:
///
/// | kernel | flops |
/// |---|---|
/// | Hprod | `4k` |
/// | Hgrad | `3n + 6k` |
/// | forward | `4n(m₁+m₂) − 2m₁² − 2m₂²` |
/// | backward | `6n(m₁+m₂) − 1.5m₁² − 1.5m₂²` |
pub fn predicted_flops(kernel: FlopKernel) -> f64 {
    match kernel {
        FlopKernel::Hprod { k } => 4.0 * k as f64,
        FlopKernel::Hgrad { n, k } => 3.0 * n as f64 + 6.0 * k as f64,
        FlopKernel::SpectralForward { n, m1, m2 } => {
            let (n, m1, m2) = (n as f64, m1 as f64, m2 as f64);
            4.0 * n * (m1 + m2) - 2.0 * m1 * m1 - 2.0 * m2 * m2
        }
        FlopKernel::SpectralBackward { n, m1, m2 } => {
            let (n, m1, m2) = (n as f64, m1 as f64, m2 as f64);
            6.0 * n * (m1 + m2) - 1.5 * m1 * m1 - 1.5 * m2 * m2
        }
    }
}

/// Only the highest-order term: `4k`, `6k`, `4n(m₁+m₂)`, `6n(m₁+m₂)`.
pub fn leading_flops(kernel: FlopKernel) -> f64 {
    match kernel {
        FlopKernel::Hprod { k } => 4.0 * k as f64,
        FlopKernel::Hgrad { k, .. } => 6.0 * k as f64,
        FlopKernel::SpectralForward { n, m1, m2 } => 4.0 * (n * (m1 + m2)) as f64,
        FlopKernel::SpectralBackward { n, m1, m2 } => 6.0 * (n * (m1 + m2)) as f64,
    }
}

/// Runs one instance of `kernel` on random data (from `seed`) and returns
/// the instrumented flop count. Spectral passes exclude the reflector norms,
/// which are computed once per parameter update and shared by all passes.
pub fn measured_flops(kernel: FlopKernel, seed: u64) -> Result<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flops = FlopCounter::new();
    match kernel {
        FlopKernel::Hprod { k } | FlopKernel::Hgrad { n: _, k } if k == 0 => Err(invalid("reflector length must be positive")),
        FlopKernel::Hprod { k } => {
            let u = HouseholderVector::gaussian(k, &mut rng);
            let mut h = HouseholderVector::gaussian(k, &mut rng).as_slice().to_vec();
            reflect_in_place(&mut h, u.as_slice(), u.norm_sq(), &mut flops);
            Ok(flops.get(Kernel::Hprod))
        }
        FlopKernel::Hgrad { n, k } => {
            if k > n {
                return Err(invalid(format!("k={k} exceeds n={n}")));
            }
            let u = HouseholderVector::gaussian(k, &mut rng);
            let mut h = HouseholderVector::gaussian(n, &mut rng).as_slice().to_vec();
            let mut g = HouseholderVector::gaussian(n, &mut rng).as_slice().to_vec();
            let alpha = -reflect_in_place(&mut h, u.as_slice(), u.norm_sq(), &mut FlopCounter::new());
            let mut du = vec![0.0; k];
            reflect_grad_from_output(&h, u.as_slice(), u.norm_sq(), alpha, &mut g, &mut du, &mut flops);
            Ok(flops.get(Kernel::Hgrad))
        }
        FlopKernel::SpectralForward { n, m1, m2 } | FlopKernel::SpectralBackward { n, m1, m2 } => {
            if n == 0 || m1 > n || m2 > n {
                return Err(invalid(format!("need 0 < n and m1, m2 <= n, got n={n} m1={m1} m2={m2}")));
            }
            let w = SpectralMatrix::random(n, n, m1, m2, 0.1, 1.0, &mut rng)?;
            let prep = PreparedSpectral::new(&w, &mut FlopCounter::new());
            let h = HouseholderVector::gaussian(n, &mut rng).as_slice().to_vec();
            let (_, tape) = prep.forward(&h, &mut flops)?;
            if let FlopKernel::SpectralForward { .. } = kernel {
                return Ok(flops.composite(Composite::SpectralForward));
            }
            let g = HouseholderVector::gaussian(n, &mut rng).as_slice().to_vec();
            prep.backward(&tape, &g, &mut flops)?;
            Ok(flops.composite(Composite::SpectralBackward))
        }
    }
}
