//! Flop instrumentation. One multiply and one add each count as one flop;
//! divisions, square roots and comparisons are not counted.

use std::fmt;

/// Leaf kernels whose arithmetic is tallied directly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kernel {
    Hprod,
    Hgrad,
    /// `‖u‖²` of each reflector, computed once per pass.
    ReflectorNorm,
    /// Diagonal scaling by σ and its gradient.
    Diagonal,
    /// Dense matrix-vector products and outer-product accumulations.
    Dense,
    /// Activations, losses, bias updates and gradient accumulation.
    Elementwise,
    Optimizer,
}

impl Kernel {
    pub const ALL: [Kernel; 7] = [
        Kernel::Hprod,
        Kernel::Hgrad,
        Kernel::ReflectorNorm,
        Kernel::Diagonal,
        Kernel::Dense,
        Kernel::Elementwise,
        Kernel::Optimizer,
    ];

    fn slot(self) -> usize {
        self as usize
    }
}

/// Composite operations whose cost is the sum of leaf kernels run inside them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Composite {
    SpectralForward,
    SpectralBackward,
}

/// Scope-local flop tally. Counters are owned by whoever drives the kernels;
/// parallel workers each own one and [`FlopCounter::merge`] at the end.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct FlopCounter {
    leaf: [u64; 7],
    composite: [u64; 2],
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, kernel: Kernel, flops: u64) {
        self.leaf[kernel.slot()] += flops;
    }

    pub fn get(&self, kernel: Kernel) -> u64 {
        self.leaf[kernel.slot()]
    }

    pub fn composite(&self, op: Composite) -> u64 {
        self.composite[op as usize]
    }

    /// Sum over leaf kernels. Composite tallies overlap the leaves and are
    /// not included.
    pub fn total(&self) -> u64 {
        self.leaf.iter().sum()
    }

    /// Runs `f` and attributes the leaf flops it performs to `op` as well.
    pub fn scoped<R>(&mut self, op: Composite, f: impl FnOnce(&mut Self) -> R) -> R {
        let before = self.total();
        let out = f(self);
        let spent = self.total() - before;
        self.composite[op as usize] += spent;
        out
    }

    pub fn merge(&mut self, other: &FlopCounter) {
        for (a, b) in self.leaf.iter_mut().zip(other.leaf) {
            *a += b;
        }
        for (a, b) in self.composite.iter_mut().zip(other.composite) {
            *a += b;
        }
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

impl fmt::Debug for FlopCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("FlopCounter");
        for k in Kernel::ALL {
            d.field(&format!("{k:?}"), &self.get(k));
        }
        d.field("SpectralForward", &self.composite(Composite::SpectralForward))
            .field("SpectralBackward", &self.composite(Composite::SpectralBackward))
            .finish()
    }
}
