pub mod activation;
pub mod dense;
pub mod rnn;
pub mod spectral;

pub use activation::{activation, activation_grad, Activation};
pub use dense::SpectralDenseLayer;
pub use rnn::{rnn_backward_through_time, rnn_step, PreparedCell, RnnCell, RnnGrads, StepTape, Transition};
pub use spectral::{spectral_apply, spectral_backward, PreparedSpectral, SpectralGrads, SpectralTape};
