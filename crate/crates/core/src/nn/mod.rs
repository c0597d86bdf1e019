//! Minimal dense-tensor layers with hand-written backward passes.
//!
//! Every layer is generic over [`Real`] so the same code trains in `f32`
//! and is gradient-checked in `f64`. Layers own no activations: `forward`
//! returns whatever the matching `backward` needs.

mod act;
mod conv;
mod linear;
mod norm;
mod real;
mod tensor;

pub use act::{gelu, gelu_grad, sigmoid};
pub use conv::Conv2d;
pub use linear::Linear;
pub use norm::{LayerNorm, LayerNormCache};
pub use real::{gemm, Real};
pub use tensor::{Params, Tensor};

#[doc(hidden)]
pub fn join_name(prefix: &str, name: &str) -> String {
    tensor::join(prefix, name)
}
