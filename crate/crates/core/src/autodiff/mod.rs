//! Nested-differentiation engine: reverse-mode tape plus first-order spatial
//! duals that live on it.

pub mod dual;
pub mod params;
pub mod tape;
pub mod tensor;

pub use dual::{Dual3, DualVar};
pub use params::{Binder, BlockId, BlockSpec, Layout, ParamVector};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
