//! Networks, optimizer, and action-distribution math.

pub mod adam;
pub mod dist;
pub mod mlp;
pub mod policy;

pub use adam::AdamState;
pub use dist::{binary_head, gauss_kl, Binary2, DiagGaussian};
pub use mlp::MlpParams;
pub use policy::GaussianPolicy;
