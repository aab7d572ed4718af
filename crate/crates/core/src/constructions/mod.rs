//! Explicit sets built from digit constraints.

pub mod cantor;
pub mod tsl;

pub use cantor::{cantor_sampler, cantor_samples, cantor_scheme, CantorMode, CantorSampler, CantorScheme};
pub use tsl::{tsl_sampler, tsl_scheme, FreeLaw, GroupBoundary, Slot, TslScheme};
