//! Heterogeneous federated M-estimation on a device graph.
//!
//! Devices hold private samples and are linked by a surrogate graph. The
//! fused-lasso objective
//! `F(Θ) = |V|⁻¹ Σ_u M̂_u(θ_u) + λ Σ_{e∈E} φ(θ_{e+} − θ_{e−})`
//! is minimized by a decentralized stochastic ADMM in which only parameters
//! travel along edges ([`fedadmm`]). Edges can be pruned beforehand by a
//! Bonferroni-corrected Wald test on local estimates ([`edge_select`]).

// `!(x > 0.0)` is used on purpose so that NaN fails argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod availability;
pub mod baselines;
pub mod edge_select;
pub mod error;
pub mod experiment;
pub mod fedadmm;
pub mod graph;
pub mod linalg;
pub mod models;
pub(crate) mod par;
pub mod penalty;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{Clustering, DeviceGraph, Edge};
pub use linalg::ParamMatrix;
pub use models::{Dataset, DeviceData, Family, LocalFit, ModelSpec};
pub use penalty::EdgeNorm;
