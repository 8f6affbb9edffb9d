//! Tensor-network weight containers and their contractions against factored
//! feature vectors.

mod cpd;
mod io;
mod shape;
mod tt;

pub use cpd::{
    cpd_norm_sq, cpd_projections, cpd_reconstruct, cpd_reconstruct_capped, cpd_response, cpd_response_counted, gram,
    grams, norm_sq_from_grams, project_mode, response_from_projections, CpdWeights, OpCounter, OpTally,
};
pub use io::{ContainerKind, Weights, WeightsExport, MAGIC, VERSION};
pub use shape::{compression_ratio, param_count, vc_bound, NetworkShape};
pub use tt::{tt_response, ChainKind, TtWeights};
