//! Curvature of finite reversible Markov chains: Bakry-Émery and entropic
//! curvature-dimension conditions, heat semigroup estimates and the
//! geometric inequalities that follow from them.

pub mod chain;
pub mod curvature;
pub mod entropic;
pub mod error;
pub mod forms;
pub mod gamma;
pub mod generate;
pub mod geometry;
pub mod heat;
pub mod inequalities;
pub mod io;
pub mod linalg;
pub mod mean;
pub mod optimal;
pub mod serde_ext;

pub use chain::{ChainStats, MarkovChain};
pub use curvature::{bakry_emery_global, bakry_emery_vertex, curvature_of_measure, CurvatureResult};
pub use entropic::{curvature_estimate, EntropicEstimate, EntropicOptions};
pub use error::{CurvError, Result};
pub use generate::Generator;
pub use mean::{DomainClass, Mean};
