//! Causal disparity analysis for tabular data.
//!
//! The crate is organised around the two-step audit workflow:
//!
//! 1. [`decompose`] splits the observed outcome gap between two sensitive
//!    categories (total variation) into counterfactual direct, indirect and
//!    spurious components, plus natural direct/indirect effects.
//! 2. [`hetero_forest`] estimates individual-level direct effects with an
//!    honest causal forest; [`subgroup`] bins individuals by those effects and
//!    [`audit`] measures classifier performance gaps inside each bin.
//!
//! [`scm_sim`] generates data from fully specified structural causal models
//! together with exact ground-truth effects, and is the oracle used to
//! validate the estimators.

pub mod audit;
pub mod bootstrap;
pub mod decompose;
pub mod error;
pub mod hetero_forest;
pub mod learners;
pub mod rng;
pub mod scm_sim;
pub mod subgroup;
pub mod tabular;

pub use error::{Error, Result};
pub use tabular::{Dataset, EncodedView, RoleSchema, RoledDataset};

/// Round to six decimal places, the precision used by every exported artifact.
pub fn round6(x: f64) -> f64 {
    if x.is_finite() {
        (x * 1e6).round() / 1e6
    } else {
        x
    }
}
