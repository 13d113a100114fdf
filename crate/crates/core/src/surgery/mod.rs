//! Selective weight reinitialization.
//!
//! Surgery runs in three stages over every weight tensor: score each entry
//! with a utility, pick the lowest-utility entries with a pruning rule, and
//! overwrite the picked entries with a reinitialization rule. Bias tensors
//! are optionally zeroed; excluded tensors pass through untouched.

mod apply;
mod config;
mod prune;
mod reinit;
mod utility;

pub use apply::{apply_surgery, SurgeryReport, TensorRecord};
pub use config::{parse_config_tag, CaseTag, Scope, SurgeryConfig, SurgeryFile};
pub use prune::{floor_count, lowest_utility_mask, prune_count, select_prune_mask, PruneSpec, Rounding};
pub use reinit::{layer_mean, noise_scale, reinit_apply, ReinitKind, NOISE_DIVISOR, NS_STD, N_STD};
pub use utility::{utilities, utility_gradient, utility_magnitude, UtilityKind};
