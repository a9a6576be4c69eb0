//! Commit/unveil protocol between honest parties.

mod apparatus;
mod config;
mod honest;
mod messages;

pub use apparatus::{
    rank_bin, Apparatus, DelayedPatterns, Neutron, SealedSlitRecord, SlitChoice, TrialNature, TrialSetup, ALL_CHOICES,
    RELATIVE_DENSITY_FLOOR,
};
pub use config::{default_grid_half_width, ProtocolConfig};
pub use honest::{alice_commit_honest, alice_unveil_honest, bob_prepare_trials, measurement_time};
pub(crate) use honest::{stamp, transcript};
pub use messages::*;
