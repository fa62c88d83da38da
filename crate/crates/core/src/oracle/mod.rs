//! Brute-force reference checkers for the two equivalence notions, used as
//! ground truth for the monitor and the static decider on small executions.
//!
//! The conflict checker enumerates callback-free reorderings of an object's
//! invocations and tests conflict equivalence event by event. The
//! final-state checker searches bounded most-general-client schedules for a
//! callback-free run connecting the same initial and final object store.

mod cecf;
mod fs;
mod structure;

pub use cecf::{
    decf_c_oracle, enumerate_callback_free_reorderings, induced_trace_for_order,
    is_conflict_equivalent, CecfOutcome, ReorderCandidate,
};
pub use fs::{decf_fs_oracle, FsConfig, FsOutcome};
pub use structure::{trace_invocations, TraceInvocation};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle bound exceeded: {0} invocations (limit {1})")]
    TooManyInvocations(usize, usize),
    #[error("oracle bound exceeded: {0} candidates (limit {1})")]
    TooManyCandidates(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CecfConfig {
    /// Maximum invocations of the checked object.
    pub max_invocations: usize,
    /// Cap on generated reorderings.
    pub max_candidates: usize,
}

impl Default for CecfConfig {
    fn default() -> Self {
        CecfConfig {
            max_invocations: 8,
            max_candidates: 65536,
        }
    }
}
