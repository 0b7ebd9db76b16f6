//! Feasibility engine and analysis toolkit for broadcast spectrum repacking.
//!
//! A repacking instance (stations, a UHF channel universe, pairwise
//! interference and per-station domain constraints) is encoded as CNF,
//! decided by an embedded CDCL solver, and then explored: minimum clearing
//! searches, repeated solution sampling, Monte Carlo participation
//! simulation with a clique-based fast path, and statistics over the
//! sampled solution space.

pub mod analytics;
pub mod clique;
pub mod cnf;
pub mod driver;
pub mod instance;
pub mod montecarlo;
pub mod participation;
pub mod sat;
pub mod seed;

pub use cnf::{decode, encode, CnfFormula, Lit, Var};
pub use driver::{check_feasibility, Feasibility, SolverBackend};
pub use instance::{
    derive_available_channels, validate_assignment, Affiliation, AvailableChannels,
    ChannelAssignment, ChannelUniverse, Instance, InterferenceKind, RepackProblem, Slot, Station,
};
pub use participation::{ModelSpec, ParticipationVector};
pub use sat::{solve, SolveOutcome, SolverOptions, Verdict};
