//! Simulator, protocol library and bounded model checker for the
//! multi-room prisoners-and-lightswitches problem.

pub mod error;
pub mod library;
pub mod monitors;
pub mod ownership;
pub mod protocol;
pub mod scheduling;
pub mod suite;
pub mod transcript;
pub mod verifier;
pub mod world;

pub use error::{Error, Result};
pub use library::{build, Guarantee, Params, ProtocolInstance};
pub use protocol::{Config, Instruction, PrisonerState, Program};
pub use verifier::{explore, run, ExploreOptions, ExploreReport, Outcome};
pub use world::{VisitEvent, WinCondition, WorldState};
