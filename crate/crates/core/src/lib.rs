//! Safety filters for actuator-constrained unicycle fleets.
//!
//! The library constructs barrier functions from nominal evading maneuvers,
//! composes any number of pairwise collision-avoidance constraints through
//! one shared maneuver, and enforces them online with minimal-deviation
//! quadratic programs in either a centralized or a fully decentralized
//! arrangement. A batch simulator, scenario presets, and a verification
//! suite sit on top.
//!
//! Start with the runnable examples (`cargo run --example two_vehicle_turn`)
//! or the `maneuver-cbf` binary (`run`, `counterexample`, `verify`).

pub mod barrier;
pub mod cli;
pub mod counterexample;
pub mod dynamics;
pub mod qp;
pub mod supervisor;
pub mod verify;
pub mod safety;
pub mod scenario;
pub mod sim;

pub use barrier::{BarrierEval, BarrierError, BarrierSpec, EvadingManeuver};
pub use dynamics::{ControlBounds, ControlInput, StackedState, VehicleState};
pub use safety::{SafetyFnSpec, SafetyKind};
