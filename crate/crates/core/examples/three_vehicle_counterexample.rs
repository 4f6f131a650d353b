//! Why the evading maneuver must be shared: three vehicles positioned so
//! that two barriers built from *different* maneuvers are both exactly at
//! their boundary and issue contradictory demands to vehicle 1 (turn left
//! and turn right at once). Rebuilding every barrier from one shared
//! maneuver removes the contradiction.
//!
//!     cargo run --example three_vehicle_counterexample

fn main() {
    let report = maneuver_cbf::counterexample::run();
    print!("{report}");
    std::process::exit(if report.all_facts_hold() { 0 } else { 1 });
}
