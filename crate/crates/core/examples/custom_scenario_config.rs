//! Scenarios can come from flat key = value files instead of presets.
//! This writes one (five vehicles, straight-line evasion), parses it, runs
//! it, and prints the summary.
//!
//!     cargo run --example custom_scenario_config

use maneuver_cbf::cli::parse_config_text;
use maneuver_cbf::sim;

const CONFIG: &str = "\
# five vehicles on a 150 m circle, decentralized filtering
k = 5
radius = 150
psi_deg = 15
maneuver = straight
kappa = 0.5
dt = 0.02
t_end = 30
mode = decentralized
";

fn main() {
    println!("{CONFIG}");
    let cfg = parse_config_text(CONFIG).unwrap();
    let result = sim::run(&cfg).unwrap();
    println!("{}", result.summary);
}
