fn main() {
    std::process::exit(maneuver_cbf::cli::run_from_env());
}
