fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FLEETCAL_LOG", "warn")).init();
    std::process::exit(fleetcal::cli::main_with(std::env::args_os()));
}
