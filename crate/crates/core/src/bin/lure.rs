fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LURE_LOG", "warn")).init();
    std::process::exit(lure::cli::run(std::env::args_os()));
}
