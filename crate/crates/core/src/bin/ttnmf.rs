fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TTNMF_LOG", "warn")).init();
    std::process::exit(ttnmf::cli::run(std::env::args_os()));
}
