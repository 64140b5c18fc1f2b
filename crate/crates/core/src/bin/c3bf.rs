fn main() {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .init();
    std::process::exit(c3bf::cli::parse_and_run(std::env::args_os()));
}
