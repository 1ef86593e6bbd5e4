fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("slicefed=info")).init();
    std::process::exit(slicefed::cli::main_with(std::env::args_os()));
}
