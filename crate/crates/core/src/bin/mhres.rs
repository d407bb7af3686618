fn main() {
    env_logger::init();
    std::process::exit(mhres::cli::main_with_args(std::env::args_os()));
}
