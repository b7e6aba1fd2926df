fn main() {
    microgrid_edm::cli::init_logging();
    std::process::exit(microgrid_edm::cli::main_with_args(std::env::args_os()));
}
