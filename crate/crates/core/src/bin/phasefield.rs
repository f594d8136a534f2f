fn main() {
    std::process::exit(phasefield_core::cli::main_dispatch(std::env::args_os()));
}
