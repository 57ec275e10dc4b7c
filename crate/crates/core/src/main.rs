fn main() {
    std::process::exit(mpe_core::cli::main_with_args(std::env::args_os()));
}
