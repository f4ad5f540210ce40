fn main() {
    std::process::exit(ssm_core::cli::main_with_args(std::env::args()));
}
