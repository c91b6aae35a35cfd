fn main() {
    std::process::exit(hermite_stokes::cli::main_with_args(std::env::args_os()));
}
