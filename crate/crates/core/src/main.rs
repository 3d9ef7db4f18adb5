fn main() {
    std::process::exit(dirac_spectral::cli::main_with_args(std::env::args_os()));
}
