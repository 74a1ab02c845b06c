fn main() {
    std::process::exit(wavenumber_dof::cli::run(std::env::args_os()));
}
