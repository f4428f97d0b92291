fn main() {
    std::process::exit(amreg::cli::run(std::env::args_os()));
}
