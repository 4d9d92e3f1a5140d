fn main() {
    std::process::exit(mibma::cli::run(std::env::args_os()));
}
