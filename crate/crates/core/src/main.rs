fn main() {
    std::process::exit(claimverify::cli::run(std::env::args_os()));
}
