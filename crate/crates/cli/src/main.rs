fn main() {
    std::process::exit(cfnorm_cli::run(std::env::args().collect()));
}
