fn main() {
    std::process::exit(bsqmc::cli::run());
}
