fn main() {
    std::process::exit(qbias::cli::main());
}
