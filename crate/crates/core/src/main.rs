fn main() {
    std::process::exit(quantile_energy::cli::main());
}
