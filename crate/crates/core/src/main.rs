fn main() {
    std::process::exit(contract_solve::cli::run(std::env::args_os()));
}
