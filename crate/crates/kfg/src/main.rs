fn main() {
    std::process::exit(kfg::cli::main());
}
