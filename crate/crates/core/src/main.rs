fn main() {
    std::process::exit(pclv::cli::main());
}
