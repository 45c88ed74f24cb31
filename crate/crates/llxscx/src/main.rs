fn main() {
    std::process::exit(llxscx::cli::main());
}
