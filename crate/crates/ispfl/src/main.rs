fn main() {
    std::process::exit(ispfl::cli::main());
}
