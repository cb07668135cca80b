fn main() {
    std::process::exit(isslab::cli::main_entry());
}
