fn main() {
    std::process::exit(leakfree_cli::run(std::env::args_os()));
}
