fn main() {
    std::process::exit(jtvae::cli::main_with(std::env::args_os()));
}
