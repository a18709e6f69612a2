fn main() {
    std::process::exit(execwell::cli::run(std::env::args_os()));
}
