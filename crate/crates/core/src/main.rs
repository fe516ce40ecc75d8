fn main() {
    std::process::exit(entangle_lab::cli::run(std::env::args_os()));
}
