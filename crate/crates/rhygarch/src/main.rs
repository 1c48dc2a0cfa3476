fn main() {
    std::process::exit(rhygarch::cli::run(std::env::args_os()));
}
