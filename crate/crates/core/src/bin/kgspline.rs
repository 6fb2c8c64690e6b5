fn main() {
    std::process::exit(kgspline::cli::main_with_args(std::env::args_os()));
}
