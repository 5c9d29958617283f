fn main() {
    std::process::exit(captrade_cli::main_with_args(std::env::args_os()));
}
