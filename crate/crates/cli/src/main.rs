fn main() {
    std::process::exit(finsler_lab::main_with_args(std::env::args_os()));
}
