fn main() {
    std::process::exit(polylab::app::main_with_args(std::env::args_os()));
}
