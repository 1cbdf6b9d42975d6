fn main() {
    std::process::exit(ametric_lab::cli::main_with_args(std::env::args_os()));
}
