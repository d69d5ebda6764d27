fn main() {
    std::process::exit(ensdens::cli::main_with_args(std::env::args_os()));
}
