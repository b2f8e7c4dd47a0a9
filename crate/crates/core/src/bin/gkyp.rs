fn main() {
    std::process::exit(gkyp::cli::main(std::env::args_os()));
}
