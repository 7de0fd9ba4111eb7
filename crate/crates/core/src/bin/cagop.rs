fn main() {
    std::process::exit(cagop::cli::main(std::env::args_os()));
}
