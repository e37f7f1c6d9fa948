fn main() {
    std::process::exit(pomrec::cli::run(std::env::args_os()));
}
