fn main() {
    std::process::exit(regensim::cli::run(std::env::args_os()));
}
