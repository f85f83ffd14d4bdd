fn main() {
    std::process::exit(rscatter::cli::run(std::env::args_os()));
}
