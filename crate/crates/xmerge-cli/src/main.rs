fn main() {
    std::process::exit(xmerge_cli::run(std::env::args_os()));
}
