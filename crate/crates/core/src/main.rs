fn main() {
    std::process::exit(falsebottom::cli::run(std::env::args_os()));
}
