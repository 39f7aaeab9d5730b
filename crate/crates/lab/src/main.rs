fn main() {
    std::process::exit(stirpat_lab::cli::run(std::env::args_os()));
}
