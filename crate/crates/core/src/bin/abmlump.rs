fn main() {
    std::process::exit(abmlump::cli::run(std::env::args_os()));
}
