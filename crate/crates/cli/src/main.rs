fn main() {
    std::process::exit(offnadir_cli::run(std::env::args_os()));
}
