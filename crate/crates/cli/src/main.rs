fn main() {
    std::process::exit(lmshoot_cli::run(std::env::args_os()));
}
