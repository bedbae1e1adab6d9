fn main() {
    std::process::exit(thirdsound_cli::run(std::env::args_os()));
}
