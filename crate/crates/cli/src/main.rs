fn main() {
    std::process::exit(orientseg_cli::run(std::env::args_os()));
}
