fn main() {
    std::process::exit(calrisk_cli::main_with(std::env::args_os()));
}
