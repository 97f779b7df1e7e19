fn main() {
    std::process::exit(ksns_cli::cli::main_with(std::env::args_os()));
}
