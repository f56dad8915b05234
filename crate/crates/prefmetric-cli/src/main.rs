fn main() {
    std::process::exit(prefmetric_cli::cli_main(std::env::args_os()));
}
