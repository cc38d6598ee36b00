fn main() {
    std::process::exit(smog_harness::cli_main(std::env::args_os()));
}
