fn main() {
    std::process::exit(uvlm_fsi::sim::cli_main(std::env::args_os()));
}
