fn main() {
    std::process::exit(csbm_attention::cli::parse_and_dispatch(std::env::args_os()));
}
