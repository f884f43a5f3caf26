fn main() {
    std::process::exit(sale_timing_cli::run(std::env::args_os()));
}
