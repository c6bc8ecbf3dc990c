fn main() {
    std::process::exit(accel_saddle::cli::run(std::env::args_os()));
}
