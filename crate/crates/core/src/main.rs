fn main() {
    std::process::exit(bitprobe::cli::run());
}
