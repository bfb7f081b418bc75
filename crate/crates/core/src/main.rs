fn main() {
    std::process::exit(medtext::harness::run(std::env::args_os()));
}
