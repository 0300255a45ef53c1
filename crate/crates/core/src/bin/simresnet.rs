fn main() {
    std::process::exit(simresnet::cli::run(std::env::args_os()));
}
