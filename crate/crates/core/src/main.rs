fn main() {
    std::process::exit(stable_windings::cli::run(std::env::args_os()));
}
