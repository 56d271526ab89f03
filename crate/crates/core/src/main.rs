fn main() {
    std::process::exit(cr_approx::cli::run(std::env::args_os()));
}
