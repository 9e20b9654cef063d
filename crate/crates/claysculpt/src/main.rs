fn main() {
    std::process::exit(claysculpt::cli::execute(std::env::args_os()));
}
