fn main() {
    std::process::exit(calgeom_cli::run(std::env::args_os()));
}
