fn main() {
    std::process::exit(geogwl_cli::run(std::env::args_os()));
}
