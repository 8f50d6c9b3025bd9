fn main() {
    std::process::exit(gridcast::cli::run_cli());
}
