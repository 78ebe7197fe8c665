fn main() {
    std::process::exit(itemseg::cli::run(std::env::args_os()));
}
