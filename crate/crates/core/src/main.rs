fn main() {
    std::process::exit(singular_elliptic::cli::main_entry());
}
