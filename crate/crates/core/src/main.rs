fn main() {
    std::process::exit(kpd::cli::main_entry());
}
