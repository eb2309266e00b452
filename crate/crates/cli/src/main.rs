fn main() {
    std::process::exit(sir_icu_cli::run());
}
