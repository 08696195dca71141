fn main() {
    std::process::exit(crn_core::cli::run());
}
