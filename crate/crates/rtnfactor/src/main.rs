fn main() {
    std::process::exit(rtnfactor::cli::run());
}
