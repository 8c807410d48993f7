fn main() {
    std::process::exit(attrseq::cli::run(std::env::args_os()));
}
