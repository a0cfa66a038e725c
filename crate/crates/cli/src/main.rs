fn main() {
    std::process::exit(mrseq::main_with_args(std::env::args_os()));
}
