fn main() {
    std::process::exit(oomdp::cli::main(std::env::args_os()));
}
