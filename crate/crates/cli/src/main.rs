fn main() {
    std::process::exit(toxens::run(std::env::args_os()));
}
