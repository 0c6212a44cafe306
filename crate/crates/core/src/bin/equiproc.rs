fn main() {
    std::process::exit(equiproc::runner::cli(std::env::args_os()));
}
