fn main() {
    std::process::exit(horndim::driver::main_with(std::env::args_os()));
}
