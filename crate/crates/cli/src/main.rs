fn main() {
    std::process::exit(opiniond::cli_main(std::env::args_os()));
}
