fn main() {
    std::process::exit(torus_ot_lab::cli::run(std::env::args_os()));
}
