fn main() {
    std::process::exit(landmark_geo::cli::main_with_args(std::env::args_os()));
}
