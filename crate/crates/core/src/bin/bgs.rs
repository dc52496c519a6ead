fn main() {
    std::process::exit(bfsnet::cli::dispatch(std::env::args_os()));
}
