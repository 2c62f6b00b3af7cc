fn main() {
    std::process::exit(swarmlab_cli::run(std::env::args_os()));
}
