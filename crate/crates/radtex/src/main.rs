use std::process::exit;

fn main() {
    exit(radtex::cli::run(std::env::args_os()));
}
