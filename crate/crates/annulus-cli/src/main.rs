//! Command-line entry point; see the library documentation for subcommands
//! and configuration.

use std::io::Write;

fn main() {
    let (code, out, err) = annulus_cli::run(std::env::args_os());
    let _ = std::io::stdout().write_all(out.as_bytes());
    let _ = std::io::stderr().write_all(err.as_bytes());
    std::process::exit(code);
}
