mod cli;

use clap::Parser;

fn main() {
    let args = cli::Cli::parse();
    match cli::dispatch(&args) {
        Ok(dir) => println!("{}", dir.display()),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(cli::exit_code(&err));
        }
    }
}
