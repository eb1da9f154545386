use clap::Parser;

fn main() {
    let cli = activegel::cli::Cli::parse();
    match activegel::cli::main_with(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
