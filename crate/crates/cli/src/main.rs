use clap::Parser;

use palate_cli::commands::{run, Cli};

fn main() {
    // clap exits with status 2 on usage errors before we get here.
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
