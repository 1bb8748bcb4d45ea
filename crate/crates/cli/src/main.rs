use clap::Parser;

fn main() {
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_target(false).init();
    if let Err(e) = jaf::run_cli(jaf::Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
