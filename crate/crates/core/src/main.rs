use clap::Parser;

fn main() {
    let cli = beamscan::cli::Cli::parse();
    if let Err(err) = beamscan::cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
