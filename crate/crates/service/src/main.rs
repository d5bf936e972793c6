use clap::Parser;

fn main() {
    let cli = kern_service::cli::Cli::parse();
    let code = kern_service::cli::execute(cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
