use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = colloquy_cli::Args::parse();
    let stdin = std::io::stdin();
    let code = colloquy_cli::run(args, stdin.lock(), &mut std::io::stdout());
    std::process::exit(code);
}
