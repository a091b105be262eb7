use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MICZ_LOG", "warn")).init();
    let args = micz::cli::Args::parse();
    std::process::exit(micz::cli::main_with_args(args));
}
