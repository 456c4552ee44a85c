fn main() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("TAXOFORGE_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    std::process::exit(taxoforge_cli::run(std::env::args_os()));
}
