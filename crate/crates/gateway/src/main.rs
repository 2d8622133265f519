use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use provchain_gateway::cli::{execute, Cli, Command, Output};
use provchain_gateway::{http, ApiError};
use tracing_subscriber::EnvFilter;

fn serve(cli: &Cli, bind: &str) -> anyhow::Result<()> {
    let gateway = Arc::new(cli.open()?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await?;
        tracing::info!(
            addr = %listener.local_addr()?,
            log = %cli.log.display(),
            digest = %gateway.snapshot().digest,
            "listening"
        );
        tokio::select! {
            r = http::serve(gateway, listener) => r?,
            _ = tokio::signal::ctrl_c() => tracing::info!("shutting down"),
        }
        Ok(())
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Serve { bind } => serve(&cli, bind).map(|_| None),
        _ => execute(&cli).map(Some),
    };
    match result {
        Ok(Some(Output::Json(v))) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            ExitCode::SUCCESS
        }
        Ok(Some(Output::Text(t))) => {
            print!("{t}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            match e.downcast_ref::<ApiError>() {
                Some(api) => eprintln!("{}", serde_json::to_string(api).expect("json")),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::FAILURE
        }
    }
}
