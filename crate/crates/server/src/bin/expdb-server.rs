use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use expdb_core::registry::Store;

#[derive(Parser)]
#[command(name = "expdb-server", version, about = "Serve an experiment database over HTTP")]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "EXPDB_BIND", default_value = "127.0.0.1:8080")]
    bind: String,
    /// Store root directory; created if missing.
    #[arg(long, env = "EXPDB_STORE", default_value = "expdb-store")]
    store: PathBuf,
    /// One of error, warn, info, debug, trace.
    #[arg(long, env = "EXPDB_LOG", default_value = "info")]
    log_level: tracing::Level,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    tracing_subscriber::fmt()
        .with_max_level(args.log_level)
        .with_writer(std::io::stderr)
        .init();

    let store = match Store::open(&args.store) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot open store {}: {e}", args.store.display());
            return ExitCode::FAILURE;
        }
    };
    for w in store.recovery_warnings() {
        tracing::warn!(log = %w.log, line = w.line, "recovered: {}", w.message);
    }
    let listener = match expdb_server::bind(&args.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match expdb_server::serve(Arc::new(store), listener, expdb_server::shutdown_signal()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
