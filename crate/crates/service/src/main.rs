use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use basecamp_service::store::Store;
use basecamp_service::{router, AppState};
use basecamp_workbench::commands::threads_from_env;
use clap::Parser;

/// Session service for the base placement workbench.
#[derive(Parser)]
#[command(name = "basecamp-service", version)]
struct Args {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Sessions live under `<data-dir>/sessions/<id>/`.
    #[arg(long, default_value = "basecamp-data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let store = match Store::open(&args.data_dir) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    eprintln!("{} sessions loaded from {}", store.len(), args.data_dir.display());
    let app = router(AppState {
        store: Arc::new(store),
        threads,
    });
    let addr = SocketAddr::new(args.host, args.port);
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {addr}: {e}");
            return ExitCode::from(1);
        }
    };
    eprintln!("listening on http://{addr}/v1");
    if let Err(e) = axum::serve(listener, app).await {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
