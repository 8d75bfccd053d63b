use std::path::PathBuf;

use histoseg_service::ServiceConfig;

/// Usage: `histoseg-service [CONFIG.toml]`. Without an argument the file
/// named by `HISTOSEG_CONFIG` is used, if set.
#[tokio::main]
async fn main() {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HISTOSEG_CONFIG").map(PathBuf::from));
    let config = match ServiceConfig::load(path.as_deref(), |k| std::env::var(k).ok()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("histoseg-service: {e}");
            std::process::exit(2);
        }
    };
    if let Err(e) = histoseg_service::serve(config).await {
        eprintln!("histoseg-service: {e}");
        std::process::exit(1);
    }
}
