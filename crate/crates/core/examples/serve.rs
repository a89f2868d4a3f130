//! Build a run directory from synthetic data and serve the JSON API on it.
//!
//!     cargo run --release --example serve -- [port]
//!
//! then e.g. `curl localhost:8080/api/anomalies`.

use std::net::SocketAddr;
use std::sync::Arc;

use seqlens::eval::{generate_synthetic, SyntheticConfig};
use seqlens::neural::ModelConfig;
use seqlens::service::{detect_run, preprocess_run, serve, train_run, DetectOptions, PreprocessOptions, ServiceState};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let port: u16 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8080);
    let dir = std::env::temp_dir().join("seqlens-serve-example");
    std::fs::create_dir_all(&dir)?;
    let input = dir.join("events.jsonl");
    let data = generate_synthetic(&SyntheticConfig {
        n_sequences: 300,
        ..SyntheticConfig::default()
    })?;
    std::fs::write(&input, data.dataset.to_jsonl())?;

    let mut store = preprocess_run(&input, dir.join("run"), &PreprocessOptions::default(), true)?;
    let config = ModelConfig {
        hidden_size: 32,
        latent_dim: 8,
        batch_size: 32,
        epochs: 30,
        learning_rate: 5e-3,
        ..ModelConfig::default()
    };
    train_run(&mut store, &config)?;
    let reports = detect_run(&mut store, &DetectOptions::default())?;
    println!("run at {} with {} anomalies", store.root().display(), reports.len());

    let state = Arc::new(ServiceState::from_run(&store)?);
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    println!("listening on http://{addr}");
    serve(state, addr).await?;
    Ok(())
}
