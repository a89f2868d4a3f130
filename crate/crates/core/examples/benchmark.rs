//! Synthetic benchmark: VAE + LOF against the kNN-LCS baseline.
//!
//!     cargo run --release --example benchmark -- [seed] [epochs]

use std::time::Instant;

use seqlens::eval::{generate_synthetic, run_benchmark, BenchmarkConfig, Method, SyntheticConfig};
use seqlens::neural::ModelConfig;

fn main() -> seqlens::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);

    let data = generate_synthetic(&SyntheticConfig {
        seed,
        ..SyntheticConfig::default()
    })?;
    let config = BenchmarkConfig {
        model: ModelConfig {
            hidden_size: 32,
            latent_dim: 8,
            batch_size: 32,
            epochs,
            learning_rate: 5e-3,
            seed,
            ..ModelConfig::default()
        },
        split_seed: seed,
        ..BenchmarkConfig::default()
    };
    let start = Instant::now();
    let report = run_benchmark(&data, &config)?;
    println!(
        "train={} test={} (anomalies {})",
        report.n_train, report.n_test, report.n_test_anomalies
    );
    for m in [Method::Va, Method::Knn] {
        println!("{:>4} AUC {:.4}", m.name(), report.auc(m).unwrap_or(f64::NAN));
    }
    if let Some(loc) = &report.localization {
        println!(
            "localization: {}/{} insertions recovered in {} detected anomalies",
            loc.recovered, loc.insertions, loc.detected_anomalies
        );
    }
    if let Some(log) = &report.training {
        let first = log.epochs.first().map(|e| e.reconstruction).unwrap_or(0.0);
        let last = log.epochs.last().map(|e| e.reconstruction).unwrap_or(0.0);
        println!("reconstruction loss {first:.4} -> {last:.4}");
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
