//! Embed every sequence, score with LOF and select the top contamination
//! fraction. Prints the selection and the 2-D MDS overview extent.
//!
//!     cargo run --release --example detect -- [contamination] [k]

use seqlens::analysis::{detect_anomalies, embed_all, mds_project};
use seqlens::eval::{generate_synthetic, SyntheticConfig};
use seqlens::neural::{train, ModelConfig};

fn main() -> seqlens::Result<()> {
    let mut args = std::env::args().skip(1);
    let contamination: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let k: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);

    let data = generate_synthetic(&SyntheticConfig {
        n_sequences: 400,
        seed: 1,
        ..SyntheticConfig::default()
    })?;
    let config = ModelConfig {
        hidden_size: 32,
        latent_dim: 8,
        batch_size: 32,
        epochs: 30,
        learning_rate: 5e-3,
        ..ModelConfig::default()
    };
    let (model, _) = train(&data.dataset, &config)?;
    let mut embeddings = embed_all(&model, &data.dataset)?;
    let detection = detect_anomalies(&mut embeddings, k, contamination)?;

    let lof = |id: &str| {
        embeddings
            .iter()
            .find(|e| e.sequence_id == id)
            .and_then(|e| e.lof_score)
            .unwrap_or(f64::NAN)
    };
    let hits = detection.anomalies.iter().filter(|id| data.is_anomalous(id)).count();
    println!(
        "selected {} of {} (k={k}); {hits} carry injected anomalies",
        detection.anomalies.len(),
        embeddings.len()
    );
    for id in &detection.anomalies {
        let mark = if data.is_anomalous(id) { "*" } else { " " };
        println!("{mark} {id}  LOF {:.3}", lof(id));
    }

    let overview = mds_project(&embeddings)?;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &overview.points {
        for a in 0..2 {
            lo[a] = lo[a].min(p.xy[a]);
            hi[a] = hi[a].max(p.xy[a]);
        }
    }
    println!("MDS extent x [{:.2}, {:.2}] y [{:.2}, {:.2}]", lo[0], hi[0], lo[1], hi[1]);
    Ok(())
}
