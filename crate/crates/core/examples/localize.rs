//! Event-level localization: compare a detected anomaly with its
//! reconstruction and list missing and redundant events, next to the
//! injections the generator actually made.
//!
//!     cargo run --release --example localize -- [threshold]

use seqlens::analysis::{analyze_sequence, detect_anomalies, embed_all};
use seqlens::eval::{generate_synthetic, SyntheticConfig};
use seqlens::neural::{train, ModelConfig};

fn main() -> seqlens::Result<()> {
    let threshold: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.6);
    let data = generate_synthetic(&SyntheticConfig {
        n_sequences: 400,
        seed: 2,
        ..SyntheticConfig::default()
    })?;
    let config = ModelConfig {
        hidden_size: 32,
        latent_dim: 8,
        batch_size: 32,
        epochs: 40,
        learning_rate: 5e-3,
        ..ModelConfig::default()
    };
    let ds = &data.dataset;
    let (model, _) = train(ds, &config)?;
    let mut embeddings = embed_all(&model, ds)?;
    let detection = detect_anomalies(&mut embeddings, 20, 0.05)?;

    let Some(id) = detection.anomalies.iter().find(|id| data.is_anomalous(id)) else {
        println!("no injected anomaly among the detected sequences");
        return Ok(());
    };
    let seq = ds.get(id).expect("detected id exists");
    let lof = embeddings
        .iter()
        .find(|e| &e.sequence_id == id)
        .and_then(|e| e.lof_score)
        .unwrap_or(0.0);
    let report = analyze_sequence(&model, ds, seq, lof, threshold)?;
    let name = |e: usize| ds.vocabulary.name(e).unwrap_or("?");

    println!("{id} (LOF {lof:.3})");
    for (i, slot) in seq.slots.iter().enumerate() {
        let events: Vec<&str> = slot.events.iter().map(|&e| name(e)).collect();
        println!("  slot {i:>2} t={:<7.2} {}", slot.time, events.join(" "));
    }
    println!("entries at threshold {threshold}:");
    for e in &report.entries {
        println!("  slot {:>2} {:<4} {:?} {:.3}", e.slot, name(e.event), e.kind, e.score);
    }
    println!("injected:");
    for inj in data.annotations.get(id).into_iter().flatten() {
        println!("  slot {:>2} {:<4} {:?}", inj.slot, name(inj.event), inj.kind);
    }
    Ok(())
}
