//! Ingest a JSONL event log, drop low TF-IDF event types and short sequences.
//!
//!     cargo run --example preprocess -- [events.jsonl] [tfidf-threshold]
//!
//! Without a path, a synthetic log is written to a temporary file first.

use seqlens::data::LogEntry;
use seqlens::eval::{generate_synthetic, SyntheticConfig};
use seqlens::service::{preprocess, PreprocessOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let tmp = std::env::temp_dir().join("seqlens-preprocess-example.jsonl");
    let input = match args.next() {
        Some(p) => p.into(),
        None => {
            let data = generate_synthetic(&SyntheticConfig {
                n_sequences: 200,
                ..SyntheticConfig::default()
            })?;
            std::fs::write(&tmp, data.dataset.to_jsonl())?;
            tmp.clone()
        }
    };
    let threshold: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.01);

    let options = PreprocessOptions {
        tfidf_threshold: Some(threshold),
        ..PreprocessOptions::default()
    };
    let ds = preprocess(&input, &options)?;
    println!("{} sequences, {} event types", ds.len(), ds.vocabulary.len());
    for entry in &ds.log {
        match entry {
            LogEntry::TfidfFilter { removed, emptied_slots, .. } => {
                println!("tf-idf < {threshold}: removed {} types, emptied {emptied_slots} slots", removed.len());
                for r in removed {
                    println!("  {} ({:.5})", r.name, r.score);
                }
            }
            LogEntry::DropShort { min_len, removed } => {
                println!("dropped {} sequences shorter than {min_len}", removed.len());
            }
            LogEntry::Ingest { source, sequences, events } => {
                println!("read {sequences} sequences, {events} events from {source}");
            }
        }
    }
    let lengths: Vec<usize> = ds.sequences.iter().map(|s| s.len()).collect();
    println!(
        "length range {}..={}",
        lengths.iter().min().unwrap_or(&0),
        lengths.iter().max().unwrap_or(&0)
    );
    Ok(())
}
