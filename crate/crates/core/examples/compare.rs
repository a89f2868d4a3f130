//! Comparative analysis of one anomaly: pick latent-space neighbours,
//! align them with DTW, and print the glyphs, the flow graph and a merged
//! view.
//!
//!     cargo run --release --example compare -- [cohort-size]

use std::collections::HashSet;

use seqlens::analysis::{analyze_sequence, detect_anomalies, embed_all, Thresholds};
use seqlens::comparison::{merge_slots, similar_normals, AlignedCohort, ComparisonView};
use seqlens::eval::{generate_synthetic, SyntheticConfig};
use seqlens::neural::{train, ModelConfig};

fn main() -> seqlens::Result<()> {
    let size: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let data = generate_synthetic(&SyntheticConfig {
        n_sequences: 300,
        seed: 5,
        ..SyntheticConfig::default()
    })?;
    let ds = &data.dataset;
    let config = ModelConfig {
        hidden_size: 32,
        latent_dim: 8,
        batch_size: 32,
        epochs: 30,
        learning_rate: 5e-3,
        ..ModelConfig::default()
    };
    let (model, _) = train(ds, &config)?;
    let mut embeddings = embed_all(&model, ds)?;
    let detection = detect_anomalies(&mut embeddings, 20, 0.05)?;
    let id = &detection.anomalies[0];
    let anomalies: HashSet<&str> = detection.anomalies.iter().map(String::as_str).collect();

    let similar = similar_normals(id, &embeddings, &anomalies, 1.0, size)?;
    println!("{id}: {} nearest normals, histogram {:?}", similar.normals.len(), similar.histogram.counts);
    let members: Vec<_> = similar
        .normals
        .iter()
        .map(|n| ds.get(&n.sequence_id).expect("known id"))
        .collect();
    let anomaly = ds.get(id).expect("known id");
    let cohort = AlignedCohort::align(anomaly, &members)?;
    for m in &cohort.members {
        println!("  {} DTW cost {:.3}", m.alignment.normal_id, m.alignment.cost);
    }

    let lof = embeddings
        .iter()
        .find(|e| &e.sequence_id == id)
        .and_then(|e| e.lof_score)
        .unwrap_or(0.0);
    let report = analyze_sequence(&model, ds, anomaly, lof, 0.0)?;
    let view = ComparisonView::build(&report, &cohort, Thresholds::new(0.6, 0.5)?)?;
    let name = |e: usize| ds.vocabulary.name(e).unwrap_or("?");

    println!("glyphs (score >= 0.6, support >= 0.5):");
    for g in view.glyphs.iter().filter(|g| !g.events.is_empty()) {
        let events: Vec<String> = g
            .events
            .iter()
            .map(|ge| {
                format!(
                    "{}:{:?}({:.2}, support {:.2})",
                    name(ge.entry.event),
                    ge.entry.kind,
                    ge.entry.score,
                    ge.entry.support_rate.unwrap_or(f64::NAN)
                )
            })
            .collect();
        println!("  slot {:>2} abnormality {:.2}  {}", g.slot, g.abnormality, events.join(" "));
    }
    if let Some(flow) = &view.flow {
        println!("flow: {} nodes, {} links", flow.nodes.len(), flow.links.len());
        for l in flow.links.iter().filter(|l| l.population * 2 > flow.cohort_size) {
            let (a, b) = (&flow.nodes[l.source], &flow.nodes[l.target]);
            println!(
                "  {}@{} -> {}@{}  x{}  gap {:.2}",
                name(a.event),
                a.slot,
                name(b.event),
                b.slot,
                l.population,
                l.mean_gap
            );
        }
    }
    if view.slots() >= 3 {
        let merged = merge_slots(&view, &[(0, 2)])?;
        println!("merged slots 0..=2: {} slots remain", merged.view.slots());
        assert_eq!(merged.expand(), view);
    }
    Ok(())
}
