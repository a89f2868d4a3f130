use std::sync::Arc;

use seqlens::analysis::{detect_anomalies, embed_all};
use seqlens::data::{Dataset, EventSequence, Slot, Vocabulary};
use seqlens::neural::{train, ModelConfig};
use seqlens::service::ServiceState;

pub const EVENTS: [&str; 5] = ["a", "b", "c", "d", "x"];

fn seq(id: &str, slots: &[(f64, &[usize])]) -> EventSequence {
    EventSequence::new(id, slots.iter().map(|(t, e)| Slot::new(*t, e.iter().copied())).collect())
}

/// `q` is the anomaly. `n1`..`n3` form the hand-checked flow cohort:
///
/// ```text
/// q : a@0 b@1 d@3
/// n1: a@0 b@1 d@2
/// n2: a@0 b@2 d@3
/// n3: a@0 c@1 d@5
/// ```
pub fn dataset() -> Dataset {
    let vocab = Vocabulary::from_names(EVENTS).unwrap();
    let mut sequences = vec![
        seq("q", &[(0.0, &[0]), (1.0, &[1, 4]), (3.0, &[3])]),
        seq("n1", &[(0.0, &[0]), (1.0, &[1]), (2.0, &[3])]),
        seq("n2", &[(0.0, &[0]), (2.0, &[1]), (3.0, &[3])]),
        seq("n3", &[(0.0, &[0]), (1.0, &[2]), (5.0, &[3])]),
    ];
    for i in 0..30 {
        let mid: &[usize] = if i % 2 == 0 { &[1] } else { &[2] };
        sequences.push(seq(
            &format!("f{i}"),
            &[(0.0, &[0]), (1.0 + i as f64 * 0.03, mid), (2.5, &[3]), (3.0, &[0, 3])],
        ));
    }
    Dataset::new(vocab, sequences).unwrap()
}

pub fn state() -> Arc<ServiceState> {
    let ds = dataset();
    let cfg = ModelConfig {
        hidden_size: 8,
        latent_dim: 2,
        batch_size: 4,
        epochs: 60,
        learning_rate: 2e-2,
        seed: 3,
        ..ModelConfig::default()
    };
    let (model, _) = train(&ds, &cfg).unwrap();
    let mut embeddings = embed_all(&model, &ds).unwrap();
    detect_anomalies(&mut embeddings, 3, 0.1).unwrap();
    Arc::new(ServiceState::new(ds, model, embeddings, vec!["q".to_string()]).unwrap())
}
