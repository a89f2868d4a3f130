use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::vae::{backward_with_noise, LossBreakdown, ModelConfig, ModelParams, Weights};
use super::{seeded_rng, SeededRng};
use crate::data::{encode_multihot, Dataset, MultiHot};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub w_kl: f64,
    pub loss: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

/// Variable-length sequences zero-padded to a common number of rows. Rows
/// at or past a sequence's length are masked: they neither update the LSTM
/// state nor enter the loss.
#[derive(Debug, Clone)]
pub struct PaddedBatch {
    pub inputs: Vec<MultiHot>,
    pub lengths: Vec<usize>,
}

impl PaddedBatch {
    pub fn new(sequences: &[&MultiHot]) -> Result<Self> {
        let max_len = sequences.iter().map(|m| m.rows()).max().unwrap_or(0);
        let inputs = sequences
            .iter()
            .map(|m| {
                let mut sets = m.to_sets();
                sets.resize(max_len, Vec::new());
                MultiHot::from_sets(&sets, m.cols())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PaddedBatch {
            inputs,
            lengths: sequences.iter().map(|m| m.rows()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Mean loss and mean gradient over the batch, one noise vector per
    /// sequence. Per-sequence work runs in parallel; the reduction is in
    /// batch order so the result does not depend on thread scheduling.
    pub fn gradient(
        &self,
        params: &ModelParams,
        noise: &[Vec<f64>],
        w_kl: f64,
    ) -> Result<(LossBreakdown, Weights)> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let per_seq: Vec<Result<(LossBreakdown, Weights)>> = (0..self.len())
            .into_par_iter()
            .map(|b| backward_with_noise(params, &self.inputs[b], self.lengths[b], &noise[b], w_kl))
            .collect();
        let mut total = params.weights.zeros_like();
        let mut loss = LossBreakdown {
            total: 0.0,
            reconstruction: 0.0,
            kl: 0.0,
            w_kl,
        };
        for r in per_seq {
            let (l, g) = r?;
            total.add_assign(&g);
            loss.total += l.total;
            loss.reconstruction += l.reconstruction;
            loss.kl += l.kl;
        }
        let inv = 1.0 / self.len() as f64;
        total.scale(inv);
        loss.total *= inv;
        loss.reconstruction *= inv;
        loss.kl *= inv;
        Ok((loss, total))
    }
}

pub fn train(dataset: &Dataset, config: &ModelConfig) -> Result<(ModelParams, TrainingLog)> {
    train_with(dataset, config, |_| {})
}

/// Trains a fresh model. `on_epoch` sees each epoch's log entry as it is
/// produced.
pub fn train_with(
    dataset: &Dataset,
    config: &ModelConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(ModelParams, TrainingLog)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let vocab = &dataset.vocabulary;
    let mut params = ModelParams::new(config.clone(), &vocab.counts(), vocab.fingerprint())?;
    let encoded = dataset
        .sequences
        .iter()
        .map(|s| encode_multihot(s, vocab))
        .collect::<Result<Vec<_>>>()?;
    if let Some(s) = dataset.sequences.iter().find(|s| s.is_empty()) {
        return Err(Error::Parameter(format!("sequence {} has no slots", s.id)));
    }

    let mut rng: SeededRng = seeded_rng(config.seed ^ TRAIN_STREAM);
    let mut adam = AdamState::new(&params.weights);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut log = TrainingLog::default();
    let latent = config.latent_dim;

    for epoch in 0..config.epochs {
        let w_kl = config.w_kl_at(epoch);
        order.shuffle(&mut rng);
        let (mut sum_l, mut sum_r, mut sum_kl) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let members: Vec<&MultiHot> = chunk.iter().map(|&i| &encoded[i]).collect();
            let batch = PaddedBatch::new(&members)?;
            let noise: Vec<Vec<f64>> = (0..chunk.len())
                .map(|_| (0..latent).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let (loss, grads) = batch
                .gradient(&params, &noise, w_kl)
                .map_err(|e| Error::Diverged {
                    epoch,
                    message: e.to_string(),
                })?;
            let n = chunk.len() as f64;
            sum_l += loss.total * n;
            sum_r += loss.reconstruction * n;
            sum_kl += loss.kl * n;
            adam.step(&mut params.weights, &grads, config.learning_rate);
            if let Some(block) = params.weights.first_non_finite() {
                return Err(Error::Diverged {
                    epoch,
                    message: format!("non-finite weights in {block}"),
                });
            }
        }
        let n = encoded.len() as f64;
        let entry = EpochLog {
            epoch,
            w_kl,
            loss: sum_l / n,
            reconstruction: sum_r / n,
            kl: sum_kl / n,
        };
        if !entry.loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                message: "mean loss is not finite".into(),
            });
        }
        log::debug!(
            "epoch {epoch}: L={:.5} Lr={:.5} Lkl={:.5} w_kl={w_kl:.3}",
            entry.loss,
            entry.reconstruction,
            entry.kl
        );
        on_epoch(&entry);
        log.epochs.push(entry);
    }
    Ok((params, log))
}

/// Keeps the shuffling/noise stream distinct from weight initialisation,
/// which uses the bare seed.
const TRAIN_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EventSequence, Vocabulary};

    fn toy() -> Dataset {
        let vocab = Vocabulary::from_names(["a", "b", "c", "d"]).unwrap();
        let mut seqs = Vec::new();
        for i in 0..12 {
            let sets = if i % 2 == 0 {
                vec![vec![0], vec![1], vec![2]]
            } else {
                vec![vec![3], vec![2, 3], vec![1], vec![0]]
            };
            seqs.push(EventSequence::from_sets(format!("s{i}"), sets));
        }
        Dataset::new(vocab, seqs).unwrap()
    }

    fn cfg() -> ModelConfig {
        ModelConfig {
            hidden_size: 8,
            latent_dim: 3,
            batch_size: 5,
            epochs: 11,
            learning_rate: 1e-2,
            seed: 4,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn kl_schedule_midpoint() {
        let c = cfg();
        assert_eq!(c.w_kl_at(0), 0.1);
        assert!((c.w_kl_at(5) - 0.3).abs() < 1e-15);
        assert_eq!(c.w_kl_at(10), 0.5);
    }

    #[test]
    fn training_is_reproducible() {
        let (a, la) = train(&toy(), &cfg()).unwrap();
        let (b, lb) = train(&toy(), &cfg()).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert_eq!(la.epochs.len(), 11);
        let first = la.epochs[0].reconstruction;
        let last = la.epochs.last().unwrap().reconstruction;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn empty_dataset_rejected() {
        let mut ds = toy();
        ds.sequences.clear();
        assert!(matches!(train(&ds, &cfg()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn divergence_reports_epoch() {
        let c = ModelConfig {
            learning_rate: 1e300,
            ..cfg()
        };
        match train(&toy(), &c) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch < c.epochs),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
