//! Template-driven synthetic event sequences with annotated anomalies.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{parse_jsonl, Dataset, EventSequence, IngestOptions, Slot, Vocabulary};
use crate::error::{Error, Result};
use crate::neural::{seeded_rng, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionKind {
    Insert,
    Delete,
    Substitute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_sequences: usize,
    pub vocab_size: usize,
    /// Template lengths are drawn from this range; stalls may lengthen a
    /// sequence up to `max_len`.
    pub min_len: usize,
    pub max_len: usize,
    pub n_patterns: usize,
    pub anomaly_rate: f64,
    pub injections_per_anomaly: usize,
    pub kinds: Vec<InjectionKind>,
    /// Per-slot probability that a stage's companion event shows up.
    pub companion_rate: f64,
    /// Per-stage probability that the stage lasts one extra slot.
    pub stall_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_sequences: 1000,
            vocab_size: 20,
            min_len: 5,
            max_len: 15,
            n_patterns: 4,
            anomaly_rate: 0.05,
            injections_per_anomaly: 2,
            kinds: vec![InjectionKind::Insert, InjectionKind::Delete, InjectionKind::Substitute],
            companion_rate: 0.3,
            stall_rate: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.anomaly_rate > 0.0 && self.anomaly_rate < 1.0) {
            return bad(format!("anomaly_rate must lie in (0, 1), got {}", self.anomaly_rate));
        }
        if self.min_len < 2 || self.max_len < self.min_len {
            return bad(format!("invalid length range {}..={}", self.min_len, self.max_len));
        }
        if self.n_patterns == 0 || self.n_sequences == 0 {
            return bad("n_patterns and n_sequences must be positive".into());
        }
        if self.kinds.is_empty() || self.injections_per_anomaly == 0 {
            return bad("anomalies need at least one injection kind".into());
        }
        for (name, v) in [("companion_rate", self.companion_rate), ("stall_rate", self.stall_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        // two core events, a companion and at least one event foreign to
        // every stage
        if self.vocab_size < 4 {
            return bad(format!("vocab_size {} too small for the templates", self.vocab_size));
        }
        Ok(())
    }

    pub fn anomaly_count(&self) -> usize {
        (self.anomaly_rate * self.n_sequences as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub events: Vec<usize>,
    pub companion: usize,
}

impl Stage {
    /// Whether the event can occur at this stage in a normal sequence.
    pub fn allows(&self, event: usize) -> bool {
        self.companion == event || self.events.contains(&event)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub slot: usize,
    pub event: usize,
    pub kind: InjectionKind,
    /// Event removed by a substitution.
    pub replaced: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal,
    Anomalous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub dataset: Dataset,
    pub labels: BTreeMap<String, Label>,
    pub annotations: BTreeMap<String, Vec<Injection>>,
    /// Generator templates, and per sequence its template and the stage of
    /// each slot. Empty for data loaded from disk.
    #[serde(default)]
    pub templates: Vec<Template>,
    #[serde(default)]
    pub provenance: BTreeMap<String, (usize, Vec<usize>)>,
}

impl LabeledDataset {
    pub fn is_anomalous(&self, id: &str) -> bool {
        self.labels.get(id) == Some(&Label::Anomalous)
    }

    pub fn anomalous_ids(&self) -> Vec<&str> {
        self.labels
            .iter()
            .filter(|(_, l)| **l == Label::Anomalous)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.dataset.sequences {
            let line = serde_json::json!({
                "id": s.id,
                "label": self.labels[&s.id],
                "events": s.raw_events(&self.dataset.vocabulary),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

fn make_templates(config: &SyntheticConfig, rng: &mut SeededRng) -> Vec<Template> {
    let vocab: Vec<usize> = (0..config.vocab_size).collect();
    (0..config.n_patterns)
        .map(|_| {
            let len = rng.random_range(config.min_len..=config.max_len);
            let stages = (0..len)
                .map(|_| {
                    let width = rng.random_range(1..=2);
                    let mut picked: Vec<usize> = vocab.choose_multiple(rng, width + 1).copied().collect();
                    let companion = picked.pop().expect("width + 1 > 0");
                    picked.sort_unstable();
                    Stage {
                        events: picked,
                        companion,
                    }
                })
                .collect();
            Template { stages }
        })
        .collect()
}

fn sample_normal(
    id: String,
    template: &Template,
    config: &SyntheticConfig,
    rng: &mut SeededRng,
) -> (EventSequence, Vec<usize>) {
    let mut slots = Vec::with_capacity(config.max_len);
    let mut stage_of = Vec::with_capacity(config.max_len);
    let mut spare = config.max_len - template.stages.len();
    let mut t = 0.0;
    for (stage_idx, stage) in template.stages.iter().enumerate() {
        let mut run = 1;
        if spare > 0 && rng.random_bool(config.stall_rate) {
            run += 1;
            spare -= 1;
        }
        for _ in 0..run {
            let mut events = stage.events.clone();
            if rng.random_bool(config.companion_rate) {
                events.push(stage.companion);
            }
            slots.push(Slot::new(t, events));
            stage_of.push(stage_idx);
            t += 1.0 + rng.random_range(0.0..0.5);
        }
    }
    (EventSequence::new(id, slots), stage_of)
}

fn inject(
    seq: &mut EventSequence,
    template: &Template,
    stage_of: &[usize],
    kind: InjectionKind,
    config: &SyntheticConfig,
    rng: &mut SeededRng,
) -> Option<Injection> {
    let stage = |slot: usize| &template.stages[stage_of[slot]];
    let core = |slot: usize| -> Vec<usize> {
        seq.slots[slot]
            .events
            .iter()
            .copied()
            .filter(|e| stage(slot).events.contains(e))
            .collect()
    };
    // events the stage never produces
    let foreign = |slot: usize| -> Vec<usize> { (0..config.vocab_size).filter(|&e| !stage(slot).allows(e)).collect() };
    match kind {
        InjectionKind::Insert => {
            let slot = rng.random_range(0..seq.len());
            let event = *foreign(slot).choose(rng)?;
            let mut events = seq.slots[slot].events.clone();
            events.push(event);
            seq.slots[slot] = Slot::new(seq.slots[slot].time, events);
            Some(Injection {
                slot,
                event,
                kind,
                replaced: None,
            })
        }
        InjectionKind::Delete => {
            let candidates: Vec<usize> = (0..seq.len())
                .filter(|&i| seq.slots[i].events.len() >= 2 && !core(i).is_empty())
                .collect();
            let slot = *candidates.choose(rng)?;
            let event = *core(slot).choose(rng)?;
            let events: Vec<usize> = seq.slots[slot].events.iter().copied().filter(|&e| e != event).collect();
            seq.slots[slot] = Slot::new(seq.slots[slot].time, events);
            Some(Injection {
                slot,
                event,
                kind,
                replaced: None,
            })
        }
        InjectionKind::Substitute => {
            let slot = rng.random_range(0..seq.len());
            let old = *core(slot).choose(rng)?;
            let event = *foreign(slot).choose(rng)?;
            let events = seq.slots[slot]
                .events
                .iter()
                .copied()
                .filter(|&e| e != old)
                .chain([event]);
            seq.slots[slot] = Slot::new(seq.slots[slot].time, events);
            Some(Injection {
                slot,
                event,
                kind,
                replaced: Some(old),
            })
        }
    }
}

/// Generates sequences `s0000`, `s0001`, ... from random templates. The
/// anomalous ones are a seeded random subset with injected deviations.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<LabeledDataset> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed);
    let templates = make_templates(config, &mut rng);
    let width = config.n_sequences.saturating_sub(1).to_string().len().max(4);

    let n_anom = config.anomaly_count();
    let mut order: Vec<usize> = (0..config.n_sequences).collect();
    order.shuffle(&mut rng);
    let anomalous: BTreeSet<usize> = order[..n_anom].iter().copied().collect();

    let mut sequences = Vec::with_capacity(config.n_sequences);
    let mut labels = BTreeMap::new();
    let mut annotations = BTreeMap::new();
    let mut provenance = BTreeMap::new();
    for i in 0..config.n_sequences {
        let id = format!("s{i:0width$}");
        let pattern = rng.random_range(0..templates.len());
        let template = &templates[pattern];
        let (mut seq, stage_of) = sample_normal(id.clone(), template, config, &mut rng);
        if anomalous.contains(&i) {
            let mut notes = Vec::new();
            let mut touched = BTreeSet::new();
            let mut attempts = 0;
            while notes.len() < config.injections_per_anomaly && attempts < 100 {
                attempts += 1;
                let kind = *config.kinds.choose(&mut rng).expect("kinds validated");
                let mut trial = seq.clone();
                if let Some(inj) = inject(&mut trial, template, &stage_of, kind, config, &mut rng) {
                    // one injection per slot keeps annotations unambiguous
                    if touched.insert(inj.slot) {
                        seq = trial;
                        notes.push(inj);
                    }
                }
            }
            if notes.is_empty() {
                return Err(Error::Parameter(format!("could not inject into {id}")));
            }
            notes.sort_by_key(|n| (n.slot, n.event));
            annotations.insert(id.clone(), notes);
            labels.insert(id.clone(), Label::Anomalous);
        } else {
            labels.insert(id.clone(), Label::Normal);
        }
        provenance.insert(id, (pattern, stage_of));
        sequences.push(seq);
    }

    let names = (0..config.vocab_size).map(|e| format!("e{e:02}"));
    let vocab = Vocabulary::from_names(names)?;
    let mut dataset = Dataset::new(vocab, sequences)?;
    dataset.source = Some(format!("synthetic(seed={})", config.seed));
    Ok(LabeledDataset {
        dataset,
        labels,
        annotations,
        templates,
        provenance,
    })
}

#[derive(Deserialize)]
struct LabelLine {
    id: String,
    label: serde_json::Value,
}

fn parse_label(v: &serde_json::Value, line: usize) -> Result<Label> {
    match v {
        serde_json::Value::Bool(true) => Ok(Label::Anomalous),
        serde_json::Value::Bool(false) => Ok(Label::Normal),
        serde_json::Value::Number(n) if n.as_f64() == Some(1.0) => Ok(Label::Anomalous),
        serde_json::Value::Number(n) if n.as_f64() == Some(0.0) => Ok(Label::Normal),
        serde_json::Value::String(s) => match s.as_str() {
            "anomalous" | "anomaly" | "abnormal" => Ok(Label::Anomalous),
            "normal" => Ok(Label::Normal),
            other => Err(Error::Parse {
                line,
                message: format!("unknown label `{other}`"),
            }),
        },
        other => Err(Error::Parse {
            line,
            message: format!("unsupported label {other}"),
        }),
    }
}

/// Reads JSONL in the ingest format with an extra `label` field per line
/// (`"normal"`/`"anomalous"`, a boolean, or 0/1).
pub fn parse_labeled_jsonl<R: Read>(reader: R, source: &str) -> Result<LabeledDataset> {
    let mut text = String::new();
    BufReader::new(reader)
        .read_to_string(&mut text)
        .map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
    let dataset = parse_jsonl(text.as_bytes(), source, IngestOptions::default())?;
    let mut labels = BTreeMap::new();
    for (i, line) in text.as_bytes().lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LabelLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        labels.insert(parsed.id, parse_label(&parsed.label, i + 1)?);
    }
    Ok(LabeledDataset {
        dataset,
        labels,
        annotations: BTreeMap::new(),
        templates: Vec::new(),
        provenance: BTreeMap::new(),
    })
}

pub fn load_labeled_jsonl(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_jsonl(file, &path.display().to_string())
}
