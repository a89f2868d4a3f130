//! Dataset ingestion, vocabulary handling and preprocessing.
//!
//! Input is JSON Lines, one sequence per line:
//!
//! ```text
//! {"id": "s1", "events": [{"t": 0, "type": "A"}, {"t": 0, "type": "B"}, {"t": 2, "type": "A"}]}
//! ```
//!
//! Events sharing a timestamp are grouped into one slot. Slots are sorted by
//! time and each slot holds a sorted, duplicate-free list of event indices.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventType {
    pub index: usize,
    pub name: String,
    /// Global number of occurrences across the dataset.
    pub count: u64,
}

/// Ordered event types with a name lookup. Column `j` of a multi-hot
/// encoding refers to `types[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EventType>", into = "Vec<EventType>")]
pub struct Vocabulary {
    types: Vec<EventType>,
    by_name: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary {
            types: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    /// Builds a vocabulary from names in the given order with zero counts.
    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::new();
        for name in names {
            let name = name.into();
            if vocab.by_name.contains_key(&name) {
                return Err(Error::Parameter(format!("duplicate event type `{name}`")));
            }
            vocab.intern(&name);
        }
        Ok(vocab)
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&idx) = self.by_name.get(name) {
            return idx;
        }
        let idx = self.types.len();
        self.types.push(EventType {
            index: idx,
            name: name.to_string(),
            count: 0,
        });
        self.by_name.insert(name.to_string(), idx);
        idx
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.types.get(index).map(|t| t.name.as_str())
    }

    pub fn types(&self) -> &[EventType] {
        &self.types
    }

    pub fn counts(&self) -> Vec<u64> {
        self.types.iter().map(|t| t.count).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.types.iter().map(|t| t.name.as_str()).collect()
    }

    /// SHA-256 over the ordered type names. Models record this so that a
    /// checkpoint is never applied to a dataset with different columns.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.types {
            hasher.update((t.name.len() as u64).to_le_bytes());
            hasher.update(t.name.as_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl TryFrom<Vec<EventType>> for Vocabulary {
    type Error = Error;

    fn try_from(types: Vec<EventType>) -> Result<Self> {
        let mut by_name = HashMap::with_capacity(types.len());
        for (i, t) in types.iter().enumerate() {
            if t.index != i {
                return Err(Error::Parameter(format!(
                    "vocabulary indices must be dense: found {} at position {i}",
                    t.index
                )));
            }
            if by_name.insert(t.name.clone(), i).is_some() {
                return Err(Error::Parameter(format!("duplicate event type `{}`", t.name)));
            }
        }
        Ok(Vocabulary { types, by_name })
    }
}

impl From<Vocabulary> for Vec<EventType> {
    fn from(v: Vocabulary) -> Self {
        v.types
    }
}

/// One timestamped event as it appears in the input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub t: f64,
    #[serde(rename = "type")]
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub time: f64,
    /// Sorted, duplicate-free event indices.
    pub events: Vec<usize>,
}

impl Slot {
    pub fn new(time: f64, events: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = events.into_iter().collect();
        Slot {
            time,
            events: set.into_iter().collect(),
        }
    }

    pub fn contains(&self, event: usize) -> bool {
        self.events.binary_search(&event).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    pub id: String,
    pub slots: Vec<Slot>,
}

impl EventSequence {
    pub fn new(id: impl Into<String>, slots: Vec<Slot>) -> Self {
        EventSequence {
            id: id.into(),
            slots,
        }
    }

    /// Builds a sequence from bare event sets with timestamps 0, 1, 2, ...
    pub fn from_sets<I, S>(id: impl Into<String>, sets: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = usize>,
    {
        let slots = sets
            .into_iter()
            .enumerate()
            .map(|(i, s)| Slot::new(i as f64, s))
            .collect();
        EventSequence::new(id, slots)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn total_events(&self) -> usize {
        self.slots.iter().map(|s| s.events.len()).sum()
    }

    /// Checks slot ordering and non-emptiness.
    pub fn validate(&self, vocab_len: usize) -> Result<()> {
        for (i, slot) in self.slots.iter().enumerate() {
            if slot.events.is_empty() {
                return Err(Error::Encoding(format!("{}: slot {i} is empty", self.id)));
            }
            if slot.events.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Encoding(format!(
                    "{}: slot {i} is not a sorted set",
                    self.id
                )));
            }
            if let Some(&e) = slot.events.iter().find(|&&e| e >= vocab_len) {
                return Err(Error::Encoding(format!(
                    "{}: event index {e} out of range for vocabulary of size {vocab_len}",
                    self.id
                )));
            }
            if i > 0 && self.slots[i - 1].time >= slot.time {
                return Err(Error::Encoding(format!(
                    "{}: slot timestamps not strictly increasing at slot {i}",
                    self.id
                )));
            }
        }
        Ok(())
    }

    /// Expands slots back into raw events, in slot order then index order.
    pub fn raw_events(&self, vocab: &Vocabulary) -> Vec<RawEvent> {
        self.slots
            .iter()
            .flat_map(|slot| {
                slot.events.iter().map(move |&e| RawEvent {
                    t: slot.time,
                    type_name: vocab.name(e).unwrap_or("?").to_string(),
                })
            })
            .collect()
    }
}

/// Binary slot × event-type matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHot {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MultiHot {
    pub fn from_sets(sets: &[Vec<usize>], cols: usize) -> Result<Self> {
        let mut data = vec![0.0; sets.len() * cols];
        for (i, set) in sets.iter().enumerate() {
            for &j in set {
                if j >= cols {
                    return Err(Error::Encoding(format!(
                        "event index {j} out of range for {cols} columns"
                    )));
                }
                data[i * cols + j] = 1.0;
            }
        }
        Ok(MultiHot {
            rows: sets.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&v| v == 1.0).count()
    }

    /// Positions of the ones in each row.
    pub fn to_sets(&self) -> Vec<Vec<usize>> {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v == 1.0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }
}

pub fn encode_multihot(sequence: &EventSequence, vocab: &Vocabulary) -> Result<MultiHot> {
    let sets: Vec<Vec<usize>> = sequence.slots.iter().map(|s| s.events.clone()).collect();
    MultiHot::from_sets(&sets, vocab.len())
        .map_err(|e| Error::Encoding(format!("sequence {}: {e}", sequence.id)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovedType {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum LogEntry {
    Ingest {
        source: String,
        sequences: usize,
        events: u64,
    },
    TfidfFilter {
        threshold: f64,
        removed: Vec<RemovedType>,
        emptied_slots: usize,
    },
    DropShort {
        min_len: usize,
        removed: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub vocabulary: Vocabulary,
    pub sequences: Vec<EventSequence>,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub log: Vec<LogEntry>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    version: u32,
    #[serde(flatten)]
    dataset: Dataset,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Quantize timestamps to multiples of this width before grouping.
    pub bin_width: Option<f64>,
}

#[derive(Deserialize)]
struct JsonlLine {
    id: String,
    events: Vec<RawEvent>,
}

pub fn ingest_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    ingest_jsonl_with(path, IngestOptions::default())
}

pub fn ingest_jsonl_with(path: impl AsRef<Path>, options: IngestOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(file), &path.display().to_string(), options)
}

/// Parses JSONL from any reader. `source` is recorded in the dataset log.
pub fn parse_jsonl<R: Read>(reader: R, source: &str, options: IngestOptions) -> Result<Dataset> {
    if let Some(w) = options.bin_width {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Parameter(format!("bin width must be positive, got {w}")));
        }
    }
    let mut vocab = Vocabulary::new();
    let mut seen = HashSet::new();
    let mut sequences = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonlLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(parsed.id.clone()) {
            return Err(Error::DuplicateId(parsed.id));
        }
        let mut events = Vec::with_capacity(parsed.events.len());
        for ev in &parsed.events {
            if !ev.t.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite timestamp for event `{}`", ev.type_name),
                });
            }
            let t = match options.bin_width {
                Some(w) => (ev.t / w).floor() * w,
                None => ev.t,
            };
            events.push((t, vocab.intern(&ev.type_name)));
        }
        sequences.push(group_into_slots(parsed.id, events));
    }
    if sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut dataset = Dataset {
        vocabulary: vocab,
        sequences,
        source: Some(source.to_string()),
        log: Vec::new(),
    };
    dataset.recount();
    let events = dataset.vocabulary.counts().iter().sum();
    dataset.log.push(LogEntry::Ingest {
        source: source.to_string(),
        sequences: dataset.sequences.len(),
        events,
    });
    Ok(dataset)
}

fn group_into_slots(id: String, mut events: Vec<(f64, usize)>) -> EventSequence {
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut slots: Vec<Slot> = Vec::new();
    for (t, e) in events {
        match slots.last_mut() {
            Some(slot) if slot.time == t => {
                if slot.events.last() != Some(&e) {
                    slot.events.push(e);
                }
            }
            _ => slots.push(Slot {
                time: t,
                events: vec![e],
            }),
        }
    }
    EventSequence::new(id, slots)
}

impl Dataset {
    pub fn new(vocabulary: Vocabulary, sequences: Vec<EventSequence>) -> Result<Self> {
        let mut ds = Dataset {
            vocabulary,
            sequences,
            source: None,
            log: Vec::new(),
        };
        ds.validate()?;
        ds.recount();
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EventSequence> {
        self.sequences.iter().find(|s| s.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for s in &self.sequences {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
            s.validate(self.vocabulary.len())?;
        }
        Ok(())
    }

    /// Recomputes occurrence counts from the sequences.
    fn recount(&mut self) {
        let mut counts = vec![0u64; self.vocabulary.len()];
        for s in &self.sequences {
            for slot in &s.slots {
                for &e in &slot.events {
                    counts[e] += 1;
                }
            }
        }
        for (t, c) in self.vocabulary.types.iter_mut().zip(counts) {
            t.count = c;
        }
    }

    /// Drops types that no longer occur and renumbers the survivors densely,
    /// keeping their relative order.
    fn densify(&mut self) {
        self.recount();
        let mut remap = vec![None; self.vocabulary.len()];
        let mut kept = Vec::new();
        for t in &self.vocabulary.types {
            if t.count > 0 {
                remap[t.index] = Some(kept.len());
                kept.push(EventType {
                    index: kept.len(),
                    name: t.name.clone(),
                    count: t.count,
                });
            }
        }
        if kept.len() == self.vocabulary.len() {
            return;
        }
        for s in &mut self.sequences {
            for slot in &mut s.slots {
                for e in &mut slot.events {
                    *e = remap[*e].expect("occurring type was kept");
                }
            }
        }
        self.vocabulary = Vocabulary::try_from(kept).expect("densified vocabulary is valid");
    }

    /// TF-IDF score per event type: global relative frequency times
    /// `ln(N / d)` with `d` the number of sequences containing the type.
    pub fn tfidf_scores(&self) -> Vec<f64> {
        let n_seq = self.sequences.len() as f64;
        let mut doc_freq = vec![0u64; self.vocabulary.len()];
        let mut counts = vec![0u64; self.vocabulary.len()];
        for s in &self.sequences {
            let mut present = BTreeSet::new();
            for slot in &s.slots {
                for &e in &slot.events {
                    counts[e] += 1;
                    present.insert(e);
                }
            }
            for e in present {
                doc_freq[e] += 1;
            }
        }
        let total: u64 = counts.iter().sum();
        counts
            .iter()
            .zip(&doc_freq)
            .map(|(&c, &d)| {
                if c == 0 || d == 0 {
                    return 0.0;
                }
                let tf = c as f64 / total as f64;
                tf * (n_seq / d as f64).ln()
            })
            .collect()
    }

    pub fn tfidf_filter(mut self, threshold: f64) -> Result<Dataset> {
        if !(threshold >= 0.0 && threshold.is_finite()) {
            return Err(Error::Parameter(format!(
                "tf-idf threshold must be finite and >= 0, got {threshold}"
            )));
        }
        if self.sequences.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let scores = self.tfidf_scores();
        let remove: Vec<bool> = scores.iter().map(|&s| s < threshold).collect();
        let removed = self
            .vocabulary
            .types
            .iter()
            .zip(&scores)
            .filter(|(t, _)| remove[t.index])
            .map(|(t, &score)| RemovedType {
                name: t.name.clone(),
                score,
            })
            .collect();
        let mut emptied_slots = 0;
        for s in &mut self.sequences {
            for slot in &mut s.slots {
                slot.events.retain(|&e| !remove[e]);
            }
            let before = s.slots.len();
            s.slots.retain(|slot| !slot.events.is_empty());
            emptied_slots += before - s.slots.len();
        }
        self.densify();
        self.log.push(LogEntry::TfidfFilter {
            threshold,
            removed,
            emptied_slots,
        });
        Ok(self)
    }

    pub fn drop_short(mut self, min_len: usize) -> Result<Dataset> {
        if min_len < 1 {
            return Err(Error::Parameter("min_len must be >= 1".into()));
        }
        let mut removed = Vec::new();
        self.sequences.retain(|s| {
            let keep = s.len() >= min_len;
            if !keep {
                removed.push(s.id.clone());
            }
            keep
        });
        self.densify();
        self.log.push(LogEntry::DropShort { min_len, removed });
        Ok(self)
    }

    /// Sequences with the given ids, in the order given. The vocabulary and
    /// its counts are kept as-is so that encodings stay column-compatible.
    pub fn subset(&self, ids: &[&str]) -> Result<Dataset> {
        let by_id: HashMap<&str, &EventSequence> =
            self.sequences.iter().map(|s| (s.id.as_str(), s)).collect();
        let sequences = ids
            .iter()
            .map(|id| {
                by_id
                    .get(id)
                    .map(|&s| s.clone())
                    .ok_or_else(|| Error::UnknownId(id.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            vocabulary: self.vocabulary.clone(),
            sequences,
            source: self.source.clone(),
            log: self.log.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            version: DATASET_FORMAT_VERSION,
            dataset: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Dataset> {
        let file: DatasetFile = serde_json::from_str(text)?;
        if file.version != DATASET_FORMAT_VERSION {
            return Err(Error::Parameter(format!(
                "unsupported dataset version {}",
                file.version
            )));
        }
        file.dataset.validate()?;
        Ok(file.dataset)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_json(&text)
    }

    /// Writes the sequences back out as JSONL in the ingest format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.sequences {
            let line = serde_json::json!({
                "id": s.id,
                "events": s.raw_events(&self.vocabulary),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}
