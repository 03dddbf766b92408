//! Post records, line-delimited ingestion, partitions, and the synthetic corpus.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomap::Gazetteer;

pub const MAX_TEXT_CHARS: usize = 1000;

/// One ingested post. `label` is 1 for a relevant incident report, 0 otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    pub created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

impl TweetRecord {
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidRecord {
            id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(invalid("empty id".into()));
        }
        if self.text.trim().is_empty() {
            return Err(invalid("text is blank".into()));
        }
        let chars = self.text.chars().count();
        if chars > MAX_TEXT_CHARS {
            return Err(invalid(format!("text has {chars} characters (max {MAX_TEXT_CHARS})")));
        }
        chrono::DateTime::parse_from_rfc3339(&self.created_at)
            .map_err(|e| invalid(format!("created_at `{}` is not RFC 3339: {e}", self.created_at)))?;
        if let Some(l) = self.label {
            if l > 1 {
                return Err(invalid(format!("label {l} is not 0 or 1")));
            }
        }
        Ok(())
    }

    pub fn is_relevant(&self) -> bool {
        self.label == Some(1)
    }
}

/// Insertion-ordered records with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    records: Vec<TweetRecord>,
    ids: HashSet<String>,
    pub provenance: String,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records && self.provenance == other.provenance
    }
}

impl Dataset {
    pub fn new(provenance: impl Into<String>) -> Self {
        Self {
            provenance: provenance.into(),
            ..Self::default()
        }
    }

    pub fn from_records(provenance: impl Into<String>, records: impl IntoIterator<Item = TweetRecord>) -> Result<Self> {
        let mut ds = Self::new(provenance);
        for r in records {
            r.validate()?;
            if !ds.insert(r.clone()) {
                return Err(Error::InvalidRecord {
                    id: r.id,
                    message: "duplicate id".into(),
                });
            }
        }
        Ok(ds)
    }

    /// Appends unless the id is already present; returns whether it was added.
    pub fn insert(&mut self, record: TweetRecord) -> bool {
        if self.ids.contains(&record.id) {
            return false;
        }
        self.ids.insert(record.id.clone());
        self.records.push(record);
        true
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TweetRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(irrelevant, relevant)` counts among labeled records.
    pub fn class_counts(&self) -> (usize, usize) {
        self.records.iter().fold((0, 0), |(neg, pos), r| match r.label {
            Some(1) => (neg, pos + 1),
            Some(_) => (neg + 1, pos),
            None => (neg, pos),
        })
    }

    pub fn labels(&self) -> Result<Vec<u8>> {
        self.records
            .iter()
            .map(|r| r.label.ok_or_else(|| Error::Unlabeled(r.id.clone())))
            .collect()
    }

    fn subset(&self, provenance: String, keep: &HashSet<usize>) -> Dataset {
        let mut ds = Dataset::new(provenance);
        for (i, r) in self.records.iter().enumerate() {
            if keep.contains(&i) {
                ds.insert(r.clone());
            }
        }
        ds
    }

    fn reordered(&self, provenance: String, order: &[usize]) -> Dataset {
        let mut ds = Dataset::new(provenance);
        for &i in order {
            ds.insert(self.records[i].clone());
        }
        ds
    }

    /// Writes one JSON object per line, LF terminated.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub dataset: Dataset,
    /// Non-blank lines seen.
    pub read: usize,
    pub deduped: usize,
    /// Skipped lines (lenient mode only).
    pub errors: Vec<LineError>,
}

fn parse_line(line: &str) -> std::result::Result<TweetRecord, String> {
    let record: TweetRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

/// Reads line-delimited records. Duplicate ids keep the first occurrence.
///
/// A malformed line is fatal unless `lenient`, in which case it is recorded and skipped.
pub fn ingest_records<R: BufRead>(source: R, provenance: &str, lenient: bool) -> Result<IngestReport> {
    let mut report = IngestReport {
        dataset: Dataset::new(provenance),
        read: 0,
        deduped: 0,
        errors: Vec::new(),
    };
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.read += 1;
        match parse_line(&line) {
            Ok(record) => {
                if !report.dataset.insert(record) {
                    report.deduped += 1;
                }
            }
            Err(message) if lenient => report.errors.push(LineError { line: i + 1, message }),
            Err(message) => return Err(Error::MalformedLine { line: i + 1, message }),
        }
    }
    Ok(report)
}

/// Exact per-class counts for a stratified split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrataCounts {
    pub train_relevant: usize,
    pub test_relevant: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub stratified: bool,
    /// Relevant-class counts; when absent a stratified split allocates proportionally.
    pub strata: Option<StrataCounts>,
}

impl SplitSpec {
    /// 296 train (76 relevant, 220 irrelevant) and 130 test (29 relevant, 101 irrelevant).
    pub fn reference(seed: u64) -> Self {
        Self {
            train_count: 296,
            test_count: 130,
            seed,
            stratified: true,
            strata: Some(StrataCounts {
                train_relevant: 76,
                test_relevant: 29,
            }),
        }
    }

    fn relevant_counts(&self, ds: &Dataset) -> StrataCounts {
        self.strata.unwrap_or_else(|| {
            let (_, pos) = ds.class_counts();
            let share = |n: usize| ((n * pos) as f64 / ds.len().max(1) as f64).round() as usize;
            StrataCounts {
                train_relevant: share(self.train_count),
                test_relevant: share(self.test_count),
            }
        })
    }
}

/// Deterministic train/test partition. Output parts keep the dataset's order.
pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let total = spec.train_count + spec.test_count;
    if total > ds.len() {
        return Err(Error::Split(format!(
            "requested {total} records but the dataset has {}",
            ds.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = if spec.stratified {
        let labels = ds.labels()?;
        let counts = spec.relevant_counts(ds);
        if counts.train_relevant > spec.train_count || counts.test_relevant > spec.test_count {
            return Err(Error::Split("relevant counts exceed part sizes".into()));
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (class, name, n_train, n_test) in [
            (1u8, "relevant", counts.train_relevant, counts.test_relevant),
            (0u8, "irrelevant", spec.train_count - counts.train_relevant, spec.test_count - counts.test_relevant),
        ] {
            let mut members: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == class).collect();
            if n_train + n_test > members.len() {
                return Err(Error::ClassShortage {
                    class: name,
                    requested: n_train + n_test,
                    available: members.len(),
                });
            }
            members.shuffle(&mut rng);
            train.extend_from_slice(&members[..n_train]);
            test.extend_from_slice(&members[n_train..n_train + n_test]);
        }
        (train, test)
    } else {
        let mut all: Vec<usize> = (0..ds.len()).collect();
        all.shuffle(&mut rng);
        (all[..spec.train_count].to_vec(), all[spec.train_count..total].to_vec())
    };
    let train: HashSet<usize> = train_idx.into_iter().collect();
    let test: HashSet<usize> = test_idx.into_iter().collect();
    Ok((
        ds.subset(format!("{}#train", ds.provenance), &train),
        ds.subset(format!("{}#test", ds.provenance), &test),
    ))
}

/// Holds out the trailing `ceil(fraction * n)` records of a seeded shuffle.
pub fn validation_partition(train: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if train.is_empty() {
        return Err(Error::Empty("validation partition of an empty training set"));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Split(format!("validation fraction {fraction} outside [0, 1)")));
    }
    let (fit, val) = nnkit::data::holdout_split(train.len(), fraction, seed);
    Ok((
        train.reordered(format!("{}#fit", train.provenance), &fit),
        train.reordered(format!("{}#val", train.provenance), &val),
    ))
}

const VEHICLES: &[&str] = &[
    "car", "bakkie", "taxi", "minibus", "sedan", "suv", "hatchback", "delivery van", "truck", "vw polo", "toyota corolla",
    "hilux",
];
const COLOURS: &[&str] = &["white", "silver", "black", "grey", "red", "blue"];
const ROADS: &[&str] = &["the N2", "the N1", "the M5", "the R300", "the M3", "the N7"];
const TIMES: &[&str] = &["this morning", "last night", "earlier today", "at about 7pm", "just now", "around midnight"];
const TAGS: &[&str] = &["", "", " #crime", " #alert", " #staysafe", " #news", " #roadsafety"];

const RELEVANT: &[&str] = &[
    "Hijacking in {place} {time}, {colour} {vehicle} taken at gunpoint. Stay alert",
    "Attempted hijacking on {road} near {place}, suspects fled in a {colour} {vehicle}",
    "Another hijacking reported in {place} {time}, driver unharmed but the {vehicle} was stolen",
    "{Place} residents warned after the hijacking of a {colour} {vehicle} {time}",
    "Breaking: armed hijacking at traffic lights in {place}, police on scene",
    "My neighbour was a victim of a hijacking in {place}, three armed men took her {vehicle}",
    "Hijacking alert {place}: {colour} {vehicle} taken from driver at gunpoint, suspects armed",
    "Police searching for suspects after a hijacking outside a shop in {place} {time}",
    "Driver shot during hijacking in {place}, {colour} {vehicle} still missing",
    "Avoid {place}, hijacking in progress near the garage, gunmen in a {colour} {vehicle}",
];

const IRRELEVANT: &[&str] = &[
    "The movie about the plane hijacking was brilliant, highly recommend it",
    "Stop hijacking this thread with your politics",
    "Cape Town traffic is terrible {time}, stuck on the highway for an hour",
    "Interesting podcast on the history of aircraft hijacking in the seventies",
    "Brand hijacking is a real marketing strategy, great lecture {time}",
    "He keeps hijacking the conversation again, typical debate night",
    "Reading a thriller novel about a ship hijacking, cannot put it down",
    "Cape Town weather is amazing this weekend, off to the beach",
    "Session hijacking is a serious web vulnerability, patch your servers",
    "New documentary on the hijacking of a ferry premieres {time}",
    "Car insurance keeps going up, hijacking cover costs extra now",
    "Anyone know a good mechanic in Cape Town for my {vehicle}?",
    "Hijacking the group chat to say happy birthday to my sister",
    "Government accused of hijacking the budget debate for election points",
    "That song hijacking my brain all day, cannot stop humming it",
    "Load shedding again in Cape Town {time}, no power for four hours",
];

fn fill(template: &str, place: &str, rng: &mut ChaCha8Rng) -> String {
    let place = title_case(place);
    let tag = TAGS.choose(rng).copied().unwrap_or("");
    format!(
        "{}{tag}",
        template
            .replace("{place}", &place)
            .replace("{Place}", &place)
            .replace("{time}", TIMES.choose(rng).expect("non-empty"))
            .replace("{colour}", COLOURS.choose(rng).expect("non-empty"))
            .replace("{vehicle}", VEHICLES.choose(rng).expect("non-empty"))
            .replace("{road}", ROADS.choose(rng).expect("non-empty"))
    )
}

fn title_case(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Deterministic labeled corpus for tests and demos.
///
/// Relevant posts are incident reports that contain "hijacking" and exactly one
/// place from the bundled gazetteer. Irrelevant posts use the keyword in
/// unrelated senses or omit it, and name no gazetteer place.
pub fn generate_synthetic_corpus(seed: u64, relevant_count: usize, irrelevant_count: usize) -> Dataset {
    let gazetteer = Gazetteer::bundled();
    let places: Vec<&str> = gazetteer.entries().iter().map(|e| e.name.as_str()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut drafts: Vec<(String, u8)> = Vec::with_capacity(relevant_count + irrelevant_count);
    for _ in 0..relevant_count {
        let template = RELEVANT.choose(&mut rng).expect("non-empty");
        let place = places.choose(&mut rng).expect("bundled gazetteer is non-empty");
        drafts.push((fill(template, place, &mut rng), 1));
    }
    for _ in 0..irrelevant_count {
        let template = IRRELEVANT.choose(&mut rng).expect("non-empty");
        drafts.push((fill(template, "", &mut rng), 0));
    }
    drafts.shuffle(&mut rng);

    let base = chrono::DateTime::parse_from_rfc3339("2022-03-01T00:00:00Z").expect("valid constant");
    let mut minutes = 0i64;
    let mut ds = Dataset::new(format!("synthetic:seed={seed}"));
    for (i, (text, label)) in drafts.into_iter().enumerate() {
        minutes += rng.random_range(1..240);
        let created_at = (base + chrono::Duration::minutes(minutes))
            .to_utc()
            .format("%Y-%m-%dT%H:%M:%SZ")
            .to_string();
        ds.insert(TweetRecord {
            id: format!("syn{seed}-{i:05}"),
            text,
            created_at,
            label: Some(label),
        });
    }
    ds
}
