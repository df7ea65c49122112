//! File formats shared by the pipeline and the command-line tool, and an
//! all-or-nothing writer for output directories.
//!
//! Every JSON Lines reader skips blank lines and reports 1-based line
//! numbers on error.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::decoder::{ImageCandidates, ScoredSentence};
use crate::joint::{DiarySegment, EnergyInstance};
use crate::retrieval::{Classification, PrPoint, SensitivityLabel};
use crate::{Error, Result};

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses every non-blank line of `path` as one JSON value, returning
/// `(line number, value)` pairs.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    parse_jsonl(&read_to_string(path)?, path)
}

pub(crate) fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<(usize, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| Error::parse(path, i + 1, e))
        })
        .collect()
}

fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// One sentence with its model score, as stored in candidate files and
/// manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceRecord {
    pub text: String,
    pub log_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
}

impl From<&ScoredSentence> for SentenceRecord {
    fn from(s: &ScoredSentence) -> Self {
        Self {
            text: s.text(),
            log_score: s.log_score,
            round: s.round,
        }
    }
}

impl From<&SentenceRecord> for ScoredSentence {
    fn from(r: &SentenceRecord) -> Self {
        Self {
            round: r.round,
            ..ScoredSentence::from_text(&r.text, r.log_score)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidatesLine {
    image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
    candidates: Vec<SentenceRecord>,
}

/// Candidate lists of a stream, in stream order, with optional timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFile {
    pub images: Vec<ImageCandidates>,
    pub timestamps: Vec<Option<String>>,
}

impl CandidateFile {
    pub fn to_jsonl(&self) -> String {
        to_jsonl(
            self.images
                .iter()
                .zip(&self.timestamps)
                .map(|(img, ts)| CandidatesLine {
                    image_id: img.image_id.clone(),
                    timestamp: ts.clone(),
                    candidates: img.candidates.iter().map(SentenceRecord::from).collect(),
                }),
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let lines: Vec<(usize, CandidatesLine)> = read_jsonl(path)?;
        let mut seen = HashMap::new();
        let mut file = CandidateFile {
            images: Vec::with_capacity(lines.len()),
            timestamps: Vec::with_capacity(lines.len()),
        };
        for (line, rec) in lines {
            if let Some(first) = seen.insert(rec.image_id.clone(), line) {
                return Err(Error::parse(
                    path,
                    line,
                    format!("image `{}` already listed on line {first}", rec.image_id),
                ));
            }
            file.images.push(ImageCandidates {
                image_id: rec.image_id,
                candidates: rec.candidates.iter().map(ScoredSentence::from).collect(),
            });
            file.timestamps.push(rec.timestamp);
        }
        if file.images.is_empty() {
            return Err(Error::Invalid(format!("{}: no candidate lists", path.display())));
        }
        Ok(file)
    }

    /// The image's `k` best candidates by log-score, ties in file order.
    pub fn top_k(image: &ImageCandidates, k: usize) -> Vec<&ScoredSentence> {
        let mut sorted: Vec<&ScoredSentence> = image.candidates.iter().collect();
        sorted.sort_by(|a, b| b.log_score.total_cmp(&a.log_score));
        sorted.truncate(k);
        sorted
    }
}

/// Sidecar holding one candidate sentence per line, next to a cost CSV:
/// `costs.csv` → `costs.labels.txt`.
pub fn labels_sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("labels.txt")
}

/// Cost matrix as CSV: header `image_id,0,1,...`, then one row per image.
pub fn cost_csv(instance: &EnergyInstance) -> String {
    let mut out = String::from("image_id");
    for c in 0..instance.num_labels() {
        write!(out, ",{c}").unwrap();
    }
    out.push('\n');
    for (i, id) in instance.image_ids().iter().enumerate() {
        out.push_str(&csv_field(id));
        for x in instance.row(i) {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn labels_text(instance: &EnergyInstance) -> String {
    instance.labels().iter().map(|l| format!("{l}\n")).collect()
}

/// Reads a cost CSV, naming labels from `labels` (one per line) when given.
pub fn read_cost_csv(path: &Path, labels: Option<&Path>) -> Result<EnergyInstance> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header_len = reader.headers().map_err(|e| Error::parse(path, 1, e))?.len();
    if header_len < 2 {
        return Err(Error::parse(path, 1, "expected `image_id` plus one column per label"));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(path, line, e))?;
        if record.len() != header_len {
            return Err(Error::parse(
                path,
                line,
                format!("{} fields, header has {header_len}", record.len()),
            ));
        }
        ids.push(record[0].to_string());
        let row = record
            .iter()
            .skip(1)
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, line, format!("`{f}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = ids.len();
    let mut instance = EnergyInstance::new(rows)?.with_images(ids, vec![String::new(); n])?;
    if let Some(labels_path) = labels {
        let names: Vec<String> = read_to_string(labels_path)?.lines().map(str::to_string).collect();
        instance = instance.with_labels(names)?;
    }
    Ok(instance)
}

/// Chosen sentence for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedImage {
    pub image_id: String,
    #[serde(default)]
    pub timestamp: String,
    pub label: usize,
    pub sentence: String,
}

/// Result of joint selection over one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    pub energy: f64,
    pub transitions: usize,
    pub images: Vec<SelectedImage>,
}

impl Selection {
    pub fn to_json(&self) -> String {
        to_json_pretty(self)
    }

    /// `(image id, sentence)` in stream order.
    pub fn sentences(&self) -> Vec<(String, String)> {
        self.images
            .iter()
            .map(|s| (s.image_id.clone(), s.sentence.clone()))
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::parse(path, e.line(), e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream_id: Option<String>,
    pub segments: Vec<DiarySegment>,
}

impl Diary {
    pub fn to_json(&self) -> String {
        to_json_pretty(self)
    }

    /// One line per segment: time span, sentence, image count.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            let span = match (s.start_time.is_empty(), s.start_time == s.end_time) {
                (true, _) => format!("#{}-#{}", s.start_index, s.end_index),
                (false, true) => s.start_time.clone(),
                (false, false) => format!("{} - {}", s.start_time, s.end_time),
            };
            let noun = if s.len() == 1 { "image" } else { "images" };
            writeln!(out, "{span}\t{}\t({} {noun})", s.sentence, s.len()).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceLine {
    image_id: String,
    references: Vec<String>,
}

/// Reference sentences by image id. Repeated ids accumulate.
pub fn read_references(path: &Path) -> Result<HashMap<String, Vec<String>>> {
    let mut map: HashMap<String, Vec<String>> = HashMap::new();
    for (_, line) in read_jsonl::<ReferenceLine>(path)? {
        map.entry(line.image_id).or_default().extend(line.references);
    }
    Ok(map)
}

/// Ground-truth labels from a CSV with header `image_id,label`.
pub fn read_labels(path: &Path) -> Result<HashMap<String, SensitivityLabel>> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut map = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(path, line, e))?;
        if record.len() != 2 {
            return Err(Error::parse(path, line, "expected `image_id,label`"));
        }
        let label = record[1].parse().map_err(|e| Error::parse(path, line, e))?;
        if map.insert(record[0].to_string(), label).is_some() {
            return Err(Error::parse(path, line, format!("duplicate image `{}`", &record[0])));
        }
    }
    Ok(map)
}

/// Per-image classification line of `retrieval.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalLine {
    pub image_id: String,
    #[serde(flatten)]
    pub classification: Classification,
}

pub fn retrieval_jsonl(lines: &[RetrievalLine]) -> String {
    to_jsonl(lines)
}

pub fn pr_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall\n");
    for p in points {
        writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall).unwrap();
    }
    out
}

/// Files to be written together into one directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputSet {
    files: BTreeMap<String, Vec<u8>>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), contents.into());
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn extend(&mut self, other: OutputSet) {
        self.files.extend(other.files);
    }

    /// Writes every file to a temporary name in `dir` first and renames
    /// them into place only once all writes succeeded. If a rename fails,
    /// the files already renamed are removed again.
    pub fn write_atomic(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let mut tmp = tempfile::Builder::new()
                .prefix(".lifecap-")
                .tempfile_in(dir)
                .map_err(|e| Error::io(dir, e))?;
            tmp.write_all(contents)
                .and_then(|_| tmp.flush())
                .map_err(|e| Error::io(tmp.path(), e))?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, dest) in staged {
            if let Err(e) = tmp.persist(&dest) {
                // Undo the renames already done so the directory is not left
                // with half a result set.
                for done in &written {
                    let _ = std::fs::remove_file(done);
                }
                return Err(Error::io(&dest, e.error));
            }
            written.push(dest);
        }
        Ok(written)
    }
}
