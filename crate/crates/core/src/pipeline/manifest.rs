use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::Deserialize;

use crate::alignment::RegionSet;
use crate::decoder::ScoredSentence;
use crate::io::{read_to_string, SentenceRecord};
use crate::{Error, Result};

/// One photo of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    /// As written in the manifest.
    pub timestamp: String,
    /// Parsed timestamp; offsets are converted to UTC, naive times are taken
    /// as UTC.
    pub time: NaiveDateTime,
    pub regions: Option<RegionSet>,
    pub feature: Option<Vec<f64>>,
    pub candidates: Option<Vec<ScoredSentence>>,
}

impl ImageRecord {
    /// Checks the timestamp and the regions and that the record can be
    /// captioned.
    pub fn new(
        image_id: impl Into<String>,
        timestamp: impl Into<String>,
        regions: Option<Vec<Vec<f64>>>,
        feature: Option<Vec<f64>>,
        candidates: Option<Vec<ScoredSentence>>,
    ) -> Result<Self> {
        let image_id = image_id.into();
        let timestamp = timestamp.into();
        let time = parse_timestamp(&timestamp)
            .ok_or_else(|| Error::Invalid(format!("image `{image_id}`: unparsable timestamp `{timestamp}`")))?;
        let regions = regions.map(|r| RegionSet::new(image_id.clone(), r)).transpose()?;
        if let Some(f) = &feature {
            if f.is_empty() || f.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!(
                    "image `{image_id}`: feature must be nonempty and finite"
                )));
            }
        }
        let decodable = regions.is_some() && feature.is_some();
        if !decodable && candidates.is_none() {
            return Err(Error::Invalid(format!(
                "image `{image_id}` needs `regions` and `feature`, or `candidates`"
            )));
        }
        if let Some(c) = candidates.iter().flatten().find(|c| !c.log_score.is_finite()) {
            return Err(Error::Invalid(format!(
                "image `{image_id}`: candidate `{}` has a non-finite log_score",
                c.text()
            )));
        }
        Ok(Self {
            image_id,
            timestamp,
            time,
            regions,
            feature,
            candidates,
        })
    }
}

/// RFC 3339, or `YYYY-MM-DDTHH:MM:SS[.fff]` / `YYYY-MM-DD HH:MM:SS[.fff]`
/// without an offset.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// A stream of photos in timestamp order.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamManifest {
    pub stream_id: Option<String>,
    pub source: Option<String>,
    records: Vec<ImageRecord>,
}

impl StreamManifest {
    /// Sorts by timestamp (stable, so equal times keep their order) and
    /// rejects duplicate ids and empty streams.
    pub fn new(mut records: Vec<ImageRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyManifest("<memory>".into()));
        }
        let mut seen = HashMap::new();
        for r in &records {
            if seen.insert(r.image_id.as_str(), ()).is_some() {
                return Err(Error::DuplicateImage(r.image_id.clone()));
            }
        }
        records.sort_by_key(|r| r.time);
        Ok(Self {
            stream_id: None,
            source: None,
            records,
        })
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn image_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.image_id.clone()).collect()
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.image_id == image_id)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    image_id: String,
    timestamp: String,
    #[serde(default)]
    regions: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    feature: Option<Vec<f64>>,
    #[serde(default)]
    candidates: Option<Vec<SentenceRecord>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    stream_id: String,
    #[serde(default)]
    source: Option<String>,
}

/// Parses manifest text; `path` is only used in error messages.
pub fn parse_manifest(text: &str, path: &Path) -> Result<StreamManifest> {
    let mut header = None;
    let mut records = Vec::new();
    let mut first_line = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::parse(path, n, e))?;
        if value.get("image_id").is_none() {
            if header.is_some() || !records.is_empty() {
                return Err(Error::parse(path, n, "stream header must be the first record"));
            }
            let h: HeaderLine = serde_json::from_value(value).map_err(|e| Error::parse(path, n, e))?;
            header = Some(h);
            continue;
        }
        let rec: RecordLine = serde_json::from_value(value).map_err(|e| Error::parse(path, n, e))?;
        if let Some(prev) = first_line.insert(rec.image_id.clone(), n) {
            return Err(Error::parse(
                path,
                n,
                format!("duplicate image id `{}` (first on line {prev})", rec.image_id),
            ));
        }
        let candidates = rec.candidates.map(|c| c.iter().map(ScoredSentence::from).collect());
        let record = ImageRecord::new(rec.image_id, rec.timestamp, rec.regions, rec.feature, candidates)
            .map_err(|e| Error::parse(path, n, e))?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyManifest(path.to_path_buf()));
    }
    let mut manifest = StreamManifest::new(records)?;
    if let Some(h) = header {
        manifest.stream_id = Some(h.stream_id);
        manifest.source = h.source;
    }
    Ok(manifest)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<StreamManifest> {
    let path = path.as_ref();
    parse_manifest(&read_to_string(path)?, path)
}
