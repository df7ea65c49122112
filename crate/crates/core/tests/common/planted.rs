//! Synthetic photo stream with three planted activities.
//!
//! Every image carries a feature near its activity's centroid (so the toy
//! predictor decodes that activity's sentences) and two regions pointing at
//! the activity's topic direction plus noise (so alignment prefers those
//! sentences, with per-image noise deciding between them).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use lifecap::alignment::{AlignmentModel, OovPolicy};
use lifecap::decoder::{ToyPredictor, Vocabulary};
use lifecap::pipeline::{ImageRecord, StreamManifest};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ACTIVITIES: [[&str; 5]; 3] = [
    ["man", "typing", "laptop", "desk", "office"],
    ["plate", "food", "table", "eating", "lunch"],
    ["street", "walking", "cars", "road", "outside"],
];

pub const REFERENCES: [[&str; 2]; 3] = [
    ["a man typing on a laptop at his desk", "a man working in an office"],
    ["a plate of food on a table", "eating lunch at a table"],
    ["walking down a street with cars", "a road outside"],
];

/// Images per activity, in stream order.
pub const SIZES: [usize; 3] = [17, 17, 16];

pub struct PlantedStream {
    pub records: Vec<ImageRecord>,
    pub predictor: ToyPredictor,
    pub vectors: AlignmentModel,
    /// Activity of each image.
    pub truth: Vec<usize>,
    pub references: HashMap<String, Vec<String>>,
}

impl PlantedStream {
    pub fn manifest(&self) -> StreamManifest {
        StreamManifest::new(self.records.clone()).unwrap()
    }

    /// Planted segments as inclusive index ranges.
    pub fn planted_runs() -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = 0;
        for n in SIZES {
            runs.push((start, start + n - 1));
            start += n;
        }
        runs
    }

    /// Writes `manifest.jsonl`, `predictor.json`, `vectors.txt` and
    /// `references.jsonl` into `dir`.
    pub fn write_files(&self, dir: &Path) {
        std::fs::create_dir_all(dir).unwrap();
        let mut manifest = String::from("{\"stream_id\":\"planted\",\"source\":\"synthetic\"}\n");
        for r in &self.records {
            let line = serde_json::json!({
                "image_id": r.image_id,
                "timestamp": r.timestamp,
                "feature": r.feature,
                "regions": r.regions.as_ref().unwrap().regions(),
            });
            writeln!(manifest, "{line}").unwrap();
        }
        std::fs::write(dir.join("manifest.jsonl"), manifest).unwrap();
        std::fs::write(dir.join("predictor.json"), self.predictor.to_json()).unwrap();

        let mut vectors = String::from("# planted topic vectors\n");
        for word in ACTIVITIES.iter().flatten() {
            let v = self.vectors.vector(word).unwrap();
            let nums: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(vectors, "{word} {}", nums.join(" ")).unwrap();
        }
        std::fs::write(dir.join("vectors.txt"), vectors).unwrap();

        let mut refs = String::new();
        for r in &self.records {
            let line = serde_json::json!({"image_id": r.image_id, "references": self.references[&r.image_id]});
            writeln!(refs, "{line}").unwrap();
        }
        std::fs::write(dir.join("references.jsonl"), refs).unwrap();
    }
}

fn predictor() -> ToyPredictor {
    let words: Vec<&str> = std::iter::once("a")
        .chain(ACTIVITIES.iter().flatten().copied())
        .collect();
    let vocab = Vocabulary::from_words(words).unwrap();
    let centroids = (0..3)
        .map(|k| (0..3).map(|d| f64::from(u8::from(d == k))).collect())
        .collect();
    let mut p = ToyPredictor::new(vocab.clone(), centroids)
        .unwrap()
        .with_default_activation(-10.0);
    let n = vocab.len();
    let id = |w: &str| vocab.id(w).unwrap();

    for (k, own) in ACTIVITIES.iter().enumerate() {
        let mut first = vec![-10.0; n];
        first[id("a")] = 1.0;
        for (j, w) in own.iter().enumerate() {
            first[id(w)] = -0.1 * j as f64;
        }
        p.set_bigram(k, lifecap::decoder::START, first).unwrap();

        let mut after_a = vec![-10.0; n];
        after_a[vocab.stop()] = -3.0;
        for (j, w) in own.iter().enumerate() {
            after_a[id(w)] = 1.0 - 0.2 * j as f64;
        }
        p.set_bigram(k, "a", after_a).unwrap();

        for prev in own {
            let mut row = vec![-10.0; n];
            row[vocab.stop()] = 0.5;
            row[id("a")] = -2.0;
            for (j, w) in own.iter().enumerate() {
                if w != prev {
                    row[id(w)] = -0.1 * j as f64;
                }
            }
            p.set_bigram(k, prev, row).unwrap();
        }
    }
    p
}

pub fn planted_stream(seed: u64) -> PlantedStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |scale: f64| -> f64 { rng.gen_range(-scale..=scale) };

    let mut vectors = AlignmentModel::new(6, OovPolicy::Drop);
    for (k, own) in ACTIVITIES.iter().enumerate() {
        for w in own {
            let mut v = vec![0.0; 6];
            v[k] = 3.0;
            for x in &mut v[3..] {
                *x = noise(0.3);
            }
            vectors.insert(*w, v).unwrap();
        }
    }

    let mut records = Vec::new();
    let mut truth = Vec::new();
    let mut references = HashMap::new();
    let mut index = 0;
    for (k, &size) in SIZES.iter().enumerate() {
        for _ in 0..size {
            let id = format!("img{index:03}");
            let feature: Vec<f64> = (0..3).map(|d| f64::from(u8::from(d == k)) + noise(0.1)).collect();
            let regions: Vec<Vec<f64>> = (0..2)
                .map(|_| {
                    let mut r = vec![0.0; 6];
                    r[k] = 1.0 + noise(0.1);
                    for x in &mut r[3..] {
                        *x = noise(0.5);
                    }
                    r
                })
                .collect();
            let timestamp = format!("2016-05-02T{:02}:{:02}:00Z", 8 + index / 60, index % 60);
            records.push(ImageRecord::new(id.clone(), timestamp, Some(regions), Some(feature), None).unwrap());
            references.insert(id, REFERENCES[k].iter().map(|s| s.to_string()).collect());
            truth.push(k);
            index += 1;
        }
    }
    PlantedStream {
        records,
        predictor: predictor(),
        vectors,
        truth,
        references,
    }
}
