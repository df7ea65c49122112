//! End-to-end run over one photo stream: candidates, pooling, unary costs,
//! joint selection, diary segments, keyword retrieval and optional
//! evaluation.
//!
//! Every output is computed in memory first; [`PipelineOutput::write_to`]
//! then writes the whole set or nothing.

mod manifest;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use manifest::{load_manifest, parse_manifest, parse_timestamp, ImageRecord, StreamManifest};

use crate::alignment::{unary_cost, AlignmentModel, OovPolicy, RegionSet};
use crate::decoder::{
    diverse_m_best, pool_candidates, DecoderConfig, ImageCandidates, Predictor, ScoredSentence, ToyPredictor,
};
use crate::io::{read_references, CandidateFile, Diary, OutputSet, RetrievalLine, SelectedImage, Selection};
use crate::joint::{
    group_segments, transitions, viterbi_joint, viterbi_windowed, EnergyInstance, JointConfig, JointError,
};
use crate::metrics::{summarize_with, BleuMode, EvalPair, EvalReport, MeteorParams, SynonymTable};
use crate::retrieval::{classify_image, KeywordConfig};
use crate::{Error, Result};

/// Unary cost of a sentence that another image proposed, for images
/// scored by their own log-scores.
pub const DEFAULT_FOREIGN_COST: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub decoder: DecoderConfig,
    pub joint: JointConfig,
    pub keywords: KeywordConfig,
    /// Solve the chain in independent windows of this many images.
    pub window: Option<usize>,
    pub foreign_cost: f64,
    pub oov_policy: OovPolicy,
    pub bleu_mode: BleuMode,
    /// Predictor model (JSON), needed for images without candidates.
    pub predictor: Option<PathBuf>,
    /// Word vectors, needed to score images by their regions.
    pub word_vectors: Option<PathBuf>,
    /// Reference sentences (JSON Lines); enables evaluation.
    pub references: Option<PathBuf>,
    /// Synonym table for METEOR.
    pub synonyms: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            decoder: DecoderConfig::default(),
            joint: JointConfig::default(),
            keywords: KeywordConfig::default(),
            window: None,
            foreign_cost: DEFAULT_FOREIGN_COST,
            oov_policy: OovPolicy::default(),
            bleu_mode: BleuMode::default(),
            predictor: None,
            word_vectors: None,
            references: None,
            synonyms: None,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.decoder.validate()?;
        let beta = self.joint.beta;
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(JointError::InvalidBeta(beta).into());
        }
        self.keywords.validate()?;
        if self.window == Some(0) {
            return Err(Error::Invalid("window must be at least 1 image".into()));
        }
        if !(self.foreign_cost.is_finite() && self.foreign_cost > 0.0) {
            return Err(Error::Invalid("foreign_cost must be finite and positive".into()));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::parse(path, e.line(), e))
    }
}

/// Models and data files referenced by a [`PipelineConfig`].
#[derive(Default)]
pub struct Models {
    pub predictor: Option<Box<dyn Predictor>>,
    pub alignment: Option<AlignmentModel>,
    pub references: Option<HashMap<String, Vec<String>>>,
    pub meteor: MeteorParams,
}

impl Models {
    /// Loads every file the config names, failing on the first problem.
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let mut models = Models::default();
        if let Some(p) = &config.predictor {
            models.predictor = Some(Box::new(ToyPredictor::load(p)?));
        }
        if let Some(p) = &config.word_vectors {
            models.alignment = Some(AlignmentModel::load(p, config.oov_policy)?);
        }
        if let Some(p) = &config.references {
            models.references = Some(read_references(p)?);
        }
        if let Some(p) = &config.synonyms {
            models.meteor.synonyms = Some(SynonymTable::load(p)?);
        }
        Ok(models)
    }
}

/// Candidates for every image: its precomputed list when present, decoded
/// from its feature otherwise.
pub fn decode_stream(
    manifest: &StreamManifest,
    decoder: &DecoderConfig,
    predictor: Option<&dyn Predictor>,
) -> Result<CandidateFile> {
    decoder.validate()?;
    let images = manifest
        .records()
        .par_iter()
        .map(|r| -> Result<ImageCandidates> {
            let candidates = match (&r.candidates, &r.feature, predictor) {
                (Some(c), _, _) => c.clone(),
                (None, Some(feature), Some(p)) => diverse_m_best(p, feature, decoder)?
                    .iter()
                    .map(|h| ScoredSentence::from_hypothesis(h, p.vocabulary()))
                    .collect(),
                (None, _, None) => {
                    return Err(Error::Invalid(format!(
                        "image `{}` has no candidates and no predictor is configured",
                        r.image_id
                    )))
                }
                (None, None, Some(_)) => unreachable!("records are validated on construction"),
            };
            Ok(ImageCandidates {
                image_id: r.image_id.clone(),
                candidates,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateFile {
        images,
        timestamps: manifest.records().iter().map(|r| Some(r.timestamp.clone())).collect(),
    })
}

/// Pools the candidates of `file` and fills the `K × |C|` unary matrix.
///
/// An image with regions (and an alignment model) costs the negated
/// alignment score of each sentence. Any other image costs the negated
/// log-score of the sentences it proposed itself and `foreign_cost` for the
/// rest.
pub fn build_instance(
    file: &CandidateFile,
    regions: &[Option<&RegionSet>],
    alignment: Option<&AlignmentModel>,
    foreign_cost: f64,
) -> Result<EnergyInstance> {
    assert_eq!(regions.len(), file.images.len(), "one region slot per image");
    let pool = pool_candidates(&file.images);
    if pool.is_empty() {
        return Err(Error::Invalid("no candidate sentences in the stream".into()));
    }
    if alignment.is_none() && regions.iter().any(Option::is_some) {
        log::warn!("no word vectors configured; scoring images by candidate log-scores");
    }
    let rows = (0..file.images.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            match (regions[i], alignment) {
                (Some(r), Some(model)) => pool
                    .iter()
                    .map(|c| unary_cost(&c.words, r, model).map_err(Error::from))
                    .collect(),
                _ => Ok(pool
                    .iter()
                    .map(|c| c.score_for(i).map_or(foreign_cost, |s| -s))
                    .collect()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let ids = file.images.iter().map(|c| c.image_id.clone()).collect();
    let times = file.timestamps.iter().map(|t| t.clone().unwrap_or_default()).collect();
    Ok(EnergyInstance::new(rows)?
        .with_images(ids, times)?
        .with_labels(pool.texts())?)
}

/// Minimum-energy labeling, its per-image sentences and the diary.
pub fn select(instance: &EnergyInstance, joint: &JointConfig, window: Option<usize>) -> Result<(Selection, Diary)> {
    let solution = match window {
        Some(w) => viterbi_windowed(instance, joint.beta, w)?,
        None => viterbi_joint(instance, joint.beta)?,
    };
    let segments = group_segments(instance, &solution.labeling)?;
    let images = solution
        .labeling
        .iter()
        .enumerate()
        .map(|(i, &label)| SelectedImage {
            image_id: instance.image_ids()[i].clone(),
            timestamp: instance.timestamps()[i].clone(),
            label,
            sentence: instance.labels()[label].clone(),
        })
        .collect();
    let selection = Selection {
        beta: joint.beta,
        window,
        energy: solution.energy,
        transitions: transitions(&solution.labeling),
        images,
    };
    Ok((
        selection,
        Diary {
            stream_id: None,
            segments,
        },
    ))
}

/// Classifies every image by its `captions_per_image` best candidates.
pub fn classify_stream(file: &CandidateFile, keywords: &KeywordConfig) -> Result<Vec<RetrievalLine>> {
    file.images
        .par_iter()
        .map(|img| {
            let top: Vec<String> = CandidateFile::top_k(img, keywords.captions_per_image)
                .iter()
                .map(|s| s.text())
                .collect();
            Ok(RetrievalLine {
                image_id: img.image_id.clone(),
                classification: classify_image(&top, keywords)?,
            })
        })
        .collect()
}

/// Scores `(image id, sentence)` pairs against the references. Every image
/// must have at least one reference.
pub fn evaluate_sentences(
    sentences: &[(String, String)],
    references: &HashMap<String, Vec<String>>,
    bleu_mode: BleuMode,
    meteor: &MeteorParams,
) -> Result<EvalReport> {
    let missing: Vec<String> = sentences
        .iter()
        .filter(|(id, _)| references.get(id).is_none_or(Vec::is_empty))
        .map(|(id, _)| id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingReferences(missing));
    }
    let pairs: Vec<EvalPair> = sentences
        .iter()
        .map(|(id, sentence)| EvalPair::from_text(sentence, &references[id]))
        .collect();
    Ok(summarize_with(&pairs, bleu_mode, meteor)?)
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub candidates: CandidateFile,
    pub instance: EnergyInstance,
    pub selection: Selection,
    pub diary: Diary,
    pub retrieval: Vec<RetrievalLine>,
    pub eval: Option<EvalReport>,
}

impl PipelineOutput {
    /// Output files by name.
    pub fn files(&self) -> OutputSet {
        let mut out = OutputSet::new();
        out.add("candidates.jsonl", self.candidates.to_jsonl());
        out.add("costs.csv", crate::io::cost_csv(&self.instance));
        out.add("costs.labels.txt", crate::io::labels_text(&self.instance));
        out.add("selection.json", self.selection.to_json());
        out.add("diary.txt", self.diary.to_text());
        out.add("diary.json", self.diary.to_json());
        out.add("retrieval.jsonl", crate::io::retrieval_jsonl(&self.retrieval));
        if let Some(report) = &self.eval {
            out.extend(eval_files(report, self.diary.stream_id.as_deref().unwrap_or("run")));
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.files().write_atomic(dir)
    }
}

/// `eval.json` and the one-row `eval.txt` table.
pub fn eval_files(report: &EvalReport, label: &str) -> OutputSet {
    let mut out = OutputSet::new();
    let mut json = serde_json::to_string_pretty(report).expect("plain data serializes");
    json.push('\n');
    out.add("eval.json", json);
    out.add(
        "eval.txt",
        format!("{}\n{}\n", EvalReport::table_header(), report.table_row(label)),
    );
    out
}

/// Runs every stage on one stream. Nothing is written.
pub fn run_pipeline(manifest: &StreamManifest, config: &PipelineConfig, models: &Models) -> Result<PipelineOutput> {
    config.validate()?;
    let candidates = decode_stream(manifest, &config.decoder, models.predictor.as_deref())?;
    let regions: Vec<Option<&RegionSet>> = manifest.records().iter().map(|r| r.regions.as_ref()).collect();
    let instance = build_instance(&candidates, &regions, models.alignment.as_ref(), config.foreign_cost)?;
    let (selection, mut diary) = select(&instance, &config.joint, config.window)?;
    diary.stream_id = manifest.stream_id.clone();
    let retrieval = classify_stream(&candidates, &config.keywords)?;
    let eval = models
        .references
        .as_ref()
        .map(|refs| evaluate_sentences(&selection.sentences(), refs, config.bleu_mode, &models.meteor))
        .transpose()?;
    Ok(PipelineOutput {
        candidates,
        instance,
        selection,
        diary,
        retrieval,
        eval,
    })
}
