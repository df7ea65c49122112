//! `lifecap`: run the photo-stream captioning pipeline or any single stage.
//!
//! Every command reads its inputs, computes all outputs in memory and then
//! writes them into `--output-dir` together. Errors go to stderr with exit
//! code 2 (missing file), 64 (bad usage or configuration), 65 (bad input
//! data) or 1 (anything else).

mod error;

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lifecap::alignment::{AlignmentModel, OovPolicy, RegionSet};
use lifecap::decoder::{Predictor, ToyPredictor};
use lifecap::io::{self, CandidateFile, OutputSet, Selection};
use lifecap::metrics::{BleuMode, EvalReport, MeteorParams, SynonymTable};
use lifecap::pipeline::{self, load_manifest, Models, PipelineConfig, StreamManifest};
use lifecap::retrieval::{self, KeywordConfig, MatchMode};

use crate::error::CliError;

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "lifecap",
    version,
    about = "Caption a lifelogging photo stream and summarize it as a diary"
)]
struct Cli {
    /// Pipeline settings as JSON; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory receiving the output files [default: config `output_dir`, else `.`].
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Compute every output twice and fail unless both runs are byte-identical.
    #[arg(long, global = true)]
    seed_free: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate diverse candidate captions for every image (candidates.jsonl).
    Decode(DecodeArgs),
    /// Build the unary cost matrix of a candidate pool (costs.csv, costs.labels.txt).
    Score(ScoreArgs),
    /// Select one sentence per image with temporal smoothing (selection.json, diary.txt, diary.json).
    Smooth(SmoothArgs),
    /// Run the whole pipeline on a manifest.
    Diary(DiaryArgs),
    /// Score sentences against references (eval.json, eval.txt).
    Evaluate(EvaluateArgs),
    /// Flag sensitive images by keywords in their top captions.
    Retrieve(RetrieveArgs),
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Stream manifest (JSON Lines).
    #[arg(long)]
    manifest: PathBuf,
    /// Predictor model (JSON).
    #[arg(long)]
    predictor: Option<PathBuf>,
    #[arg(long)]
    beam_size: Option<usize>,
    /// Number of beam-search rounds.
    #[arg(long)]
    rounds: Option<usize>,
    /// Penalty per earlier round that used a word at the same position.
    #[arg(long, allow_negative_numbers = true)]
    diversity_penalty: Option<f64>,
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OovArg {
    Drop,
    Zero,
}

impl From<OovArg> for OovPolicy {
    fn from(a: OovArg) -> Self {
        match a {
            OovArg::Drop => OovPolicy::Drop,
            OovArg::Zero => OovPolicy::Zero,
        }
    }
}

#[derive(Debug, Args)]
struct CostArgs {
    /// Manifest supplying image regions; images without regions are scored by log-score.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Word vectors (text, one `word v1 v2 ...` per line).
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    /// Handling of words without a vector.
    #[arg(long, value_enum)]
    oov: Option<OovArg>,
    /// Cost of a sentence proposed only by other images, for images without regions.
    #[arg(long, allow_negative_numbers = true)]
    foreign_cost: Option<f64>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Candidates file (JSON Lines) as written by `decode`.
    #[arg(long)]
    candidates: PathBuf,
    #[command(flatten)]
    costs: CostArgs,
}

#[derive(Debug, Args)]
struct SmoothArgs {
    /// Candidates file as written by `decode`.
    #[arg(long, required_unless_present = "costs", conflicts_with = "costs")]
    candidates: Option<PathBuf>,
    /// Cost matrix CSV as written by `score`.
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Sentence per label for `--costs` [default: the `.labels.txt` sidecar when present].
    #[arg(long, requires = "costs")]
    labels: Option<PathBuf>,
    #[command(flatten)]
    cost_args: CostArgs,
    /// Penalty per change of sentence between neighboring images.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Solve independent windows of this many images.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Debug, Args)]
struct DiaryArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    predictor: Option<PathBuf>,
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    /// Reference sentences (JSON Lines); adds eval.json and eval.txt.
    #[arg(long)]
    references: Option<PathBuf>,
    /// Synonym table for METEOR.
    #[arg(long)]
    synonyms: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BleuArg {
    Corpus,
    Sentence,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Candidates file; each image is represented by its best-scoring candidate.
    #[arg(long, conflicts_with_all = ["selection", "scores_row"])]
    candidates: Option<PathBuf>,
    /// selection.json as written by `smooth` or `diary`.
    #[arg(long, conflicts_with = "scores_row")]
    selection: Option<PathBuf>,
    /// Seven comma-separated scores (BLEU-1..4, CIDEr, METEOR, ROUGE-L) to summarize as one table row.
    #[arg(long, value_name = "SCORES", allow_hyphen_values = true)]
    scores_row: Option<String>,
    /// Reference sentences (JSON Lines).
    #[arg(long, required_unless_present = "scores_row")]
    references: Option<PathBuf>,
    /// Synonym table for METEOR.
    #[arg(long)]
    synonyms: Option<PathBuf>,
    #[arg(long, value_enum)]
    bleu: Option<BleuArg>,
    /// Row label in eval.txt.
    #[arg(long, default_value = "run")]
    label: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MatchArg {
    Exact,
    Stem,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[arg(long)]
    candidates: PathBuf,
    /// Keyword lists (JSON) [default: built-in place and display lists].
    #[arg(long)]
    keywords: Option<PathBuf>,
    /// Ground truth CSV `image_id,label`; adds confusion matrices and PR curves.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_enum)]
    match_mode: Option<MatchArg>,
    /// Captions searched per image.
    #[arg(long)]
    top_k: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lifecap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(CliError::usage)?,
        None => PipelineConfig::default(),
    };
    let outputs = compute(&cli.command, &config)?;
    if cli.seed_free {
        let again = compute(&cli.command, &config)?;
        if let Some(name) = outputs.names().find(|n| outputs.get(n) != again.get(n)) {
            return Err(CliError::Failure(format!(
                "output `{name}` differs between two identical runs"
            )));
        }
        if outputs != again {
            return Err(CliError::Failure("the two runs produced different file sets".into()));
        }
    }
    let dir = cli
        .output_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    for path in outputs.write_atomic(&dir)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn compute(command: &Command, config: &PipelineConfig) -> CliResult<OutputSet> {
    match command {
        Command::Decode(a) => decode(a, config),
        Command::Score(a) => score(a, config),
        Command::Smooth(a) => smooth(a, config),
        Command::Diary(a) => diary(a, config),
        Command::Evaluate(a) => evaluate(a, config),
        Command::Retrieve(a) => retrieve(a, config),
    }
}

fn check(config: &PipelineConfig) -> CliResult<()> {
    config.validate().map_err(CliError::usage)
}

fn decode(args: &DecodeArgs, config: &PipelineConfig) -> CliResult<OutputSet> {
    let mut config = config.clone();
    let d = &mut config.decoder;
    d.beam_size = args.beam_size.unwrap_or(d.beam_size);
    d.rounds = args.rounds.unwrap_or(d.rounds);
    d.diversity_penalty = args.diversity_penalty.unwrap_or(d.diversity_penalty);
    d.max_len = args.max_len.unwrap_or(d.max_len);
    check(&config)?;

    let predictor = args
        .predictor
        .as_ref()
        .or(config.predictor.as_ref())
        .map(ToyPredictor::load)
        .transpose()?;
    let manifest = load_manifest(&args.manifest)?;
    let file = pipeline::decode_stream(
        &manifest,
        &config.decoder,
        predictor.as_ref().map(|p| p as &dyn Predictor),
    )?;
    let mut out = OutputSet::new();
    out.add("candidates.jsonl", file.to_jsonl());
    Ok(out)
}

/// Applies the cost flags and loads what they name.
fn cost_inputs(
    args: &CostArgs,
    config: &mut PipelineConfig,
) -> CliResult<(Option<StreamManifest>, Option<AlignmentModel>)> {
    if let Some(oov) = args.oov {
        config.oov_policy = oov.into();
    }
    config.foreign_cost = args.foreign_cost.unwrap_or(config.foreign_cost);
    check(config)?;
    let manifest = args.manifest.as_ref().map(load_manifest).transpose()?;
    let vectors = args.word_vectors.as_ref().or(config.word_vectors.as_ref());
    let model = vectors
        .map(|p| AlignmentModel::load(p, config.oov_policy))
        .transpose()?;
    Ok((manifest, model))
}

fn candidate_instance(
    file: &CandidateFile,
    manifest: Option<&StreamManifest>,
    model: Option<&AlignmentModel>,
    foreign_cost: f64,
) -> CliResult<lifecap::joint::EnergyInstance> {
    let regions: Vec<Option<&RegionSet>> = file
        .images
        .iter()
        .map(|img| {
            manifest
                .and_then(|m| m.get(&img.image_id))
                .and_then(|r| r.regions.as_ref())
        })
        .collect();
    Ok(pipeline::build_instance(file, &regions, model, foreign_cost)?)
}

fn score(args: &ScoreArgs, config: &PipelineConfig) -> CliResult<OutputSet> {
    let mut config = config.clone();
    let (manifest, model) = cost_inputs(&args.costs, &mut config)?;
    let file = CandidateFile::read(&args.candidates)?;
    let instance = candidate_instance(&file, manifest.as_ref(), model.as_ref(), config.foreign_cost)?;
    let mut out = OutputSet::new();
    out.add("costs.csv", io::cost_csv(&instance));
    out.add("costs.labels.txt", io::labels_text(&instance));
    Ok(out)
}

fn smooth(args: &SmoothArgs, config: &PipelineConfig) -> CliResult<OutputSet> {
    let mut config = config.clone();
    config.joint.beta = args.beta.unwrap_or(config.joint.beta);
    config.window = args.window.or(config.window);
    let (manifest, model) = cost_inputs(&args.cost_args, &mut config)?;

    let instance = match (&args.candidates, &args.costs) {
        (Some(c), _) => {
            let file = CandidateFile::read(c)?;
            candidate_instance(&file, manifest.as_ref(), model.as_ref(), config.foreign_cost)?
        }
        (None, Some(csv)) => {
            let sidecar = io::labels_sidecar_path(csv);
            let labels = args.labels.clone().or_else(|| sidecar.exists().then_some(sidecar));
            io::read_cost_csv(csv, labels.as_deref())?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let (selection, diary) = pipeline::select(&instance, &config.joint, config.window)?;
    let mut out = OutputSet::new();
    out.add("selection.json", selection.to_json());
    out.add("diary.txt", diary.to_text());
    out.add("diary.json", diary.to_json());
    Ok(out)
}

fn diary(args: &DiaryArgs, config: &PipelineConfig) -> CliResult<OutputSet> {
    let mut config = config.clone();
    config.joint.beta = args.beta.unwrap_or(config.joint.beta);
    config.window = args.window.or(config.window);
    for (slot, flag) in [
        (&mut config.predictor, &args.predictor),
        (&mut config.word_vectors, &args.word_vectors),
        (&mut config.references, &args.references),
        (&mut config.synonyms, &args.synonyms),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    check(&config)?;
    let models = Models::load(&config)?;
    let manifest = load_manifest(&args.manifest)?;
    Ok(pipeline::run_pipeline(&manifest, &config, &models)?.files())
}

fn parse_scores_row(row: &str) -> CliResult<[f64; 7]> {
    let values = row
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("--scores-row: {e}")))?;
    <[f64; 7]>::try_from(values).map_err(|v| CliError::Usage(format!("--scores-row needs 7 scores, got {}", v.len())))
}

fn evaluate(args: &EvaluateArgs, config: &PipelineConfig) -> CliResult<OutputSet> {
    if let Some(row) = &args.scores_row {
        let report = EvalReport::from_scores(parse_scores_row(row)?);
        return Ok(pipeline::eval_files(&report, &args.label));
    }
    let sentences = match (&args.candidates, &args.selection) {
        (Some(c), _) => CandidateFile::read(c)?
            .images
            .iter()
            .map(|img| {
                let best = CandidateFile::top_k(img, 1)
                    .first()
                    .map(|s| s.text())
                    .unwrap_or_default();
                (img.image_id.clone(), best)
            })
            .collect(),
        (None, Some(s)) => Selection::read(s)?.sentences(),
        (None, None) => return Err(CliError::Usage("give --candidates, --selection or --scores-row".into())),
    };
    let references = io::read_references(args.references.as_ref().expect("clap requires --references"))?;
    let mut meteor = MeteorParams::default();
    if let Some(p) = args.synonyms.as_ref().or(config.synonyms.as_ref()) {
        meteor.synonyms = Some(SynonymTable::load(p)?);
    }
    let bleu_mode = match args.bleu {
        Some(BleuArg::Corpus) => BleuMode::Corpus,
        Some(BleuArg::Sentence) => BleuMode::Sentence,
        None => config.bleu_mode,
    };
    let report = pipeline::evaluate_sentences(&sentences, &references, bleu_mode, &meteor)?;
    Ok(pipeline::eval_files(&report, &args.label))
}

fn retrieve(args: &RetrieveArgs, config: &PipelineConfig) -> CliResult<OutputSet> {
    let mut keywords = match &args.keywords {
        Some(p) => {
            let text = io::read_to_string(p)?;
            KeywordConfig::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => config.keywords.clone(),
    };
    if let Some(m) = args.match_mode {
        keywords.match_mode = match m {
            MatchArg::Exact => MatchMode::Exact,
            MatchArg::Stem => MatchMode::Stem,
        };
    }
    keywords.captions_per_image = args.top_k.unwrap_or(keywords.captions_per_image);
    keywords.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let file = CandidateFile::read(&args.candidates)?;
    let lines = pipeline::classify_stream(&file, &keywords)?;
    let mut out = OutputSet::new();
    out.add("retrieval.jsonl", io::retrieval_jsonl(&lines));

    if let Some(path) = &args.labels {
        let truth: HashMap<String, retrieval::SensitivityLabel> = io::read_labels(path)?;
        let missing: Vec<&str> = lines
            .iter()
            .filter(|l| !truth.contains_key(&l.image_id))
            .map(|l| l.image_id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Data(format!(
                "{}: no label for image(s): {}",
                path.display(),
                missing.join(", ")
            )));
        }
        let items: Vec<_> = lines.iter().map(|l| (truth[&l.image_id], &l.classification)).collect();
        let evaluation = retrieval::evaluate(&items).map_err(|e| CliError::Data(e.to_string()))?;
        out.add("confusion_3way.txt", evaluation.three_way.to_table());
        out.add("confusion_2way.txt", evaluation.two_way.to_table());
        out.add(
            "confusion.json",
            serde_json::to_string_pretty(&evaluation).expect("plain data serializes") + "\n",
        );
        for (name, points) in evaluation.curves() {
            out.add(format!("pr_{name}.csv"), io::pr_csv(points));
        }
    }
    Ok(out)
}
