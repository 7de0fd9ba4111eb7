//! Command-line interface. The `cagop` binary is a thin wrapper around [`main`].
//!
//! Corpus-level commands take a posteriors directory holding one
//! `<utt_id>.cagpg` (binary) or `<utt_id>.txt` (text) file per utterance, and
//! a transcript file of `utt_id<TAB>words` lines.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::align::{align, AlignConfig};
use crate::balance::{fit_balance_table, BalanceConfig};
use crate::detector::{
    calibrate_thresholds, detect, score_variant, CalibrationConfig, DetectorConfig,
    DurationContext, LabeledScore, ScoringInputs, ThresholdTable,
};
use crate::duration::{read_checkpoint, train, write_checkpoint, DurationNetConfig};
use crate::error::{Error, Result};
use crate::gop::entropy_profile;
use crate::io;
use crate::metrics::{mean_rater_correlation, ConfusionCounts, CorrelationKind};
use crate::model::{PhoneSet, Posteriorgram, ScoreReport, Variant};
use crate::pipeline::{duration_record, duration_sample, labeled_scores, DurationModel};
use crate::synth::{generate, SynthConfig, SynthCorpus, SynthInventory};

#[derive(Debug, Parser)]
#[command(name = "cagop", version, about = "Context-aware pronunciation scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Force-align reference transcripts to posteriorgrams.
    Align(AlignArgs),
    /// Score aligned utterances and write one JSON report per line.
    Score(ScoreArgs),
    /// Train the duration network on aligned durations.
    TrainDur(TrainDurArgs),
    /// Predict phone durations for transcripts.
    PredictDur(PredictDurArgs),
    /// Fit the duration tolerance table on aligned native speech.
    FitBalance(FitBalanceArgs),
    /// Calibrate phone-dependent detection thresholds.
    Calibrate(CalibrateArgs),
    /// Detection and sentence-correlation metrics against annotations.
    Evaluate(EvaluateArgs),
    /// Per-frame posterior entropy of one posteriorgram as CSV.
    EntropyDump(EntropyDumpArgs),
    /// Generate a seeded synthetic corpus.
    SynthCorpus(SynthCorpusArgs),
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Directory of per-utterance posteriorgrams.
    #[arg(long)]
    pub posteriors: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Transcript file, `utt_id<TAB>words`.
    #[arg(long)]
    pub text: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Minimum frames per phone segment.
    #[arg(long, default_value_t = 1)]
    pub min_frames: usize,
    /// Disable optional silences even if the phone set has a silence phone.
    #[arg(long)]
    pub no_silence: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub posteriors: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    /// Alignment file covering every utterance to score.
    #[arg(long)]
    pub alignments: PathBuf,
    #[arg(long, default_value = "cagop")]
    pub variant: Variant,
    #[arg(long, default_value_t = crate::detector::DEFAULT_BETA)]
    pub beta: f64,
    /// Duration-network checkpoint; required with `--balance`.
    #[arg(long, requires = "balance")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    pub balance: Option<PathBuf>,
    /// Apply these thresholds and fill in the detection flags.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Replace negative duration mismatches by zero before fusion.
    #[arg(long)]
    pub clamp_delta: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Full,
    Desk,
    Tiny,
}

#[derive(Debug, Args)]
pub struct TrainDurArgs {
    #[arg(long)]
    pub phones: PathBuf,
    /// Alignments whose non-silence segment lengths are the targets.
    #[arg(long)]
    pub alignments: PathBuf,
    /// Held-out alignments for model selection.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Training-log TSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictDurArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long)]
    pub text: PathBuf,
    /// Speaking speed in frames per phone, used for every utterance.
    #[arg(long, conflicts_with = "alignments")]
    pub speed: Option<f64>,
    /// Take each utterance's speed from its alignment.
    #[arg(long)]
    pub alignments: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitBalanceArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    #[arg(long)]
    pub alignments: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub bucket_width: f64,
    #[arg(long, default_value_t = 5)]
    pub min_count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Score reports of the development set.
    #[arg(long)]
    pub reports: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub min_count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub reports: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub phones: PathBuf,
    /// Thresholds to apply; without them the flags stored in the reports are used.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Also write the metrics as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Metric TSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EntropyDumpArgs {
    /// A single posteriorgram file.
    #[arg(long)]
    pub posteriors: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthCorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Native utterances (duration-model and balance-table training data).
    #[arg(long, default_value_t = 400)]
    pub native: usize,
    /// Learner utterances with annotations.
    #[arg(long, default_value_t = 400)]
    pub learner: usize,
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Align(a) => cmd_align(&a),
        Command::Score(a) => cmd_score(&a),
        Command::TrainDur(a) => cmd_train_dur(&a),
        Command::PredictDur(a) => cmd_predict_dur(&a),
        Command::FitBalance(a) => cmd_fit_balance(&a),
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::EntropyDump(a) => cmd_entropy_dump(&a),
        Command::SynthCorpus(a) => cmd_synth_corpus(&a),
    }
}

fn source(path: &Path) -> String {
    path.display().to_string()
}

fn load_phones(path: &Path) -> Result<PhoneSet> {
    io::parse_phone_set(&io::read_text(path)?, &source(path))
}

fn load_alignments(path: &Path, phones: &PhoneSet) -> Result<Vec<io::UtteranceAlignment>> {
    io::parse_alignments(&io::read_text(path)?, phones, &source(path))
}

fn load_model(path: &Path) -> Result<DurationModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (params, config) = read_checkpoint(&mut BufReader::new(file)).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", source(path))),
        other => other,
    })?;
    Ok(DurationModel::new(params, config))
}

fn load_utterance_pg(dir: &Path, utt: &str, phones: &PhoneSet) -> Result<Posteriorgram> {
    let binary = dir.join(format!("{utt}.cagpg"));
    let path = if binary.exists() {
        binary
    } else {
        dir.join(format!("{utt}.txt"))
    };
    let pg = io::read_posteriorgram(&path)?;
    if pg.num_phones() != phones.len() {
        return Err(Error::Format(format!(
            "{}: {} phone columns, phone set has {}",
            source(&path),
            pg.num_phones(),
            phones.len()
        )));
    }
    Ok(pg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn silence_of(phones: &PhoneSet) -> Option<usize> {
    phones.silence()
}

fn cmd_align(a: &AlignArgs) -> Result<()> {
    let phones = load_phones(&a.phones)?;
    let lexicon = io::parse_lexicon(&io::read_text(&a.lexicon)?, &phones, &source(&a.lexicon))?;
    let transcripts = io::parse_transcripts(&io::read_text(&a.text)?, &source(&a.text))?;
    let mut cfg = AlignConfig::for_phone_set(&phones);
    cfg.min_segment_frames = a.min_frames;
    if a.no_silence {
        cfg.allow_optional_silence = false;
    }
    let aligned: Vec<io::UtteranceAlignment> = transcripts
        .par_iter()
        .map(|(utt, text)| {
            let reference = io::text_to_phones(text, &lexicon)?;
            let pg = load_utterance_pg(&a.posteriors, utt, &phones)?;
            let alignment = align(&pg, &reference, &cfg)
                .map_err(|e| Error::Format(format!("utterance {utt}: {e}")))?;
            Ok(io::UtteranceAlignment {
                utterance: utt.clone(),
                alignment,
            })
        })
        .collect::<Result<_>>()?;
    io::write_text(&a.out, &io::render_alignments(&aligned, &phones)?)
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let phones = load_phones(&a.phones)?;
    let alignments = load_alignments(&a.alignments, &phones)?;
    let durations = match (&a.checkpoint, &a.balance) {
        (Some(ckpt), Some(bal)) => {
            let model = load_model(ckpt)?;
            let table = io::parse_balance_table(&io::read_text(bal)?, &phones, &source(bal))?;
            Some((model, table))
        }
        _ => None,
    };
    let thresholds = a
        .thresholds
        .as_deref()
        .map(|p| io::parse_thresholds(&io::read_text(p)?, &phones, &source(p)))
        .transpose()?;
    let cfg = DetectorConfig {
        beta: a.beta,
        variant: a.variant,
        clamp_delta_at_zero: a.clamp_delta,
    };
    cfg.validate()?;
    let silence = silence_of(&phones);
    let reports: Vec<ScoreReport> = alignments
        .par_iter()
        .map(|u| {
            let pg = load_utterance_pg(&a.posteriors, &u.utterance, &phones)?;
            u.alignment.validate(pg.num_frames(), &phones)?;
            let predicted = durations
                .as_ref()
                .map(|(model, _)| model.predict_for(&u.alignment, silence))
                .transpose()?;
            let context = durations
                .as_ref()
                .zip(predicted.as_deref())
                .map(|((_, table), predicted)| DurationContext {
                    predicted,
                    balance: table,
                });
            let mut report = score_variant(
                &ScoringInputs {
                    utterance: &u.utterance,
                    posteriorgram: &pg,
                    alignment: &u.alignment,
                    silence,
                    durations: context,
                },
                &cfg,
            )?;
            if let Some(t) = &thresholds {
                detect(&mut report, t);
            }
            Ok(report)
        })
        .collect::<Result<_>>()?;
    io::write_text(&a.out, &io::render_reports(&reports)?)
}

fn samples_from(path: &Path, phones: &PhoneSet) -> Result<Vec<crate::duration::DurationSample>> {
    load_alignments(path, phones)?
        .iter()
        .map(|u| duration_sample(&u.alignment, silence_of(phones)))
        .collect()
}

fn cmd_train_dur(a: &TrainDurArgs) -> Result<()> {
    let phones = load_phones(&a.phones)?;
    let train_set = samples_from(&a.alignments, &phones)?;
    let validation = match &a.validation {
        Some(p) => samples_from(p, &phones)?,
        None => Vec::new(),
    };
    let mut cfg = match a.preset {
        Preset::Full => DurationNetConfig::full(),
        Preset::Desk => DurationNetConfig::desk(),
        Preset::Tiny => DurationNetConfig::tiny(),
    }
    .with_seed(a.seed);
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    let (params, log) = train(&train_set, &validation, &cfg, phones.len())?;
    let mut w = create(&a.out)?;
    write_checkpoint(&mut w, &params, &cfg)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&a.out, e))?;
    if let Some(p) = &a.log {
        io::write_text(p, &io::render_training_log(&log.epochs))?;
    }
    Ok(())
}

fn cmd_predict_dur(a: &PredictDurArgs) -> Result<()> {
    let phones = load_phones(&a.phones)?;
    let model = load_model(&a.checkpoint)?;
    let lexicon = io::parse_lexicon(&io::read_text(&a.lexicon)?, &phones, &source(&a.lexicon))?;
    let transcripts = io::parse_transcripts(&io::read_text(&a.text)?, &source(&a.text))?;
    let alignments = a
        .alignments
        .as_deref()
        .map(|p| load_alignments(p, &phones))
        .transpose()?;
    let mut out = String::new();
    for (utt, text) in &transcripts {
        let reference = io::text_to_phones(text, &lexicon)?;
        let speed = match (&alignments, a.speed) {
            (Some(all), _) => all
                .iter()
                .find(|u| &u.utterance == utt)
                .and_then(|u| u.alignment.speed(silence_of(&phones)))
                .ok_or_else(|| Error::Format(format!("no alignment for utterance {utt}")))?,
            (None, Some(s)) => s,
            (None, None) => {
                return Err(Error::Config("predict-dur needs --speed or --alignments".into()))
            }
        };
        for (&p, d) in reference.iter().zip(model.predict(&reference, speed)?) {
            let label = phones.label(p).expect("lexicon phones are in the set");
            out.push_str(&format!("{utt}\t{label}\t{d}\n"));
        }
    }
    io::write_text(&a.out, &out)
}

fn cmd_fit_balance(a: &FitBalanceArgs) -> Result<()> {
    let phones = load_phones(&a.phones)?;
    let model = load_model(&a.checkpoint)?;
    let silence = silence_of(&phones);
    let records = load_alignments(&a.alignments, &phones)?
        .iter()
        .map(|u| duration_record(&u.alignment, model.predict_for(&u.alignment, silence)?, silence))
        .collect::<Result<Vec<_>>>()?;
    let config = BalanceConfig {
        bucket_width: a.bucket_width,
        min_count: a.min_count,
        ..BalanceConfig::default()
    };
    let table = fit_balance_table(&records, config)?;
    io::write_text(&a.out, &io::render_balance_table(&table, &phones)?)
}

fn load_reports(path: &Path) -> Result<Vec<ScoreReport>> {
    io::parse_reports(&io::read_text(path)?, &source(path))
}

fn labels_for<'a>(ann: &'a io::Annotations, report: &ScoreReport) -> Result<&'a [bool]> {
    ann.phone_labels
        .get(&report.utterance)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::Format(format!("no phone labels for utterance {}", report.utterance)))
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<()> {
    let phones = load_phones(&a.phones)?;
    let reports = load_reports(&a.reports)?;
    let ann = io::parse_annotations(&io::read_text(&a.annotations)?, &source(&a.annotations))?;
    let mut dev: Vec<LabeledScore> = Vec::new();
    for r in &reports {
        dev.extend(labeled_scores(r, labels_for(&ann, r)?)?);
    }
    let table = calibrate_thresholds(&dev, CalibrationConfig { min_count: a.min_count })?;
    io::write_text(&a.out, &io::render_thresholds(&table, &phones)?)
}

/// Metrics written by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub f1: f64,
    /// Mean per-rater correlations; absent without sentence scores.
    pub pcc: Option<f64>,
    pub scc: Option<f64>,
}

impl Evaluation {
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "tp\t{}\nfp\t{}\nfn\t{}\ntn\t{}\naccuracy\t{}\nf1\t{}\n",
            self.counts.tp, self.counts.fp, self.counts.fn_, self.counts.tn, self.accuracy, self.f1
        );
        if let (Some(p), Some(s)) = (self.pcc, self.scc) {
            out.push_str(&format!("pcc\t{p}\nscc\t{s}\n"));
        }
        out
    }
}

/// Detection metrics over flagged reports plus rater correlations of the
/// sentence scores, using utterances that every rater scored.
pub fn evaluate(reports: &[ScoreReport], ann: &io::Annotations) -> Result<Evaluation> {
    let mut counts = ConfusionCounts::default();
    for r in reports {
        let flags = r
            .per_phone
            .iter()
            .map(|p| {
                p.mispronounced.ok_or_else(|| {
                    Error::Format(format!("report {} lacks detection flags", r.utterance))
                })
            })
            .collect::<Result<Vec<bool>>>()?;
        counts += ConfusionCounts::from_pairs(&flags, labels_for(ann, r)?)?;
    }
    let raters = ann.raters();
    let mut machine = Vec::new();
    let mut human: Vec<Vec<f64>> = vec![Vec::new(); raters.len()];
    for r in reports {
        let scores: Option<Vec<f64>> = raters.iter().map(|id| ann.score(&r.utterance, id)).collect();
        if let Some(scores) = scores {
            machine.push(r.sentence_score);
            for (h, s) in human.iter_mut().zip(scores) {
                h.push(s);
            }
        }
    }
    let (pcc, scc) = if raters.is_empty() || machine.is_empty() {
        (None, None)
    } else {
        (
            Some(mean_rater_correlation(&machine, &human, CorrelationKind::Pcc)?),
            Some(mean_rater_correlation(&machine, &human, CorrelationKind::Scc)?),
        )
    };
    Ok(Evaluation {
        counts,
        accuracy: counts.accuracy()?,
        f1: counts.f1()?,
        pcc,
        scc,
    })
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let phones = load_phones(&a.phones)?;
    let mut reports = load_reports(&a.reports)?;
    let ann = io::parse_annotations(&io::read_text(&a.annotations)?, &source(&a.annotations))?;
    if let Some(p) = &a.thresholds {
        let table: ThresholdTable = io::parse_thresholds(&io::read_text(p)?, &phones, &source(p))?;
        for r in &mut reports {
            detect(r, &table);
        }
    }
    let eval = evaluate(&reports, &ann)?;
    match &a.out {
        Some(p) => io::write_text(p, &eval.to_tsv())?,
        None => print!("{}", eval.to_tsv()),
    }
    if let Some(p) = &a.json {
        let json = serde_json::to_string_pretty(&eval).map_err(|e| Error::Format(e.to_string()))?;
        io::write_text(p, &(json + "\n"))?;
    }
    Ok(())
}

fn cmd_entropy_dump(a: &EntropyDumpArgs) -> Result<()> {
    let pg = io::read_posteriorgram(&a.posteriors)?;
    io::write_text(&a.out, &io::render_entropy_csv(&entropy_profile(&pg)))
}

fn write_corpus_part(
    dir: &Path,
    corpus: &SynthCorpus,
    phones: &PhoneSet,
    annotated: bool,
) -> Result<()> {
    let pg_dir = dir.join("posteriors");
    fs::create_dir_all(&pg_dir).map_err(|e| Error::io(&pg_dir, e))?;
    let mut transcripts = Vec::new();
    let mut alignments = Vec::new();
    let mut ann = io::Annotations::default();
    for (u, utt) in corpus.utterances.iter().enumerate() {
        transcripts.push((utt.id.clone(), utt.words.join(" ")));
        alignments.push(io::UtteranceAlignment {
            utterance: utt.id.clone(),
            alignment: utt.alignment.clone(),
        });
        io::write_posteriorgram_file(&pg_dir.join(format!("{}.cagpg", utt.id)), &utt.posteriorgram)?;
        if annotated {
            ann.phone_labels.insert(utt.id.clone(), utt.labels.clone());
            let scores = corpus
                .rater_scores
                .iter()
                .enumerate()
                .map(|(r, s)| (format!("r{}", r + 1), s[u]))
                .collect();
            ann.sentence_scores.insert(utt.id.clone(), scores);
        }
    }
    io::write_text(&dir.join("text.txt"), &io::render_transcripts(&transcripts))?;
    io::write_text(&dir.join("alignments.txt"), &io::render_alignments(&alignments, phones)?)?;
    if annotated {
        io::write_text(&dir.join("annotations.txt"), &io::render_annotations(&ann))?;
    }
    Ok(())
}

/// Writes `phones.txt`, `lexicon.txt`, a native part and an annotated `capt`
/// part. `alignments.txt` holds the generating segmentation.
pub fn write_synth_corpus(dir: &Path, native: usize, learner: usize, seed: u64) -> Result<()> {
    let inv = SynthInventory::new();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_text(&dir.join("phones.txt"), &io::render_phone_set(&inv.phone_set))?;
    let lexicon = io::Lexicon {
        entries: inv.lexicon.clone(),
    };
    io::write_text(&dir.join("lexicon.txt"), &io::render_lexicon(&lexicon, &inv.phone_set)?)?;
    let native_corpus = generate(&inv, &SynthConfig::native(native, seed));
    write_corpus_part(&dir.join("native"), &native_corpus, &inv.phone_set, false)?;
    let learner_seed = seed.wrapping_add(1);
    let learner_corpus = generate(&inv, &SynthConfig::learner(learner, learner_seed));
    write_corpus_part(&dir.join("capt"), &learner_corpus, &inv.phone_set, true)
}

fn cmd_synth_corpus(a: &SynthCorpusArgs) -> Result<()> {
    write_synth_corpus(&a.out, a.native, a.learner, a.seed)
}
