//! The `affect` command-line tool.
//!
//! Every job reads a `key = value` configuration file (`--config`), writes
//! into an output directory (`--out` or the `out` key) and echoes its
//! resolved configuration there as `resolved.conf`. Exit codes: 0 success,
//! 1 usage error, 2 input or configuration error, 3 verification failure.

mod data;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use regex::Regex;

use crate::audio::read_wav;
use crate::checkpoint::{AnyModel, ModelKind};
use crate::config::{parse_config, JobConfig, KeySpec};
use crate::corpus::{
    align_speakers, build_episode, corpus_summary, detect_sound_spans, manifest, parse_laughter_csv, parse_script,
    parse_srt, split_corpus, write_episode, EpisodeCorpus, SplitName,
};
use crate::emotion::{train_emotion, EmotionCategory, EmotionCnnConfig};
use crate::error::Error;
use crate::humor::{train_humor, ContextMode, HumorNetConfig};
use crate::math::Activation;
use crate::nn::Classifier;
use crate::persona::{
    aggregate_personality, challenge_rate, classify_challenge, extract_cues, score_response, Lexicons, SpeechCues,
    WeightTable,
};
use crate::sentiment::{train_sentiment, SentimentCnnConfig};
use crate::training::{stratified_split, DatasetSplit, EpochRecord, Example, Metrics, TrainConfig};
use crate::verify::{gradcheck_report, gradcheck_suite, Fault};

use data::{
    corpus_windows, embedding_table, load_corpus, load_emotion_data, load_sentiment_data, LocatedWindow,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Input(#[from] Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "affect", version, about = "Emotion, sentiment and punchline models for conversational speech")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct JobArgs {
    /// Job configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the `out` key.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed; overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a labelled punchline corpus from subtitles, audio and laughter.
    BuildCorpus(JobArgs),
    /// Train a model and write a checkpoint with its epoch log.
    Train(JobArgs),
    /// Evaluate a checkpoint and print accuracy, precision, recall and F1.
    Eval(JobArgs),
    /// Write per-item probabilities for a checkpoint.
    Predict(JobArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(JobArgs),
    /// Classify user challenges and score personality from responses.
    Persona(JobArgs),
    /// List the configuration keys of a command.
    Keys {
        /// One of build-corpus, train, eval, predict, gradcheck, persona.
        command: String,
    },
}

const BUILD_KEYS: &[KeySpec] = &[
    KeySpec::optional("show", "show name used in episode ids"),
    KeySpec::path("input_dir", "directory of <stem>.srt files with <stem>.wav, <stem>.laughs.csv or <stem>.laughtrack.wav"),
    KeySpec::path("script_dir", "optional directory of <stem>.script files (NAME: line) for speaker alignment"),
    KeySpec::value("energy_threshold", "0.001", "frame energy above which the laugh track counts as sound"),
    KeySpec::value("min_laugh_s", "0.2", "shortest detected laugh span kept, in seconds"),
    KeySpec::value("seed", "0", "split seed"),
    KeySpec::path("out", "output directory"),
];

const TRAIN_KEYS: &[KeySpec] = &[
    KeySpec::optional("kind", "emotion | sentiment | humor"),
    KeySpec::path("data", "emotion: wav_path,category lines; sentiment: id<TAB>label<TAB>text[<TAB>wav] lines"),
    KeySpec::path("corpus", "humor: manifest.tsv written by build-corpus"),
    KeySpec::path("embeddings", "word vectors (token v1 .. vd per line); random vectors when absent"),
    KeySpec::value("embedding_dim", "50", "dimension of random word vectors"),
    KeySpec::optional("target", "emotion category to detect"),
    KeySpec::value("learning_rate", "0.01", "SGD learning rate"),
    KeySpec::value("momentum", "0.9", "SGD momentum"),
    KeySpec::value("max_epochs", "30", "epoch limit"),
    KeySpec::value("patience", "5", "early-stopping patience in epochs"),
    KeySpec::value("batch_size", "16", "mini-batch size"),
    KeySpec::value("seed", "0", "seed for initialization, shuffling and splits"),
    KeySpec::value("window", "200", "emotion: samples per frame"),
    KeySpec::value("step", "50", "emotion: samples between frames"),
    KeySpec::value("hidden", "64", "emotion: convolution maps"),
    KeySpec::value("activation", "relu", "emotion and sentiment convolution activation"),
    KeySpec::value("heights", "3,4,5", "sentiment: filter heights"),
    KeySpec::value("maps", "100", "sentiment: maps per filter height"),
    KeySpec::value("use_audio", "false", "sentiment and humor: add the audio channel"),
    KeySpec::value("k", "3", "humor: utterances per window"),
    KeySpec::value("mode", "lstm", "humor: lstm | shifted"),
    KeySpec::value("lang_hidden", "100", "humor: language CNN size"),
    KeySpec::value("audio_hidden", "50", "humor: audio CNN size"),
    KeySpec::value("lstm_hidden", "100", "humor: LSTM size"),
    KeySpec::value("dropout", "0.7", "humor: dropout rate"),
    KeySpec::value("use_speaker", "true", "humor: speaker one-hot feature"),
    KeySpec::path("out", "output directory"),
];

const EVAL_KEYS: &[KeySpec] = &[
    KeySpec::path("checkpoint", "model checkpoint"),
    KeySpec::optional("kind", "expected model kind; a checkpoint of another kind is rejected"),
    KeySpec::path("data", "emotion or sentiment data file"),
    KeySpec::path("corpus", "humor manifest"),
    KeySpec::value("split", "test", "humor: train | dev | test"),
    KeySpec::value("seed", "0", "unused; accepted for uniformity"),
    KeySpec::path("out", "output directory"),
];

const GRADCHECK_KEYS: &[KeySpec] = &[
    KeySpec::value("eps", "1e-5", "finite-difference step"),
    KeySpec::value("threshold", "1e-4", "largest accepted relative error"),
    KeySpec::value("inject_fault", "false", "corrupt the pipeline gradients (negative control)"),
    KeySpec::value("seed", "0", "unused; accepted for uniformity"),
    KeySpec::path("out", "optional output directory"),
];

const PERSONA_KEYS: &[KeySpec] = &[
    KeySpec::path("responses", "one response per line, optionally text<TAB>wav_path"),
    KeySpec::path("lexicons", "directory of <family>.txt word lists"),
    KeySpec::path("weights", "optional weight table (dimension.cue = weight lines)"),
    KeySpec::value("seed", "0", "unused; accepted for uniformity"),
    KeySpec::path("out", "output directory"),
];

fn schema(command: &str) -> Option<&'static [KeySpec]> {
    match command {
        "build-corpus" => Some(BUILD_KEYS),
        "train" => Some(TRAIN_KEYS),
        "eval" | "predict" => Some(EVAL_KEYS),
        "gradcheck" => Some(GRADCHECK_KEYS),
        "persona" => Some(PERSONA_KEYS),
        _ => None,
    }
}

/// Parses arguments, runs the job and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    let (name, args) = match cmd {
        Command::Keys { command } => {
            let keys = schema(&command).ok_or_else(|| CliError::Usage(format!("unknown command {command:?}")))?;
            for k in keys {
                println!("{:<18} {:<10} {}", k.key, k.default.unwrap_or("-"), k.doc);
            }
            return Ok(());
        }
        Command::BuildCorpus(a) => ("build-corpus", a),
        Command::Train(a) => ("train", a),
        Command::Eval(a) => ("eval", a),
        Command::Predict(a) => ("predict", a),
        Command::Gradcheck(a) => ("gradcheck", a),
        Command::Persona(a) => ("persona", a),
    };
    let cfg = load_job(name, &args)?;
    let out = cfg.path("out");
    if name != "gradcheck" && out.is_none() {
        return Err(CliError::Usage(format!("{name} needs an output directory (--out or the out key)")));
    }
    if let Some(dir) = &out {
        fs::create_dir_all(dir).map_err(|e| Error::path(dir, e))?;
        write_file(&dir.join("resolved.conf"), &cfg.echo())?;
    }
    match name {
        "build-corpus" => cmd_build_corpus(&cfg, &out.expect("checked")),
        "train" => cmd_train(&cfg, &out.expect("checked")),
        "eval" => cmd_eval(&cfg, &out.expect("checked")),
        "predict" => cmd_predict(&cfg, &out.expect("checked")),
        "gradcheck" => cmd_gradcheck(&cfg, out.as_deref()),
        "persona" => cmd_persona(&cfg, &out.expect("checked")),
        _ => unreachable!("command names come from the enum"),
    }
}

fn load_job(name: &str, args: &JobArgs) -> CliResult<JobConfig> {
    let keys = schema(name).expect("every job command has a schema");
    let (raw, base) = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::path(p, e))?;
            let raw = parse_config(&text).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", p.display()) },
                other => other,
            })?;
            (raw, p.parent().map(Path::to_path_buf))
        }
        None if name == "gradcheck" => (Default::default(), None),
        None => return Err(CliError::Usage(format!("{name} requires --config"))),
    };
    let mut cfg = JobConfig::resolve(name, raw, keys, base.as_deref())?;
    if let Some(o) = &args.out {
        cfg.set("out", o.to_string_lossy());
    }
    if let Some(s) = args.seed {
        cfg.set("seed", s.to_string());
    }
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Input(Error::path(path, e)))
}

fn metrics_table(title: &str, m: &Metrics) -> String {
    format!("{:<24} {:>6} {:>6} {:>6} {:>6}\n{title:<24} {m}\n", "", "A", "P", "R", "F1")
}

fn episode_re() -> Regex {
    Regex::new(r"(?i)s(\d+)e(\d+)").expect("valid pattern")
}

fn cmd_build_corpus(cfg: &JobConfig, out: &Path) -> CliResult<()> {
    let show = cfg.require("show")?;
    let input = cfg.require_path("input_dir")?;
    let entries = fs::read_dir(&input).map_err(|e| Error::path(&input, e))?;
    let mut srts: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "srt"))
        .collect();
    srts.sort();
    if srts.is_empty() {
        return Err(Error::config(format!("no .srt files in {}", input.display())).into());
    }
    let threshold: f64 = cfg.parse("energy_threshold")?;
    let min_laugh: f64 = cfg.parse("min_laugh_s")?;
    let script_dir = cfg.path("script_dir").unwrap_or_else(|| input.clone());
    let re = episode_re();
    let mut episodes: Vec<EpisodeCorpus> = Vec::new();
    for srt in &srts {
        let stem = srt.file_stem().expect("has extension").to_string_lossy().into_owned();
        let caps = re
            .captures(&stem)
            .ok_or_else(|| Error::config(format!("{}: file name lacks an sNNeNN episode tag", srt.display())))?;
        let (season, episode): (u32, u32) = (caps[1].parse().unwrap_or(0), caps[2].parse().unwrap_or(0));
        let bytes = fs::read(srt).map_err(|e| Error::path(srt, e))?;
        let mut captions = parse_srt(&bytes).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", srt.display()) },
            other => other,
        })?;
        let script = script_dir.join(format!("{stem}.script"));
        if captions.iter().any(|c| c.speaker.is_none()) && script.is_file() {
            let text = fs::read_to_string(&script).map_err(|e| Error::path(&script, e))?;
            align_speakers(&mut captions, &parse_script(&text));
        }
        let csv = input.join(format!("{stem}.laughs.csv"));
        let track = input.join(format!("{stem}.laughtrack.wav"));
        let laughs = if csv.is_file() {
            let text = fs::read_to_string(&csv).map_err(|e| Error::path(&csv, e))?;
            parse_laughter_csv(&text).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", csv.display()) },
                other => other,
            })?
        } else if track.is_file() {
            detect_sound_spans(&read_wav(&track)?, threshold, min_laugh)
        } else {
            return Err(Error::config(format!("no laughter source for {stem} ({stem}.laughs.csv or {stem}.laughtrack.wav)")).into());
        };
        let wav = input.join(format!("{stem}.wav"));
        let audio = if wav.is_file() { Some(read_wav(&wav)?) } else { None };
        episodes.push(build_episode(show, season, episode, &captions, &laughs, audio.as_ref())?);
    }
    episodes.sort_by_key(|e| (e.season, e.episode));
    let split = split_corpus(&episodes, cfg.parse("seed")?);
    let corpus_dir = out.join("corpus");
    let records = episodes
        .iter()
        .map(|e| write_episode(&corpus_dir, e))
        .collect::<crate::error::Result<Vec<_>>>()?;
    write_file(&out.join("manifest.tsv"), &manifest(&records, &split, out))?;
    let mut summary = corpus_summary(&episodes, &split) + "\n";
    let mut seasons: Vec<(u32, usize)> = Vec::new();
    for e in &episodes {
        match seasons.iter_mut().find(|(s, _)| *s == e.season) {
            Some((_, n)) => *n += 1,
            None => seasons.push((e.season, 1)),
        }
    }
    for (s, n) in seasons.into_iter().filter(|(_, n)| *n < 10) {
        let w = format!("warning: season {s} has {n} episodes; the 80/10/10 split is approximate\n");
        eprint!("{w}");
        summary.push_str(&w);
    }
    print!("{summary}");
    write_file(&out.join("summary.txt"), &summary)
}

fn train_config(cfg: &JobConfig) -> CliResult<TrainConfig> {
    let t = TrainConfig {
        learning_rate: cfg.parse("learning_rate")?,
        momentum: cfg.parse("momentum")?,
        max_epochs: cfg.parse("max_epochs")?,
        patience: cfg.parse("patience")?,
        seed: cfg.parse("seed")?,
        batch_size: cfg.parse("batch_size")?,
    };
    t.validate()?;
    Ok(t)
}

fn humor_config(cfg: &JobConfig) -> CliResult<HumorNetConfig> {
    Ok(HumorNetConfig {
        lang_hidden: cfg.parse("lang_hidden")?,
        lang_window: 5,
        audio_hidden: cfg.parse("audio_hidden")?,
        audio_window: 3,
        lstm_hidden: cfg.parse("lstm_hidden")?,
        dropout: cfg.parse("dropout")?,
        k: cfg.parse("k")?,
        mode: ContextMode::parse(cfg.require("mode")?)?,
        use_audio: cfg.flag("use_audio")?,
        use_speaker: cfg.flag("use_speaker")?,
    })
}

fn write_training(out: &Path, model: &AnyModel, log: &[EpochRecord], best: usize, test: Option<&Metrics>) -> CliResult<()> {
    model.save(out.join("model.ckpt"))?;
    let mut csv = format!("{}\n", EpochRecord::HEADER);
    for r in log {
        writeln!(csv, "{r}").expect("writing to a String");
    }
    write_file(&out.join("epochs.csv"), &csv)?;
    let mut report = format!("model = {}\nepochs = {}\nbest_epoch = {best}\n", model.kind(), log.len());
    if let Some(m) = test {
        report.push_str(&metrics_table(&format!("{} (test)", model.kind()), m));
    }
    print!("{report}");
    write_file(&out.join("report.txt"), &report)
}

fn cmd_train(cfg: &JobConfig, out: &Path) -> CliResult<()> {
    let tc = train_config(cfg)?;
    match ModelKind::parse(cfg.require("kind")?)? {
        ModelKind::Emotion => {
            let items = load_emotion_data(&cfg.require_path("data")?)?;
            let target: EmotionCategory = cfg.require("target")?.parse()?;
            let ecfg = EmotionCnnConfig {
                window: cfg.parse("window")?,
                step: cfg.parse("step")?,
                hidden: cfg.parse("hidden")?,
                activation: Activation::parse(cfg.require("activation")?)?,
            };
            let corpus: Vec<_> = items.into_iter().map(|i| (i.audio, i.category)).collect();
            let run = train_emotion(target, &corpus, &ecfg, &tc)?;
            write_training(out, &AnyModel::Emotion(run.model), &run.outcome_log, run.best_epoch, Some(&run.test))
        }
        ModelKind::Sentiment => {
            let items = load_sentiment_data(&cfg.require_path("data")?)?;
            let use_audio = cfg.flag("use_audio")?;
            let scfg = SentimentCnnConfig {
                heights: cfg.list("heights")?,
                maps: cfg.parse("maps")?,
                activation: Activation::parse(cfg.require("activation")?)?,
                use_audio,
                ..SentimentCnnConfig::default()
            };
            let mut examples = Vec::with_capacity(items.len());
            for it in &items {
                let label = it
                    .label
                    .ok_or_else(|| Error::config(format!("training item {} has no label", it.id)))?;
                examples.push(Example::new(it.input(use_audio)?, label));
            }
            let vocab: BTreeSet<String> = items.iter().flat_map(|i| i.tokens.iter().cloned()).collect();
            let table = embedding_table(cfg.path("embeddings").as_deref(), &vocab, cfg.parse("embedding_dim")?, tc.seed)?;
            let split = stratified_split(examples, tc.seed);
            let run = train_sentiment(&split, &table, &scfg, &tc)?;
            write_training(out, &AnyModel::Sentiment(run.model), &run.log, run.best_epoch, Some(&run.test))
        }
        ModelKind::Humor => {
            let hcfg = humor_config(cfg)?;
            let eps = load_corpus(&cfg.require_path("corpus")?)?;
            let windows = |s| -> CliResult<Vec<Example<_>>> {
                Ok(corpus_windows(&eps, s, hcfg.k)?.into_iter().map(|w| w.example).collect())
            };
            let split = DatasetSplit {
                train: windows(SplitName::Train)?,
                dev: windows(SplitName::Dev)?,
                test: windows(SplitName::Test)?,
            };
            let train_eps = eps.iter().filter(|(s, _)| *s == SplitName::Train);
            let roster: BTreeSet<String> =
                train_eps.clone().flat_map(|(_, e)| e.utterances.iter().map(|u| u.speaker.clone())).collect();
            let vocab: BTreeSet<String> =
                eps.iter().flat_map(|(_, e)| e.utterances.iter().flat_map(|u| u.tokens.iter().cloned())).collect();
            let table = embedding_table(cfg.path("embeddings").as_deref(), &vocab, cfg.parse("embedding_dim")?, tc.seed)?;
            let roster: Vec<String> = roster.into_iter().collect();
            let run = train_humor(&split, &table, &roster, &hcfg, &tc)?;
            write_training(out, &AnyModel::Humor(run.model), &run.log, run.best_epoch, run.test.as_ref())
        }
    }
}

/// Items with their probabilities and gold labels, in input order.
struct Scored {
    ids: Vec<String>,
    probs: Vec<f64>,
    gold: Vec<Option<usize>>,
}

fn score(cfg: &JobConfig) -> CliResult<(AnyModel, Scored)> {
    let path = cfg.require_path("checkpoint")?;
    let model = AnyModel::load(&path)?;
    if let Some(k) = cfg.get("kind") {
        let want = ModelKind::parse(k)?;
        if want != model.kind() {
            return Err(Error::config(format!("{} holds a {} model, not {want}", path.display(), model.kind())).into());
        }
    }
    let mut s = Scored { ids: Vec::new(), probs: Vec::new(), gold: Vec::new() };
    match &model {
        AnyModel::Emotion(m) => {
            let items = load_emotion_data(&cfg.require_path("data")?)?;
            for it in items {
                s.probs.push(m.predict(&it.audio)?);
                s.gold.push(m.category.map(|c| usize::from(c == it.category)));
                s.ids.push(it.path);
            }
        }
        AnyModel::Sentiment(m) => {
            for it in load_sentiment_data(&cfg.require_path("data")?)? {
                s.probs.push(m.positive_probability(&it.input(m.cfg.use_audio)?)?);
                s.gold.push(it.label);
                s.ids.push(it.id);
            }
        }
        AnyModel::Humor(m) => {
            let split = SplitName::parse(cfg.require("split")?)
                .ok_or_else(|| Error::config("split must be train, dev or test"))?;
            let eps = load_corpus(&cfg.require_path("corpus")?)?;
            for LocatedWindow { episode, utterance, example } in corpus_windows(&eps, split, m.cfg.k)? {
                s.probs.push(m.positive_probability(&example.input)?);
                s.gold.push(Some(example.label));
                s.ids.push(format!("{episode},{utterance}"));
            }
        }
    }
    Ok((model, s))
}

fn cmd_eval(cfg: &JobConfig, out: &Path) -> CliResult<()> {
    let (model, s) = score(cfg)?;
    let mut c = crate::training::Confusion::default();
    for (p, g) in s.probs.iter().zip(&s.gold) {
        let g = g.ok_or_else(|| Error::config("evaluation data must be labelled"))?;
        c.record(*p > 0.5, g == 1);
    }
    if c.total() == 0 {
        return Err(Error::config("no items to evaluate").into());
    }
    let report = format!("items = {}\n{}", c.total(), metrics_table(model.kind().name(), &c.metrics()));
    print!("{report}");
    write_file(&out.join("eval.txt"), &report)
}

fn cmd_predict(cfg: &JobConfig, out: &Path) -> CliResult<()> {
    let (model, s) = score(cfg)?;
    let mut csv = String::from(match model.kind() {
        ModelKind::Humor => "episode,utterance_index,probability,label\n",
        ModelKind::Sentiment => "utterance_id,probability_positive\n",
        ModelKind::Emotion => "item,probability_positive\n",
    });
    for (id, p) in s.ids.iter().zip(&s.probs) {
        match model.kind() {
            ModelKind::Humor => writeln!(csv, "{id},{p:.6},{}", u8::from(*p > 0.5)),
            _ => writeln!(csv, "{id},{p:.6}"),
        }
        .expect("writing to a String");
    }
    write_file(&out.join("predictions.csv"), &csv)?;
    println!("wrote {} predictions to {}", s.probs.len(), out.join("predictions.csv").display());
    Ok(())
}

fn cmd_gradcheck(cfg: &JobConfig, out: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let fault = if cfg.flag("inject_fault")? { Fault::Pipelines } else { Fault::None };
    let threshold: f64 = cfg.parse("threshold")?;
    let rows = gradcheck_suite(cfg.parse("eps")?, fault)?;
    let (report, failed) = gradcheck_report(&rows, threshold, started);
    print!("{report}");
    if let Some(dir) = out {
        write_file(&dir.join("gradcheck.txt"), &report)?;
    }
    match failed {
        Some(r) => Err(CliError::Verification(format!(
            "{}: relative error {:.3e} at parameter {} (index {})",
            r.name, r.report.max_relative_error, r.report.worst_param, r.report.worst_index
        ))),
        None => Ok(()),
    }
}

fn cmd_persona(cfg: &JobConfig, out: &Path) -> CliResult<()> {
    let lex = Lexicons::load(cfg.require_path("lexicons")?)?;
    let weights = match cfg.path("weights") {
        Some(p) => WeightTable::parse(&fs::read_to_string(&p).map_err(|e| Error::path(&p, e))?)?,
        None => WeightTable::default_table(),
    };
    let path = cfg.require_path("responses")?;
    let text = fs::read_to_string(&path).map_err(|e| Error::path(&path, e))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut report = String::from("index\tchallenge\te_i\tn_s\tt_f\tj_p\n");
    let (mut labels, mut scores) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (resp, wav) = match line.split_once('\t') {
            Some((t, w)) => (t, Some(w.trim())),
            None => (line, None),
        };
        let features;
        let speech = match wav {
            Some(w) => {
                let seg = read_wav(dir.join(w))?;
                features = crate::audio::utterance_features(&seg)?;
                Some(SpeechCues { features: &features, duration_s: seg.duration() })
            }
            None => None,
        };
        let label = classify_challenge(resp);
        let s = score_response(&extract_cues(resp, speech, &lex), &weights);
        writeln!(report, "{}\t{label}\t{:+.4}\t{:+.4}\t{:+.4}\t{:+.4}", i + 1, s[0], s[1], s[2], s[3])
            .expect("writing to a String");
        labels.push(label);
        scores.push(s);
    }
    let mbti = aggregate_personality(&scores)?;
    writeln!(report, "challenge_rate = {:.4}", challenge_rate(&labels)).expect("writing to a String");
    report.push_str(&mbti.to_string());
    print!("{report}");
    write_file(&out.join("persona.txt"), &report)
}
