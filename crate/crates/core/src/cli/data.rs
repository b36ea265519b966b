//! Input files of the train, eval and predict commands.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::audio::{read_wav, AudioSegment};
use crate::corpus::{read_manifest, EpisodeCorpus, SplitName};
use crate::emotion::EmotionCategory;
use crate::error::{Error, Result};
use crate::humor::HumorInput;
use crate::math::Rng;
use crate::sentiment::SentimentInput;
use crate::text::{tokenize, EmbeddingTable, OovPolicy};
use crate::training::Example;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::path(path, e))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn located(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse { line, msg: format!("{}: {msg}", path.display()) }
}

/// An emotion data file: `wav_path,category` lines (header optional),
/// paths relative to the file.
#[derive(Debug, Clone)]
pub struct EmotionItem {
    pub path: String,
    pub audio: AudioSegment,
    pub category: EmotionCategory,
}

pub fn load_emotion_data(path: &Path) -> Result<Vec<EmotionItem>> {
    let text = read_text(path)?;
    let dir = base_dir(path);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line == "path,category") {
            continue;
        }
        let (p, c) = line.split_once(',').ok_or_else(|| located(path, i + 1, "expected wav_path,category"))?;
        let category = c.trim().parse::<EmotionCategory>().map_err(|e| located(path, i + 1, e))?;
        out.push(EmotionItem { path: p.trim().to_string(), audio: read_wav(dir.join(p.trim()))?, category });
    }
    if out.is_empty() {
        return Err(Error::config(format!("{} lists no audio", path.display())));
    }
    Ok(out)
}

/// A sentiment data file: `id<TAB>label<TAB>text[<TAB>wav_path]` lines,
/// where the label is `0`, `1` or `-` (unknown).
#[derive(Debug, Clone)]
pub struct SentimentItem {
    pub id: String,
    pub label: Option<usize>,
    pub tokens: Vec<String>,
    pub audio: Option<AudioSegment>,
}

impl SentimentItem {
    pub fn input(&self, use_audio: bool) -> Result<SentimentInput> {
        if !use_audio {
            return Ok(SentimentInput::text(self.tokens.clone()));
        }
        let seg = self
            .audio
            .as_ref()
            .ok_or_else(|| Error::config(format!("item {} has no audio but the model uses audio", self.id)))?;
        SentimentInput::with_audio(self.tokens.clone(), seg)
    }
}

pub fn load_sentiment_data(path: &Path) -> Result<Vec<SentimentItem>> {
    let text = read_text(path)?;
    let dir = base_dir(path);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&f.len()) {
            return Err(located(path, i + 1, "expected id<TAB>label<TAB>text[<TAB>wav_path]"));
        }
        let label = match f[1].trim() {
            "0" => Some(0),
            "1" => Some(1),
            "-" => None,
            o => return Err(located(path, i + 1, format!("label must be 0, 1 or -, found {o:?}"))),
        };
        let audio = match f.get(3).map(|s| s.trim()).filter(|s| !s.is_empty()) {
            Some(p) => Some(read_wav(dir.join(p))?),
            None => None,
        };
        out.push(SentimentItem { id: f[0].trim().to_string(), label, tokens: tokenize(f[2]), audio });
    }
    if out.is_empty() {
        return Err(Error::config(format!("{} lists no sentences", path.display())));
    }
    Ok(out)
}

/// Word vectors from `embeddings`, or seeded random vectors of
/// `random_dim` dimensions over `vocab` when no file is given.
pub fn embedding_table(
    embeddings: Option<&Path>,
    vocab: &BTreeSet<String>,
    random_dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    match embeddings {
        Some(p) => EmbeddingTable::load(p, OovPolicy::HashSeeded),
        None => {
            let words: Vec<&str> = vocab.iter().map(String::as_str).collect();
            EmbeddingTable::random(&words, random_dim, 0.5, &mut Rng::new(seed ^ 0xe3b))
        }
    }
}

pub fn load_corpus(manifest: &Path) -> Result<Vec<(SplitName, EpisodeCorpus)>> {
    let eps = read_manifest(manifest)?;
    if eps.is_empty() {
        return Err(Error::config(format!("{} lists no episodes", manifest.display())));
    }
    Ok(eps)
}

/// One classification window together with where it came from.
pub struct LocatedWindow {
    pub episode: String,
    pub utterance: usize,
    pub example: Example<HumorInput>,
}

pub fn corpus_windows(eps: &[(SplitName, EpisodeCorpus)], split: SplitName, k: usize) -> Result<Vec<LocatedWindow>> {
    let mut out = Vec::new();
    for (_, ep) in eps.iter().filter(|(s, _)| *s == split) {
        let ids = ep.utterances.iter().filter(|u| !u.tokens.is_empty()).map(|u| u.id);
        for (id, example) in ids.zip(ep.windows(k)?) {
            out.push(LocatedWindow { episode: ep.id(), utterance: id, example });
        }
    }
    Ok(out)
}
