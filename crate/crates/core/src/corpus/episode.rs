use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::laughter::{label_punchlines, trim_laughter, LaughSpan};
use super::srt::TimedCaption;
use crate::audio::{read_wav, write_wav, AudioSegment};
use crate::error::{Error, Result};
use crate::humor::{dialog_windows, HumorInput, Utterance};
use crate::math::Rng;
use crate::text::tokenize;
use crate::training::{split_counts, DatasetSplit, Example};

/// Speaker name used for captions without one.
pub const UNKNOWN_SPEAKER: &str = "UNKNOWN";

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeCorpus {
    pub show: String,
    pub season: u32,
    pub episode: u32,
    pub utterances: Vec<Utterance>,
}

impl EpisodeCorpus {
    pub fn id(&self) -> String {
        format!("{}_s{:02}e{:02}", self.show, self.season, self.episode)
    }

    pub fn punchline_count(&self) -> usize {
        self.utterances.iter().filter(|u| u.is_punchline).count()
    }

    pub fn windows(&self, k: usize) -> Result<Vec<Example<HumorInput>>> {
        dialog_windows(&self.utterances, k)
    }
}

/// Runs the labelling pipeline for one episode: captions become utterances
/// (one per caption), the episode audio is cut to each caption's time span
/// with laughter removed, and each utterance is labelled by the laughter
/// that follows it.
pub fn build_episode(
    show: &str,
    season: u32,
    episode: u32,
    captions: &[TimedCaption],
    laughs: &[LaughSpan],
    audio: Option<&AudioSegment>,
) -> Result<EpisodeCorpus> {
    if let Some(a) = audio {
        if let Some(c) = captions.iter().find(|c| c.start_s >= a.duration()) {
            return Err(Error::config(format!(
                "caption {} starts at {} s, after the end of the {} s episode audio",
                c.index,
                c.start_s,
                a.duration()
            )));
        }
    }
    let mut utterances: Vec<Utterance> = captions
        .iter()
        .map(|c| {
            let mut u = Utterance {
                id: c.index,
                text: c.text.clone(),
                tokens: tokenize(&c.text),
                speaker: c.speaker.clone().unwrap_or_else(|| UNKNOWN_SPEAKER.to_string()),
                start_s: c.start_s,
                end_s: c.end_s,
                audio: audio.map(|a| a.slice_seconds(c.start_s, c.end_s)),
                is_punchline: false,
            };
            u = trim_laughter(&u, laughs);
            if u.audio.as_ref().is_some_and(AudioSegment::is_empty) {
                u.audio = None;
            }
            u
        })
        .collect();
    label_punchlines(&mut utterances, laughs);
    Ok(EpisodeCorpus { show: show.to_string(), season, episode, utterances })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitName::Train),
            "dev" => Some(SplitName::Dev),
            "test" => Some(SplitName::Test),
            _ => None,
        }
    }
}

/// Episode indices per split, each list sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EpisodeSplit {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

impl EpisodeSplit {
    pub fn of(&self, idx: usize) -> Option<SplitName> {
        if self.train.contains(&idx) {
            Some(SplitName::Train)
        } else if self.dev.contains(&idx) {
            Some(SplitName::Dev)
        } else if self.test.contains(&idx) {
            Some(SplitName::Test)
        } else {
            None
        }
    }
}

/// Seeded 80/10/10 episode split stratified by (show, season). Seasons
/// with fewer than ten episodes get a best-effort split and a warning.
pub fn split_corpus(episodes: &[EpisodeCorpus], seed: u64) -> EpisodeSplit {
    let mut groups: BTreeMap<(&str, u32), Vec<usize>> = BTreeMap::new();
    for (i, e) in episodes.iter().enumerate() {
        groups.entry((e.show.as_str(), e.season)).or_default().push(i);
    }
    let mut rng = Rng::new(seed);
    let mut split = EpisodeSplit::default();
    for ((show, season), mut idx) in groups {
        idx.sort_by_key(|&i| (episodes[i].episode, i));
        if idx.len() < 10 {
            log::warn!(
                "{show} season {season} has {} episodes; the 80/10/10 split is approximate",
                idx.len()
            );
        }
        rng.fork(u64::from(season)).shuffle(&mut idx);
        let (n_train, n_dev, _) = split_counts(idx.len());
        split.train.extend_from_slice(&idx[..n_train]);
        split.dev.extend_from_slice(&idx[n_train..n_train + n_dev]);
        split.test.extend_from_slice(&idx[n_train + n_dev..]);
    }
    split.train.sort_unstable();
    split.dev.sort_unstable();
    split.test.sort_unstable();
    split
}

/// Humor windows of every episode, grouped by split.
pub fn split_windows(episodes: &[EpisodeCorpus], split: &EpisodeSplit, k: usize) -> Result<DatasetSplit<HumorInput>> {
    let collect = |idx: &[usize]| -> Result<Vec<Example<HumorInput>>> {
        let mut out = Vec::new();
        for &i in idx {
            out.extend(episodes[i].windows(k)?);
        }
        Ok(out)
    };
    Ok(DatasetSplit { train: collect(&split.train)?, dev: collect(&split.dev)?, test: collect(&split.test)? })
}

pub const RECORD_HEADER: &str = "index\tstart_s\tend_s\tspeaker\ttext\tis_punchline\taudio_path";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(o) => out.push(o),
            None => out.push('\\'),
        }
    }
    out
}

/// Writes `<dir>/<id>.tsv` plus one WAV per utterance with audio under
/// `<dir>/audio/`. Returns the record path.
pub fn write_episode(dir: &Path, ep: &EpisodeCorpus) -> Result<PathBuf> {
    let audio_dir = dir.join("audio");
    fs::create_dir_all(&audio_dir).map_err(|e| Error::path(&audio_dir, e))?;
    let id = ep.id();
    let mut out = format!("# show={} season={} episode={}\n{RECORD_HEADER}\n", ep.show, ep.season, ep.episode);
    for (n, u) in ep.utterances.iter().enumerate() {
        let audio_path = match &u.audio {
            Some(seg) => {
                let rel = format!("audio/{id}_{n:04}.wav");
                write_wav(dir.join(&rel), seg)?;
                rel
            }
            None => "-".to_string(),
        };
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            u.id,
            u.start_s,
            u.end_s,
            escape(&u.speaker),
            escape(&u.text),
            u8::from(u.is_punchline),
            audio_path
        )
        .expect("writing to a String");
    }
    let path = dir.join(format!("{id}.tsv"));
    fs::write(&path, out).map_err(|e| Error::path(&path, e))?;
    Ok(path)
}

/// Reads an episode record written by [`write_episode`]. Audio paths are
/// resolved relative to the record's directory.
pub fn read_episode(path: &Path) -> Result<EpisodeCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::path(path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines().enumerate();
    let perr = |line: usize, msg: String| Error::Parse { line, msg: format!("{}: {msg}", path.display()) };
    let (show, season, episode) = {
        let (_, meta) = lines.next().ok_or_else(|| perr(1, "empty record file".into()))?;
        let kv: BTreeMap<&str, &str> = meta
            .trim_start_matches('#')
            .split_whitespace()
            .filter_map(|p| p.split_once('='))
            .collect();
        let num = |k: &str| kv.get(k).and_then(|v| v.parse::<u32>().ok()).ok_or_else(|| perr(1, format!("missing {k}")));
        let show = kv.get("show").ok_or_else(|| perr(1, "missing show".into()))?.to_string();
        (show, num("season")?, num("episode")?)
    };
    match lines.next() {
        Some((_, h)) if h == RECORD_HEADER => {}
        _ => return Err(perr(2, "missing record header".into())),
    }
    let mut utterances = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(perr(i + 1, format!("expected 7 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| perr(i + 1, format!("bad number {s:?}")));
        let text = unescape(f[4]);
        let audio = match f[6] {
            "-" => None,
            rel => Some(read_wav(dir.join(rel))?),
        };
        utterances.push(Utterance {
            id: f[0].parse().map_err(|_| perr(i + 1, format!("bad index {:?}", f[0])))?,
            tokens: tokenize(&text),
            text,
            speaker: unescape(f[3]),
            start_s: num(f[1])?,
            end_s: num(f[2])?,
            audio,
            is_punchline: match f[5] {
                "1" => true,
                "0" => false,
                o => return Err(perr(i + 1, format!("bad label {o:?}"))),
            },
        });
    }
    Ok(EpisodeCorpus { show, season, episode, utterances })
}

/// Manifest lines `split<TAB>record_path`, ordered by split then episode.
pub fn manifest(records: &[PathBuf], split: &EpisodeSplit, root: &Path) -> String {
    let mut out = String::from("split\trecord\n");
    for (name, idx) in [(SplitName::Train, &split.train), (SplitName::Dev, &split.dev), (SplitName::Test, &split.test)] {
        for &i in idx {
            let rel = records[i].strip_prefix(root).unwrap_or(&records[i]);
            writeln!(out, "{}\t{}", name.name(), rel.display()).expect("writing to a String");
        }
    }
    out
}

/// Loads every episode listed in a manifest, tagged with its split.
pub fn read_manifest(path: &Path) -> Result<Vec<(SplitName, EpisodeCorpus)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::path(path, e))?;
    let root = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (s, rel) = line
            .split_once('\t')
            .ok_or_else(|| Error::Parse { line: i + 1, msg: "expected split<TAB>record".into() })?;
        let split = SplitName::parse(s).ok_or_else(|| Error::Parse { line: i + 1, msg: format!("unknown split {s:?}") })?;
        out.push((split, read_episode(&root.join(rel))?));
    }
    Ok(out)
}

/// Summary line for a set of episodes.
pub fn corpus_summary(episodes: &[EpisodeCorpus], split: &EpisodeSplit) -> String {
    let utts: usize = episodes.iter().map(|e| e.utterances.len()).sum();
    let punch: usize = episodes.iter().map(EpisodeCorpus::punchline_count).sum();
    let rate = if utts == 0 { 0.0 } else { 100.0 * punch as f64 / utts as f64 };
    format!(
        "episodes={} utterances={} punchlines={} punchline_rate={:.1}% split(train/dev/test)={}/{}/{}",
        episodes.len(),
        utts,
        punch,
        rate,
        split.train.len(),
        split.dev.len(),
        split.test.len()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::srt::parse_srt;

    fn episodes(seasons: &[(u32, u32)]) -> Vec<EpisodeCorpus> {
        seasons
            .iter()
            .flat_map(|&(s, n)| {
                (1..=n).map(move |e| EpisodeCorpus { show: "show".into(), season: s, episode: e, utterances: vec![] })
            })
            .collect()
    }

    #[test]
    fn split_proportions() {
        let eps = episodes(&[(1, 10)]);
        let s = split_corpus(&eps, 7);
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (8, 1, 1));
        let eps = episodes(&[(1, 10), (2, 10)]);
        let s = split_corpus(&eps, 7);
        for season in [1, 2] {
            let count = |v: &[usize]| v.iter().filter(|&&i| eps[i].season == season).count();
            assert_eq!((count(&s.train), count(&s.dev), count(&s.test)), (8, 1, 1));
        }
        assert_eq!(split_corpus(&eps, 7), s);
        let mut all: Vec<usize> = s.train.iter().chain(&s.dev).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn record_round_trip() {
        let caps = parse_srt(b"1\n00:00:00,500 --> 00:00:01,000\nPENNY: Hi\tthere\\\n\n2\n00:00:01,500 --> 00:00:02,000\nWell.\n").unwrap();
        let audio = AudioSegment::new((0..24000).map(|i| ((i % 50) as f64 - 25.0) / 64.0).collect(), 8000).unwrap();
        let laughs = [LaughSpan::new(1.5, 2.5).unwrap()];
        let ep = build_episode("bbt", 1, 2, &caps, &laughs, Some(&audio)).unwrap();
        assert!(ep.utterances[0].is_punchline);
        assert!(ep.utterances[1].audio.is_none());
        assert_eq!(ep.utterances[1].speaker, UNKNOWN_SPEAKER);
        let dir = tempfile::tempdir().unwrap();
        let path = write_episode(dir.path(), &ep).unwrap();
        assert_eq!(read_episode(&path).unwrap(), ep);
    }

    #[test]
    fn audio_must_cover_captions() {
        let caps = parse_srt(b"1\n00:00:05,000 --> 00:00:06,000\nlate\n").unwrap();
        assert!(build_episode("x", 1, 1, &caps, &[], Some(&AudioSegment::silence(2.0, 8000))).is_err());
    }
}
