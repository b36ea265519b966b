use std::ops::Range;

use crate::audio::{energy, AudioSegment};
use crate::error::{Error, Result};
use crate::humor::Utterance;

/// Frame length of the sound detector.
pub const DETECTOR_FRAME_S: f64 = 0.025;
/// Runs separated by less than this are merged.
pub const MERGE_GAP_S: f64 = 0.1;
/// Shorter spans are treated as detector noise.
pub const MIN_SPAN_S: f64 = 0.2;
/// A laugh starting within this long after an utterance ends marks it as
/// a punchline.
pub const PUNCHLINE_WINDOW_S: f64 = 1.0;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaughSpan {
    pub start_s: f64,
    pub end_s: f64,
}

impl LaughSpan {
    pub fn new(start_s: f64, end_s: f64) -> Result<Self> {
        if !(start_s.is_finite() && end_s.is_finite()) || end_s <= start_s {
            return Err(Error::config(format!("invalid laugh span [{start_s}, {end_s}]")));
        }
        Ok(LaughSpan { start_s, end_s })
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Sorts spans and merges those that overlap or lie closer than `gap_s`.
pub fn merge_spans(spans: &[LaughSpan], gap_s: f64) -> Vec<LaughSpan> {
    let mut sorted = spans.to_vec();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.end_s.total_cmp(&b.end_s)));
    let mut out: Vec<LaughSpan> = Vec::with_capacity(sorted.len());
    for s in sorted {
        match out.last_mut() {
            Some(last) if s.start_s - last.end_s < gap_s => last.end_s = last.end_s.max(s.end_s),
            _ => out.push(s),
        }
    }
    out
}

/// Finds sound in a vocal-removed track: maximal runs of 25 ms frames whose
/// mean-square energy exceeds `energy_threshold`, merged across gaps under
/// 100 ms and kept when at least `max(min_duration_s, 0.2)` seconds long.
pub fn detect_sound_spans(seg: &AudioSegment, energy_threshold: f64, min_duration_s: f64) -> Vec<LaughSpan> {
    let sr = seg.sample_rate as f64;
    let flen = ((DETECTOR_FRAME_S * sr).round() as usize).max(1);
    let total = seg.duration();
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    let n_frames = seg.samples.len().div_ceil(flen);
    for f in 0..=n_frames {
        let loud = f < n_frames && {
            let a = f * flen;
            energy(&seg.samples[a..(a + flen).min(seg.samples.len())]) > energy_threshold
        };
        match (loud, open) {
            (true, None) => open = Some(f),
            (false, Some(s)) => {
                let t = |i: usize| ((i * flen) as f64 / sr).min(total);
                runs.push(LaughSpan { start_s: t(s), end_s: t(f) });
                open = None;
            }
            _ => {}
        }
    }
    let min = min_duration_s.max(MIN_SPAN_S);
    merge_spans(&runs, MERGE_GAP_S)
        .into_iter()
        .filter(|s| s.duration() + TIME_EPS >= min)
        .collect()
}

/// Parses `start_seconds,end_seconds` lines. A non-numeric first line is
/// taken as a header; blank lines are skipped.
pub fn parse_laughter_csv(text: &str) -> Result<Vec<LaughSpan>> {
    let mut out = Vec::new();
    for (i, line) in text.strip_prefix('\u{feff}').unwrap_or(text).lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let nums: Vec<Option<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        if i == 0 && nums.iter().all(Option::is_none) {
            continue;
        }
        let [Some(a), Some(b)] = nums[..] else {
            return Err(err(format!("expected start_seconds,end_seconds, found {line:?}")));
        };
        out.push(LaughSpan::new(a, b).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn laughter_csv(spans: &[LaughSpan]) -> String {
    let mut s = String::from("start_seconds,end_seconds\n");
    for l in spans {
        s.push_str(&format!("{},{}\n", l.start_s, l.end_s));
    }
    s
}

/// True iff some laugh starts in `(end_s, end_s + 1]`.
pub fn followed_by_laughter(end_s: f64, laughs: &[LaughSpan]) -> bool {
    laughs
        .iter()
        .any(|l| l.start_s > end_s + TIME_EPS && l.start_s <= end_s + PUNCHLINE_WINDOW_S + TIME_EPS)
}

/// Sets `is_punchline` on every utterance from the laugh list.
pub fn label_punchlines(utterances: &mut [Utterance], laughs: &[LaughSpan]) {
    let laughs = merge_spans(laughs, 0.0);
    for u in utterances {
        u.is_punchline = followed_by_laughter(u.end_s, &laughs);
    }
}

/// Sample ranges of a recording starting at `start_s` (with `n` samples at
/// `sample_rate`) that fall outside every laugh span. A sample at time `t`
/// is removed when `start <= t < end` for some span.
pub fn kept_ranges(start_s: f64, n: usize, sample_rate: u32, laughs: &[LaughSpan]) -> Vec<Range<usize>> {
    let sr = sample_rate as f64;
    let idx = |t: f64| (((t - start_s) * sr - TIME_EPS).ceil().max(0.0) as usize).min(n);
    let mut out = Vec::new();
    let mut cursor = 0;
    for l in merge_spans(laughs, 0.0) {
        let (a, b) = (idx(l.start_s), idx(l.end_s));
        if b <= cursor || a >= b {
            continue;
        }
        if a > cursor {
            out.push(cursor..a);
        }
        cursor = cursor.max(b);
    }
    if cursor < n {
        out.push(cursor..n);
    }
    out
}

/// Removes the parts of the utterance audio that overlap laughter. An
/// utterance completely covered by laughter loses its audio (`None`) but
/// keeps its text and label.
pub fn trim_laughter(u: &Utterance, laughs: &[LaughSpan]) -> Utterance {
    let mut out = u.clone();
    if let Some(seg) = &u.audio {
        let ranges = kept_ranges(u.start_s, seg.samples.len(), seg.sample_rate, laughs);
        let samples: Vec<f64> = ranges.into_iter().flat_map(|r| seg.samples[r].iter().copied()).collect();
        out.audio = (!samples.is_empty()).then(|| AudioSegment { samples, sample_rate: seg.sample_rate });
    }
    out
}
