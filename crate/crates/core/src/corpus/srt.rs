use regex::Regex;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::text::tokenize;

/// One subtitle block.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedCaption {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub speaker: Option<String>,
    pub text: String,
}

fn timestamp_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(\d{1,3}):(\d{2}):(\d{2})[,.](\d{1,3})\s*-->\s*(\d{1,3}):(\d{2}):(\d{2})[,.](\d{1,3})").unwrap()
    })
}

fn speaker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([A-Z][A-Z0-9 .'\-]*):\s*(.*)$").unwrap())
}

fn seconds(h: &str, m: &str, s: &str, ms: &str) -> Option<f64> {
    let (h, m, s): (u64, u64, u64) = (h.parse().ok()?, m.parse().ok()?, s.parse().ok()?);
    if m >= 60 || s >= 60 {
        return None;
    }
    let frac: f64 = format!("0.{ms}").parse().ok()?;
    Some((h * 3600 + m * 60 + s) as f64 + frac)
}

/// Splits a leading upper-case `NAME:` prefix off a caption text.
pub fn split_speaker(text: &str) -> (Option<String>, String) {
    match speaker_re().captures(text) {
        Some(c) => (Some(c[1].trim().to_string()), c[2].trim().to_string()),
        None => (None, text.trim().to_string()),
    }
}

/// Parses SRT subtitles. Accepts a UTF-8 byte-order mark and CRLF line
/// endings; multi-line caption texts are joined with single spaces. The
/// result is sorted by start time.
pub fn parse_srt(bytes: &[u8]) -> Result<Vec<TimedCaption>> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::Parse { line, msg: "subtitle file is not valid UTF-8".into() }
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let index_line = i + 1;
        let index: usize = lines[i]
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line: index_line, msg: format!("expected caption index, found {:?}", lines[i].trim()) })?;
        i += 1;
        let ts_line = i + 1;
        let ts = lines.get(i).ok_or(Error::Parse { line: ts_line, msg: "missing timestamp line".into() })?;
        let c = timestamp_re()
            .captures(ts)
            .ok_or_else(|| Error::Parse { line: ts_line, msg: format!("malformed timestamp {:?}", ts.trim()) })?;
        let bad = || Error::Parse { line: ts_line, msg: format!("malformed timestamp {:?}", ts.trim()) };
        let start_s = seconds(&c[1], &c[2], &c[3], &c[4]).ok_or_else(bad)?;
        let end_s = seconds(&c[5], &c[6], &c[7], &c[8]).ok_or_else(bad)?;
        if end_s <= start_s {
            return Err(Error::Parse { line: ts_line, msg: "caption ends before it starts".into() });
        }
        i += 1;
        let mut body = Vec::new();
        while i < lines.len() && !lines[i].trim().is_empty() {
            body.push(lines[i].trim());
            i += 1;
        }
        let (speaker, text) = split_speaker(&body.join(" "));
        out.push(TimedCaption { index, start_s, end_s, speaker, text });
    }
    out.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    Ok(out)
}

/// Parses a script of `NAME: line` entries (one per line; other lines are
/// ignored) into `(speaker, text)` pairs.
pub fn parse_script(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| match split_speaker(l.trim()) {
            (Some(s), t) => Some((s, t)),
            _ => None,
        })
        .collect()
}

fn similar(a: &[String], b: &[String]) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let shared = a.iter().filter(|t| b.contains(t)).count();
    2 * shared >= a.len().max(b.len())
}

/// Fills missing caption speakers from a script by aligning the two in
/// time order. The alignment is a longest common subsequence in which a
/// caption matches a script line when at least half of the longer token
/// list is shared. Captions that already name a speaker are kept as is.
/// Returns the number of speakers assigned.
pub fn align_speakers(captions: &mut [TimedCaption], script: &[(String, String)]) -> usize {
    let a: Vec<Vec<String>> = captions.iter().map(|c| tokenize(&c.text)).collect();
    let b: Vec<Vec<String>> = script.iter().map(|(_, t)| tokenize(t)).collect();
    let (n, m) = (a.len(), b.len());
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if similar(&a[i], &b[j]) { dp[i + 1][j + 1] + 1 } else { dp[i + 1][j].max(dp[i][j + 1]) };
        }
    }
    let (mut i, mut j, mut assigned) = (0, 0, 0);
    while i < n && j < m {
        if similar(&a[i], &b[j]) && dp[i][j] == dp[i + 1][j + 1] + 1 {
            if captions[i].speaker.is_none() {
                captions[i].speaker = Some(script[j].0.clone());
                assigned += 1;
            }
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    assigned
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_block() {
        let c = parse_srt(b"1\n00:00:01,000 --> 00:00:02,500\nPENNY: Okay.\n").unwrap();
        assert_eq!(
            c,
            vec![TimedCaption { index: 1, start_s: 1.0, end_s: 2.5, speaker: Some("PENNY".into()), text: "Okay.".into() }]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(parse_srt(b"").unwrap().is_empty());
        assert!(parse_srt(b"\n\r\n  \n").unwrap().is_empty());
    }

    #[test]
    fn bom_crlf_multiline_and_sorting() {
        let src = "\u{feff}2\r\n00:00:05,000 --> 00:00:06,000\r\nSecond\r\nline\r\n\r\n1\r\n00:00:01,000 --> 00:00:02,000\r\nFirst: not a speaker\r\n";
        let c = parse_srt(src.as_bytes()).unwrap();
        assert_eq!(c[0].index, 1);
        assert_eq!(c[0].speaker, None);
        assert_eq!(c[0].text, "First: not a speaker");
        assert_eq!(c[1].text, "Second line");
        assert_eq!(c[1].start_s, 5.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_srt(b"1\n00:00:02,500 --> 00:00:01,000\nx\n") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_srt(b"1\n00:00:01,000 --> 00:00:02,000\nok\n\n2\n00:00:0x,000 --> 00:00:04,000\n") {
            Err(Error::Parse { line: 6, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_srt(b"abc\n") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(parse_srt(b"1\n00:61:00,000 --> 01:00:00,000\nx\n").is_err());
    }

    #[test]
    fn script_alignment_fills_missing_speakers() {
        let mut caps = parse_srt(
            b"1\n00:00:01,000 --> 00:00:02,000\nHello there everyone\n\n2\n00:00:03,000 --> 00:00:04,000\nLEONARD: We need to talk\n\n3\n00:00:05,000 --> 00:00:06,000\nWhat is that smell\n",
        )
        .unwrap();
        let script = parse_script("PENNY: Hello there, everyone!\n(stage direction)\nSHELDON: We need to talk.\nHOWARD: What is that smell?\n");
        assert_eq!(align_speakers(&mut caps, &script), 2);
        let speakers: Vec<_> = caps.iter().map(|c| c.speaker.clone().unwrap()).collect();
        assert_eq!(speakers, ["PENNY", "LEONARD", "HOWARD"]);
    }
}
