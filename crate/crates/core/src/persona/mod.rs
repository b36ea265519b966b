//! Personality scoring from response cues and user-challenge detection.

mod challenge;

pub use challenge::{challenge_rate, classify_challenge, ChallengeLabel};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use crate::audio::{ENERGY_COLUMN, PITCH_COLUMN};
use crate::error::{Error, Result};
use crate::math::Tensor;
use crate::text::{load_word_list, parse_word_list, tokenize};

/// Lexicon-backed cue families; each is loaded from `<name>.txt`.
pub const LEXICON_FAMILIES: [&str; 9] = [
    "hedges",
    "negations",
    "articles",
    "self_references",
    "social",
    "positive_emotion",
    "negative_emotion",
    "exclusive_inclusive",
    "filled_pauses",
];

/// Every cue name, in [`CueVector::values`] order.
pub const CUE_NAMES: [&str; 15] = [
    "hedges",
    "negations",
    "articles",
    "self_references",
    "social",
    "positive_emotion",
    "negative_emotion",
    "exclusive_inclusive",
    "filled_pauses",
    "words_per_sentence",
    "type_token_ratio",
    "speech_rate",
    "unfilled_pauses",
    "mean_energy",
    "pitch_variability",
];

/// A word list. Entries ending in `*` match any token with that prefix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    words: HashSet<String>,
    prefixes: Vec<String>,
}

impl Lexicon {
    pub fn new<S: AsRef<str>>(entries: impl IntoIterator<Item = S>) -> Self {
        let mut lex = Lexicon::default();
        for e in entries {
            let e = e.as_ref().trim().to_lowercase();
            match e.strip_suffix('*') {
                Some(p) if !p.is_empty() => lex.prefixes.push(p.to_string()),
                Some(_) => {}
                None if !e.is_empty() => {
                    lex.words.insert(e);
                }
                None => {}
            }
        }
        lex.prefixes.sort();
        lex
    }

    pub fn matches(&self, token: &str) -> bool {
        self.words.contains(token) || self.prefixes.iter().any(|p| token.starts_with(p.as_str()))
    }

    pub fn count(&self, tokens: &[String]) -> usize {
        tokens.iter().filter(|t| self.matches(t)).count()
    }
}

/// All cue lexicons.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicons {
    families: BTreeMap<String, Lexicon>,
}

impl Lexicons {
    /// Loads `<dir>/<family>.txt` for every family.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut families = BTreeMap::new();
        for f in LEXICON_FAMILIES {
            let path = dir.join(format!("{f}.txt"));
            if !path.is_file() {
                return Err(Error::config(format!("missing lexicon file {}", path.display())));
            }
            families.insert(f.to_string(), Lexicon::new(load_word_list(&path)?));
        }
        Ok(Lexicons { families })
    }

    /// Builds from in-memory word-list texts keyed by family; absent
    /// families are empty.
    pub fn from_texts(texts: &[(&str, &str)]) -> Result<Self> {
        let mut lex = Lexicons::default();
        for (family, text) in texts {
            lex.set(family, Lexicon::new(parse_word_list(text)))?;
        }
        Ok(lex)
    }

    pub fn set(&mut self, family: &str, lexicon: Lexicon) -> Result<()> {
        if !LEXICON_FAMILIES.contains(&family) {
            return Err(Error::config(format!("unknown lexicon family {family:?}")));
        }
        self.families.insert(family.to_string(), lexicon);
        Ok(())
    }

    fn count(&self, family: &str, tokens: &[String]) -> f64 {
        self.families.get(family).map_or(0, |l| l.count(tokens)) as f64
    }
}

/// Speech side of a response: frame features and duration.
#[derive(Debug, Clone, Copy)]
pub struct SpeechCues<'a> {
    pub features: &'a Tensor,
    pub duration_s: f64,
}

/// Frames quieter than this fraction of the response's mean energy count
/// as silent.
pub const PAUSE_ENERGY_RATIO: f64 = 0.1;
/// Minimum run of silent frames (10 ms each) counted as an unfilled pause.
pub const MIN_PAUSE_FRAMES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CueVector {
    pub hedges: f64,
    pub negations: f64,
    pub articles: f64,
    pub self_references: f64,
    pub social: f64,
    pub positive_emotion: f64,
    pub negative_emotion: f64,
    pub exclusive_inclusive: f64,
    pub filled_pauses: f64,
    pub words_per_sentence: f64,
    pub type_token_ratio: f64,
    /// Tokens per second.
    pub speech_rate: f64,
    pub unfilled_pauses: f64,
    pub mean_energy: f64,
    /// Standard deviation of pitch over voiced frames, in Hz.
    pub pitch_variability: f64,
}

impl CueVector {
    pub fn values(&self) -> [f64; 15] {
        [
            self.hedges,
            self.negations,
            self.articles,
            self.self_references,
            self.social,
            self.positive_emotion,
            self.negative_emotion,
            self.exclusive_inclusive,
            self.filled_pauses,
            self.words_per_sentence,
            self.type_token_ratio,
            self.speech_rate,
            self.unfilled_pauses,
            self.mean_energy,
            self.pitch_variability,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        CUE_NAMES.iter().position(|n| *n == name).map(|i| self.values()[i])
    }
}

fn sentence_count(text: &str) -> usize {
    text.split(['.', '!', '?']).filter(|s| s.chars().any(char::is_alphanumeric)).count()
}

/// Counts cues in one response. Speech cues stay zero without audio.
pub fn extract_cues(text: &str, speech: Option<SpeechCues<'_>>, lexicons: &Lexicons) -> CueVector {
    let tokens = tokenize(text);
    let mut c = CueVector::default();
    if !tokens.is_empty() {
        c.hedges = lexicons.count("hedges", &tokens);
        c.negations = lexicons.count("negations", &tokens);
        c.articles = lexicons.count("articles", &tokens);
        c.self_references = lexicons.count("self_references", &tokens);
        c.social = lexicons.count("social", &tokens);
        c.positive_emotion = lexicons.count("positive_emotion", &tokens);
        c.negative_emotion = lexicons.count("negative_emotion", &tokens);
        c.exclusive_inclusive = lexicons.count("exclusive_inclusive", &tokens);
        c.filled_pauses = lexicons.count("filled_pauses", &tokens);
        c.words_per_sentence = tokens.len() as f64 / sentence_count(text).max(1) as f64;
        let types: HashSet<&String> = tokens.iter().collect();
        c.type_token_ratio = types.len() as f64 / tokens.len() as f64;
    }
    if let Some(s) = speech {
        let f = s.features;
        if s.duration_s > 0.0 {
            c.speech_rate = tokens.len() as f64 / s.duration_s;
        }
        if f.shape().len() == 2 && f.rows() > 0 && f.cols() > ENERGY_COLUMN {
            let energies: Vec<f64> = (0..f.rows()).map(|r| f.row(r)[ENERGY_COLUMN]).collect();
            c.mean_energy = energies.iter().sum::<f64>() / energies.len() as f64;
            let quiet = PAUSE_ENERGY_RATIO * c.mean_energy;
            let mut run = 0;
            for e in energies.iter().chain(std::iter::once(&f64::INFINITY)) {
                if *e < quiet || (c.mean_energy == 0.0 && e.is_finite()) {
                    run += 1;
                } else {
                    if run >= MIN_PAUSE_FRAMES {
                        c.unfilled_pauses += 1.0;
                    }
                    run = 0;
                }
            }
            let voiced: Vec<f64> = (0..f.rows()).map(|r| f.row(r)[PITCH_COLUMN]).filter(|p| *p > 0.0).collect();
            if voiced.len() > 1 {
                let m = voiced.iter().sum::<f64>() / voiced.len() as f64;
                c.pitch_variability = (voiced.iter().map(|p| (p - m).powi(2)).sum::<f64>() / voiced.len() as f64).sqrt();
            }
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dimension {
    /// Positive scores mean Extraversion.
    EI,
    /// Positive scores mean Intuition.
    NS,
    /// Positive scores mean Thinking.
    TF,
    /// Positive scores mean Judging.
    JP,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [Dimension::EI, Dimension::NS, Dimension::TF, Dimension::JP];

    pub fn key(self) -> &'static str {
        match self {
            Dimension::EI => "e_i",
            Dimension::NS => "n_s",
            Dimension::TF => "t_f",
            Dimension::JP => "j_p",
        }
    }

    /// (positive pole, negative pole); the negative pole also wins ties
    /// except on N/S, where ties go to N.
    pub fn letters(self) -> (char, char) {
        match self {
            Dimension::EI => ('E', 'I'),
            Dimension::NS => ('N', 'S'),
            Dimension::TF => ('T', 'F'),
            Dimension::JP => ('J', 'P'),
        }
    }

    pub fn tie_letter(self) -> char {
        match self {
            Dimension::EI => 'I',
            Dimension::NS => 'N',
            Dimension::TF => 'F',
            Dimension::JP => 'P',
        }
    }

    pub fn letter(self, score: f64) -> char {
        let (pos, neg) = self.letters();
        if score > 0.0 {
            pos
        } else if score < 0.0 {
            neg
        } else {
            self.tie_letter()
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.key() == s)
    }
}

/// Per-dimension cue weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightTable {
    weights: BTreeMap<Dimension, BTreeMap<String, f64>>,
}

impl WeightTable {
    /// Extraversion weights follow the signs of the published cue summary;
    /// the other three dimensions have no default cues.
    pub fn default_table() -> Self {
        let ei = [
            ("social", 0.5),
            ("positive_emotion", 0.5),
            ("self_references", 0.25),
            ("filled_pauses", 0.25),
            ("speech_rate", 0.1),
            ("mean_energy", 1.0),
            ("pitch_variability", 0.01),
            ("hedges", -0.5),
            ("negations", -0.5),
            ("articles", -0.25),
            ("negative_emotion", -0.5),
            ("exclusive_inclusive", -0.25),
            ("words_per_sentence", -0.05),
            ("type_token_ratio", -0.5),
            ("unfilled_pauses", -0.25),
        ];
        let mut t = WeightTable::default();
        for (cue, w) in ei {
            t.set(Dimension::EI, cue, w).expect("known cue");
        }
        t
    }

    pub fn set(&mut self, dim: Dimension, cue: &str, weight: f64) -> Result<()> {
        if !CUE_NAMES.contains(&cue) {
            return Err(Error::config(format!("unknown cue {cue:?} in weight table")));
        }
        if !weight.is_finite() {
            return Err(Error::config(format!("non-finite weight for {}.{cue}", dim.key())));
        }
        self.weights.entry(dim).or_default().insert(cue.to_string(), weight);
        Ok(())
    }

    pub fn get(&self, dim: Dimension, cue: &str) -> f64 {
        self.weights.get(&dim).and_then(|m| m.get(cue)).copied().unwrap_or(0.0)
    }

    /// Parses `dimension.cue = weight` lines (`#` comments allowed), for
    /// example `e_i.social = 0.5`. Unlisted weights are zero.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = WeightTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, found {line:?}")))?;
            let (dim, cue) = key.trim().split_once('.').ok_or_else(|| err(format!("expected dimension.cue, found {key:?}")))?;
            let dim = Dimension::parse(dim.trim()).ok_or_else(|| err(format!("unknown dimension {dim:?}")))?;
            let w: f64 = value.trim().parse().map_err(|_| err(format!("bad weight {:?}", value.trim())))?;
            t.set(dim, cue.trim(), w).map_err(|e| err(e.to_string()))?;
        }
        Ok(t)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (d, m) in &self.weights {
            for (cue, w) in m {
                s.push_str(&format!("{}.{cue} = {w}\n", d.key()));
            }
        }
        s
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut t = self.clone();
        t.weights.values_mut().flat_map(|m| m.values_mut()).for_each(|w| *w *= factor);
        t
    }
}

/// `tanh(sum_k w_k * cue_k)` for one dimension.
pub fn score_dimension(cues: &CueVector, weights: &WeightTable, dim: Dimension) -> f64 {
    let v = cues.values();
    CUE_NAMES.iter().zip(v).map(|(n, c)| weights.get(dim, n) * c).sum::<f64>().tanh()
}

pub fn score_response(cues: &CueVector, weights: &WeightTable) -> [f64; 4] {
    Dimension::ALL.map(|d| score_dimension(cues, weights, d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbtiScore {
    pub e_i: f64,
    pub n_s: f64,
    pub t_f: f64,
    pub j_p: f64,
    pub letters: String,
    /// Set per dimension when the mean is exactly zero and the letter comes
    /// from the tie-break.
    pub low_confidence: [bool; 4],
}

impl MbtiScore {
    pub fn scores(&self) -> [f64; 4] {
        [self.e_i, self.n_s, self.t_f, self.j_p]
    }
}

impl fmt::Display for MbtiScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "type = {}", self.letters)?;
        for (i, d) in Dimension::ALL.into_iter().enumerate() {
            let flag = if self.low_confidence[i] { " low_confidence" } else { "" };
            writeln!(f, "{} = {:+.4} {}{flag}", d.key(), self.scores()[i], d.letter(self.scores()[i]))?;
        }
        Ok(())
    }
}

/// Mean of each dimension over responses. Values are summed in sorted
/// order so the result does not depend on response order.
pub fn aggregate_personality(per_response: &[[f64; 4]]) -> Result<MbtiScore> {
    if per_response.is_empty() {
        return Err(Error::EmptyInput("no responses to aggregate"));
    }
    let mean = |k: usize| {
        let mut v: Vec<f64> = per_response.iter().map(|r| r[k]).collect();
        v.sort_by(f64::total_cmp);
        v.iter().sum::<f64>() / v.len() as f64
    };
    let s = [mean(0), mean(1), mean(2), mean(3)];
    Ok(MbtiScore {
        e_i: s[0],
        n_s: s[1],
        t_f: s[2],
        j_p: s[3],
        letters: Dimension::ALL.iter().zip(s).map(|(d, v)| d.letter(v)).collect(),
        low_confidence: s.map(|v| v == 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> Lexicons {
        Lexicons::from_texts(&[
            ("self_references", "i\nme\nmine\n"),
            ("articles", "a\nan\nthe\n"),
            ("social", "friend*\nparty\ntalk\n"),
            ("positive_emotion", "happy\nlove\nfun\n"),
            ("hedges", "maybe\nperhaps\n"),
            ("negations", "not\nno\nnever\n"),
        ])
        .unwrap()
    }

    #[test]
    fn empty_response_has_zero_cues() {
        assert_eq!(extract_cues("", None, &lex()), CueVector::default());
    }

    #[test]
    fn self_reference_count() {
        assert_eq!(extract_cues("I I me mine", None, &lex()).self_references, 4.0);
    }

    #[test]
    fn fixture_paragraph_hand_count() {
        let text = "Maybe I love the party. My friends and I talk a lot! It is not boring.";
        let c = extract_cues(text, None, &lex());
        assert_eq!(c.hedges, 1.0);
        assert_eq!(c.self_references, 2.0);
        assert_eq!(c.positive_emotion, 1.0);
        assert_eq!(c.articles, 2.0);
        assert_eq!(c.social, 3.0);
        assert_eq!(c.negations, 1.0);
        assert_eq!(c.words_per_sentence, 16.0 / 3.0);
        assert_eq!(c.type_token_ratio, 15.0 / 16.0);
        assert_eq!(c.speech_rate, 0.0);
    }

    #[test]
    fn speech_cues() {
        let mut data = vec![0.0; 100 * 42];
        for r in 0..100 {
            data[r * 42 + ENERGY_COLUMN] = if (30..60).contains(&r) { 0.0 } else { 1.0 };
            data[r * 42 + PITCH_COLUMN] = if r % 2 == 0 { 100.0 } else { 0.0 };
            if r == 10 {
                data[r * 42 + PITCH_COLUMN] = 300.0;
            }
        }
        let f = Tensor::matrix(100, 42, data).unwrap();
        let c = extract_cues("one two three four", Some(SpeechCues { features: &f, duration_s: 2.0 }), &lex());
        assert_eq!(c.speech_rate, 2.0);
        assert_eq!(c.unfilled_pauses, 1.0);
        assert!((c.mean_energy - 0.7).abs() < 1e-12);
        assert!(c.pitch_variability > 0.0);
    }

    #[test]
    fn missing_lexicon_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Lexicons::load(dir.path()), Err(Error::Config(_))));
        for f in LEXICON_FAMILIES {
            std::fs::write(dir.path().join(format!("{f}.txt")), "x\n").unwrap();
        }
        assert!(Lexicons::load(dir.path()).is_ok());
    }

    #[test]
    fn extravert_markers_score_high() {
        let cues = CueVector { social: 4.0, positive_emotion: 3.0, ..Default::default() };
        let s = score_dimension(&cues, &WeightTable::default_table(), Dimension::EI);
        assert!(s > 0.5, "{s}");
        assert_eq!(score_dimension(&CueVector::default(), &WeightTable::default_table(), Dimension::EI), 0.0);
        let neg = WeightTable::default_table().scaled(-1.0);
        assert_eq!(score_dimension(&cues, &neg, Dimension::EI), -s);
        for d in [Dimension::NS, Dimension::TF, Dimension::JP] {
            assert_eq!(score_dimension(&cues, &WeightTable::default_table(), d), 0.0);
        }
    }

    #[test]
    fn weight_table_text() {
        let t = WeightTable::default_table();
        assert_eq!(WeightTable::parse(&t.to_text()).unwrap(), t);
        assert!(matches!(WeightTable::parse("e_i.sparkle = 1"), Err(Error::Parse { line: 1, .. })));
        assert!(WeightTable::parse("x_y.social = 1").is_err());
        assert_eq!(WeightTable::parse("# c\nt_f.hedges = -2 # trailing\n").unwrap().get(Dimension::TF, "hedges"), -2.0);
    }

    #[test]
    fn aggregation_rules() {
        assert!(matches!(aggregate_personality(&[]), Err(Error::EmptyInput(_))));
        let one = aggregate_personality(&[[0.3, -0.2, 0.1, -0.4]]).unwrap();
        assert_eq!(one.scores(), [0.3, -0.2, 0.1, -0.4]);
        assert_eq!(one.letters, "ESTP");
        let two = aggregate_personality(&[[0.4, 0.0, 0.0, 0.0], [-0.2, 0.0, 0.0, 0.0]]).unwrap();
        assert!((two.e_i - 0.1).abs() < 1e-15);
        assert_eq!(&two.letters[..1], "E");
        let zero = aggregate_personality(&[[0.0; 4]]).unwrap();
        assert_eq!(zero.letters, "INFP");
        assert_eq!(zero.low_confidence, [true; 4]);
    }

    proptest! {
        #[test]
        fn aggregation_is_permutation_invariant(
            rows in prop::collection::vec(prop::array::uniform4(-1.0f64..1.0), 1..12),
            seed in any::<u64>(),
        ) {
            let mut shuffled = rows.clone();
            crate::math::Rng::new(seed).shuffle(&mut shuffled);
            prop_assert_eq!(aggregate_personality(&rows).unwrap(), aggregate_personality(&shuffled).unwrap());
        }

        #[test]
        fn positive_scaling_keeps_pole(
            social in 0.0f64..5.0, hedges in 0.0f64..5.0, factor in 0.01f64..100.0,
        ) {
            let cues = CueVector { social, hedges, ..Default::default() };
            let t = WeightTable::default_table();
            let a = score_dimension(&cues, &t, Dimension::EI);
            let b = score_dimension(&cues, &t.scaled(factor), Dimension::EI);
            prop_assert_eq!(Dimension::EI.letter(a), Dimension::EI.letter(b));
        }

        #[test]
        fn scores_stay_in_range(vals in prop::array::uniform15(0.0f64..50.0)) {
            let c = CueVector {
                hedges: vals[0], negations: vals[1], articles: vals[2], self_references: vals[3], social: vals[4],
                positive_emotion: vals[5], negative_emotion: vals[6], exclusive_inclusive: vals[7],
                filled_pauses: vals[8], words_per_sentence: vals[9], type_token_ratio: vals[10],
                speech_rate: vals[11], unfilled_pauses: vals[12], mean_energy: vals[13], pitch_variability: vals[14],
            };
            for s in score_response(&c, &WeightTable::default_table()) {
                prop_assert!((-1.0..=1.0).contains(&s));
            }
        }
    }
}
