//! Binary model checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "AFCK"  u32 version
//! str kind
//! u32 n  { str key, str value }*n              hyperparameters
//! u32 n  { str name, u32 d, f64*d mean, f64*d std }*n   normalization
//! u32 n  { str name, u32 rank, u64*rank dims, f64*len data }*n
//! ```
//!
//! where `str` is a u32 byte length followed by UTF-8 bytes. Tensors are
//! keyed by the dotted parameter names of the model.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::emotion::{build_emotion_model, EmotionCategory, EmotionCnn, EmotionCnnConfig};
use crate::error::{Error, Result};
use crate::humor::{ContextMode, HumorNet, HumorNetConfig};
use crate::math::{Activation, Rng, Tensor};
use crate::nn::Parameterized;
use crate::sentiment::{SentimentCnn, SentimentCnnConfig};
use crate::text::{EmbeddingTable, OovPolicy};
use crate::training::NormStats;

pub const MAGIC: &[u8; 4] = b"AFCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Emotion,
    Sentiment,
    Humor,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Emotion => "emotion",
            ModelKind::Sentiment => "sentiment",
            ModelKind::Humor => "humor",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "emotion" => Ok(ModelKind::Emotion),
            "sentiment" => Ok(ModelKind::Sentiment),
            "humor" => Ok(ModelKind::Humor),
            other => Err(Error::config(format!("unknown model kind {other:?} (emotion|sentiment|humor)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub hyperparameters: BTreeMap<String, String>,
    pub norms: BTreeMap<String, NormStats>,
    pub tensors: BTreeMap<String, Tensor>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn new(kind: ModelKind) -> Self {
        Checkpoint { kind, hyperparameters: BTreeMap::new(), norms: BTreeMap::new(), tensors: BTreeMap::new() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_str(&mut out, self.kind.name());
        out.extend_from_slice(&(self.hyperparameters.len() as u32).to_le_bytes());
        for (k, v) in &self.hyperparameters {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.norms.len() as u32).to_le_bytes());
        for (k, n) in &self.norms {
            put_str(&mut out, k);
            out.extend_from_slice(&(n.mean.len() as u32).to_le_bytes());
            put_f64s(&mut out, &n.mean);
            put_f64s(&mut out, &n.std);
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (k, t) in &self.tensors {
            put_str(&mut out, k);
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            put_f64s(&mut out, t.data());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).ok() != Some(MAGIC.as_slice()) {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (this build reads {FORMAT_VERSION})"
            )));
        }
        let kind = ModelKind::parse(&r.string()?).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut ck = Checkpoint::new(kind);
        for _ in 0..r.u32()? {
            let k = r.string()?;
            ck.hyperparameters.insert(k, r.string()?);
        }
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let d = r.len()?;
            let mean = r.f64s(d)?;
            let std = r.f64s(d)?;
            ck.norms.insert(k, NormStats { mean, std });
        }
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let rank = r.len()?;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let n = n.ok_or_else(|| Error::Checkpoint(format!("tensor {k} too large")))?;
            let data = r.f64s(n)?;
            ck.tensors.insert(k, Tensor::new(shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::path(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::path(path, e))?)
    }

    fn hp(&self, key: &str) -> Result<&str> {
        self.hyperparameters
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("missing hyperparameter {key}")))
    }

    fn hp_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.hp(key)?;
        v.parse().map_err(|_| Error::Checkpoint(format!("bad value {v:?} for hyperparameter {key}")))
    }

    fn norm(&self, key: &str) -> Result<NormStats> {
        self.norms.get(key).cloned().ok_or_else(|| Error::Checkpoint(format!("missing normalization {key}")))
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.hyperparameters.insert(key.to_string(), value.to_string());
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::config(format!("checkpoint holds a {} model, expected {kind}", self.kind)));
        }
        Ok(())
    }
}

fn store_params(ck: &mut Checkpoint, model: &impl Parameterized) {
    model.visit_params(&mut |name, p| {
        ck.tensors.insert(name.to_string(), p.value.clone());
    });
}

/// Copies every named tensor into the model, checking that names and shapes
/// match exactly.
fn load_params(ck: &Checkpoint, model: &mut impl Parameterized) -> Result<()> {
    let mut seen = 0;
    let mut err = None;
    model.visit_params_mut(&mut |name, p| {
        if err.is_some() {
            return;
        }
        match ck.tensors.get(name) {
            Some(t) if t.shape() == p.value.shape() => {
                p.value = t.clone();
                seen += 1;
            }
            Some(t) => {
                err = Some(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, model expects {:?}",
                    t.shape(),
                    p.value.shape()
                )))
            }
            None => err = Some(Error::Checkpoint(format!("missing tensor {name}"))),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if seen != ck.tensors.len() {
        return Err(Error::Checkpoint(format!("{} unexpected tensors", ck.tensors.len() - seen)));
    }
    Ok(())
}

fn join_list(xs: &[String]) -> String {
    xs.join("\n")
}

fn split_list(s: &str) -> Vec<String> {
    if s.is_empty() {
        Vec::new()
    } else {
        s.split('\n').map(String::from).collect()
    }
}

fn placeholder_table(vocab: &[String], dim: usize) -> Result<EmbeddingTable> {
    let mut t = EmbeddingTable::new(dim, OovPolicy::Zero)?;
    let zeros = vec![0.0; dim];
    for tok in vocab {
        t.insert(tok, &zeros)?;
    }
    Ok(t)
}

pub fn emotion_checkpoint(m: &EmotionCnn) -> Checkpoint {
    let mut ck = Checkpoint::new(ModelKind::Emotion);
    ck.set("window", m.cfg.window);
    ck.set("step", m.cfg.step);
    ck.set("hidden", m.cfg.hidden);
    ck.set("activation", m.cfg.activation.name());
    ck.set("category", m.category.map_or("", |c| c.name()));
    ck.norms.insert("samples".into(), m.norm.clone());
    store_params(&mut ck, m);
    ck
}

pub fn emotion_from_checkpoint(ck: &Checkpoint) -> Result<EmotionCnn> {
    ck.expect_kind(ModelKind::Emotion)?;
    let cfg = EmotionCnnConfig {
        window: ck.hp_parse("window")?,
        step: ck.hp_parse("step")?,
        hidden: ck.hp_parse("hidden")?,
        activation: Activation::parse(ck.hp("activation")?)?,
    };
    let mut m = build_emotion_model(&cfg, &mut Rng::new(0))?;
    m.category = match ck.hp("category")? {
        "" => None,
        c => Some(c.parse::<EmotionCategory>()?),
    };
    m.norm = ck.norm("samples")?;
    load_params(ck, &mut m)?;
    Ok(m)
}

pub fn sentiment_checkpoint(m: &SentimentCnn) -> Checkpoint {
    let mut ck = Checkpoint::new(ModelKind::Sentiment);
    let c = &m.cfg;
    ck.set("heights", c.heights.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
    ck.set("maps", c.maps);
    ck.set("activation", c.activation.name());
    ck.set("use_audio", c.use_audio);
    ck.set("audio_window", c.audio_window);
    ck.set("audio_maps", c.audio_maps);
    ck.set("audio_dim", c.audio_dim);
    ck.set("dim", m.dim());
    ck.set("vocab", join_list(m.vocab()));
    ck.norms.insert("audio".into(), m.audio_norm.clone());
    store_params(&mut ck, m);
    ck
}

pub fn sentiment_from_checkpoint(ck: &Checkpoint) -> Result<SentimentCnn> {
    ck.expect_kind(ModelKind::Sentiment)?;
    let heights = ck
        .hp("heights")?
        .split(',')
        .map(|h| h.trim().parse().map_err(|_| Error::Checkpoint(format!("bad height {h:?}"))))
        .collect::<Result<Vec<usize>>>()?;
    let cfg = SentimentCnnConfig {
        heights,
        maps: ck.hp_parse("maps")?,
        activation: Activation::parse(ck.hp("activation")?)?,
        use_audio: ck.hp_parse("use_audio")?,
        audio_window: ck.hp_parse("audio_window")?,
        audio_maps: ck.hp_parse("audio_maps")?,
        audio_dim: ck.hp_parse("audio_dim")?,
    };
    let table = placeholder_table(&split_list(ck.hp("vocab")?), ck.hp_parse("dim")?)?;
    let mut m = SentimentCnn::new(&cfg, &table, std::iter::empty(), &mut Rng::new(0))?;
    m.audio_norm = ck.norm("audio")?;
    load_params(ck, &mut m)?;
    Ok(m)
}

pub fn humor_checkpoint(m: &HumorNet) -> Checkpoint {
    let mut ck = Checkpoint::new(ModelKind::Humor);
    let c = &m.cfg;
    ck.set("lang_hidden", c.lang_hidden);
    ck.set("lang_window", c.lang_window);
    ck.set("audio_hidden", c.audio_hidden);
    ck.set("audio_window", c.audio_window);
    ck.set("lstm_hidden", c.lstm_hidden);
    ck.set("dropout", c.dropout);
    ck.set("k", c.k);
    ck.set("mode", c.mode.name());
    ck.set("use_audio", c.use_audio);
    ck.set("use_speaker", c.use_speaker);
    ck.set("dim", m.dim());
    ck.set("vocab", join_list(m.vocab()));
    ck.set("roster", join_list(&m.roster));
    ck.norms.insert("audio".into(), m.audio_norm.clone());
    ck.norms.insert("extra".into(), m.extra_norm.clone());
    store_params(&mut ck, m);
    ck
}

pub fn humor_from_checkpoint(ck: &Checkpoint) -> Result<HumorNet> {
    ck.expect_kind(ModelKind::Humor)?;
    let cfg = HumorNetConfig {
        lang_hidden: ck.hp_parse("lang_hidden")?,
        lang_window: ck.hp_parse("lang_window")?,
        audio_hidden: ck.hp_parse("audio_hidden")?,
        audio_window: ck.hp_parse("audio_window")?,
        lstm_hidden: ck.hp_parse("lstm_hidden")?,
        dropout: ck.hp_parse("dropout")?,
        k: ck.hp_parse("k")?,
        mode: ContextMode::parse(ck.hp("mode")?)?,
        use_audio: ck.hp_parse("use_audio")?,
        use_speaker: ck.hp_parse("use_speaker")?,
    };
    let table = placeholder_table(&split_list(ck.hp("vocab")?), ck.hp_parse("dim")?)?;
    let mut m = HumorNet::new(&cfg, &table, &split_list(ck.hp("roster")?), &mut Rng::new(0))?;
    m.audio_norm = ck.norm("audio")?;
    m.extra_norm = ck.norm("extra")?;
    load_params(ck, &mut m)?;
    Ok(m)
}

/// A model of any kind, as stored in a checkpoint.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Emotion(EmotionCnn),
    Sentiment(SentimentCnn),
    Humor(HumorNet),
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Emotion(_) => ModelKind::Emotion,
            AnyModel::Sentiment(_) => ModelKind::Sentiment,
            AnyModel::Humor(_) => ModelKind::Humor,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        match self {
            AnyModel::Emotion(m) => emotion_checkpoint(m),
            AnyModel::Sentiment(m) => sentiment_checkpoint(m),
            AnyModel::Humor(m) => humor_checkpoint(m),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(match ck.kind {
            ModelKind::Emotion => AnyModel::Emotion(emotion_from_checkpoint(ck)?),
            ModelKind::Sentiment => AnyModel::Sentiment(sentiment_from_checkpoint(ck)?),
            ModelKind::Humor => AnyModel::Humor(humor_from_checkpoint(ck)?),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perturb(m: &mut impl Parameterized, seed: u64) {
        let mut rng = Rng::new(seed);
        m.visit_params_mut(&mut |_, p| p.value.data_mut().iter_mut().for_each(|v| *v += rng.normal()));
    }

    #[test]
    fn header_checks() {
        let ck = Checkpoint::new(ModelKind::Emotion);
        let mut bytes = ck.to_bytes();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);
        bytes[4] = 2;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Checkpoint(m)) if m.contains("version 2")));
        assert!(Checkpoint::from_bytes(b"NOPE").is_err());
        let mut extra = ck.to_bytes();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
        let full = emotion_checkpoint(&build_emotion_model(&EmotionCnnConfig::default(), &mut Rng::new(1)).unwrap());
        let b = full.to_bytes();
        for cut in [5, 20, b.len() / 2, b.len() - 1] {
            assert!(Checkpoint::from_bytes(&b[..cut]).is_err());
        }
    }

    #[test]
    fn emotion_round_trip() {
        let mut m = build_emotion_model(&EmotionCnnConfig { hidden: 8, ..Default::default() }, &mut Rng::new(2)).unwrap();
        m.category = Some(EmotionCategory::ALL[2]);
        m.norm = NormStats { mean: vec![0.125], std: vec![3.5] };
        let ck = emotion_checkpoint(&m);
        let back = emotion_from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap();
        assert_eq!(emotion_checkpoint(&back), ck);
        assert_eq!(back.category, m.category);
        assert!(matches!(sentiment_from_checkpoint(&ck), Err(Error::Config(_))));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let m = build_emotion_model(&EmotionCnnConfig { hidden: 8, ..Default::default() }, &mut Rng::new(2)).unwrap();
        let mut ck = emotion_checkpoint(&m);
        ck.set("hidden", 9);
        assert!(matches!(emotion_from_checkpoint(&ck), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn sentiment_and_humor_round_trip() {
        let table = EmbeddingTable::random(&["a", "b", "c"], 4, 0.5, &mut Rng::new(3)).unwrap();
        let cfg = SentimentCnnConfig { heights: vec![2, 3], maps: 3, use_audio: true, audio_maps: 2, ..Default::default() };
        let mut s = SentimentCnn::new(&cfg, &table, ["zz"], &mut Rng::new(4)).unwrap();
        perturb(&mut s, 5);
        let ck = sentiment_checkpoint(&s);
        let back = sentiment_from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap();
        assert_eq!(sentiment_checkpoint(&back), ck);
        assert_eq!(back.vocab(), s.vocab());

        let hcfg = HumorNetConfig { lang_hidden: 3, audio_hidden: 2, lstm_hidden: 3, ..Default::default() };
        let mut h = HumorNet::new(&hcfg, &table, &["A".to_string(), "B".to_string()], &mut Rng::new(6)).unwrap();
        perturb(&mut h, 7);
        let ck = humor_checkpoint(&h);
        let back = humor_from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap();
        assert_eq!(humor_checkpoint(&back), ck);
        assert_eq!(back.roster, h.roster);
    }
}
