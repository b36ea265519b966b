use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use affect_core::audio::{write_wav, AudioSegment};
use affect_core::checkpoint::AnyModel;
use affect_core::corpus::{manifest, split_corpus, write_episode, EpisodeCorpus};
use affect_core::humor::Utterance;
use affect_core::math::Rng;
use affect_core::sentiment::{SentimentCnn, SentimentCnnConfig};
use affect_core::text::EmbeddingTable;

fn affect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affect")).args(args).output().expect("binary runs")
}

fn job(dir: &Path, cmd: &str, conf: &str) -> Output {
    let path = dir.join(format!("{cmd}.conf"));
    fs::write(&path, conf).unwrap();
    affect(&[cmd, "--config", path.to_str().unwrap()])
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tone(freq: f64, secs: f64, phase: f64) -> AudioSegment {
    let n = (secs * 8000.0) as usize;
    AudioSegment { samples: (0..n).map(|i| 0.4 * (2.0 * PI * freq * i as f64 / 8000.0 + phase).sin()).collect(), sample_rate: 8000 }
}

#[test]
fn usage_and_config_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&affect(&[])), 1);
    assert_eq!(code(&affect(&["train"])), 1);
    assert_eq!(code(&affect(&["train", "--bogus"])), 1);
    let o = job(dir.path(), "train", "kind = sentiment\nlearning_rat = 0.1\nout = o\n");
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("learning_rat"), "{}", stderr(&o));
    let o = job(dir.path(), "eval", "checkpoint = missing.ckpt\ndata = d.tsv\nout = o\n");
    assert_eq!(code(&o), 2);
    assert_eq!(code(&affect(&["keys", "persona"])), 0);
}

#[test]
fn gradcheck_passes_and_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = affect(&["gradcheck", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(out.join("gradcheck.txt")).unwrap();
    for layer in ["affine", "embedding", "conv", "maxpool", "lstm", "dropout", "softmax"] {
        assert!(report.lines().any(|l| l.starts_with("layer:") && l.contains(layer)), "{layer} missing:\n{report}");
    }
    assert!(out.join("resolved.conf").is_file());
    let o = job(dir.path(), "gradcheck", "inject_fault = true\n");
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("parameter"), "{}", stderr(&o));
}

#[test]
fn corrupt_srt_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    fs::create_dir(&input).unwrap();
    fs::write(input.join("x_s01e01.srt"), "1\n00:00:01,000 --> 00:00:02,000\nHi.\n\n2\nbroken timing\nHello.\n").unwrap();
    fs::write(input.join("x_s01e01.laughs.csv"), "3.0,4.0\n").unwrap();
    let o = job(dir.path(), "build-corpus", "show = x\ninput_dir = in\nout = out\n");
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));
    let o = job(dir.path(), "build-corpus", "show = x\ninput_dir = nowhere\nout = out\n");
    assert_eq!(code(&o), 2);
}

/// Twenty episodes whose punchlines carry a marker word and a high tone.
fn planted_corpus(root: &Path) -> PathBuf {
    let mut rng = Rng::new(31);
    let words = ["so", "then", "we", "went", "to", "the", "store", "and", "it", "was", "closed", "again"];
    let episodes: Vec<EpisodeCorpus> = (1..=20)
        .map(|e| {
            let mut t = 0.0;
            let utterances = (0..12)
                .map(|i| {
                    let punch = rng.uniform() < 0.3;
                    let mut toks: Vec<&str> = (0..3 + rng.below(3)).map(|_| words[rng.below(words.len())]).collect();
                    if punch {
                        toks.insert(rng.below(toks.len() + 1), "zinger");
                    }
                    let mut u = Utterance::from_text(i, &toks.join(" "), "X", t, t + 1.0);
                    u.audio = Some(tone(if punch { 900.0 } else { 180.0 }, 0.3, rng.uniform_range(0.0, 6.0)));
                    u.is_punchline = punch;
                    t += 1.5;
                    u
                })
                .collect();
            EpisodeCorpus { show: "planted".into(), season: 1, episode: e, utterances }
        })
        .collect();
    let split = split_corpus(&episodes, 3);
    let records: Vec<PathBuf> = episodes.iter().map(|e| write_episode(&root.join("corpus"), e).unwrap()).collect();
    let path = root.join("manifest.tsv");
    fs::write(&path, manifest(&records, &split, root)).unwrap();
    path
}

#[test]
fn humor_train_eval_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    planted_corpus(d);
    let train = "kind = humor\ncorpus = manifest.tsv\nembedding_dim = 16\nlang_hidden = 12\naudio_hidden = 6\n\
                 lstm_hidden = 12\ndropout = 0.2\nuse_audio = true\nuse_speaker = false\nlearning_rate = 0.02\n\
                 max_epochs = 40\npatience = 6\nseed = 4\nout = run\n";
    let o = job(d, "train", train);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["model.ckpt", "epochs.csv", "report.txt", "resolved.conf"] {
        assert!(d.join("run").join(f).is_file(), "{f}");
    }
    let o = job(d, "eval", "checkpoint = run/model.ckpt\ncorpus = manifest.tsv\nout = ev\n");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(d.join("ev/eval.txt")).unwrap();
    let row = report.lines().last().unwrap();
    let f1: f64 = row.split_whitespace().last().unwrap().parse().unwrap();
    assert!(f1 >= 90.0, "{report}");

    let predict = "checkpoint = run/model.ckpt\ncorpus = manifest.tsv\nsplit = dev\nout = pred\n";
    assert_eq!(code(&job(d, "predict", predict)), 0);
    let first = fs::read(d.join("pred/predictions.csv")).unwrap();
    assert_eq!(code(&job(d, "predict", predict)), 0);
    assert_eq!(fs::read(d.join("pred/predictions.csv")).unwrap(), first);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("episode,utterance_index,probability,label\n"));
    assert!(text.lines().count() > 1);

    let o = job(d, "eval", "kind = sentiment\ncheckpoint = run/model.ckpt\ncorpus = manifest.tsv\nout = ev2\n");
    assert_eq!(code(&o), 2);
}

#[test]
fn training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut rows = String::new();
    for i in 0..40 {
        let (label, word) = if i % 2 == 0 { (1, "great") } else { (0, "awful") };
        rows.push_str(&format!("s{i}\t{label}\tthe film was {word} and long\n"));
    }
    fs::write(d.join("data.tsv"), rows).unwrap();
    let conf = |out: &str| format!("kind = sentiment\ndata = data.tsv\nmaps = 4\nmax_epochs = 5\nseed = 9\nout = {out}\n");
    assert_eq!(code(&job(d, "train", &conf("a"))), 0);
    assert_eq!(code(&job(d, "train", &conf("b"))), 0);
    assert_eq!(fs::read(d.join("a/model.ckpt")).unwrap(), fs::read(d.join("b/model.ckpt")).unwrap());
    let cols = |p: &str| -> Vec<String> {
        let text = fs::read_to_string(d.join(p)).unwrap();
        text.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect()
    };
    assert_eq!(cols("a/epochs.csv"), cols("b/epochs.csv"));
}

#[test]
fn zero_checkpoint_is_chance_level() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let table = EmbeddingTable::random(&["good", "bad", "plot"], 4, 0.5, &mut Rng::new(1)).unwrap();
    let m = SentimentCnn::zeros(&SentimentCnnConfig { maps: 3, ..Default::default() }, &table).unwrap();
    AnyModel::Sentiment(m).save(d.join("zero.ckpt")).unwrap();
    let rows: String = (0..20).map(|i| format!("u{i}\t{}\t{} plot\n", i % 2, if i % 2 == 0 { "bad" } else { "good" })).collect();
    fs::write(d.join("data.tsv"), rows).unwrap();
    let o = job(d, "eval", "checkpoint = zero.ckpt\ndata = data.tsv\nout = ev\n");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(d.join("ev/eval.txt")).unwrap();
    let acc: f64 = report.lines().last().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((acc - 50.0).abs() <= 5.0, "{report}");
    assert_eq!(code(&job(d, "predict", "checkpoint = zero.ckpt\ndata = data.tsv\nout = p\n")), 0);
    let csv = fs::read_to_string(d.join("p/predictions.csv")).unwrap();
    assert!(csv.starts_with("utterance_id,probability_positive\nu0,0.500000\n"), "{csv}");
}

#[test]
fn emotion_train_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut list = String::from("path,category\n");
    let cats = ["anger", "sadness", "anxiety"];
    for i in 0..30 {
        let cat = cats[i % 3];
        let freq = if cat == "anger" { 440.0 } else { 220.0 };
        write_wav(d.join(format!("{i}.wav")), &tone(freq, 0.1, i as f64)).unwrap();
        list.push_str(&format!("{i}.wav,{cat}\n"));
    }
    fs::write(d.join("items.csv"), list).unwrap();
    let o = job(d, "train", "kind = emotion\ndata = items.csv\ntarget = anger\nhidden = 4\nmax_epochs = 3\nout = em\n");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = job(d, "predict", "checkpoint = em/model.ckpt\ndata = items.csv\nout = p\n");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(d.join("p/predictions.csv")).unwrap();
    assert!(csv.starts_with("item,probability_positive\n0.wav,"));
    assert_eq!(csv.lines().count(), 31);
}

#[test]
fn persona_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let lex = d.join("lex");
    fs::create_dir(&lex).unwrap();
    for (family, words) in [
        ("hedges", "maybe\nperhaps\n"),
        ("negations", "not\nno\n"),
        ("articles", "a\nan\nthe\n"),
        ("self_references", "i\nme\nmy\n"),
        ("social", "friend*\nparty\n"),
        ("positive_emotion", "love\nfun\n"),
        ("negative_emotion", "sad\nhate\n"),
        ("exclusive_inclusive", "but\nwith\n"),
        ("filled_pauses", "um\nuh\n"),
    ] {
        fs::write(lex.join(format!("{family}.txt")), words).unwrap();
    }
    write_wav(d.join("r2.wav"), &tone(150.0, 1.0, 0.0)).unwrap();
    fs::write(d.join("responses.txt"), "I love parties with my friends\nCan you repeat?\tr2.wav\nget lost now\n").unwrap();
    let o = job(d, "persona", "responses = responses.txt\nlexicons = lex\nout = p\n");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(d.join("p/persona.txt")).unwrap();
    assert!(report.contains("\tclarification\t") && report.contains("\tabusive\t"), "{report}");
    assert!(report.contains("challenge_rate = 0.6667"), "{report}");
    assert!(report.contains("type = "), "{report}");
}
