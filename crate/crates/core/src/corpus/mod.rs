//! Sitcom corpus construction: subtitles, laughter detection, punchline
//! labels, laughter trimming, episode splits and on-disk records.

mod episode;
mod laughter;
mod srt;

pub use episode::{
    build_episode, corpus_summary, manifest, read_episode, read_manifest, split_corpus, split_windows, write_episode,
    EpisodeCorpus, EpisodeSplit, SplitName, RECORD_HEADER, UNKNOWN_SPEAKER,
};
pub use laughter::{
    detect_sound_spans, followed_by_laughter, kept_ranges, label_punchlines, laughter_csv, merge_spans,
    parse_laughter_csv, trim_laughter, LaughSpan, DETECTOR_FRAME_S, MERGE_GAP_S, MIN_SPAN_S, PUNCHLINE_WINDOW_S,
};
pub use srt::{align_speakers, parse_script, parse_srt, split_speaker, TimedCaption};
