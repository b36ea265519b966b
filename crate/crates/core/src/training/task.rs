use std::fmt::Debug;

use super::trainer::{DatasetSplit, Example};
use crate::error::{Error, Result};
use crate::math::Rng;

/// Sizes of an 80/10/10 split of `n` items as `(train, dev, test)`.
///
/// Dev and test each get `round(0.1 n)` items, and at least one each once
/// `n >= 3` so that every split is usable.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let mut held = (n as f64 * 0.1).round() as usize;
    if n >= 3 {
        held = held.max(1);
    }
    let held = held.min(n / 2);
    (n - 2 * held, held, held)
}

/// Builds a balanced binary task: every item whose category equals
/// `positive` becomes a positive example and an equal number of negatives is
/// drawn uniformly without replacement (seeded) from the remaining items. If
/// fewer negatives exist than positives, all of them are used.
///
/// Each class is split 80/10/10 separately so the splits keep the balance.
pub fn make_binary_task<T: Clone, C: PartialEq + Debug>(
    items: &[(T, C)],
    positive: &C,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    let pos: Vec<&T> = items.iter().filter(|(_, c)| c == positive).map(|(t, _)| t).collect();
    if pos.is_empty() {
        return Err(Error::config(format!("no segments labeled {positive:?}")));
    }
    let mut neg: Vec<&T> = items.iter().filter(|(_, c)| c != positive).map(|(t, _)| t).collect();
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut neg);
    neg.truncate(pos.len());
    let mut pos = pos;
    rng.shuffle(&mut pos);

    let mut split = DatasetSplit { train: Vec::new(), dev: Vec::new(), test: Vec::new() };
    for (members, label) in [(pos, 1usize), (neg, 0usize)] {
        let (n_train, n_dev, _) = split_counts(members.len());
        for (i, t) in members.into_iter().enumerate() {
            let e = Example::new(t.clone(), label);
            if i < n_train {
                split.train.push(e);
            } else if i < n_train + n_dev {
                split.dev.push(e);
            } else {
                split.test.push(e);
            }
        }
    }
    rng.shuffle(&mut split.train);
    Ok(split)
}

/// Seeded 80/10/10 split of labelled examples, done per label so each
/// split keeps the class proportions.
pub fn stratified_split<T>(examples: Vec<Example<T>>, seed: u64) -> DatasetSplit<T> {
    let mut rng = Rng::new(seed);
    let mut by_label: Vec<Vec<Example<T>>> = Vec::new();
    for e in examples {
        if by_label.len() <= e.label {
            by_label.resize_with(e.label + 1, Vec::new);
        }
        by_label[e.label].push(e);
    }
    let mut split = DatasetSplit { train: Vec::new(), dev: Vec::new(), test: Vec::new() };
    for mut members in by_label {
        rng.shuffle(&mut members);
        let (n_train, n_dev, _) = split_counts(members.len());
        let rest = members.split_off(n_train);
        split.train.extend(members);
        let mut rest = rest;
        let test = rest.split_off(n_dev);
        split.dev.extend(rest);
        split.test.extend(test);
    }
    rng.shuffle(&mut split.train);
    split
}

#[cfg(test)]
mod tests {
    use super::*;

    const CORPUS_COUNTS: [(&str, usize); 6] = [
        ("anger", 12708),
        ("criticism", 2389),
        ("anxiety", 3855),
        ("loneliness", 3618),
        ("happiness", 8070),
        ("sadness", 1824),
    ];

    fn corpus() -> Vec<(usize, &'static str)> {
        let mut id = 0;
        let mut out = Vec::new();
        for (c, n) in CORPUS_COUNTS {
            for _ in 0..n {
                out.push((id, c));
                id += 1;
            }
        }
        out
    }

    fn count(s: &DatasetSplit<usize>, label: usize) -> usize {
        [&s.train, &s.dev, &s.test]
            .iter()
            .map(|v| v.iter().filter(|e| e.label == label).count())
            .sum()
    }

    #[test]
    fn anger_task_sizes() {
        let s = make_binary_task(&corpus(), &"anger", 1).unwrap();
        assert_eq!(count(&s, 1), 12708);
        assert_eq!(count(&s, 0), 12708);
    }

    #[test]
    fn every_category_is_balanced() {
        let items = corpus();
        for (c, n) in CORPUS_COUNTS {
            let s = make_binary_task(&items, &c, 3).unwrap();
            assert_eq!((count(&s, 1), count(&s, 0)), (n, n), "{c}");
        }
    }

    #[test]
    fn splits_are_disjoint_and_negatives_foreign() {
        let items = corpus();
        let s = make_binary_task(&items, &"sadness", 5).unwrap();
        let mut seen = std::collections::HashSet::new();
        for e in s.train.iter().chain(&s.dev).chain(&s.test) {
            assert!(seen.insert(e.input));
            assert_eq!(items[e.input].1 == "sadness", e.label == 1);
        }
        assert!(!s.dev.is_empty() && !s.test.is_empty());
    }

    #[test]
    fn seeded() {
        let items = corpus();
        assert_eq!(make_binary_task(&items, &"anxiety", 8).unwrap(), make_binary_task(&items, &"anxiety", 8).unwrap());
        assert_ne!(make_binary_task(&items, &"anxiety", 8).unwrap(), make_binary_task(&items, &"anxiety", 9).unwrap());
    }

    #[test]
    fn missing_category_is_config_error() {
        let items = vec![(0, "anger")];
        assert!(matches!(make_binary_task(&items, &"sadness", 0), Err(Error::Config(_))));
    }

    #[test]
    fn split_count_edges() {
        assert_eq!(split_counts(10), (8, 1, 1));
        assert_eq!(split_counts(3), (1, 1, 1));
        assert_eq!(split_counts(2), (2, 0, 0));
        assert_eq!(split_counts(100), (80, 10, 10));
        for n in 0..500 {
            let (a, b, c) = split_counts(n);
            assert_eq!(a + b + c, n);
        }
    }

    #[test]
    fn stratified_keeps_proportions() {
        let ex: Vec<Example<usize>> = (0..50).map(|i| Example::new(i, usize::from(i < 10))).collect();
        let s = stratified_split(ex.clone(), 4);
        let pos = |v: &[Example<usize>]| v.iter().filter(|e| e.label == 1).count();
        assert_eq!((pos(&s.train), pos(&s.dev), pos(&s.test)), (8, 1, 1));
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (40, 5, 5));
        let again = stratified_split(ex, 4);
        assert_eq!(again.train.iter().map(|e| e.input).collect::<Vec<_>>(), s.train.iter().map(|e| e.input).collect::<Vec<_>>());
    }
}
