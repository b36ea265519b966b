use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::RegexSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChallengeLabel {
    DisclosureReciprocity,
    Clarification,
    Avoidance,
    DeliberateChallenge,
    Abusive,
    Garbage,
    None,
}

impl ChallengeLabel {
    pub const ALL: [ChallengeLabel; 7] = [
        ChallengeLabel::DisclosureReciprocity,
        ChallengeLabel::Clarification,
        ChallengeLabel::Avoidance,
        ChallengeLabel::DeliberateChallenge,
        ChallengeLabel::Abusive,
        ChallengeLabel::Garbage,
        ChallengeLabel::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChallengeLabel::DisclosureReciprocity => "disclosure_reciprocity",
            ChallengeLabel::Clarification => "clarification",
            ChallengeLabel::Avoidance => "avoidance",
            ChallengeLabel::DeliberateChallenge => "deliberate_challenge",
            ChallengeLabel::Abusive => "abusive",
            ChallengeLabel::Garbage => "garbage",
            ChallengeLabel::None => "none",
        }
    }

    pub fn is_challenge(self) -> bool {
        self != ChallengeLabel::None
    }
}

impl fmt::Display for ChallengeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChallengeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s.trim())
            .ok_or_else(|| Error::config(format!("unknown challenge label {s:?}")))
    }
}

const ABUSIVE: &[&str] = &[
    r"\bget lost\b",
    r"\bnone of your (damn |fucking )?business\b",
    r"\bshut up\b",
    r"\b(piss|bugger|fuck) off\b",
    r"\bgo away\b",
    r"\bscrew you\b",
    r"\b(stupid|idiot|idiotic|dumb|moron|useless)\b",
    r"\b(fuck\w*|shit\w*|bitch\w*|bastard|asshole|crap)\b",
];

const CLARIFICATION: &[&str] = &[
    r"\b(can|could|would|will) you (please )?(repeat|say (it|that) again|rephrase)\b",
    r"\b(repeat|say) (it|that|the question) again\b",
    r"\brepeat (that|the question|please)\b",
    r"^\W*(pardon|sorry|what|huh|eh)\W*$",
    r"\bpardon( me)?\?",
    r"\bwhat did you (just )?say\b",
    r"\bwhat do you mean\b",
    r"\bcome again\b",
    r"\bi (don't|do not|didn't|did not) (understand|get|hear|catch)\b",
];

const DELIBERATE: &[&str] = &[
    r"\b(can|could|may) (i|we) (change|switch)\b",
    r"\b(change|switch) (a |the )?(topic|subject)\b",
    r"\bwhy (can't|cannot|don't|won't|can not) you\b",
    r"\bare you (a |an )?(robot|machine|computer|program|human|person|real|alive|smart|intelligent)\b",
    r"\bwhich one is\b",
    r"\bhow (old|smart|clever) are you\b",
    r"\bwho (made|built|created|programmed) you\b",
    r"\bcan you (speak|sing|dance|count|think|feel)\b",
];

const DISCLOSURE: &[&str] = &[
    r"\b(what|how) about you\b",
    r"\band you\W*$",
    r"\btell me (about )?(yourself|your\b)",
    r"\bwhat('s| is| are) your\b",
    r"\bdo you (have|like|love|ever|feel|get)\b",
    r"\bhave you (ever )?(been|had|felt)\b",
    r"\byour turn\b",
];

const AVOIDANCE: &[&str] = &[
    r"\b(don't|do not|dont) (want|wanna|like) to (talk|say|answer|tell|discuss|share)\b",
    r"\b(no|not in the) mood\b",
    r"\b(i'd|i would) rather not\b",
    r"\bprefer not to\b",
    r"\blet's (just )?(continue|move on|skip|go on)\b",
    r"\bmake it (a )?quick\b",
    r"\bnext question\b",
    r"\bno comment\b",
    r"\bskip (it|this|that)\b",
    r"^\W*you know\W*$",
    r"^\W*(whatever|pass|nothing|no idea|i don't know|dunno)\W*$",
];

fn rules() -> &'static [(ChallengeLabel, RegexSet)] {
    static RULES: OnceLock<Vec<(ChallengeLabel, RegexSet)>> = OnceLock::new();
    RULES.get_or_init(|| {
        [
            (ChallengeLabel::Abusive, ABUSIVE),
            (ChallengeLabel::Clarification, CLARIFICATION),
            (ChallengeLabel::DeliberateChallenge, DELIBERATE),
            (ChallengeLabel::DisclosureReciprocity, DISCLOSURE),
            (ChallengeLabel::Avoidance, AVOIDANCE),
        ]
        .into_iter()
        .map(|(l, pats)| (l, RegexSet::new(pats).expect("challenge patterns compile")))
        .collect()
    })
}

fn normalize(text: &str) -> String {
    text.to_lowercase().replace(['\u{2019}', '\u{2018}', '`'], "'").split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Assigns the first matching category in the order garbage, abusive,
/// clarification, deliberate challenge, disclosure reciprocity, avoidance;
/// anything else is a cooperative answer. Garbage is input without any
/// alphabetic character.
pub fn classify_challenge(text: &str) -> ChallengeLabel {
    if !text.chars().any(char::is_alphabetic) {
        return ChallengeLabel::Garbage;
    }
    let t = normalize(text);
    rules()
        .iter()
        .find(|(_, set)| set.is_match(&t))
        .map_or(ChallengeLabel::None, |(l, _)| *l)
}

/// Fraction of labels that are challenges (0 for an empty list).
pub fn challenge_rate(labels: &[ChallengeLabel]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().filter(|l| l.is_challenge()).count() as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ChallengeLabel::*;

    #[test]
    fn quoted_examples() {
        let cases = [
            ("Can you repeat?", Clarification),
            ("Can you say it again?", Clarification),
            ("I don't want to talk about it", Avoidance),
            ("I am in no mood to tell you a story Zara", Avoidance),
            ("Let's continue.", Avoidance),
            ("Make it a quick one", Avoidance),
            ("You know...", Avoidance),
            ("get lost now", Abusive),
            ("None of your business", Abusive),
            ("Can I change a topic?", DeliberateChallenge),
            ("Why can't you speak English?", DeliberateChallenge),
            ("Which one is 72.1 percent?", DeliberateChallenge),
            ("What about you?", DisclosureReciprocity),
            ("I enjoy long walks with my dog on the beach.", None),
            ("", Garbage),
            ("?!? 123 ...", Garbage),
        ];
        for (text, want) in cases {
            assert_eq!(classify_challenge(text), want, "{text:?}");
        }
    }

    #[test]
    fn curly_apostrophes() {
        assert_eq!(classify_challenge("I don\u{2019}t want to talk about it"), Avoidance);
    }

    #[test]
    fn labels_round_trip() {
        for l in ChallengeLabel::ALL {
            assert_eq!(l.name().parse::<ChallengeLabel>().unwrap(), l);
        }
    }

    #[test]
    fn rate_matches_hand_count() {
        let texts = ["Can you repeat?", "Yes I do.", "get lost now", "I like reading.", "Sure, I work in a bank."];
        let labels: Vec<_> = texts.iter().map(|t| classify_challenge(t)).collect();
        assert_eq!(challenge_rate(&labels), 2.0 / 5.0);
    }

    proptest! {
        #[test]
        fn total_and_deterministic(s in "\\PC{0,60}") {
            let a = classify_challenge(&s);
            prop_assert_eq!(a, classify_challenge(&s));
            prop_assert!(ChallengeLabel::ALL.contains(&a));
        }
    }
}
