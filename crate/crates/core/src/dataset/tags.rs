use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use super::EmotionClass;
use crate::error::{Error, Result};

/// Substrings that mark a tag as emotion-bearing, with their class.
pub const TAG_KEYWORDS: [(&str, EmotionClass); 8] = [
    ("happy", EmotionClass::Positive),
    ("joyous", EmotionClass::Positive),
    ("energetic", EmotionClass::Positive),
    ("soothing", EmotionClass::Neutral),
    ("relax", EmotionClass::Neutral),
    ("calm", EmotionClass::Neutral),
    ("sad", EmotionClass::Negative),
    ("pain", EmotionClass::Negative),
];

/// Tags excluded from classification regardless of content, matched
/// case-insensitively on the whole (trimmed) tag.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Blocklist(HashSet<String>);

impl Blocklist {
    pub fn new<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(tags.into_iter().map(|t| normalize(t.as_ref())).filter(|t| !t.is_empty()).collect())
    }

    /// One tag per line; blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Self {
        Self::new(text.lines().filter(|l| !l.trim_start().starts_with('#')))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.0.contains(&normalize(tag))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn normalize(tag: &str) -> String {
    tag.trim().to_lowercase()
}

/// Classifies a user tag by keyword substring. Blocklisted tags, tags
/// without keywords, and tags whose keywords span more than one class
/// (e.g. "happysad") yield `None`.
pub fn classify_tag(tag: &str, blocklist: &Blocklist) -> Option<EmotionClass> {
    if blocklist.contains(tag) {
        return None;
    }
    let lower = tag.to_lowercase();
    let mut found: Option<EmotionClass> = None;
    for (keyword, class) in TAG_KEYWORDS {
        if lower.contains(keyword) {
            match found {
                Some(c) if c != class => return None,
                _ => found = Some(class),
            }
        }
    }
    found
}

/// Number of classified tags per class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub positive: usize,
    pub neutral: usize,
    pub negative: usize,
}

impl ClassCounts {
    pub fn new(positive: usize, neutral: usize, negative: usize) -> Self {
        Self { positive, neutral, negative }
    }

    pub fn get(&self, class: EmotionClass) -> usize {
        match class {
            EmotionClass::Positive => self.positive,
            EmotionClass::Neutral => self.neutral,
            EmotionClass::Negative => self.negative,
        }
    }

    pub fn add(&mut self, class: EmotionClass) {
        match class {
            EmotionClass::Positive => self.positive += 1,
            EmotionClass::Neutral => self.neutral += 1,
            EmotionClass::Negative => self.negative += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.neutral + self.negative
    }

    pub fn from_tags<S: AsRef<str>>(tags: &[S], blocklist: &Blocklist) -> Self {
        let mut counts = Self::default();
        for class in tags.iter().filter_map(|t| classify_tag(t.as_ref(), blocklist)) {
            counts.add(class);
        }
        counts
    }
}

impl From<&BTreeMap<EmotionClass, usize>> for ClassCounts {
    fn from(map: &BTreeMap<EmotionClass, usize>) -> Self {
        let get = |c| map.get(&c).copied().unwrap_or(0);
        Self::new(get(EmotionClass::Positive), get(EmotionClass::Neutral), get(EmotionClass::Negative))
    }
}

/// The dominant class; ties go to the more positive class.
pub fn resolve_song_label(counts: &ClassCounts) -> Result<EmotionClass> {
    if counts.total() == 0 {
        return Err(Error::NoLabel);
    }
    // ALL runs most-positive first, and max_by_key keeps the last maximum,
    // so iterate in reverse.
    Ok(EmotionClass::ALL.into_iter().rev().max_by_key(|&c| counts.get(c)).expect("three classes"))
}

/// Classifies every tag of a song and resolves the dominant class.
pub fn label_song<S: AsRef<str>>(tags: &[S], blocklist: &Blocklist) -> Result<EmotionClass> {
    resolve_song_label(&ClassCounts::from_tags(tags, blocklist))
}
