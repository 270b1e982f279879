use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three broad emotion classes. The derived order is
/// `Negative < Neutral < Positive`, which is the tie-break preference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionClass {
    Negative,
    Neutral,
    Positive,
}

impl EmotionClass {
    /// Most positive first; `index()` follows this order.
    pub const ALL: [EmotionClass; 3] = [EmotionClass::Positive, EmotionClass::Neutral, EmotionClass::Negative];

    pub fn index(self) -> usize {
        match self {
            EmotionClass::Positive => 0,
            EmotionClass::Neutral => 1,
            EmotionClass::Negative => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionClass::Positive => "positive",
            EmotionClass::Neutral => "neutral",
            EmotionClass::Negative => "negative",
        }
    }
}

impl fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "positive" => Ok(EmotionClass::Positive),
            "neutral" => Ok(EmotionClass::Neutral),
            "negative" => Ok(EmotionClass::Negative),
            other => Err(Error::invalid(format!("unknown emotion class {other:?}"))),
        }
    }
}

/// Fine-grained image emotion labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageLabel {
    Amusement,
    Anger,
    Awe,
    Contentment,
    Disgust,
    Excitement,
    Fear,
    Sadness,
}

impl ImageLabel {
    pub const ALL: [ImageLabel; 8] = [
        ImageLabel::Amusement,
        ImageLabel::Anger,
        ImageLabel::Awe,
        ImageLabel::Contentment,
        ImageLabel::Disgust,
        ImageLabel::Excitement,
        ImageLabel::Fear,
        ImageLabel::Sadness,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ImageLabel::Amusement => "amusement",
            ImageLabel::Anger => "anger",
            ImageLabel::Awe => "awe",
            ImageLabel::Contentment => "contentment",
            ImageLabel::Disgust => "disgust",
            ImageLabel::Excitement => "excitement",
            ImageLabel::Fear => "fear",
            ImageLabel::Sadness => "sadness",
        }
    }

    pub fn class(self) -> EmotionClass {
        match self {
            ImageLabel::Awe | ImageLabel::Amusement | ImageLabel::Excitement => EmotionClass::Positive,
            ImageLabel::Contentment => EmotionClass::Neutral,
            ImageLabel::Fear | ImageLabel::Disgust | ImageLabel::Anger | ImageLabel::Sadness => EmotionClass::Negative,
        }
    }

    /// Labels that regroup into `class`.
    pub fn members(class: EmotionClass) -> Vec<ImageLabel> {
        Self::ALL.into_iter().filter(|l| l.class() == class).collect()
    }
}

impl fmt::Display for ImageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImageLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_lowercase();
        Self::ALL.into_iter().find(|l| l.as_str() == lower).ok_or_else(|| Error::invalid(format!("unknown image label {s:?}")))
    }
}

/// Maps one of the eight image labels to its broad class.
pub fn regroup_image_label(original: &str) -> Result<EmotionClass> {
    Ok(original.parse::<ImageLabel>()?.class())
}
