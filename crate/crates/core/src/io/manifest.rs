use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::CorrespondencePair;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SongEntry {
    pub id: String,
    pub tags: Vec<String>,
    pub duration_s: f64,
    /// Relative paths resolve against the manifest's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    pub id: String,
    pub original_label: String,
    /// Row of this image in the embedding store.
    pub embedding_index: usize,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_songs(path: &Path) -> Result<Vec<SongEntry>> {
    read_json(path)
}

pub fn write_songs(path: &Path, songs: &[SongEntry]) -> Result<()> {
    write_json(path, songs)
}

pub fn read_images(path: &Path) -> Result<Vec<ImageEntry>> {
    read_json(path)
}

pub fn write_images(path: &Path, images: &[ImageEntry]) -> Result<()> {
    write_json(path, images)
}

/// Pretty JSON with a trailing newline.
pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}

pub fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path)
}

#[derive(Serialize, Deserialize)]
struct PairRow {
    image_id: String,
    segment_id: String,
    label: u8,
}

/// CSV with header `image_id,segment_id,label`, label 1 for a true pair.
pub fn write_pairs(path: &Path, pairs: &[CorrespondencePair]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in pairs {
        w.serialize(PairRow { image_id: p.image_id.clone(), segment_id: p.segment_id.clone(), label: p.label as u8 })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs(path: &Path) -> Result<Vec<CorrespondencePair>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: PairRow = row?;
        if row.label > 1 {
            return Err(Error::format(format!("{}: label must be 0 or 1, got {}", path.display(), row.label)));
        }
        out.push(CorrespondencePair { image_id: row.image_id, segment_id: row.segment_id, label: row.label == 1 });
    }
    Ok(out)
}

/// One row of a label file: an id, its label name, and an optional group
/// (samples of one group are never split across train and held-out sets).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRow {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub group: Option<String>,
}

impl LabelRow {
    pub fn group(&self) -> &str {
        self.group.as_deref().unwrap_or(&self.id)
    }
}

pub fn write_labels(path: &Path, rows: &[LabelRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a label CSV; extra columns are ignored.
pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
