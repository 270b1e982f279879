//! File formats: the feature/embedding store, manifests, CSV tables and
//! TOML run configuration.

mod bytes;
mod config;
mod manifest;
mod store;

pub use bytes::{ByteReader, ByteWriter};
pub use config::{PathsConfig, RunConfig};
pub use manifest::{
    read_images, read_json_file, read_labels, read_pairs, read_songs, write_images, write_json_file, write_labels, write_pairs,
    write_songs, ImageEntry, LabelRow, SongEntry,
};
pub use store::{FeatureStore, STORE_MAGIC, STORE_VERSION};
