//! Shared data model: classes, boxes, YOLO TXT label I/O and dataset
//! manifests with deterministic splitting.

mod bbox;
mod classes;
mod label;
mod manifest;

use thiserror::Error;

pub use bbox::{BoxViolation, NormalizedBBox, PixelBBox, BOX_EPSILON};
pub use classes::{display_plural, ClassList, ComponentClass, CANONICAL_CLASSES};
pub use label::{
    parse_label_line, parse_prediction_line, read_label_file, read_prediction_file, serialize_annotation,
    serialize_detection, write_label_file, write_prediction_file, Annotation, Detection, LabelFileError, LineError,
    DEFAULT_DECIMALS,
};
pub use manifest::{
    split_dataset, DatasetManifest, ImageRecord, Provenance, Split, SplitRatios, TransformStep, DEFAULT_SEED,
    RATIO_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bad split ratios: {0}")]
    BadRatios(String),
    #[error("duplicate image id `{0}`")]
    DuplicateId(String),
    #[error("invalid class list: {0}")]
    InvalidClasses(String),
    #[error("invalid image record: {0}")]
    InvalidRecord(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
