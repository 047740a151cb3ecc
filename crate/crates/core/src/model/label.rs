//! YOLO TXT label and prediction lines.
//!
//! Label line: `class cx cy w h`. Prediction line: the same with a trailing
//! confidence, `class cx cy w h conf`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bbox::{BoxViolation, NormalizedBBox};

pub const DEFAULT_DECIMALS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub class: usize,
    pub bbox: NormalizedBBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: usize,
    pub bbox: NormalizedBBox,
    pub confidence: f64,
}

impl Detection {
    pub fn annotation(&self) -> Annotation {
        Annotation { class: self.class, bbox: self.bbox }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineError {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("class id {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("box out of range ({violation:?})")]
    BoxOutOfRange { violation: BoxViolation },
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
}

#[derive(Debug, Error)]
pub enum LabelFileError {
    #[error("{path}:{line}: {source}")]
    Line {
        path: String,
        line: usize,
        #[source]
        source: LineError,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn parse_fields(text: &str, expected: usize) -> Result<(usize, Vec<f64>), LineError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != expected {
        return Err(LineError::MalformedLine(format!("expected {expected} fields, found {}", fields.len())));
    }
    let class = fields[0]
        .parse::<usize>()
        .map_err(|_| LineError::MalformedLine(format!("class id `{}` is not an integer", fields[0])))?;
    let values = fields[1..]
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| LineError::MalformedLine(format!("`{f}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((class, values))
}

fn build(class: usize, v: &[f64], n_classes: usize) -> Result<Annotation, LineError> {
    if class >= n_classes {
        return Err(LineError::ClassOutOfRange { class, n_classes });
    }
    let bbox =
        NormalizedBBox::new(v[0], v[1], v[2], v[3]).map_err(|violation| LineError::BoxOutOfRange { violation })?;
    Ok(Annotation { class, bbox })
}

pub fn parse_label_line(text: &str, n_classes: usize) -> Result<Annotation, LineError> {
    let (class, v) = parse_fields(text, 5)?;
    build(class, &v, n_classes)
}

pub fn parse_prediction_line(text: &str, n_classes: usize) -> Result<Detection, LineError> {
    let (class, v) = parse_fields(text, 6)?;
    let ann = build(class, &v, n_classes)?;
    let confidence = v[4];
    if !(0.0..=1.0).contains(&confidence) {
        return Err(LineError::ConfidenceOutOfRange(confidence));
    }
    Ok(Detection { class: ann.class, bbox: ann.bbox, confidence })
}

/// Fixed-point rendering. A strictly positive value that would print as
/// zero at `decimals` gets just enough extra digits to stay nonzero, so a
/// tiny but valid size never re-parses as a zero-area box.
fn push_fixed(out: &mut String, value: f64, decimals: usize) {
    let mut d = decimals;
    let mut s = format!("{value:.d$}");
    while value > 0.0 && s.bytes().all(|b| b == b'0' || b == b'.') && d < 17 {
        d += 1;
        s = format!("{value:.d$}");
    }
    out.push_str(&s);
}

pub fn serialize_annotation(a: &Annotation, decimals: usize) -> String {
    let mut out = String::with_capacity(48);
    let _ = write!(out, "{}", a.class);
    for v in [a.bbox.cx, a.bbox.cy, a.bbox.w, a.bbox.h] {
        out.push(' ');
        push_fixed(&mut out, v, decimals);
    }
    out
}

pub fn serialize_detection(d: &Detection, decimals: usize) -> String {
    let mut out = serialize_annotation(&d.annotation(), decimals);
    out.push(' ');
    push_fixed(&mut out, d.confidence, decimals);
    out
}

fn read_lines<T>(path: &Path, parse: impl Fn(&str) -> Result<T, LineError>) -> Result<Vec<T>, LabelFileError> {
    let text =
        fs::read_to_string(path).map_err(|source| LabelFileError::Io { path: path.display().to_string(), source })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse(l).map_err(|source| LabelFileError::Line { path: path.display().to_string(), line: i + 1, source })
        })
        .collect()
}

pub fn read_label_file(path: &Path, n_classes: usize) -> Result<Vec<Annotation>, LabelFileError> {
    read_lines(path, |l| parse_label_line(l, n_classes))
}

pub fn read_prediction_file(path: &Path, n_classes: usize) -> Result<Vec<Detection>, LabelFileError> {
    read_lines(path, |l| parse_prediction_line(l, n_classes))
}

pub fn write_label_file(path: &Path, annotations: &[Annotation]) -> std::io::Result<()> {
    let mut text = String::new();
    for a in annotations {
        text.push_str(&serialize_annotation(a, DEFAULT_DECIMALS));
        text.push('\n');
    }
    fs::write(path, text)
}

pub fn write_prediction_file(path: &Path, detections: &[Detection]) -> std::io::Result<()> {
    let mut text = String::new();
    for d in detections {
        text.push_str(&serialize_detection(d, DEFAULT_DECIMALS));
        text.push('\n');
    }
    fs::write(path, text)
}
