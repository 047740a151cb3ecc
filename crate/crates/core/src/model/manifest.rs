use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classes::ClassList;
use super::ModelError;

pub const RATIO_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

/// One step in the chain of transforms that produced a generated image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum TransformStep {
    Rotate { degrees: f64 },
    Hue { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub transforms: Vec<TransformStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, path: impl Into<PathBuf>, width: u32, height: u32) -> Self {
        Self { id: id.into(), path: path.into(), width, height, split: Split::Unassigned, provenance: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const DEFAULT: SplitRatios = SplitRatios { train: 0.7, val: 0.2, test: 0.1 };

    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, ModelError> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ModelError::BadRatios(format!("{parts:?} has a negative or non-finite part")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > RATIO_TOLERANCE {
            return Err(ModelError::BadRatios(format!("{parts:?} sums to {sum}")));
        }
        Ok(())
    }

    /// Per-split counts for `n` records. Train and val are floored; test
    /// takes the remainder. When the test ratio is zero the remainder goes
    /// to train instead.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let floor = |r: f64| ((n as f64) * r + RATIO_TOLERANCE).floor() as usize;
        let mut train = floor(self.train).min(n);
        let val = floor(self.val).min(n - train);
        let mut test = n - train - val;
        if self.test == 0.0 {
            train += test;
            test = 0;
        }
        (train, val, test)
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub classes: ClassList,
    pub split_ratios: SplitRatios,
    pub seed: u64,
    pub records: Vec<ImageRecord>,
}

impl DatasetManifest {
    pub fn count(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == split).count()
    }

    pub fn record(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &ImageRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.split_ratios.validate()?;
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(ModelError::DuplicateId(r.id.clone()));
            }
            if r.width == 0 || r.height == 0 {
                return Err(ModelError::InvalidRecord(format!("{} has a zero dimension", r.id)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json()).map_err(|e| ModelError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|e| ModelError::Io(path.display().to_string(), e))?;
        let m: Self =
            serde_json::from_str(&text).map_err(|e| ModelError::InvalidManifest(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }
}

/// Assigns every record to train, val or test. Records are ordered by id,
/// shuffled with a ChaCha8 stream seeded by `seed`, then cut by
/// [`SplitRatios::counts`].
pub fn split_dataset(
    records: Vec<ImageRecord>,
    classes: ClassList,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetManifest, ModelError> {
    ratios.validate()?;
    if records.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut records = records;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = records.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(ModelError::DuplicateId(w[0].id.clone()));
    }

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let (n_train, n_val, _) = ratios.counts(records.len());
    for (rank, &idx) in order.iter().enumerate() {
        records[idx].split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }

    let manifest = DatasetManifest { classes, split_ratios: ratios, seed, records };
    manifest.validate()?;
    Ok(manifest)
}
