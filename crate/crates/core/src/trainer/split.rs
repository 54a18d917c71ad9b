use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TrainError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitMode {
    /// Train / validation / test.
    #[default]
    EightOneOne,
    /// Train / test, with the last tenth of each class's training rows held out for validation.
    NineOne,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::EightOneOne => "8:1:1",
            SplitMode::NineOne => "9:1",
        })
    }
}

impl FromStr for SplitMode {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "8:1:1" => Ok(SplitMode::EightOneOne),
            "9:1" => Ok(SplitMode::NineOne),
            other => Err(TrainError::InvalidConfig(format!("split mode must be 8:1:1 or 9:1, got {other:?}"))),
        }
    }
}

impl Serialize for SplitMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SplitMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Sorted, disjoint row indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// One tenth, rounded to nearest, and at least 1.
fn tenth(n: usize) -> usize {
    ((n + 5) / 10).max(1)
}

/// Stratified split: each class is shuffled with its own stream derived from `seed`.
pub fn split(labels: &[usize], class_count: usize, mode: SplitMode, seed: u64) -> Result<Splits, TrainError> {
    if mode == SplitMode::EightOneOne && labels.len() < 10 {
        return Err(TrainError::TooFewSamples(labels.len()));
    }
    let mut by_class = vec![Vec::new(); class_count];
    for (i, &l) in labels.iter().enumerate() {
        if l >= class_count {
            return Err(TrainError::InvalidConfig(format!("label {l} outside [0, {class_count})")));
        }
        by_class[l].push(i);
    }
    let mut out = Splits { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (c, mut rows) in by_class.into_iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 3 {
            return Err(TrainError::ClassTooSmall { class: c, count: rows.len() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64 + 1);
        rows.shuffle(&mut rng);
        let n = rows.len();
        let n_test = tenth(n);
        let n_val = match mode {
            SplitMode::EightOneOne => tenth(n),
            SplitMode::NineOne => tenth(n - n_test),
        };
        out.test.extend_from_slice(&rows[..n_test]);
        let rest = &rows[n_test..];
        let cut = rest.len() - n_val;
        out.train.extend_from_slice(&rest[..cut]);
        out.val.extend_from_slice(&rest[cut..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}
