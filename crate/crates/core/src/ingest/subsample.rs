use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::{IngestError, SplitAssignment};
use crate::records::{DatasetKey, Split, StanceRecord};
use crate::seeding::derive_rng;

pub const LOW_RESOURCE_RATIOS: [f64; 4] = [0.10, 0.30, 0.70, 1.00];

/// `floor(x + 0.5)`, nudged so that products like `0.1 × 935` land on the
/// half they represent.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// Train ids kept at one low-resource ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowResourceSample {
    pub dataset: DatasetKey,
    pub ratio: f64,
    pub seed: u64,
    /// Sorted.
    pub ids: Vec<String>,
    /// Selected count per class.
    pub per_class: BTreeMap<String, usize>,
}

impl LowResourceSample {
    pub fn file_name(dataset: DatasetKey, ratio: f64) -> String {
        format!("{dataset}.train.r{:03}.json", round_half_up(ratio * 100.0))
    }

    pub fn write(&self, dir: &Path) -> Result<(), IngestError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join(Self::file_name(self.dataset, self.ratio)),
            serde_json::to_vec_pretty(self)?,
        )?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, IngestError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// Class-stratified selection of `round_half_up(ratio × N)` train records.
///
/// Per-class quotas are the floors of `n_c × k / N`, with the leftover slots
/// going to the largest remainders (ties in class-name order). Dev and test
/// are never touched.
pub fn subsample_train(
    split: &SplitAssignment,
    records: &[StanceRecord],
    ratio: f64,
    seed: u64,
) -> Result<LowResourceSample, IngestError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(IngestError::BadRatio(ratio));
    }
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records {
        match split.assignment.get(&r.id) {
            Some(Split::Train) => by_class.entry(r.gold.as_str()).or_default().push(r.id.as_str()),
            Some(_) => {}
            None => return Err(IngestError::Unassigned(r.id.clone())),
        }
    }
    let n: usize = by_class.values().map(Vec::len).sum();
    let k = round_half_up(ratio * n as f64).min(n);

    let mut quotas: Vec<(&str, usize, f64)> = by_class
        .iter()
        .map(|(c, ids)| {
            let exact = if n == 0 {
                0.0
            } else {
                ids.len() as f64 * k as f64 / n as f64
            };
            (*c, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut left = k - quotas.iter().map(|q| q.1).sum::<usize>();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2).then(a.cmp(&b)));
    for i in order {
        if left == 0 {
            break;
        }
        quotas[i].1 += 1;
        left -= 1;
    }

    let ratio_tag = format!("{ratio}");
    let mut ids = Vec::with_capacity(k);
    let mut per_class = BTreeMap::new();
    for (class, quota, _) in quotas {
        let mut pool = by_class[class].clone();
        pool.sort_unstable();
        let mut rng = derive_rng(seed, &["subsample", split.dataset.as_str(), &ratio_tag, class]);
        ids.extend(pool.choose_multiple(&mut rng, quota).map(|s| s.to_string()));
        per_class.insert(class.to_string(), quota);
    }
    ids.sort();
    Ok(LowResourceSample {
        dataset: split.dataset,
        ratio,
        seed,
        ids,
        per_class,
    })
}

/// Drops train records not selected by `sample`; dev and test pass through.
pub fn apply_sample(records: &[StanceRecord], sample: &LowResourceSample) -> Vec<StanceRecord> {
    records
        .iter()
        .filter(|r| r.split != Split::Train || sample.ids.binary_search(&r.id).is_ok())
        .cloned()
        .collect()
}
