use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::records::{DatasetKey, Split, SplitSizes, StanceRecord};
use crate::seeding::derive_rng;

/// How a dataset's train/dev/test assignment is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SplitRule {
    /// Keep the split each record was read with.
    Published,
    /// Move `round(fraction × |train|)` seeded train records to dev.
    DevFromTrain { fraction: f64 },
    /// Move seeded train records to dev until dev holds `target` records.
    EnlargeDev { target: usize },
    /// Fixed topic lists per split; every topic must be listed.
    TopicPartition {
        train: Vec<String>,
        dev: Vec<String>,
        test: Vec<String>,
    },
    /// Seeded greedy assignment of whole topics towards the given weights.
    TopicDisjoint { train: f64, dev: f64, test: f64 },
    /// Seeded record-level split with sizes proportional to the weights.
    Random { train: f64, dev: f64, test: f64 },
}

impl SplitRule {
    pub fn name(&self) -> &'static str {
        match self {
            SplitRule::Published => "published",
            SplitRule::DevFromTrain { .. } => "dev_from_train",
            SplitRule::EnlargeDev { .. } => "enlarge_dev",
            SplitRule::TopicPartition { .. } => "topic_partition",
            SplitRule::TopicDisjoint { .. } => "topic_disjoint",
            SplitRule::Random { .. } => "random",
        }
    }

    pub fn is_topic_based(&self) -> bool {
        matches!(self, SplitRule::TopicPartition { .. } | SplitRule::TopicDisjoint { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub dataset: DatasetKey,
    pub assignment: BTreeMap<String, Split>,
    pub seed: u64,
    pub rule: String,
}

impl SplitAssignment {
    pub fn sizes(&self) -> SplitSizes {
        let mut sizes = SplitSizes::default();
        for s in self.assignment.values() {
            sizes.bump(*s);
        }
        sizes
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.assignment
            .iter()
            .filter(move |(_, s)| **s == split)
            .map(|(id, _)| id.as_str())
    }
}

/// Grouping key for topic rules: `meta.group` if present, else the topic,
/// trimmed and lowercased.
pub fn topic_key(record: &StanceRecord) -> Option<String> {
    record
        .meta
        .get("group")
        .map(String::as_str)
        .or(record.topic.as_deref())
        .map(|t| t.trim().to_lowercase())
}

fn largest_remainder(total: usize, weights: [f64; 3]) -> [usize; 3] {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: [usize; 3] = [0; 3];
    for i in 0..3 {
        counts[i] = exact[i].floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = total - counts.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn move_train_to_dev(
    records: &[&StanceRecord],
    assignment: &mut BTreeMap<String, Split>,
    count: usize,
    rng: &mut impl rand::Rng,
) {
    let train: Vec<&str> = records
        .iter()
        .filter(|r| r.split == Split::Train)
        .map(|r| r.id.as_str())
        .collect();
    for id in train.choose_multiple(rng, count.min(train.len())) {
        assignment.insert(id.to_string(), Split::Dev);
    }
}

fn grouped<'a>(records: &[&'a StanceRecord]) -> Result<BTreeMap<String, Vec<&'a StanceRecord>>, IngestError> {
    let mut groups: BTreeMap<String, Vec<&StanceRecord>> = BTreeMap::new();
    for r in records {
        let key = topic_key(r).ok_or_else(|| IngestError::MissingTopic(r.id.clone()))?;
        groups.entry(key).or_default().push(r);
    }
    Ok(groups)
}

/// Assigns every record of one dataset to a split. The result depends only on
/// the record set, the rule and the seed, not on input order.
pub fn generate_split(
    dataset: DatasetKey,
    records: &[StanceRecord],
    rule: &SplitRule,
    seed: u64,
) -> Result<SplitAssignment, IngestError> {
    if let Some(r) = records.iter().find(|r| r.dataset != dataset) {
        return Err(IngestError::MixedDatasets(dataset, r.dataset));
    }
    let mut sorted: Vec<&StanceRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = derive_rng(seed, &["split", dataset.as_str(), rule.name()]);
    let mut assignment: BTreeMap<String, Split> = sorted.iter().map(|r| (r.id.clone(), r.split)).collect();

    match rule {
        SplitRule::Published => {}
        SplitRule::DevFromTrain { fraction } => {
            let n_train = sorted.iter().filter(|r| r.split == Split::Train).count();
            let count = super::round_half_up(fraction * n_train as f64);
            move_train_to_dev(&sorted, &mut assignment, count, &mut rng);
        }
        SplitRule::EnlargeDev { target } => {
            let n_dev = sorted.iter().filter(|r| r.split == Split::Dev).count();
            move_train_to_dev(&sorted, &mut assignment, target.saturating_sub(n_dev), &mut rng);
        }
        SplitRule::TopicPartition { train, dev, test } => {
            let groups = grouped(&sorted)?;
            if groups.len() < 3 {
                return Err(IngestError::InsufficientTopics {
                    dataset,
                    needed: 3,
                    found: groups.len(),
                });
            }
            let mut lookup = BTreeMap::new();
            for (split, topics) in [(Split::Train, train), (Split::Dev, dev), (Split::Test, test)] {
                for t in topics {
                    let key = t.trim().to_lowercase();
                    if !groups.contains_key(&key) {
                        return Err(IngestError::EmptyTopic(t.clone()));
                    }
                    lookup.insert(key, split);
                }
            }
            for (topic, members) in &groups {
                let split = *lookup
                    .get(topic)
                    .ok_or_else(|| IngestError::UnassignedTopic(topic.clone()))?;
                for r in members {
                    assignment.insert(r.id.clone(), split);
                }
            }
        }
        SplitRule::TopicDisjoint { train, dev, test } => {
            let groups = grouped(&sorted)?;
            if groups.len() < 3 {
                return Err(IngestError::InsufficientTopics {
                    dataset,
                    needed: 3,
                    found: groups.len(),
                });
            }
            let mut topics: Vec<(&String, &Vec<&StanceRecord>)> = groups.iter().collect();
            topics.shuffle(&mut rng);
            topics.sort_by_key(|t| std::cmp::Reverse(t.1.len()));
            let target = largest_remainder(sorted.len(), [*train, *dev, *test]);
            let mut filled = [0usize; 3];
            let mut used = [false; 3];
            for (i, (_, members)) in topics.iter().enumerate() {
                let remaining = topics.len() - i;
                let empty: Vec<usize> = (0..3).filter(|&s| !used[s]).collect();
                let candidates: Vec<usize> = if remaining <= empty.len() {
                    empty
                } else {
                    (0..3).collect()
                };
                let pick = *candidates
                    .iter()
                    .max_by(|&&a, &&b| {
                        let da = target[a] as i64 - filled[a] as i64;
                        let db = target[b] as i64 - filled[b] as i64;
                        da.cmp(&db).then(b.cmp(&a))
                    })
                    .expect("three splits");
                filled[pick] += members.len();
                used[pick] = true;
                for r in members.iter() {
                    assignment.insert(r.id.clone(), Split::ALL[pick]);
                }
            }
        }
        SplitRule::Random { train, dev, test } => {
            let counts = largest_remainder(sorted.len(), [*train, *dev, *test]);
            let mut shuffled = sorted.clone();
            shuffled.shuffle(&mut rng);
            let mut it = shuffled.into_iter();
            for (split, n) in Split::ALL.into_iter().zip(counts) {
                for r in it.by_ref().take(n) {
                    assignment.insert(r.id.clone(), split);
                }
            }
        }
    }
    Ok(SplitAssignment {
        dataset,
        assignment,
        seed,
        rule: rule.name().to_string(),
    })
}

/// Copies of `records` with the split taken from `assignment`.
pub fn apply_assignment(
    records: &[StanceRecord],
    assignment: &SplitAssignment,
) -> Result<Vec<StanceRecord>, IngestError> {
    records
        .iter()
        .map(|r| {
            let split = assignment
                .assignment
                .get(&r.id)
                .ok_or_else(|| IngestError::Unassigned(r.id.clone()))?;
            Ok(StanceRecord {
                split: *split,
                ..r.clone()
            })
        })
        .collect()
}

/// Summary written next to the split files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset: DatasetKey,
    pub rule: String,
    pub seed: u64,
    pub counts: SplitSizes,
    /// Topics per split, for topic-based rules.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub topics: BTreeMap<Split, BTreeSet<String>>,
}

impl SplitManifest {
    pub fn new(assignment: &SplitAssignment, records: &[StanceRecord], with_topics: bool) -> Self {
        let mut topics: BTreeMap<Split, BTreeSet<String>> = BTreeMap::new();
        if with_topics {
            for r in records {
                if let (Some(s), Some(t)) = (assignment.assignment.get(&r.id), topic_key(r)) {
                    topics.entry(*s).or_default().insert(t);
                }
            }
        }
        SplitManifest {
            dataset: assignment.dataset,
            rule: assignment.rule.clone(),
            seed: assignment.seed,
            counts: assignment.sizes(),
            topics,
        }
    }

    pub fn file_name(dataset: DatasetKey) -> String {
        format!("{dataset}.split.json")
    }
}

pub fn write_manifest(dir: &Path, manifest: &SplitManifest) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join(SplitManifest::file_name(manifest.dataset)),
        serde_json::to_vec_pretty(manifest)?,
    )?;
    Ok(())
}

pub fn read_manifest(dir: &Path, dataset: DatasetKey) -> Result<SplitManifest, IngestError> {
    Ok(serde_json::from_slice(&std::fs::read(
        dir.join(SplitManifest::file_name(dataset)),
    )?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topical(dataset: DatasetKey, topics: &[(&str, usize)], split: Split) -> Vec<StanceRecord> {
        let mut out = Vec::new();
        for (t, n) in topics {
            for _ in 0..*n {
                let i = out.len();
                let mut r = StanceRecord::new(dataset, split, i, Some(t.to_string()), "text", "pro");
                r.id = crate::records::record_id(dataset, "raw", i);
                out.push(r);
            }
        }
        out
    }

    #[test]
    fn dev_from_train_rounds() {
        let mut records = topical(DatasetKey::Ibmcs, &[("t", 1039)], Split::Train);
        records.extend(
            topical(DatasetKey::Ibmcs, &[("u", 5)], Split::Test)
                .into_iter()
                .map(|mut r| {
                    r.id.push('x');
                    r
                }),
        );
        let a = generate_split(
            DatasetKey::Ibmcs,
            &records,
            &SplitRule::DevFromTrain { fraction: 0.10 },
            1,
        )
        .unwrap();
        assert_eq!((a.sizes().train, a.sizes().dev, a.sizes().test), (935, 104, 5));
        let mut reversed = records.clone();
        reversed.reverse();
        assert_eq!(
            a,
            generate_split(
                DatasetKey::Ibmcs,
                &reversed,
                &SplitRule::DevFromTrain { fraction: 0.10 },
                1
            )
            .unwrap()
        );
        assert_ne!(
            a,
            generate_split(
                DatasetKey::Ibmcs,
                &records,
                &SplitRule::DevFromTrain { fraction: 0.10 },
                2
            )
            .unwrap()
        );
    }

    #[test]
    fn topic_partition_and_errors() {
        let records = topical(
            DatasetKey::Scd,
            &[("abortion", 5), ("gay rights", 4), ("marijuana", 3), ("obama", 2)],
            Split::Train,
        );
        let rule = SplitRule::TopicPartition {
            train: vec!["abortion".into(), "Gay Rights".into()],
            dev: vec!["marijuana".into()],
            test: vec!["obama".into()],
        };
        let a = generate_split(DatasetKey::Scd, &records, &rule, 0).unwrap();
        assert_eq!((a.sizes().train, a.sizes().dev, a.sizes().test), (9, 3, 2));

        let single = topical(DatasetKey::Argmin, &[("abortion", 10)], Split::Train);
        let err = generate_split(DatasetKey::Argmin, &single, &rule, 0).unwrap_err();
        assert!(err.to_string().contains("insufficient topics"), "{err}");

        let extra = topical(
            DatasetKey::Scd,
            &[("abortion", 1), ("marijuana", 1), ("obama", 1), ("guns", 1)],
            Split::Train,
        );
        assert!(matches!(
            generate_split(DatasetKey::Scd, &extra, &rule, 0),
            Err(IngestError::EmptyTopic(_))
        ));
    }

    #[test]
    fn topic_disjoint_fills_every_split() {
        let topics: Vec<(String, usize)> = (0..12).map(|i| (format!("topic{i}"), 10 + i * 7)).collect();
        let refs: Vec<(&str, usize)> = topics.iter().map(|(t, n)| (t.as_str(), *n)).collect();
        let records = topical(DatasetKey::Iac1, &refs, Split::Train);
        let rule = SplitRule::TopicDisjoint {
            train: 4227.0,
            dev: 454.0,
            test: 924.0,
        };
        let a = generate_split(DatasetKey::Iac1, &records, &rule, 3).unwrap();
        let m = SplitManifest::new(&a, &records, true);
        assert_eq!(m.topics.len(), 3);
        let all: usize = m.topics.values().map(BTreeSet::len).sum();
        assert_eq!(all, 12);
        assert_eq!(a.sizes().total(), records.len());
    }

    #[test]
    fn random_split_sizes() {
        let records = topical(DatasetKey::Snopes, &[("t", 19_438)], Split::Train);
        let rule = SplitRule::Random {
            train: 14_416.0,
            dev: 1_868.0,
            test: 3_154.0,
        };
        let a = generate_split(DatasetKey::Snopes, &records, &rule, 0).unwrap();
        assert_eq!(a.sizes(), DatasetKey::Snopes.split_sizes());
    }
}
