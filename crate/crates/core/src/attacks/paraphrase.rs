use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::records::{read_jsonl, write_jsonl, StanceRecord};

use super::AttackError;

/// One line of a paraphrase file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseLine {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paraphrase {
    pub topic: Option<String>,
    pub comment: String,
}

/// Externally produced paraphrases keyed by original record id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParaphraseMap {
    entries: BTreeMap<String, Paraphrase>,
}

impl ParaphraseMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, topic: Option<String>, comment: impl Into<String>) {
        self.entries.insert(
            id.into(),
            Paraphrase {
                topic,
                comment: comment.into(),
            },
        );
    }

    pub fn get(&self, id: &str) -> Option<&Paraphrase> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads `{id, topic?, comment}` lines; duplicate ids are rejected.
    pub fn from_jsonl(path: &Path) -> Result<Self, AttackError> {
        let lines: Vec<ParaphraseLine> = read_jsonl(path)?;
        let mut map = ParaphraseMap::new();
        for line in lines {
            if map.entries.contains_key(&line.id) {
                return Err(AttackError::DuplicateParaphrase(line.id));
            }
            map.insert(line.id, line.topic, line.comment);
        }
        Ok(map)
    }

    pub fn to_jsonl(&self, path: &Path) -> Result<(), AttackError> {
        let lines: Vec<ParaphraseLine> = self
            .entries
            .iter()
            .map(|(id, p)| ParaphraseLine {
                id: id.clone(),
                topic: p.topic.clone(),
                comment: p.comment.clone(),
            })
            .collect();
        write_jsonl(path, &lines)?;
        Ok(())
    }

    /// Ids in the map that are not part of `test`.
    pub fn foreign_ids(&self, test: &[StanceRecord]) -> Vec<String> {
        let ids: HashSet<&str> = test.iter().map(|r| r.id.as_str()).collect();
        self.entries
            .keys()
            .filter(|k| !ids.contains(k.as_str()))
            .cloned()
            .collect()
    }
}

/// Replaces the inputs of `record` with its paraphrase. A paraphrase without
/// a topic leaves the topic untouched.
pub fn apply_paraphrase(record: &StanceRecord, map: &ParaphraseMap) -> Result<StanceRecord, AttackError> {
    let p = map
        .get(&record.id)
        .ok_or_else(|| AttackError::Uncovered(vec![record.id.clone()]))?;
    let mut out = record.clone();
    if p.topic.is_some() {
        out.topic = p.topic.clone();
    }
    out.comment = p.comment.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{DatasetKey, Split};

    fn record() -> StanceRecord {
        StanceRecord::new(
            DatasetKey::Ibmcs,
            Split::Test,
            4,
            Some("atheism is the only way".into()),
            "Atheism is a superior basis for ethics",
            "pro",
        )
    }

    #[test]
    fn substitutes_inputs() {
        let r = record();
        let mut map = ParaphraseMap::new();
        map.insert(r.id.clone(), None, "Atheism is a better foundation for ethics");
        let out = apply_paraphrase(&r, &map).unwrap();
        assert_eq!(out.comment, "Atheism is a better foundation for ethics");
        assert_eq!(out.topic, r.topic);
        assert_eq!(out.gold, "pro");

        map.insert(r.id.clone(), Some("atheism is the single path".into()), "x y");
        assert_eq!(
            apply_paraphrase(&r, &map).unwrap().topic.as_deref(),
            Some("atheism is the single path")
        );
    }

    #[test]
    fn uncovered_id() {
        let err = apply_paraphrase(&record(), &ParaphraseMap::new()).unwrap_err();
        assert!(matches!(err, AttackError::Uncovered(ids) if ids.len() == 1));
    }

    #[test]
    fn jsonl_io() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"comment\":\"x\"}\n{\"id\":\"b\",\"topic\":\"t\",\"comment\":\"y\"}\n",
        )
        .unwrap();
        let map = ParaphraseMap::from_jsonl(&path).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.get("b").unwrap().topic.as_deref(), Some("t"));
        assert_eq!(map.foreign_ids(&[record()]), ["a", "b"]);

        std::fs::write(
            &path,
            "{\"id\":\"a\",\"comment\":\"x\"}\n{\"id\":\"a\",\"comment\":\"y\"}\n",
        )
        .unwrap();
        assert!(matches!(
            ParaphraseMap::from_jsonl(&path),
            Err(AttackError::DuplicateParaphrase(_))
        ));
    }
}
