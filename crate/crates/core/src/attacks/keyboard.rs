use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use super::AttackError;

const QWERTY: &str = include_str!("../../config/qwerty.toml");

/// Lowercase letter → physically adjacent lowercase letters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyboardAdjacency {
    neighbors: BTreeMap<char, Vec<char>>,
}

#[derive(Deserialize)]
struct AdjacencyFile {
    adjacency: BTreeMap<String, String>,
}

impl KeyboardAdjacency {
    /// US QWERTY layout.
    pub fn qwerty() -> Self {
        Self::from_toml(QWERTY).expect("bundled layout is valid")
    }

    /// Parses an `[adjacency]` table of `letter = "neighbours"` entries.
    pub fn from_toml(text: &str) -> Result<Self, AttackError> {
        let file: AdjacencyFile = toml::from_str(text).map_err(|e| AttackError::Adjacency(e.to_string()))?;
        let mut neighbors = BTreeMap::new();
        for (key, value) in file.adjacency {
            let mut chars = key.chars();
            let (Some(k), None) = (chars.next(), chars.next()) else {
                return Err(AttackError::Adjacency(format!("key `{key}` is not a single letter")));
            };
            let list: BTreeSet<char> = value.chars().collect();
            neighbors.insert(k, list.into_iter().collect());
        }
        Self::from_map(neighbors)
    }

    pub fn from_file(path: &Path) -> Result<Self, AttackError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Checks that every letter a–z has a neighbour and that adjacency is symmetric.
    pub fn from_map(neighbors: BTreeMap<char, Vec<char>>) -> Result<Self, AttackError> {
        for c in 'a'..='z' {
            match neighbors.get(&c) {
                Some(list) if !list.is_empty() => {}
                _ => return Err(AttackError::Adjacency(format!("letter `{c}` has no neighbours"))),
            }
        }
        for (&k, list) in &neighbors {
            if !k.is_ascii_lowercase() {
                return Err(AttackError::Adjacency(format!("key `{k}` is not a lowercase letter")));
            }
            for &n in list {
                if n == k || !n.is_ascii_lowercase() {
                    return Err(AttackError::Adjacency(format!("`{k}` lists invalid neighbour `{n}`")));
                }
                if !neighbors.get(&n).is_some_and(|back| back.contains(&k)) {
                    return Err(AttackError::Adjacency(format!("`{k}`→`{n}` has no reverse edge")));
                }
            }
        }
        Ok(KeyboardAdjacency { neighbors })
    }

    /// Neighbours of a lowercase letter.
    pub fn neighbors(&self, c: char) -> &[char] {
        self.neighbors.get(&c).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn are_adjacent(&self, a: char, b: char) -> bool {
        self.neighbors(a.to_ascii_lowercase()).contains(&b.to_ascii_lowercase())
    }
}

impl Default for KeyboardAdjacency {
    fn default() -> Self {
        Self::qwerty()
    }
}
