//! Spelling attack: per input, swap two neighbouring letters inside one word
//! and replace one letter of a different word with a keyboard neighbour.
//!
//! Only words of four or more ASCII letters qualify. A word is a maximal run of
//! letters inside a whitespace-delimited token; tokens containing digits,
//! hyphens, `@`, `#`, `_`, slashes or non-ASCII letters are skipped entirely so
//! mentions, hashtags and URLs stay intact. The swap never moves the first
//! letter; the substitution may hit any position and keeps the letter's case.

use std::ops::Range;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::keyboard::KeyboardAdjacency;

pub const MIN_WORD_LEN: usize = 4;

fn token_is_clean(token: &str) -> bool {
    !token.chars().any(|c| {
        c.is_ascii_digit() || matches!(c, '-' | '@' | '#' | '_' | '/' | '\\') || (c.is_alphabetic() && !c.is_ascii())
    })
}

/// Byte ranges of the words the attack may modify, in text order.
pub fn eligible_words(text: &str) -> Vec<Range<usize>> {
    let mut words = Vec::new();
    let bytes = text.as_bytes();
    for token in text.split_whitespace() {
        let start = token.as_ptr() as usize - text.as_ptr() as usize;
        let pos = start + token.len();
        if !token_is_clean(token) {
            continue;
        }
        let mut i = start;
        while i < pos {
            if bytes[i].is_ascii_alphabetic() {
                let run_start = i;
                while i < pos && bytes[i].is_ascii_alphabetic() {
                    i += 1;
                }
                if i - run_start >= MIN_WORD_LEN {
                    words.push(run_start..i);
                }
            } else {
                i += 1;
            }
        }
    }
    words
}

/// A single-word modification; offsets are relative to the word start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Edit {
    /// Exchange letters `pos` and `pos + 1`; `pos >= 1`.
    Swap { word: usize, pos: usize },
    /// Replace letter `pos` with `replacement` (case already applied).
    Substitute { word: usize, pos: usize, replacement: char },
}

/// Why an input received fewer than two edits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpellingFlag {
    NoEligibleWord,
    SingleEligibleWord,
    NoSwappableWord,
}

impl SpellingFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SpellingFlag::NoEligibleWord => "no_eligible_word",
            SpellingFlag::SingleEligibleWord => "single_eligible_word",
            SpellingFlag::NoSwappableWord => "no_swappable_word",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Misspelling {
    pub text: String,
    pub edits: Vec<Edit>,
    pub flag: Option<SpellingFlag>,
}

fn swap_positions(word: &[u8]) -> Vec<usize> {
    (1..word.len() - 1).filter(|&j| word[j] != word[j + 1]).collect()
}

/// Applies `edits` to `text`, whose eligible words are `words`.
///
/// Panics if an edit points outside its word; edits produced by
/// [`misspell_text`] always fit.
pub fn apply_edits(text: &str, words: &[Range<usize>], edits: &[Edit]) -> String {
    let mut bytes = text.as_bytes().to_vec();
    for edit in edits {
        match *edit {
            Edit::Swap { word, pos } => {
                let at = words[word].start + pos;
                assert!(pos >= 1 && at + 1 < words[word].end, "swap outside word");
                bytes.swap(at, at + 1);
            }
            Edit::Substitute { word, pos, replacement } => {
                let at = words[word].start + pos;
                assert!(
                    at < words[word].end && replacement.is_ascii_alphabetic(),
                    "bad substitution"
                );
                bytes[at] = replacement as u8;
            }
        }
    }
    String::from_utf8(bytes).expect("edits only touch ASCII letters")
}

/// Draws and applies the spelling edits for one input.
pub fn misspell_text<R: Rng + ?Sized>(text: &str, adjacency: &KeyboardAdjacency, rng: &mut R) -> Misspelling {
    let words = eligible_words(text);
    if words.is_empty() {
        return Misspelling {
            text: text.to_string(),
            edits: Vec::new(),
            flag: Some(SpellingFlag::NoEligibleWord),
        };
    }
    let bytes = text.as_bytes();
    let swappable: Vec<usize> = (0..words.len())
        .filter(|&w| !swap_positions(&bytes[words[w].clone()]).is_empty())
        .collect();

    let mut edits = Vec::with_capacity(2);
    let mut flag = None;
    let swapped = swappable.choose(rng).copied();
    if let Some(w) = swapped {
        let pos = *swap_positions(&bytes[words[w].clone()]).choose(rng).expect("non-empty");
        edits.push(Edit::Swap { word: w, pos });
    }

    let others: Vec<usize> = (0..words.len()).filter(|&w| Some(w) != swapped).collect();
    if swapped.is_some() && others.is_empty() {
        flag = Some(SpellingFlag::SingleEligibleWord);
    } else if let Some(&w) = others.choose(rng) {
        if swapped.is_none() {
            flag = Some(SpellingFlag::NoSwappableWord);
        }
        let span = &words[w];
        let pos = rng.random_range(0..span.len());
        let original = bytes[span.start + pos] as char;
        let choices = adjacency.neighbors(original.to_ascii_lowercase());
        let mut replacement = *choices.choose(rng).expect("every letter has neighbours");
        if original.is_ascii_uppercase() {
            replacement = replacement.to_ascii_uppercase();
        }
        edits.push(Edit::Substitute {
            word: w,
            pos,
            replacement,
        });
    }

    Misspelling {
        text: apply_edits(text, &words, &edits),
        edits,
        flag,
    }
}
