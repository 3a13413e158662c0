use serde::{Deserialize, Serialize};

use crate::records::StanceRecord;

/// Tautology prepended by the negation attack.
pub const NEGATION_PREFIX: &str = "and false is not true";

/// Which inputs of a sample an attack touches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputTargets {
    #[default]
    Both,
    CommentOnly,
}

pub fn negate_text(text: &str) -> String {
    format!("{NEGATION_PREFIX} {text}")
}

/// Prepends the tautology to the selected inputs. An absent topic stays absent.
/// Ids and labels are left to the caller.
pub fn negate(record: &StanceRecord, targets: InputTargets) -> StanceRecord {
    let mut out = record.clone();
    if targets == InputTargets::Both {
        out.topic = record.topic.as_deref().map(negate_text);
    }
    out.comment = negate_text(&record.comment);
    out
}
