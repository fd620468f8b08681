use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Three-way crisis emotion taxonomy.
///
/// The declaration order (Outrage, Hope, Despair) is the canonical class order
/// used for tie-breaking everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Outrage,
    Hope,
    Despair,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Outrage, Label::Hope, Label::Despair];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Outrage => "Outrage",
            Label::Hope => "Hope",
            Label::Despair => "Despair",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?} (expected Outrage, Hope or Despair)")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    /// Case-insensitive; also accepts the single-letter codes O/H/D.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "outrage" | "o" => Ok(Label::Outrage),
            "hope" | "h" => Ok(Label::Hope),
            "despair" | "d" => Ok(Label::Despair),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names_and_codes() {
        assert_eq!("outrage".parse::<Label>().unwrap(), Label::Outrage);
        assert_eq!(" Hope ".parse::<Label>().unwrap(), Label::Hope);
        assert_eq!("D".parse::<Label>().unwrap(), Label::Despair);
        assert!("anger".parse::<Label>().is_err());
    }

    #[test]
    fn canonical_order() {
        assert!(Label::Outrage < Label::Hope && Label::Hope < Label::Despair);
        assert_eq!(Label::ALL.map(Label::index), [0, 1, 2]);
    }
}
