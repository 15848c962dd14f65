use core::fmt;
use core::str::FromStr;

use crate::Error;

/// The three evaluation input configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Scenario {
    /// Candidate against a reference summary.
    #[cfg_attr(feature = "serde", serde(rename = "SR"))]
    SumRef,
    /// Candidate against its source document.
    #[cfg_attr(feature = "serde", serde(rename = "SD"))]
    SumDoc,
    /// Candidate against document and reference.
    #[cfg_attr(feature = "serde", serde(rename = "SDR"))]
    SumDocRef,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::SumRef, Scenario::SumDoc, Scenario::SumDocRef];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::SumRef => "SR",
            Scenario::SumDoc => "SD",
            Scenario::SumDocRef => "SDR",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn needs_reference(self) -> bool {
        matches!(self, Scenario::SumRef | Scenario::SumDocRef)
    }

    pub fn needs_document(self) -> bool {
        matches!(self, Scenario::SumDoc | Scenario::SumDocRef)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SR" | "sr" | "sum-ref" => Ok(Scenario::SumRef),
            "SD" | "sd" | "sum-doc" => Ok(Scenario::SumDoc),
            "SDR" | "sdr" | "sum-doc-ref" => Ok(Scenario::SumDocRef),
            other => Err(Error::InvalidArgument(alloc::format!(
                "unknown scenario {other:?} (expected SR, SD or SDR)"
            ))),
        }
    }
}
