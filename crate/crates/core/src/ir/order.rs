use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// C11 memory order annotation attached to every shared access and fence.
///
/// Strictness forms the lattice `na ⊑ rlx ⊑ {acq, rel} ⊑ acq_rel ⊑ sc`,
/// with `acq` and `rel` incomparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryOrder {
    Na,
    Rlx,
    Acq,
    Rel,
    AcqRel,
    Sc,
}

impl MemoryOrder {
    pub const ALL: [MemoryOrder; 6] = [
        MemoryOrder::Na,
        MemoryOrder::Rlx,
        MemoryOrder::Acq,
        MemoryOrder::Rel,
        MemoryOrder::AcqRel,
        MemoryOrder::Sc,
    ];

    fn rank(self) -> u8 {
        match self {
            MemoryOrder::Na => 0,
            MemoryOrder::Rlx => 1,
            MemoryOrder::Acq | MemoryOrder::Rel => 2,
            MemoryOrder::AcqRel => 3,
            MemoryOrder::Sc => 4,
        }
    }

    /// `self ⊑ other`: `other` is at least as strict as `self`.
    pub fn weaker_or_eq(self, other: MemoryOrder) -> bool {
        self == other || self.rank() < other.rank()
    }

    /// `self ⊏ other`.
    pub fn strictly_weaker(self, other: MemoryOrder) -> bool {
        self != other && self.weaker_or_eq(other)
    }

    /// `self ⊒ other`.
    pub fn at_least(self, other: MemoryOrder) -> bool {
        other.weaker_or_eq(self)
    }

    pub fn is_acquire(self) -> bool {
        self.at_least(MemoryOrder::Acq)
    }

    pub fn is_release(self) -> bool {
        self.at_least(MemoryOrder::Rel)
    }

    pub fn is_atomic(self) -> bool {
        self != MemoryOrder::Na
    }

    /// Orders `m'` with `m' ⊒ self`.
    pub fn stricter_set(self) -> Vec<MemoryOrder> {
        Self::ALL.into_iter().filter(|m| m.at_least(self)).collect()
    }

    /// Orders `m'` with `m' ⊑ self`.
    pub fn weaker_set(self) -> Vec<MemoryOrder> {
        Self::ALL.into_iter().filter(|m| m.weaker_or_eq(self)).collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryOrder::Na => "na",
            MemoryOrder::Rlx => "rlx",
            MemoryOrder::Acq => "acq",
            MemoryOrder::Rel => "rel",
            MemoryOrder::AcqRel => "acq_rel",
            MemoryOrder::Sc => "sc",
        }
    }
}

impl fmt::Display for MemoryOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MemoryOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "na" => MemoryOrder::Na,
            "rlx" => MemoryOrder::Rlx,
            "acq" => MemoryOrder::Acq,
            "rel" => MemoryOrder::Rel,
            "acq_rel" => MemoryOrder::AcqRel,
            "sc" => MemoryOrder::Sc,
            other => return Err(format!("unknown memory order `{other}`")),
        })
    }
}
