//! Coherence rules.
//!
//! [`check_moca`] evaluates the shadow-write coherence rules that decide
//! which sequences are MCA-valid; [`check_extension`] is the same check
//! restricted to the rule instances touched by newly appended steps, used
//! by the explorer to prune. [`check_c11_oracle`] evaluates the classic C11
//! coherence axioms over `(hb, rf, mo, to)` as an independent validation.

mod c11;
mod moca;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

pub use c11::check_c11_oracle;
pub use moca::{check_extension, check_incremental, check_moca, Admission};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Shco,
    Shmo,
    Shmo1,
    Shmo2,
    Shmo3,
    Shrmo,
    Shto,
    Mo1,
    Mo2,
    Mo3,
    Mo4,
    To,
    Co,
}

impl Rule {
    pub const MOCA: [Rule; 7] = [
        Rule::Shco,
        Rule::Shmo,
        Rule::Shmo1,
        Rule::Shmo2,
        Rule::Shmo3,
        Rule::Shrmo,
        Rule::Shto,
    ];
    pub const C11: [Rule; 6] = [Rule::Mo1, Rule::Mo2, Rule::Mo3, Rule::Mo4, Rule::To, Rule::Co];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Shco => "shco",
            Rule::Shmo => "shmo",
            Rule::Shmo1 => "shmo1",
            Rule::Shmo2 => "shmo2",
            Rule::Shmo3 => "shmo3",
            Rule::Shrmo => "shrmo",
            Rule::Shto => "shto",
            Rule::Mo1 => "mo1",
            Rule::Mo2 => "mo2",
            Rule::Mo3 => "mo3",
            Rule::Mo4 => "mo4",
            Rule::To => "to",
            Rule::Co => "co",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A violated rule instance; `witness` lists the step indices that
/// instantiate the rule's quantifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub witness: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "witness", rename_all = "lowercase")]
pub enum RuleStatus {
    Pass,
    Fail(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoherenceVerdict {
    pub rules: BTreeMap<Rule, RuleStatus>,
}

impl CoherenceVerdict {
    fn from_violations(rules: &[Rule], violations: Vec<Violation>) -> Self {
        let mut map: BTreeMap<Rule, RuleStatus> =
            rules.iter().map(|r| (*r, RuleStatus::Pass)).collect();
        for v in violations {
            let slot = map.entry(v.rule).or_insert(RuleStatus::Pass);
            if *slot == RuleStatus::Pass {
                *slot = RuleStatus::Fail(v.witness);
            }
        }
        CoherenceVerdict { rules: map }
    }

    pub fn is_ok(&self) -> bool {
        self.rules.values().all(|s| *s == RuleStatus::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = (Rule, &[usize])> {
        self.rules.iter().filter_map(|(r, s)| match s {
            RuleStatus::Fail(w) => Some((*r, w.as_slice())),
            RuleStatus::Pass => None,
        })
    }

    pub fn status(&self, r: Rule) -> Option<&RuleStatus> {
        self.rules.get(&r)
    }
}
