//! Assessment to cut-type decision table.
//!
//! The table is an ordered list of `condition -> decision` rules; the first
//! rule whose condition holds wins and an assessment matching no rule is
//! skipped. The default table:
//!
//! | # | condition            | holds when                                                      | decision        |
//! |---|----------------------|-----------------------------------------------------------------|-----------------|
//! | 1 | `crowded_new`        | new region closer than `adjacency_min` to its neighbours        | clean cut       |
//! | 2 | `ventral_new`        | new region growing from the ventral side of the cordon          | base-bud cut    |
//! | 3 | `replacement`        | basal cane grows from an arm                                    | replacement cut |
//! | 4 | `vigorous_vertical`  | basal cane vertical with vigor inside `[vigor_min, vigor_max]`  | spur cut        |
//! | 5 | `weak_or_leaning`    | basal cane not vertical, or vigor outside the range             | base-bud cut    |
//! | 6 | `no_canes`           | region carries no cane                                          | skip            |
//! | 7 | `always`             | unconditional                                                   | spur cut        |
//!
//! In config files the table is written as `cut_rules = crowded_new:clean_cut, ...`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assess::{GrowthDirection, Location, RegionAssessment};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutType {
    CleanCut,
    BaseBudCut,
    SpurCut,
    ReplacementCut,
}

impl CutType {
    pub fn name(self) -> &'static str {
        match self {
            CutType::CleanCut => "clean_cut",
            CutType::BaseBudCut => "base_bud_cut",
            CutType::SpurCut => "spur_cut",
            CutType::ReplacementCut => "replacement_cut",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutDecision {
    Cut(CutType),
    Skip,
}

impl fmt::Display for CutDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutDecision::Cut(c) => f.write_str(c.name()),
            CutDecision::Skip => f.write_str("skip"),
        }
    }
}

impl FromStr for CutDecision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "clean_cut" => CutDecision::Cut(CutType::CleanCut),
            "base_bud_cut" => CutDecision::Cut(CutType::BaseBudCut),
            "spur_cut" => CutDecision::Cut(CutType::SpurCut),
            "replacement_cut" => CutDecision::Cut(CutType::ReplacementCut),
            "skip" => CutDecision::Skip,
            other => return Err(Error::config("cut_rules", format!("unknown decision `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleCondition {
    CrowdedNew,
    VentralNew,
    Replacement,
    VigorousVertical,
    WeakOrLeaning,
    NoCanes,
    Always,
}

impl RuleCondition {
    pub fn name(self) -> &'static str {
        match self {
            RuleCondition::CrowdedNew => "crowded_new",
            RuleCondition::VentralNew => "ventral_new",
            RuleCondition::Replacement => "replacement",
            RuleCondition::VigorousVertical => "vigorous_vertical",
            RuleCondition::WeakOrLeaning => "weak_or_leaning",
            RuleCondition::NoCanes => "no_canes",
            RuleCondition::Always => "always",
        }
    }

    pub fn holds(self, a: &RegionAssessment, cfg: &PipelineConfig) -> bool {
        let has_basal = a.cane_count > 0;
        let vigor_in_range = a.vigor_m.map(|v| v >= cfg.vigor_min && v <= cfg.vigor_max);
        match self {
            RuleCondition::CrowdedNew => a.is_new && a.adjacent_distance_m < cfg.adjacency_min,
            RuleCondition::VentralNew => a.is_new && a.location == Location::Ventral,
            RuleCondition::Replacement => a.is_replacement && has_basal,
            RuleCondition::VigorousVertical => {
                has_basal && a.growth == GrowthDirection::Vertical && vigor_in_range == Some(true)
            }
            RuleCondition::WeakOrLeaning => {
                has_basal && (a.growth == GrowthDirection::NotVertical || vigor_in_range == Some(false))
            }
            RuleCondition::NoCanes => a.cane_count == 0,
            RuleCondition::Always => true,
        }
    }
}

impl FromStr for RuleCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "crowded_new" => RuleCondition::CrowdedNew,
            "ventral_new" => RuleCondition::VentralNew,
            "replacement" => RuleCondition::Replacement,
            "vigorous_vertical" => RuleCondition::VigorousVertical,
            "weak_or_leaning" => RuleCondition::WeakOrLeaning,
            "no_canes" => RuleCondition::NoCanes,
            "always" => RuleCondition::Always,
            other => return Err(Error::config("cut_rules", format!("unknown condition `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CutRule {
    pub when: RuleCondition,
    pub then: CutDecision,
}

impl fmt::Display for CutRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.when.name(), self.then)
    }
}

pub fn default_rules() -> Vec<CutRule> {
    use CutType::*;
    use RuleCondition::*;
    [
        (CrowdedNew, CutDecision::Cut(CleanCut)),
        (VentralNew, CutDecision::Cut(BaseBudCut)),
        (Replacement, CutDecision::Cut(ReplacementCut)),
        (VigorousVertical, CutDecision::Cut(SpurCut)),
        (WeakOrLeaning, CutDecision::Cut(BaseBudCut)),
        (NoCanes, CutDecision::Skip),
        (Always, CutDecision::Cut(SpurCut)),
    ]
    .into_iter()
    .map(|(when, then)| CutRule { when, then })
    .collect()
}

/// Parse `cond:decision, cond:decision, ...`.
pub fn parse_rules(text: &str) -> Result<Vec<CutRule>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (when, then) = item
                .split_once(':')
                .ok_or_else(|| Error::config("cut_rules", format!("expected `condition:decision`, got `{item}`")))?;
            Ok(CutRule { when: when.trim().parse()?, then: then.trim().parse()? })
        })
        .collect()
}

pub fn format_rules(rules: &[CutRule]) -> String {
    rules.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// First matching rule's decision, or `Skip` when nothing matches.
pub fn select_cut(a: &RegionAssessment, cfg: &PipelineConfig) -> CutDecision {
    cfg.cut_rules.iter().find(|r| r.when.holds(a, cfg)).map(|r| r.then).unwrap_or(CutDecision::Skip)
}
