use std::fmt;
use std::str::FromStr;

use crate::types::linalg::Vec3;
use crate::types::GraspCandidate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectPolicy {
    #[default]
    BestQuality,
    Nearest,
    First,
}

impl FromStr for SelectPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "best_quality" => Ok(SelectPolicy::BestQuality),
            "nearest" => Ok(SelectPolicy::Nearest),
            "first" => Ok(SelectPolicy::First),
            other => Err(format!(
                "unknown selection policy `{other}` (best_quality, nearest, first)"
            )),
        }
    }
}

impl fmt::Display for SelectPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectPolicy::BestQuality => "best_quality",
            SelectPolicy::Nearest => "nearest",
            SelectPolicy::First => "first",
        })
    }
}

/// Index of the chosen candidate; `None` for an empty list.
///
/// `best_quality` treats unscored candidates as worst, `nearest` measures
/// from `reference`. Ties keep the earliest candidate.
pub fn select_candidate(
    candidates: &[GraspCandidate],
    policy: SelectPolicy,
    reference: Vec3,
) -> Option<usize> {
    if candidates.is_empty() {
        return None;
    }
    let key = |c: &GraspCandidate| match policy {
        SelectPolicy::BestQuality => -c.quality().unwrap_or(f64::NEG_INFINITY),
        SelectPolicy::Nearest => c.pose().distance_to(&reference),
        SelectPolicy::First => 0.0,
    };
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if key(c) < key(&candidates[best]) {
            best = i;
        }
    }
    Some(best)
}
