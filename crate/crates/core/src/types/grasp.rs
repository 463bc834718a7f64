use serde::{Deserialize, Serialize};

use super::{invariant, Pose6DoF, TypeError};

/// How a candidate's quality score should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityKind {
    /// Probability in `[0, 1]`.
    SuccessProbability,
    /// Carried opaquely; no range is assumed.
    ForceClosure,
    Heuristic,
    None,
}

/// Image-plane grasp: center `(x, y)` in pixels, extents in pixels, angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRectangle")]
pub struct GraspRectangle {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    pub angle: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRectangle {
    x: f64,
    y: f64,
    width: f64,
    height: f64,
    angle: f64,
}

impl TryFrom<RawRectangle> for GraspRectangle {
    type Error = TypeError;

    fn try_from(r: RawRectangle) -> Result<Self, Self::Error> {
        GraspRectangle::new(r.x, r.y, r.width, r.height, r.angle)
    }
}

impl GraspRectangle {
    pub fn new(x: f64, y: f64, width: f64, height: f64, angle: f64) -> Result<Self, TypeError> {
        if ![x, y, width, height, angle].iter().all(|v| v.is_finite()) {
            return Err(TypeError::NonFinite("rectangle"));
        }
        if width <= 0.0 || height <= 0.0 {
            return invariant(format!(
                "rectangle extents must be positive, got {width}x{height}"
            ));
        }
        Ok(GraspRectangle {
            x,
            y,
            width,
            height,
            angle,
        })
    }
}

/// A rectangle plus the optional score a depth-image planner attached to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScored", into = "RawScored")]
pub struct ScoredRectangle {
    rectangle: GraspRectangle,
    quality: Option<f64>,
    quality_kind: QualityKind,
}

impl ScoredRectangle {
    pub fn new(
        rectangle: GraspRectangle,
        quality: Option<f64>,
        kind: QualityKind,
    ) -> Result<Self, TypeError> {
        check_quality(quality, kind)?;
        Ok(ScoredRectangle {
            rectangle,
            quality,
            quality_kind: kind,
        })
    }

    pub fn rectangle(&self) -> &GraspRectangle {
        &self.rectangle
    }

    pub fn quality(&self) -> Option<f64> {
        self.quality
    }

    pub fn quality_kind(&self) -> QualityKind {
        self.quality_kind
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScored {
    rectangle: GraspRectangle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quality: Option<f64>,
    quality_kind: QualityKind,
}

impl TryFrom<RawScored> for ScoredRectangle {
    type Error = TypeError;
    fn try_from(r: RawScored) -> Result<Self, Self::Error> {
        ScoredRectangle::new(r.rectangle, r.quality, r.quality_kind)
    }
}

impl From<ScoredRectangle> for RawScored {
    fn from(s: ScoredRectangle) -> Self {
        RawScored {
            rectangle: s.rectangle,
            quality: s.quality,
            quality_kind: s.quality_kind,
        }
    }
}

fn check_quality(quality: Option<f64>, kind: QualityKind) -> Result<(), TypeError> {
    match (quality, kind) {
        (None, QualityKind::None) => Ok(()),
        (Some(_), QualityKind::None) => invariant("quality present but quality_kind is none"),
        (None, k) => invariant(format!("quality_kind {k:?} requires a quality value")),
        (Some(q), _) if !q.is_finite() => Err(TypeError::NonFinite("quality")),
        (Some(q), QualityKind::SuccessProbability) if !(0.0..=1.0).contains(&q) => {
            invariant(format!("success probability {q} outside [0, 1]"))
        }
        _ => Ok(()),
    }
}

/// The normalized output of every grasp planner: a 6-DoF pose plus an optional score.
///
/// Invariants are checked at construction: the quality is present iff the
/// kind is not `none`, and success probabilities lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCandidate", into = "RawCandidate")]
pub struct GraspCandidate {
    pose: Pose6DoF,
    quality: Option<f64>,
    quality_kind: QualityKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCandidate {
    pose: Pose6DoF,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quality: Option<f64>,
    quality_kind: QualityKind,
}

impl TryFrom<RawCandidate> for GraspCandidate {
    type Error = TypeError;
    fn try_from(r: RawCandidate) -> Result<Self, Self::Error> {
        GraspCandidate::new(r.pose, r.quality, r.quality_kind)
    }
}

impl From<GraspCandidate> for RawCandidate {
    fn from(c: GraspCandidate) -> Self {
        RawCandidate {
            pose: c.pose,
            quality: c.quality,
            quality_kind: c.quality_kind,
        }
    }
}

impl GraspCandidate {
    pub fn new(pose: Pose6DoF, quality: Option<f64>, kind: QualityKind) -> Result<Self, TypeError> {
        let pose = super::normalize_angles(&pose)?;
        check_quality(quality, kind)?;
        Ok(GraspCandidate {
            pose,
            quality,
            quality_kind: kind,
        })
    }

    pub fn unscored(pose: Pose6DoF) -> Result<Self, TypeError> {
        Self::new(pose, None, QualityKind::None)
    }

    pub fn pose(&self) -> &Pose6DoF {
        &self.pose
    }

    pub fn quality(&self) -> Option<f64> {
        self.quality
    }

    pub fn quality_kind(&self) -> QualityKind {
        self.quality_kind
    }
}
