use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{
    CameraIntrinsics, DepthImage, GraspCandidate, JointState, ObjectModel, PointCloud, Pose6DoF,
    ScoredRectangle, Trajectory,
};

/// Types a userdata slot or a message field may hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Bool,
    Int,
    Float,
    Text,
    Vector3,
    Pose,
    Candidate,
    Candidates,
    Rectangles,
    DepthImage,
    PointCloud,
    Intrinsics,
    ObjectModel,
    Joints,
    Trajectory,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned));
        f.write_str(s.as_deref().unwrap_or("?"))
    }
}

/// A typed userdata value. Wire encodings follow each type's serde form.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    Vector3([f64; 3]),
    Pose(Pose6DoF),
    Candidate(GraspCandidate),
    Candidates(Vec<GraspCandidate>),
    Rectangles(Vec<ScoredRectangle>),
    DepthImage(DepthImage),
    PointCloud(PointCloud),
    Intrinsics(CameraIntrinsics),
    ObjectModel(ObjectModel),
    Joints(JointState),
    Trajectory(Trajectory),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Bool(_) => ValueKind::Bool,
            Value::Int(_) => ValueKind::Int,
            Value::Float(_) => ValueKind::Float,
            Value::Text(_) => ValueKind::Text,
            Value::Vector3(_) => ValueKind::Vector3,
            Value::Pose(_) => ValueKind::Pose,
            Value::Candidate(_) => ValueKind::Candidate,
            Value::Candidates(_) => ValueKind::Candidates,
            Value::Rectangles(_) => ValueKind::Rectangles,
            Value::DepthImage(_) => ValueKind::DepthImage,
            Value::PointCloud(_) => ValueKind::PointCloud,
            Value::Intrinsics(_) => ValueKind::Intrinsics,
            Value::ObjectModel(_) => ValueKind::ObjectModel,
            Value::Joints(_) => ValueKind::Joints,
            Value::Trajectory(_) => ValueKind::Trajectory,
        }
    }

    pub fn to_json(&self) -> Json {
        let encoded = match self {
            Value::Bool(b) => Ok(Json::Bool(*b)),
            Value::Int(i) => Ok(Json::from(*i)),
            Value::Float(f) => serde_json::to_value(f),
            Value::Text(s) => Ok(Json::String(s.clone())),
            Value::Vector3(v) => serde_json::to_value(v),
            Value::Pose(p) => serde_json::to_value(p),
            Value::Candidate(c) => serde_json::to_value(c),
            Value::Candidates(c) => serde_json::to_value(c),
            Value::Rectangles(r) => serde_json::to_value(r),
            Value::DepthImage(d) => serde_json::to_value(d),
            Value::PointCloud(c) => serde_json::to_value(c),
            Value::Intrinsics(k) => serde_json::to_value(k),
            Value::ObjectModel(o) => serde_json::to_value(o),
            Value::Joints(j) => serde_json::to_value(j),
            Value::Trajectory(t) => serde_json::to_value(t),
        };
        // every variant holds finite, serializable data
        encoded.unwrap_or(Json::Null)
    }

    /// Decodes a wire value of the expected kind; the error string says why not.
    pub fn from_json(kind: ValueKind, json: &Json) -> Result<Value, String> {
        fn de<T: serde::de::DeserializeOwned>(json: &Json) -> Result<T, String> {
            T::deserialize(json).map_err(|e| e.to_string())
        }
        Ok(match kind {
            ValueKind::Bool => Value::Bool(json.as_bool().ok_or("expected a boolean")?),
            ValueKind::Int => Value::Int(json.as_i64().ok_or("expected an integer")?),
            ValueKind::Float => {
                let f = json.as_f64().ok_or("expected a number")?;
                if !f.is_finite() {
                    return Err("expected a finite number".into());
                }
                Value::Float(f)
            }
            ValueKind::Text => Value::Text(json.as_str().ok_or("expected a string")?.to_owned()),
            ValueKind::Vector3 => Value::Vector3(de(json)?),
            ValueKind::Pose => Value::Pose(de(json)?),
            ValueKind::Candidate => Value::Candidate(de(json)?),
            ValueKind::Candidates => Value::Candidates(de(json)?),
            ValueKind::Rectangles => Value::Rectangles(de(json)?),
            ValueKind::DepthImage => Value::DepthImage(de(json)?),
            ValueKind::PointCloud => Value::PointCloud(de(json)?),
            ValueKind::Intrinsics => Value::Intrinsics(de(json)?),
            ValueKind::ObjectModel => Value::ObjectModel(de(json)?),
            ValueKind::Joints => Value::Joints(de(json)?),
            ValueKind::Trajectory => Value::Trajectory(de(json)?),
        })
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float(f) => Some(*f),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip_through_json() {
        let values = vec![
            Value::Bool(true),
            Value::Int(-3),
            Value::Float(0.25),
            Value::Text("box".into()),
            Value::Vector3([1.0, 2.0, 3.0]),
            Value::Pose(Pose6DoF::new(1.0, 0.0, 0.5, 0.1, 0.2, 0.3).unwrap()),
            Value::Candidates(vec![GraspCandidate::unscored(Pose6DoF::identity()).unwrap()]),
            Value::Joints(JointState::new([("a", 0.5)]).unwrap()),
        ];
        for v in values {
            let back = Value::from_json(v.kind(), &v.to_json()).unwrap();
            assert_eq!(back, v);
        }
    }

    #[test]
    fn wrong_kind_is_reported() {
        assert!(Value::from_json(ValueKind::Int, &serde_json::json!("x")).is_err());
        assert!(Value::from_json(ValueKind::Pose, &serde_json::json!({"x": 1})).is_err());
        assert_eq!(ValueKind::PointCloud.to_string(), "point_cloud");
    }
}
