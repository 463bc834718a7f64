use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Embodiment, SimError};
use crate::types::{JointState, ObjectModel, Pose6DoF};

pub const DOOR_MAX: f64 = FRAC_PI_2;
pub const DRAWER_MAX: f64 = 0.5;
pub const DEFAULT_GRASP_TOLERANCE: f64 = 0.02;
pub const DEFAULT_BASE_NOISE: f64 = 0.002;
/// Height a grasped object is lifted off its support surface.
pub const LIFT_HEIGHT: f64 = 0.15;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Noise scale of a lighting level: `bright` 1.0, `dim` 2.5, or a number.
pub fn lighting_scale(level: &str) -> Option<f64> {
    match level {
        "bright" => Some(1.0),
        "dim" => Some(2.5),
        other => other
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0),
    }
}

/// Table-plane noise scale of a background: `plain` 1.0, `textured` 3.0, or a number.
pub fn texture_scale(level: &str) -> Option<f64> {
    match level {
        "plain" => Some(1.0),
        "textured" => Some(3.0),
        other => other
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0),
    }
}

/// An object in the world. Its pose is relative to the workspace surface:
/// the base of the object sits at `workspace_elevation + pose.z`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedObject {
    pub model: ObjectModel,
    pub pose: Pose6DoF,
    pub held: bool,
}

/// The complete simulated environment of one execution.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub embodiment: Embodiment,
    pub joints: JointState,
    objects: BTreeMap<String, PlacedObject>,
    nominal: BTreeMap<String, Pose6DoF>,
    /// Objects currently on the table; `None` means all of them.
    active: Option<BTreeSet<String>>,
    door_angle: f64,
    drawer_extension: f64,
    pub workspace_elevation: f64,
    pub lighting_noise_scale: f64,
    pub texture_noise_scale: f64,
    /// Depth noise standard deviation in meters at scale 1.
    pub base_noise: f64,
    pub grasp_tolerance: f64,
    pub rng_seed: u64,
}

impl World {
    pub fn new(embodiment: Embodiment) -> Self {
        World {
            joints: embodiment.home.clone(),
            embodiment,
            objects: BTreeMap::new(),
            nominal: BTreeMap::new(),
            active: None,
            door_angle: 0.0,
            drawer_extension: 0.0,
            workspace_elevation: 0.0,
            lighting_noise_scale: 1.0,
            texture_noise_scale: 1.0,
            base_noise: DEFAULT_BASE_NOISE,
            grasp_tolerance: DEFAULT_GRASP_TOLERANCE,
            rng_seed: 0,
        }
    }

    /// Adds an object; `pose` becomes its nominal pose.
    pub fn add_object(&mut self, model: ObjectModel, pose: Pose6DoF) -> Result<(), SimError> {
        if self.objects.contains_key(&model.name) {
            return Err(SimError::Invalid(format!(
                "object `{}` already exists",
                model.name
            )));
        }
        pose.check_finite()
            .map_err(|e| SimError::Invalid(e.to_string()))?;
        self.nominal.insert(model.name.clone(), pose);
        self.objects.insert(
            model.name.clone(),
            PlacedObject {
                model,
                pose,
                held: false,
            },
        );
        Ok(())
    }

    pub fn with_object(mut self, model: ObjectModel, pose: Pose6DoF) -> Result<Self, SimError> {
        self.add_object(model, pose)?;
        Ok(self)
    }

    pub fn object(&self, name: &str) -> Option<&PlacedObject> {
        self.objects.get(name)
    }

    pub fn objects(&self) -> impl Iterator<Item = (&str, &PlacedObject)> {
        self.objects.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn nominal_pose(&self, name: &str) -> Option<&Pose6DoF> {
        self.nominal.get(name)
    }

    pub fn nominal_poses(&self) -> &BTreeMap<String, Pose6DoF> {
        &self.nominal
    }

    /// Restricts the scene to `names`; other objects are set aside.
    pub fn set_active(&mut self, names: Option<BTreeSet<String>>) -> Result<(), SimError> {
        if let Some(set) = &names {
            if let Some(missing) = set.iter().find(|n| !self.objects.contains_key(*n)) {
                return Err(SimError::UnknownObject(missing.clone()));
            }
        }
        self.active = names;
        Ok(())
    }

    pub fn is_active(&self, name: &str) -> bool {
        self.objects.contains_key(name) && self.active.as_ref().is_none_or(|s| s.contains(name))
    }

    /// Objects present on the table and not held, in name order.
    pub fn visible_objects(&self) -> impl Iterator<Item = (&str, &PlacedObject)> {
        self.objects().filter(|(n, o)| !o.held && self.is_active(n))
    }

    /// Moves an object, e.g. to model a disturbance.
    pub fn displace(&mut self, name: &str, pose: Pose6DoF) -> Result<(), SimError> {
        let o = self
            .objects
            .get_mut(name)
            .ok_or_else(|| SimError::UnknownObject(name.to_owned()))?;
        pose.check_finite()
            .map_err(|e| SimError::Invalid(e.to_string()))?;
        o.pose = pose;
        Ok(())
    }

    pub(crate) fn object_mut(&mut self, name: &str) -> Option<&mut PlacedObject> {
        self.objects.get_mut(name)
    }

    pub fn door_angle(&self) -> f64 {
        self.door_angle
    }

    pub fn drawer_extension(&self) -> f64 {
        self.drawer_extension
    }

    pub fn operate_door(&mut self, angle: f64) -> Result<(), SimError> {
        if !(0.0..=DOOR_MAX).contains(&angle) {
            return Err(SimError::OutOfRange(format!(
                "door angle {angle} outside [0, {DOOR_MAX}]"
            )));
        }
        self.door_angle = angle;
        Ok(())
    }

    pub fn operate_drawer(&mut self, extension: f64) -> Result<(), SimError> {
        if !(0.0..=DRAWER_MAX).contains(&extension) {
            return Err(SimError::OutOfRange(format!(
                "drawer extension {extension} outside [0, {DRAWER_MAX}]"
            )));
        }
        self.drawer_extension = extension;
        Ok(())
    }

    pub fn reset_apparatus(&mut self) {
        self.door_angle = 0.0;
        self.drawer_extension = 0.0;
    }

    /// Puts every object back at its stored nominal pose and clears held flags.
    pub fn reset_objects(&mut self) {
        for (name, o) in &mut self.objects {
            o.pose = self.nominal[name];
            o.held = false;
        }
    }

    /// Like [`reset_objects`](World::reset_objects) with explicit nominal poses.
    pub fn reset_objects_to(
        &mut self,
        nominal: &BTreeMap<String, Pose6DoF>,
    ) -> Result<(), SimError> {
        if let Some(missing) = self.objects.keys().find(|n| !nominal.contains_key(*n)) {
            return Err(SimError::Invalid(format!(
                "no nominal pose for object `{missing}`"
            )));
        }
        for (name, o) in &mut self.objects {
            o.pose = nominal[name];
            o.held = false;
        }
        Ok(())
    }

    pub fn objects_at_nominal(&self) -> bool {
        self.objects
            .iter()
            .all(|(n, o)| !o.held && o.pose == self.nominal[n])
    }

    /// Objects at nominal, door closed, drawer closed; compared exactly.
    pub fn at_nominal(&self) -> bool {
        self.objects_at_nominal() && self.door_angle == 0.0 && self.drawer_extension == 0.0
    }

    /// First deviation from the nominal state, if any.
    pub fn nominal_deviation(&self) -> Option<String> {
        for (n, o) in &self.objects {
            if o.held {
                return Some(format!("object `{n}` is held"));
            }
            if o.pose != self.nominal[n] {
                return Some(format!("object `{n}` is not at its nominal pose"));
            }
        }
        if self.door_angle != 0.0 {
            return Some(format!("door is open at {} rad", self.door_angle));
        }
        if self.drawer_extension != 0.0 {
            return Some(format!("drawer is open at {} m", self.drawer_extension));
        }
        None
    }

    pub fn set_embodiment(&mut self, embodiment: Embodiment) {
        self.joints = embodiment.home.clone();
        self.embodiment = embodiment;
    }

    pub fn home(&mut self) {
        self.joints = self.embodiment.home.clone();
    }

    /// World z of an object's base.
    pub fn base_height(&self, o: &PlacedObject) -> f64 {
        self.workspace_elevation + o.pose.z
    }

    pub fn from_scenario(s: &Scenario) -> Result<World, SimError> {
        let embodiment =
            Embodiment::preset(s.embodiments.first().map(String::as_str).unwrap_or("arm_a"))?;
        let mut w = World::new(embodiment);
        for o in &s.objects {
            let model = ObjectModel::new(o.name.clone(), o.footprint.clone(), o.height)
                .map_err(|e| SimError::Invalid(format!("object `{}`: {e}", o.name)))?;
            w.add_object(model, o.pose)?;
        }
        w.operate_door(s.door_angle)?;
        w.operate_drawer(s.drawer_extension)?;
        w.workspace_elevation = s.workspace_elevation;
        w.lighting_noise_scale = s.lighting_noise_scale;
        w.texture_noise_scale = s.texture_noise_scale;
        w.base_noise = s.base_noise;
        w.grasp_tolerance = s.grasp_tolerance;
        w.rng_seed = s.seed;
        for (name, v) in [
            ("lighting_noise_scale", w.lighting_noise_scale),
            ("texture_noise_scale", w.texture_noise_scale),
            ("base_noise", w.base_noise),
            ("grasp_tolerance", w.grasp_tolerance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::Invalid(format!(
                    "`{name}` must be finite and non-negative"
                )));
            }
        }
        if !w.workspace_elevation.is_finite() {
            return Err(SimError::Invalid(
                "`workspace_elevation` must be finite".into(),
            ));
        }
        Ok(w)
    }
}

/// One object entry of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioObject {
    pub name: String,
    pub footprint: Vec<[f64; 2]>,
    pub height: f64,
    /// Nominal pose relative to the workspace surface.
    pub pose: Pose6DoF,
}

/// A world description on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub objects: Vec<ScenarioObject>,
    #[serde(default)]
    pub door_angle: f64,
    #[serde(default)]
    pub drawer_extension: f64,
    #[serde(default)]
    pub workspace_elevation: f64,
    #[serde(default = "one")]
    pub lighting_noise_scale: f64,
    #[serde(default = "one")]
    pub texture_noise_scale: f64,
    #[serde(default = "default_noise")]
    pub base_noise: f64,
    #[serde(default = "default_tolerance")]
    pub grasp_tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    /// Embodiment presets the scenario supports; the first is the default.
    #[serde(default = "default_embodiments")]
    pub embodiments: Vec<String>,
}

fn one() -> f64 {
    1.0
}
fn default_noise() -> f64 {
    DEFAULT_BASE_NOISE
}
fn default_tolerance() -> f64 {
    DEFAULT_GRASP_TOLERANCE
}
fn default_embodiments() -> Vec<String> {
    vec!["arm_a".into()]
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario, SimError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| SimError::Invalid(format!("scenario: {e}")))?;
        if s.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(SimError::Invalid(format!(
                "unsupported scenario schema_version {} (expected {SCENARIO_SCHEMA_VERSION})",
                s.schema_version
            )));
        }
        for e in &s.embodiments {
            Embodiment::preset(e)?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> World {
        let mut w = World::new(Embodiment::preset("arm_a").unwrap());
        for (i, name) in ["a", "b", "c", "d"].iter().enumerate() {
            let m = ObjectModel::cuboid(*name, 0.05, 0.05, 0.1).unwrap();
            w.add_object(
                m,
                Pose6DoF::new(0.3 + 0.1 * i as f64, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap(),
            )
            .unwrap();
        }
        w
    }

    #[test]
    fn apparatus_ranges_and_reset() {
        let mut w = world();
        w.operate_door(1.2).unwrap();
        w.reset_apparatus();
        assert_eq!(w.door_angle(), 0.0);
        w.reset_apparatus();
        assert_eq!(w.door_angle(), 0.0);
        w.operate_drawer(0.3).unwrap();
        assert_eq!(w.drawer_extension(), 0.3);
        assert!(w.operate_door(2.0).is_err());
        assert!(w.operate_drawer(-0.1).is_err());
    }

    #[test]
    fn reset_restores_displaced_objects_exactly() {
        let mut w = world();
        let before = w.clone();
        w.reset_objects();
        assert_eq!(w, before);
        w.displace("b", Pose6DoF::new(0.1, 0.2, 0.0, 0.0, 0.0, 1.0).unwrap())
            .unwrap();
        assert!(!w.at_nominal());
        w.reset_objects();
        assert_eq!(w.object("b").unwrap().pose, *w.nominal_pose("b").unwrap());
        let mut partial = w.nominal_poses().clone();
        partial.remove("c");
        assert!(w.reset_objects_to(&partial).is_err());
    }

    #[test]
    fn level_names() {
        assert_eq!(lighting_scale("dim"), Some(2.5));
        assert_eq!(texture_scale("textured"), Some(3.0));
        assert_eq!(lighting_scale("1.5"), Some(1.5));
        assert_eq!(lighting_scale("dark"), None);
    }
}
