//! Deterministic simulated world: embodiments, objects, synthetic sensors,
//! a geometric grasp oracle and the door, drawer and object-reset apparatuses.

mod components;
mod embodiment;
mod grasp;
mod render;
mod world;

pub use components::{SharedWorld, SimApparatus, SimRobot, SIM_APPARATUS_ID, SIM_ROBOT_ID};
pub use embodiment::{Embodiment, PRESETS};
pub use grasp::{attempt_grasp, GraspAttempt, GraspResult, NO_CONTACT, OUT_OF_REACH, TOLERANCE};
pub use render::{render_cloud, render_depth};
pub use world::{
    lighting_scale, texture_scale, PlacedObject, Scenario, ScenarioObject, World,
    DEFAULT_BASE_NOISE, DEFAULT_GRASP_TOLERANCE, DOOR_MAX, DRAWER_MAX, LIFT_HEIGHT,
    SCENARIO_SCHEMA_VERSION,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown embodiment `{0}`")]
    UnknownEmbodiment(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("object `{0}` is already held")]
    AlreadyHeld(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}
