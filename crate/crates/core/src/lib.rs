//! Modular manipulation-pipeline orchestration and grasp benchmarking.
//!
//! Experiments are hierarchical state machines ([`engine`]) whose states call
//! interchangeable components through typed services ([`bus`]). A
//! deterministic simulated world ([`sim`]) stands in for the robot, reference
//! components ([`components`]) make the pipeline runnable with no external
//! processes, and [`harness`] expands factorial protocols into logged trials.

pub mod bus;
pub mod components;
pub mod config;
pub mod conformance;
pub mod engine;
pub mod harness;
pub mod sim;
pub mod types;
