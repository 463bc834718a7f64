use crate::types::{JointState, Trajectory, TypeError};

pub const DEFAULT_STEPS: usize = 10;

/// Joint-space linear interpolation with exactly `steps` waypoints,
/// endpoints included.
pub fn straight_line_plan(
    start: &JointState,
    goal: &JointState,
    steps: usize,
) -> Result<Trajectory, TypeError> {
    if !start.same_joints(goal) {
        return Err(TypeError::Invariant(
            "start and goal name different joints".into(),
        ));
    }
    if steps < 2 {
        return Err(TypeError::Invariant(format!(
            "steps must be at least 2, got {steps}"
        )));
    }
    let last = (steps - 1) as f64;
    let waypoints = (0..steps)
        .map(|i| {
            let t = i as f64;
            JointState::new(start.iter().map(|(n, a)| {
                let b = goal.get(n).expect("same joint set");
                let x = match i {
                    0 => a,
                    i if i == steps - 1 => b,
                    _ => (a * (last - t) + b * t) / last,
                };
                (n.to_owned(), x)
            }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Trajectory::new(waypoints)
}
