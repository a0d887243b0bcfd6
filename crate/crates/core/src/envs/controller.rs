use super::dynamics::SuiteState;
use super::spec::{SkillKind, TaskSpec};

fn toward(from: [f64; 2], to: [f64; 2], speed: f64) -> [f64; 2] {
    [
        ((to[0] - from[0]) / speed).clamp(-1.0, 1.0),
        ((to[1] - from[1]) / speed).clamp(-1.0, 1.0),
    ]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn side(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Next waypoint for a body at `pos` heading to `goal` past the wall.
fn slot_waypoint(pos: [f64; 2], goal: [f64; 2], spec: &TaskSpec) -> [f64; 2] {
    let p = &spec.physics;
    if side(pos[0]) == side(goal[0]) {
        return goal;
    }
    let here = side(pos[0]);
    let aligned = (pos[1] - p.slot_center).abs() < 0.04;
    if aligned && pos[0].abs() < 0.2 {
        [-here * 0.15, p.slot_center]
    } else {
        [here * 0.15, p.slot_center]
    }
}

/// Hand-written policy that solves every skill kind; used to validate suites.
pub fn scripted_action(spec: &TaskSpec, s: &SuiteState) -> [f64; 2] {
    let speed = spec.physics.max_speed;
    let grip = 0.6 * spec.physics.contact_radius;
    match spec.kind {
        SkillKind::Reach => toward(s.agent, s.goal, speed),
        SkillKind::ReachThroughSlot => toward(s.agent, slot_waypoint(s.agent, s.goal, spec), speed),
        SkillKind::Push | SkillKind::PushThroughSlot | SkillKind::Slide => {
            if dist(s.agent, s.object) > grip {
                return toward(s.agent, s.object, speed);
            }
            let target = if spec.kind == SkillKind::PushThroughSlot {
                slot_waypoint(s.object, s.goal, spec)
            } else {
                s.goal
            };
            // While held, the object copies the agent's displacement.
            let shift = [target[0] - s.object[0], target[1] - s.object[1]];
            toward(s.agent, [s.agent[0] + shift[0], s.agent[1] + shift[1]], speed)
        }
        SkillKind::Toggle => {
            if dist(s.agent, s.object) > grip {
                return toward(s.agent, s.object, speed);
            }
            let dx = s.goal[0] - s.object[0];
            [(dx / speed).clamp(-1.0, 1.0), 0.0]
        }
    }
}
