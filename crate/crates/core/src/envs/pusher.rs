//! Disk agent (radius 0.05) pushing a disk block (radius 0.07) onto a goal.
//! Overlap moves the block along the contact normal until the disks touch.

use crate::numcore::SeededRng;

const SPEED: f64 = 0.05;
const CONTACT: f64 = 0.05 + 0.07;
pub const AGENT_START: [f64; 2] = [0.1, 0.5];
pub const BLOCK_BOX: ([f64; 2], [f64; 2]) = ([0.35, 0.4], [0.45, 0.6]);
pub const GOAL_BOX: ([f64; 2], [f64; 2]) = ([0.75, 0.35], [0.85, 0.65]);

pub fn reset(rng: &mut SeededRng) -> Vec<f64> {
    let mut draw = |(lo, hi): ([f64; 2], [f64; 2])| {
        [rng.uniform_in(lo[0], hi[0]), rng.uniform_in(lo[1], hi[1])]
    };
    let block = draw(BLOCK_BOX);
    let goal = draw(GOAL_BOX);
    vec![AGENT_START[0], AGENT_START[1], block[0], block[1], goal[0], goal[1]]
}

pub fn goal_distance(vars: &[f64]) -> f64 {
    (vars[2] - vars[4]).hypot(vars[3] - vars[5])
}

pub fn dynamics(vars: &[f64], action: &[f64]) -> Vec<f64> {
    let agent = [
        (vars[0] + SPEED * action[0]).clamp(0.0, 1.0),
        (vars[1] + SPEED * action[1]).clamp(0.0, 1.0),
    ];
    let mut block = [vars[2], vars[3]];
    let dx = block[0] - agent[0];
    let dy = block[1] - agent[1];
    let dist = dx.hypot(dy);
    let mut out = vars.to_vec();
    if dist < CONTACT {
        let (nx, ny) = if dist > 1e-12 {
            (dx / dist, dy / dist)
        } else {
            let n = action[0].hypot(action[1]).max(1e-12);
            (action[0] / n, action[1] / n)
        };
        block = [
            (agent[0] + CONTACT * nx).clamp(0.0, 1.0),
            (agent[1] + CONTACT * ny).clamp(0.0, 1.0),
        ];
        // A block pinned against the arena edge stops the agent.
        if (block[0] - agent[0]).hypot(block[1] - agent[1]) < CONTACT - 1e-9 {
            return out;
        }
    }
    out[0] = agent[0];
    out[1] = agent[1];
    out[2] = block[0];
    out[3] = block[1];
    out
}

fn toward(p: [f64; 2], target: [f64; 2]) -> Vec<f64> {
    let dx = (target[0] - p[0]) / SPEED;
    let dy = (target[1] - p[1]) / SPEED;
    let n = dx.hypot(dy);
    if n > 1.0 {
        vec![dx / n, dy / n]
    } else {
        vec![dx, dy]
    }
}

/// Two phases: get behind the block on the goal line (detouring around the
/// block if it is in the way), then push along the line with a lateral
/// correction.
pub fn expert(vars: &[f64]) -> Vec<f64> {
    let agent = [vars[0], vars[1]];
    let block = [vars[2], vars[3]];
    let goal = [vars[4], vars[5]];
    let gd = (goal[0] - block[0]).hypot(goal[1] - block[1]);
    if gd < 1e-9 {
        return vec![0.0, 0.0];
    }
    let u = [(goal[0] - block[0]) / gd, (goal[1] - block[1]) / gd];
    let perp = [-u[1], u[0]];
    let rel = [agent[0] - block[0], agent[1] - block[1]];
    let along = rel[0] * u[0] + rel[1] * u[1];
    let lateral = rel[0] * perp[0] + rel[1] * perp[1];

    if along < -0.09 && along > -0.2 && lateral.abs() < 0.02 {
        // Push: aim past the block centre so contact pushes it along u,
        // steering out lateral error. Slow down as the block nears the goal.
        let gain = ((gd - 0.01) / SPEED).clamp(0.0, 1.0);
        let dir = [u[0] - 4.0 * lateral * perp[0], u[1] - 4.0 * lateral * perp[1]];
        let n = dir[0].hypot(dir[1]);
        return vec![gain * dir[0] / n, gain * dir[1] / n];
    }

    let behind = [block[0] - 0.15 * u[0], block[1] - 0.15 * u[1]];
    // Detour around the block when the agent is level with or in front of it.
    if along > -0.12 {
        let side = if lateral >= 0.0 { 1.0 } else { -1.0 };
        let waypoint = [
            block[0] + side * 0.2 * perp[0] - 0.12 * u[0],
            block[1] + side * 0.2 * perp[1] - 0.12 * u[1],
        ];
        if lateral.abs() < 0.18 {
            return toward(agent, waypoint);
        }
    }
    toward(agent, behind)
}
