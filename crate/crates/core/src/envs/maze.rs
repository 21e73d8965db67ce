//! Point mass in the unit square. A wall along the anti-diagonal `x + y = 1`
//! separates start `(0.1, 0.1)` from goal `(0.9, 0.9)`; it is open only in
//! two gaps, centred at `(0.2, 0.8)` (gap A) and `(0.8, 0.2)` (gap B).

use std::f64::consts::FRAC_1_SQRT_2;

use super::ExpertMode;

pub const START: [f64; 2] = [0.1, 0.1];
pub const GOAL: [f64; 2] = [0.9, 0.9];
pub const GAP_A_CENTER: [f64; 2] = [0.2, 0.8];
pub const GAP_B_CENTER: [f64; 2] = [0.8, 0.2];
/// Gaps are the wall points whose `x - y` lies within this distance of the
/// gap centre's `x - y` (±0.6).
const GAP_HALF_WIDTH: f64 = 0.15;
const SPEED: f64 = 0.05;

pub fn reset() -> Vec<f64> {
    START.to_vec()
}

pub fn observe(vars: &[f64]) -> Vec<f64> {
    vec![vars[0], vars[1], GOAL[0], GOAL[1]]
}

pub fn goal_distance(vars: &[f64]) -> f64 {
    (vars[0] - GOAL[0]).hypot(vars[1] - GOAL[1])
}

fn upper(x: f64, y: f64) -> bool {
    x + y >= 1.0
}

fn in_gap(x: f64, y: f64) -> bool {
    let d = x - y;
    (d - (GAP_A_CENTER[0] - GAP_A_CENTER[1])).abs() <= GAP_HALF_WIDTH
        || (d - (GAP_B_CENTER[0] - GAP_B_CENTER[1])).abs() <= GAP_HALF_WIDTH
}

fn blocked(from: [f64; 2], to: [f64; 2]) -> bool {
    if upper(from[0], from[1]) == upper(to[0], to[1]) {
        return false;
    }
    let s0 = from[0] + from[1] - 1.0;
    let s1 = to[0] + to[1] - 1.0;
    let t = s0 / (s0 - s1);
    let cx = from[0] + t * (to[0] - from[0]);
    let cy = from[1] + t * (to[1] - from[1]);
    !in_gap(cx, cy)
}

/// Axis-by-axis motion: a component whose move would cross the wall is
/// dropped and the agent keeps its coordinate on that axis.
pub fn dynamics(vars: &[f64], action: &[f64]) -> Vec<f64> {
    let mut p = [vars[0], vars[1]];
    for axis in 0..2 {
        let mut q = p;
        q[axis] = (p[axis] + SPEED * action[axis]).clamp(0.0, 1.0);
        if !blocked(p, q) {
            p = q;
        }
    }
    p.to_vec()
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

/// Waypoint controller: below the wall it lines up under the chosen gap, then
/// passes through along the wall normal; above the wall it heads for the goal.
pub fn expert(vars: &[f64], mode: ExpertMode) -> Vec<f64> {
    let p = [vars[0], vars[1]];
    if upper(p[0], p[1]) {
        return toward(p, GOAL);
    }
    let gap = match mode {
        ExpertMode::A => GAP_A_CENTER,
        ExpertMode::B => GAP_B_CENTER,
    };
    let offset = 0.1 * FRAC_1_SQRT_2;
    let rel = [p[0] - gap[0], p[1] - gap[1]];
    let along = (rel[0] - rel[1]) * FRAC_1_SQRT_2;
    let normal = (rel[0] + rel[1]) * FRAC_1_SQRT_2;
    let target = if along.abs() < 0.03 && normal > -0.15 {
        [gap[0] + offset, gap[1] + offset]
    } else {
        [gap[0] - offset, gap[1] - offset]
    };
    toward(p, target)
}
