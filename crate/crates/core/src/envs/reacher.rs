//! Planar two-link arm (link lengths 0.5, 0.5) reaching a sampled goal with
//! its end effector. Joint angles are clamped to `[-π, π]`.

use std::f64::consts::PI;

use crate::numcore::SeededRng;

const LINK: f64 = 0.5;
const JOINT_SPEED: f64 = 0.1;
pub const START_ANGLES: [f64; 2] = [0.0, PI / 2.0];
/// Goal radius is uniform on this annulus of the reachable disk.
pub const GOAL_RADIUS_RANGE: (f64, f64) = (0.3, 0.9);
/// Goal bearing range (radians).
pub const GOAL_ANGLE_RANGE: (f64, f64) = (-PI, PI);

pub fn reset(rng: &mut SeededRng) -> Vec<f64> {
    let r = rng.uniform_in(GOAL_RADIUS_RANGE.0, GOAL_RADIUS_RANGE.1);
    let phi = rng.uniform_in(GOAL_ANGLE_RANGE.0, GOAL_ANGLE_RANGE.1);
    vec![
        START_ANGLES[0],
        START_ANGLES[1],
        r * phi.cos(),
        r * phi.sin(),
    ]
}

pub fn end_effector(t1: f64, t2: f64) -> [f64; 2] {
    [
        LINK * t1.cos() + LINK * (t1 + t2).cos(),
        LINK * t1.sin() + LINK * (t1 + t2).sin(),
    ]
}

/// `[θ1/π, θ2/π, goal_x, goal_y, ee_x - goal_x, ee_y - goal_y]`.
pub fn observe(vars: &[f64]) -> Vec<f64> {
    let ee = end_effector(vars[0], vars[1]);
    vec![
        vars[0] / PI,
        vars[1] / PI,
        vars[2],
        vars[3],
        ee[0] - vars[2],
        ee[1] - vars[3],
    ]
}

pub fn goal_distance(vars: &[f64]) -> f64 {
    let ee = end_effector(vars[0], vars[1]);
    (ee[0] - vars[2]).hypot(ee[1] - vars[3])
}

pub fn dynamics(vars: &[f64], action: &[f64]) -> Vec<f64> {
    vec![
        (vars[0] + JOINT_SPEED * action[0]).clamp(-PI, PI),
        (vars[1] + JOINT_SPEED * action[1]).clamp(-PI, PI),
        vars[2],
        vars[3],
    ]
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Elbow-positive inverse kinematics for the goal.
pub fn inverse_kinematics(gx: f64, gy: f64) -> [f64; 2] {
    let r2 = gx * gx + gy * gy;
    let c2 = ((r2 - 2.0 * LINK * LINK) / (2.0 * LINK * LINK)).clamp(-1.0, 1.0);
    let t2 = c2.acos();
    let t1 = gy.atan2(gx) - (LINK * t2.sin()).atan2(LINK + LINK * t2.cos());
    [wrap(t1), t2]
}

/// Proportional control on joint-angle error toward the IK solution.
pub fn expert(vars: &[f64]) -> Vec<f64> {
    let target = inverse_kinematics(vars[2], vars[3]);
    (0..2)
        .map(|j| ((target[j] - vars[j]) / JOINT_SPEED).clamp(-1.0, 1.0))
        .collect()
}
