//! Builtin scenario families on the default arm.
//!
//! All scenarios start at rest in the home pose and last 10 s at 240 Hz. The
//! geometry is expressed relative to the home end-effector position so the
//! desired path starts exactly where the arm is.

use nalgebra::DVector;

use crate::arm_model::ArmModel;
use crate::impedance::{Trajectory, Waypoint};
use crate::world::{Obstacle, PerceptionConfig};
use crate::Vec3;

use super::SimConfig;

pub const BUILTIN_NAMES: [&str; 4] = ["static", "headon", "crossing", "multi"];

const DURATION: f64 = 10.0;
const OBSTACLE_RADIUS: f64 = 0.1;
/// Class-K gain for the builtins. Slower barrier decay than the library
/// default leaves a visible clearance at closest approach.
const GAMMA: f64 = 0.3;

/// Elbow-up home pose of the builtin arm.
pub fn home_configuration() -> DVector<f64> {
    DVector::from_column_slice(&[0.0, 0.8, -1.4, 0.3, 1.2, 0.0])
}

fn home_position() -> Vec3 {
    ArmModel::default_six_dof()
        .forward_kinematics(&home_configuration())
        .expect("home pose matches the builtin arm")
        .position
}

fn waypoints(points: &[(f64, Vec3)]) -> Vec<Waypoint> {
    points
        .iter()
        .map(|&(t, position)| Waypoint { t, position })
        .collect()
}

/// Obstacle moving along `heading` at `speed` that passes through `target`
/// at time `t`.
fn inbound(id: u32, target: Vec3, heading: Vec3, speed: f64, t: f64) -> Obstacle {
    let velocity = heading.normalize() * speed;
    Obstacle::constant_velocity(id, target - velocity * t, velocity, OBSTACLE_RADIUS)
        .expect("valid obstacle")
}

fn base(name: &str, path: &[(f64, Vec3)], obstacles: Vec<Obstacle>, range: f64) -> SimConfig {
    let mut cfg = SimConfig::regulation(name, home_configuration(), home_position(), DURATION);
    cfg.trajectory = Trajectory::Waypoints(waypoints(path));
    cfg.obstacles = obstacles;
    cfg.safety.gamma = GAMMA;
    cfg.perception = PerceptionConfig { range };
    cfg
}

/// A stationary sphere sits on the sideways leg of an up-then-sideways path.
/// It comes into view partway up the first leg.
fn static_scenario() -> SimConfig {
    let p0 = home_position();
    let corner = p0 + Vec3::new(0.0, -0.25, 0.35);
    let goal = corner + Vec3::new(0.0, 0.6, 0.0);
    let obstacle = Obstacle::stationary(0, corner + Vec3::new(0.0, 0.25, 0.0), OBSTACLE_RADIUS)
        .expect("valid obstacle");
    base(
        "static",
        &[(0.0, p0), (1.5, corner), (4.0, goal)],
        vec![obstacle],
        0.3,
    )
}

/// A sphere flies straight at the robot along -x. The end-effector rises
/// into its lane half a second before it arrives.
fn headon_scenario() -> SimConfig {
    let p0 = home_position();
    let lane = p0 + Vec3::new(0.0, 0.0, 0.3);
    let obstacle = inbound(0, lane, Vec3::new(-1.0, 0.0, 0.0), 0.8, 1.3);
    base("headon", &[(0.0, p0), (0.8, lane)], vec![obstacle], 1.25)
}

/// A sphere cuts downward at an angle across the end-effector's upward path.
/// It follows a two-point waypoint track and stops out of view.
fn crossing_scenario() -> SimConfig {
    let p0 = home_position();
    let cross = p0 + Vec3::new(0.0, 0.0, 0.3);
    let step = Vec3::new(-1.0, -1.0, -0.5).normalize() * (0.6 * 1.6);
    let obstacle = Obstacle::waypoints(
        0,
        waypoints(&[(0.0, cross - step), (4.8, cross + step * 2.0)]),
        OBSTACLE_RADIUS,
    )
    .expect("valid obstacle");
    base(
        "crossing",
        &[(0.0, p0), (0.8, p0 + Vec3::new(0.0, 0.0, 0.35))],
        vec![obstacle],
        1.2,
    )
}

/// Three spheres with distinct headings, each crossing the next leg of a
/// three-leg path shortly after the end-effector gets there.
fn multi_scenario() -> SimConfig {
    let p0 = home_position();
    let a = p0 + Vec3::new(0.0, 0.0, 0.3);
    let b = a + Vec3::new(0.0, 0.3, 0.0);
    let c = b + Vec3::new(0.0, 0.0, -0.25);
    let obstacles = vec![
        inbound(0, a, Vec3::new(-1.0, 0.0, 0.0), 0.6, 1.4),
        inbound(1, b, Vec3::new(-1.0, 0.0, -1.0), 0.6, 3.9),
        inbound(2, c, Vec3::new(0.0, -1.0, 0.0), 0.6, 6.4),
    ];
    base(
        "multi",
        &[
            (0.0, p0),
            (0.8, a),
            (2.5, a),
            (3.3, b),
            (5.0, b),
            (5.8, c),
        ],
        obstacles,
        1.0,
    )
}

/// The four builtin scenarios in collision-cone mode, in the order of
/// [`BUILTIN_NAMES`].
pub fn builtin_scenarios() -> Vec<SimConfig> {
    vec![
        static_scenario(),
        headon_scenario(),
        crossing_scenario(),
        multi_scenario(),
    ]
}

pub fn builtin_scenario(name: &str) -> Option<SimConfig> {
    match name {
        "static" => Some(static_scenario()),
        "headon" => Some(headon_scenario()),
        "crossing" => Some(crossing_scenario()),
        "multi" => Some(multi_scenario()),
        _ => None,
    }
}
