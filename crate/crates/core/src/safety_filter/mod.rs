//! Safety filter over the nominal task-space acceleration.
//!
//! Every visible obstacle contributes one half-space `a·u ≥ b` on the
//! end-effector acceleration `u`, built from either the collision-cone barrier
//! or the second-order distance barrier. The filtered command is the closest
//! point to the nominal one satisfying all rows.

mod barrier;
mod qp;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::impedance::TaskState;
use crate::world::Obstacle;
use crate::Vec3;

pub use barrier::{
    c3bf_constraint, c3bf_lie_derivatives, c3bf_value, c3bf_value_extended,
    distance_cbf_constraint, RelativeState,
};
pub use qp::solve_safety_qp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterMode {
    /// Collision-cone barrier.
    C3bf,
    /// Second-order barrier on squared distance.
    Distance,
    /// Pass-through.
    None,
}

impl FilterMode {
    pub const ALL: [FilterMode; 3] = [FilterMode::C3bf, FilterMode::Distance, FilterMode::None];

    pub fn as_str(&self) -> &'static str {
        match self {
            FilterMode::C3bf => "c3bf",
            FilterMode::Distance => "distance",
            FilterMode::None => "none",
        }
    }
}

impl fmt::Display for FilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c3bf" => Ok(FilterMode::C3bf),
            "distance" => Ok(FilterMode::Distance),
            "none" => Ok(FilterMode::None),
            other => Err(Error::InvalidConfig(format!(
                "unknown filter mode `{other}` (expected c3bf, distance or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub mode: FilterMode,
    /// Class-K gain of `α(h) = γh` (1/s).
    pub gamma: f64,
    /// Floor on ‖v_rel‖ where it divides (m/s).
    pub eps_v: f64,
    /// Distance-barrier gains (1/s).
    pub gamma1: f64,
    pub gamma2: f64,
    /// End-effector envelope radius added to every obstacle radius (m).
    pub ee_radius: f64,
    /// Extra clearance added to every obstacle radius (m).
    pub clearance: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            mode: FilterMode::C3bf,
            gamma: 1.0,
            eps_v: 1e-6,
            gamma1: 2.0,
            gamma2: 2.0,
            ee_radius: 0.05,
            clearance: 0.02,
        }
    }
}

impl FilterConfig {
    pub fn with_mode(mut self, mode: FilterMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn combined_radius(&self, obstacle_radius: f64) -> f64 {
        obstacle_radius + self.ee_radius + self.clearance
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("eps_v", self.eps_v),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "safety.{name} must be positive, got {value}"
                )));
            }
        }
        for (name, value) in [("ee_radius", self.ee_radius), ("clearance", self.clearance)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "safety.{name} must be non-negative, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Half-space `a·u ≥ b` on the task acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyConstraint {
    pub a: Vec3,
    pub b: f64,
    /// Obstacle id the row was built for.
    pub source: u32,
    /// Barrier value when the row was built.
    pub barrier_value: f64,
}

impl SafetyConstraint {
    pub fn margin(&self, u: &Vec3) -> f64 {
        self.a.dot(u) - self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintDiagnostics {
    pub source: u32,
    pub barrier_value: f64,
    /// `a·u_safe − b`.
    pub margin: f64,
    /// The row is tight at a modified command.
    pub active: bool,
    /// The end-effector was inside the safety sphere and the distance row
    /// stood in for the collision-cone row.
    pub emergency: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterDiagnostics {
    pub constraints: Vec<ConstraintDiagnostics>,
    /// ‖u_safe − u_nom‖.
    pub deviation: f64,
    pub modified: bool,
    pub infeasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub u_safe: Vec3,
    pub diagnostics: FilterDiagnostics,
}

/// Builds the row for one obstacle. Returns the row and whether the
/// emergency fallback was used.
pub fn obstacle_constraint(task: &TaskState, obstacle: &Obstacle, cfg: &FilterConfig) -> (SafetyConstraint, bool) {
    let rel = RelativeState::between(&task.p, &task.v, obstacle, cfg);
    let (mut row, emergency) = match cfg.mode {
        FilterMode::Distance | FilterMode::None => (distance_cbf_constraint(&rel, cfg), false),
        FilterMode::C3bf => match c3bf_constraint(&rel, cfg) {
            Ok(row) => (row, false),
            Err(err) => {
                log::warn!(
                    "obstacle {}: {err}; falling back to the distance barrier",
                    obstacle.id
                );
                (distance_cbf_constraint(&rel, cfg), true)
            }
        },
    };
    row.source = obstacle.id;
    (row, emergency)
}

/// Filters `u_nom` against the visible obstacles. Mode `none` passes the
/// nominal command through untouched.
pub fn filter(u_nom: &Vec3, task: &TaskState, visible: &[&Obstacle], cfg: &FilterConfig) -> FilterOutput {
    if cfg.mode == FilterMode::None || visible.is_empty() {
        return FilterOutput {
            u_safe: *u_nom,
            diagnostics: FilterDiagnostics::default(),
        };
    }
    let (rows, emergency): (Vec<_>, Vec<_>) = visible
        .iter()
        .map(|o| obstacle_constraint(task, o, cfg))
        .unzip();
    let (u_safe, mut diagnostics) = solve_safety_qp(u_nom, &rows);
    for (d, e) in diagnostics.constraints.iter_mut().zip(emergency) {
        d.emergency = e;
    }
    FilterOutput { u_safe, diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(p: [f64; 3], v: [f64; 3]) -> TaskState {
        TaskState {
            p: Vec3::from(p),
            v: Vec3::from(v),
        }
    }

    #[test]
    fn no_obstacles_passes_through() {
        let u_nom = Vec3::new(0.3, -1.7, 2.2);
        let out = filter(&u_nom, &task([0.0; 3], [0.1, 0.0, 0.0]), &[], &FilterConfig::default());
        assert_eq!(out.u_safe, u_nom);
        assert!(!out.diagnostics.modified);
    }

    #[test]
    fn receding_obstacle_leaves_command_alone() {
        let obstacle = Obstacle::stationary(4, Vec3::new(0.5, 0.0, 0.0), 0.1).unwrap();
        // moving away from the obstacle and accelerating away
        let t = task([0.0; 3], [-0.3, 0.0, 0.0]);
        let u_nom = Vec3::new(-1.0, 0.2, 0.0);
        let out = filter(&u_nom, &t, &[&obstacle], &FilterConfig::default());
        assert!(out.diagnostics.constraints[0].barrier_value > 0.0);
        assert_eq!(out.u_safe, u_nom);
        assert_eq!(out.diagnostics.constraints[0].source, 4);
    }

    #[test]
    fn head_on_approach_is_corrected_and_tight() {
        // obstacle closing straight in along -x at 0.5 m/s, end-effector at
        // rest and commanded to accelerate toward it
        let obstacle =
            Obstacle::constant_velocity(0, Vec3::new(0.6, 0.0, 0.0), Vec3::new(-0.5, 0.0, 0.0), 0.1)
                .unwrap();
        let t = task([0.0; 3], [0.0; 3]);
        let u_nom = Vec3::new(1.0, 0.0, 0.0);
        let cfg = FilterConfig::default();
        let out = filter(&u_nom, &t, &[&obstacle], &cfg);
        assert_ne!(out.u_safe, u_nom);
        let (row, _) = obstacle_constraint(&t, &obstacle, &cfg);
        assert!((row.a.dot(&out.u_safe) - row.b).abs() <= 1e-9);
        assert!(out.diagnostics.constraints[0].active);
    }

    #[test]
    fn none_mode_ignores_obstacles() {
        let obstacle = Obstacle::stationary(0, Vec3::new(0.2, 0.0, 0.0), 0.1).unwrap();
        let u_nom = Vec3::new(5.0, 0.0, 0.0);
        let cfg = FilterConfig::default().with_mode(FilterMode::None);
        let out = filter(&u_nom, &task([0.0; 3], [1.0, 0.0, 0.0]), &[&obstacle], &cfg);
        assert_eq!(out.u_safe, u_nom);
    }

    #[test]
    fn penetration_falls_back_to_distance_row() {
        let obstacle = Obstacle::stationary(0, Vec3::new(0.1, 0.0, 0.0), 0.1).unwrap();
        let cfg = FilterConfig::default();
        let out = filter(
            &Vec3::new(1.0, 0.0, 0.0),
            &task([0.0; 3], [0.2, 0.0, 0.0]),
            &[&obstacle],
            &cfg,
        );
        assert!(out.diagnostics.constraints[0].emergency);
        assert!(out.u_safe.iter().all(|v| v.is_finite()));
        assert!(out.u_safe.x < 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig::default().validate().is_ok());
        let bad = FilterConfig {
            gamma: 0.0,
            ..FilterConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FilterConfig {
            clearance: -0.1,
            ..FilterConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("distance".parse::<FilterMode>().unwrap(), FilterMode::Distance);
        assert!("cbf".parse::<FilterMode>().is_err());
    }
}
