//! Moving spherical obstacles and the perception boundary around the
//! end-effector.

use crate::error::{Error, Result};
use crate::impedance::{sample_waypoints, Waypoint};
use crate::Vec3;

pub const DEFAULT_PERCEPTION_RANGE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ObstacleMotion {
    ConstantVelocity,
    /// Piecewise-linear motion through timed waypoints; the obstacle rests at
    /// the last waypoint afterwards.
    Waypoints(Vec<Waypoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub id: u32,
    pub center: Vec3,
    pub velocity: Vec3,
    pub radius: f64,
    pub motion: ObstacleMotion,
    elapsed: f64,
}

impl Obstacle {
    pub fn constant_velocity(id: u32, center: Vec3, velocity: Vec3, radius: f64) -> Result<Self> {
        let obstacle = Self {
            id,
            center,
            velocity,
            radius,
            motion: ObstacleMotion::ConstantVelocity,
            elapsed: 0.0,
        };
        obstacle.validate()?;
        Ok(obstacle)
    }

    pub fn stationary(id: u32, center: Vec3, radius: f64) -> Result<Self> {
        Self::constant_velocity(id, center, Vec3::zeros(), radius)
    }

    pub fn waypoints(id: u32, points: Vec<Waypoint>, radius: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig(format!("obstacle {id}: no waypoints")));
        }
        let start = sample_waypoints(&points, 0.0);
        let obstacle = Self {
            id,
            center: start.x_des,
            velocity: start.xdot_des,
            radius,
            motion: ObstacleMotion::Waypoints(points),
            elapsed: 0.0,
        };
        obstacle.validate()?;
        Ok(obstacle)
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.id;
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "obstacle {id}: radius must be positive"
            )));
        }
        if !self.center.iter().chain(self.velocity.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "obstacle {id}: state must be finite"
            )));
        }
        if let ObstacleMotion::Waypoints(points) = &self.motion {
            if points.windows(2).any(|w| w[1].t <= w[0].t) {
                return Err(Error::InvalidConfig(format!(
                    "obstacle {id}: waypoint times must be strictly increasing"
                )));
            }
            if points
                .iter()
                .any(|w| !w.t.is_finite() || !w.position.iter().all(|v| v.is_finite()))
            {
                return Err(Error::InvalidConfig(format!(
                    "obstacle {id}: waypoints must be finite"
                )));
            }
        }
        Ok(())
    }

    /// Time since the obstacle was spawned.
    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn step(&mut self, dt: f64) {
        debug_assert!(dt > 0.0);
        self.elapsed += dt;
        match &self.motion {
            ObstacleMotion::ConstantVelocity => self.center += self.velocity * dt,
            ObstacleMotion::Waypoints(points) => {
                let sample = sample_waypoints(points, self.elapsed);
                self.center = sample.x_des;
                self.velocity = sample.xdot_des;
            }
        }
    }
}

pub fn step_obstacles(obstacles: &mut [Obstacle], dt: f64) {
    for obstacle in obstacles {
        obstacle.step(dt);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionConfig {
    /// Radius of the observable ball around the end-effector (m).
    pub range: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            range: DEFAULT_PERCEPTION_RANGE,
        }
    }
}

/// Obstacles whose centers lie in the closed ball of radius `range` around
/// the end-effector, in input order.
pub fn perceive<'a>(obstacles: &'a [Obstacle], p_ee: &Vec3, cfg: &PerceptionConfig) -> Vec<&'a Obstacle> {
    obstacles
        .iter()
        .filter(|o| (o.center - p_ee).norm() <= cfg.range)
        .collect()
}
