//! Barrier constraint rows for a point end-effector with double-integrator
//! task dynamics `ṗ = v, v̇ = u` against a constant-velocity sphere.

use crate::error::{Error, Result};
use crate::world::Obstacle;
use crate::Vec3;

use super::{FilterConfig, SafetyConstraint};

/// End-effector state relative to one obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeState {
    pub p_rel: Vec3,
    pub v_rel: Vec3,
    /// Combined safety radius (m).
    pub r: f64,
}

impl RelativeState {
    pub fn new(p_rel: Vec3, v_rel: Vec3, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "safety radius must be positive, got {r}"
            )));
        }
        if !p_rel.iter().chain(v_rel.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("relative state must be finite".into()));
        }
        Ok(Self { p_rel, v_rel, r })
    }

    /// Relative state of the end-effector point `(p, v)` w.r.t. `obstacle`,
    /// using the combined radius from `cfg`.
    pub fn between(p: &Vec3, v: &Vec3, obstacle: &Obstacle, cfg: &FilterConfig) -> Self {
        Self {
            p_rel: p - obstacle.center,
            v_rel: v - obstacle.velocity,
            r: cfg.combined_radius(obstacle.radius),
        }
    }

    pub fn distance(&self) -> f64 {
        self.p_rel.norm()
    }

    /// `‖p_rel‖ − r`; non-positive means the safety sphere is penetrated.
    pub fn separation(&self) -> f64 {
        self.distance() - self.r
    }

    /// `√(‖p_rel‖² − r²)`, the tangent length from the end-effector to the
    /// safety sphere; `‖p_rel‖ cos φ` for cone half-angle `φ`.
    fn tangent_length(&self) -> Result<f64> {
        let d = self.distance();
        if d <= self.r {
            return Err(Error::DomainViolation {
                penetration: self.r - d,
            });
        }
        Ok(((d - self.r) * (d + self.r)).sqrt())
    }
}

/// Collision-cone barrier `h = ⟨p_rel, v_rel⟩ + ‖p_rel‖‖v_rel‖ cos φ`.
///
/// `h ≥ 0` exactly when the relative velocity points outside the cone of
/// directions that would bring the end-effector into the safety sphere.
pub fn c3bf_value(rel: &RelativeState) -> Result<f64> {
    let s = rel.tangent_length()?;
    Ok(rel.p_rel.dot(&rel.v_rel) + rel.v_rel.norm() * s)
}

/// `c3bf_value` continued to the penetrated region by clamping the tangent
/// length at zero. Used for logging only.
pub fn c3bf_value_extended(rel: &RelativeState) -> f64 {
    let d = rel.distance();
    let s = ((d - rel.r) * (d + rel.r)).max(0.0).sqrt();
    rel.p_rel.dot(&rel.v_rel) + rel.v_rel.norm() * s
}

/// Lie derivatives `(L_f h, L_g h)` of the collision-cone barrier.
///
/// The `s / ‖v_rel‖` factor in `L_g h` uses `max(‖v_rel‖, eps_v)` so the row
/// stays finite (and tends to `p_rel`) as the relative velocity vanishes.
pub fn c3bf_lie_derivatives(rel: &RelativeState, eps_v: f64) -> Result<(f64, Vec3)> {
    let s = rel.tangent_length()?;
    let speed = rel.v_rel.norm();
    let lf = speed * speed + speed * rel.p_rel.dot(&rel.v_rel) / s;
    let lg = rel.p_rel + rel.v_rel * (s / speed.max(eps_v));
    Ok((lf, lg))
}

/// Row `a·u ≥ b` encoding `ḣ + γh ≥ 0` for the collision-cone barrier.
pub fn c3bf_constraint(rel: &RelativeState, cfg: &FilterConfig) -> Result<SafetyConstraint> {
    let h = c3bf_value(rel)?;
    let (lf, lg) = c3bf_lie_derivatives(rel, cfg.eps_v)?;
    Ok(SafetyConstraint {
        a: lg,
        b: -cfg.gamma * h - lf,
        source: 0,
        barrier_value: h,
    })
}

/// Second-order distance barrier on `h₀ = ‖p_rel‖² − r²`:
/// `ψ₁ = ḣ₀ + γ₁h₀`, constrained by `ψ̇₁ + γ₂ψ₁ ≥ 0`.
pub fn distance_cbf_constraint(rel: &RelativeState, cfg: &FilterConfig) -> SafetyConstraint {
    let (g1, g2) = (cfg.gamma1, cfg.gamma2);
    let h0 = rel.p_rel.norm_squared() - rel.r * rel.r;
    let pv = rel.p_rel.dot(&rel.v_rel);
    let psi1 = 2.0 * pv + g1 * h0;
    SafetyConstraint {
        a: rel.p_rel * 2.0,
        b: -(2.0 * rel.v_rel.norm_squared() + 2.0 * g1 * pv + g2 * psi1),
        source: 0,
        barrier_value: h0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safety_filter::FilterConfig;

    fn rel(p: [f64; 3], v: [f64; 3], r: f64) -> RelativeState {
        RelativeState::new(Vec3::from(p), Vec3::from(v), r).unwrap()
    }

    fn unit_gains() -> FilterConfig {
        FilterConfig {
            gamma: 1.0,
            gamma1: 1.0,
            gamma2: 1.0,
            ..FilterConfig::default()
        }
    }

    #[test]
    fn barrier_value_examples() {
        let s3 = 3f64.sqrt();
        let h = c3bf_value(&rel([2.0, 0.0, 0.0], [-1.0, 0.0, 0.0], 1.0)).unwrap();
        assert!((h - (s3 - 2.0)).abs() < 1e-15);
        let h = c3bf_value(&rel([2.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0)).unwrap();
        assert!((h - s3).abs() < 1e-15);
        let h = c3bf_value(&rel([0.3, -2.0, 0.7], [0.0, 0.0, 0.0], 1.0)).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn penetration_is_a_domain_violation() {
        let err = c3bf_value(&rel([0.5, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0)).unwrap_err();
        match err {
            Error::DomainViolation { penetration } => assert!((penetration - 0.5).abs() < 1e-15),
            other => panic!("unexpected {other}"),
        }
        assert!(c3bf_constraint(&rel([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0), &unit_gains()).is_err());
    }

    #[test]
    fn constraint_examples() {
        let s3 = 3f64.sqrt();
        let c = c3bf_constraint(&rel([2.0, 0.0, 0.0], [-1.0, 0.0, 0.0], 1.0), &unit_gains()).unwrap();
        assert!((c.a - Vec3::new(2.0 - s3, 0.0, 0.0)).norm() < 1e-15);
        let lf = 1.0 - 2.0 / s3;
        assert!((c.b - ((2.0 - s3) - lf)).abs() < 1e-15);
        assert!((c.b - 0.4226).abs() < 1e-4);
        assert!((c.barrier_value - (s3 - 2.0)).abs() < 1e-15);

        let c = c3bf_constraint(&rel([2.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0), &unit_gains()).unwrap();
        assert!((c.a - Vec3::new(2.0, s3, 0.0)).norm() < 1e-15);
        assert!((c.b - (-s3 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_relative_velocity_row_degrades_to_position() {
        let r = rel([0.6, 0.2, -0.1], [0.0, 0.0, 0.0], 0.2);
        let c = c3bf_constraint(&r, &unit_gains()).unwrap();
        assert_eq!(c.a, r.p_rel);
        assert_eq!(c.b, 0.0);
        assert!(c.a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn distance_constraint_examples() {
        let c = distance_cbf_constraint(&rel([2.0, 0.0, 0.0], [0.0, 0.0, 0.0], 1.0), &unit_gains());
        assert_eq!(c.a, Vec3::new(4.0, 0.0, 0.0));
        assert_eq!(c.b, -3.0);
        // u = 0 satisfies a far, static configuration
        assert!(c.a.dot(&Vec3::zeros()) >= c.b);

        // h0 = 1.25, <p,v> = -1.5, psi1 = -1.75, b = -(2 - 3 - 1.75)
        let c = distance_cbf_constraint(&rel([1.5, 0.0, 0.0], [-1.0, 0.0, 0.0], 1.0), &unit_gains());
        assert_eq!(c.a, Vec3::new(3.0, 0.0, 0.0));
        assert!((c.b - 2.75).abs() < 1e-15);
    }

    #[test]
    fn integrated_step_respects_barrier_condition() {
        // Pick u on the constraint boundary, integrate the double integrator
        // exactly over a small step and check ḣ + γh ≥ 0 numerically.
        let cfg = unit_gains();
        let r0 = rel([0.8, 0.3, -0.2], [-0.5, 0.1, 0.05], 0.3);
        let c = c3bf_constraint(&r0, &cfg).unwrap();
        let u = c.a * (c.b / c.a.norm_squared()) + Vec3::new(0.0, 0.0, 0.0);
        let dt = 1e-6;
        let r1 = RelativeState {
            p_rel: r0.p_rel + r0.v_rel * dt + u * (0.5 * dt * dt),
            v_rel: r0.v_rel + u * dt,
            r: r0.r,
        };
        let h0 = c3bf_value(&r0).unwrap();
        let h1 = c3bf_value(&r1).unwrap();
        assert!((h1 - h0) / dt + cfg.gamma * h0 >= -1e-5);
    }
}
