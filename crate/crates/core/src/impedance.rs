//! Cartesian impedance control of the end-effector position.
//!
//! The impedance relation `Λ(ẍ − ẍd) + D(ẋ − ẋd) + K(x − xd) = f_ext` is solved
//! for the task acceleration, which is then realized through operational-space
//! inverse dynamics with a damped least-squares pseudoinverse.

use nalgebra::{Cholesky, DVector, U3};

use crate::arm_model::{ArmModel, JointState};
use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

pub const DEFAULT_DLS_DAMPING: f64 = 1e-2;

/// Impedance gains. The inertia must be positive definite; damping and
/// stiffness may be semidefinite (zero stiffness is a pure damping law).
#[derive(Debug, Clone)]
pub struct ImpedanceParams {
    lambda: Mat3,
    damping: Mat3,
    stiffness: Mat3,
    lambda_chol: Cholesky<f64, U3>,
}

impl PartialEq for ImpedanceParams {
    fn eq(&self, other: &Self) -> bool {
        self.lambda == other.lambda
            && self.damping == other.damping
            && self.stiffness == other.stiffness
    }
}

fn is_symmetric(m: &Mat3) -> bool {
    m.iter().all(|v| v.is_finite()) && (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0)
}

fn spd_cholesky(m: &Mat3, name: &str) -> Result<Cholesky<f64, U3>> {
    let not_spd = || Error::NotPositiveDefinite {
        context: format!("impedance {name}"),
    };
    if !is_symmetric(m) {
        return Err(not_spd());
    }
    m.cholesky().ok_or_else(not_spd)
}

fn check_psd(m: &Mat3, name: &str) -> Result<()> {
    if is_symmetric(m) && m.symmetric_eigenvalues().min() >= -1e-12 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "impedance {name} must be symmetric positive semidefinite"
        )))
    }
}

impl ImpedanceParams {
    pub fn new(lambda: Mat3, damping: Mat3, stiffness: Mat3) -> Result<Self> {
        let lambda_chol = spd_cholesky(&lambda, "inertia")?;
        check_psd(&damping, "damping")?;
        check_psd(&stiffness, "stiffness")?;
        Ok(Self {
            lambda,
            damping,
            stiffness,
            lambda_chol,
        })
    }

    pub fn diagonal(lambda: f64, damping: f64, stiffness: f64) -> Result<Self> {
        Self::new(
            Mat3::identity() * lambda,
            Mat3::identity() * damping,
            Mat3::identity() * stiffness,
        )
    }

    pub fn lambda(&self) -> &Mat3 {
        &self.lambda
    }

    pub fn damping(&self) -> &Mat3 {
        &self.damping
    }

    pub fn stiffness(&self) -> &Mat3 {
        &self.stiffness
    }
}

impl Default for ImpedanceParams {
    /// Λ = I kg, D = 20 I N·s/m, K = 100 I N/m: critically damped at 10 rad/s.
    fn default() -> Self {
        Self::diagonal(1.0, 20.0, 100.0).expect("default gains are SPD")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredMotion {
    pub x_des: Vec3,
    pub xdot_des: Vec3,
    pub xddot_des: Vec3,
}

impl DesiredMotion {
    pub fn hold(x_des: Vec3) -> Self {
        Self {
            x_des,
            xdot_des: Vec3::zeros(),
            xddot_des: Vec3::zeros(),
        }
    }
}

/// End-effector position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskState {
    pub p: Vec3,
    pub v: Vec3,
}

impl TaskState {
    pub fn from_joint_state(model: &ArmModel, state: &JointState) -> Result<Self> {
        let p = model.forward_kinematics(&state.q)?.position;
        let jv = model.jacobian(&state.q)? * &state.qdot;
        Ok(Self {
            p,
            v: Vec3::new(jv[0], jv[1], jv[2]),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub position: Vec3,
}

/// Desired end-effector path as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Constant(Vec3),
    /// Piecewise-linear path through timed waypoints, held at the ends.
    Waypoints(Vec<Waypoint>),
    Circle {
        center: Vec3,
        radius: f64,
        /// rad/s
        angular_rate: f64,
        normal: Vec3,
        phase: f64,
    },
}

/// Orthonormal in-plane basis for a plane with the given unit normal.
/// A z normal yields the x and y axes.
pub(crate) fn plane_basis(normal: &Vec3) -> (Vec3, Vec3) {
    let helper = if normal.x.abs() > 0.9 {
        Vec3::y()
    } else {
        Vec3::x()
    };
    let e1 = (helper - normal * helper.dot(normal)).normalize();
    (e1, normal.cross(&e1))
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("trajectory: {msg}")));
        match self {
            Trajectory::Constant(p) => {
                if !p.iter().all(|v| v.is_finite()) {
                    return bad("setpoint must be finite");
                }
            }
            Trajectory::Waypoints(points) => {
                if points.is_empty() {
                    return bad("waypoint list is empty");
                }
                if points
                    .iter()
                    .any(|w| !w.t.is_finite() || !w.position.iter().all(|v| v.is_finite()))
                {
                    return bad("waypoints must be finite");
                }
                if points.windows(2).any(|w| w[1].t <= w[0].t) {
                    return bad("waypoint times must be strictly increasing");
                }
            }
            Trajectory::Circle {
                center,
                radius,
                angular_rate,
                normal,
                phase,
            } => {
                let finite = center.iter().chain(normal.iter()).all(|v| v.is_finite())
                    && radius.is_finite()
                    && angular_rate.is_finite()
                    && phase.is_finite();
                if !finite {
                    return bad("circle parameters must be finite");
                }
                if *radius <= 0.0 {
                    return bad("circle radius must be positive");
                }
                if normal.norm() < 1e-9 {
                    return bad("circle normal must be nonzero");
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, t: f64) -> DesiredMotion {
        match self {
            Trajectory::Constant(p) => DesiredMotion::hold(*p),
            Trajectory::Waypoints(points) => sample_waypoints(points, t),
            Trajectory::Circle {
                center,
                radius,
                angular_rate,
                normal,
                phase,
            } => {
                let (e1, e2) = plane_basis(&normal.normalize());
                let (s, c) = (angular_rate * t + phase).sin_cos();
                let radial = e1 * c + e2 * s;
                let tangent = e2 * c - e1 * s;
                DesiredMotion {
                    x_des: center + radial * *radius,
                    xdot_des: tangent * (radius * angular_rate),
                    xddot_des: -radial * (radius * angular_rate * angular_rate),
                }
            }
        }
    }
}

/// Linear interpolation over timed points; velocity is the active segment's
/// slope. Outside the covered interval the end point is held at rest.
pub(crate) fn sample_waypoints(points: &[Waypoint], t: f64) -> DesiredMotion {
    let first = points[0];
    let last = points[points.len() - 1];
    if t < first.t {
        return DesiredMotion::hold(first.position);
    }
    if t >= last.t {
        return DesiredMotion::hold(last.position);
    }
    // first segment whose end lies strictly after t
    let k = points.partition_point(|w| w.t <= t);
    let (w0, w1) = (points[k - 1], points[k]);
    let slope = (w1.position - w0.position) / (w1.t - w0.t);
    DesiredMotion {
        x_des: w0.position + slope * (t - w0.t),
        xdot_des: slope,
        xddot_des: Vec3::zeros(),
    }
}

/// Impedance relation solved for the task acceleration:
/// `u = ẍd + Λ⁻¹ (f_ext − D(ẋ − ẋd) − K(x − xd))`.
pub fn nominal_task_accel(
    state: &TaskState,
    desired: &DesiredMotion,
    f_ext: &Vec3,
    params: &ImpedanceParams,
) -> Vec3 {
    let wrench = f_ext
        - params.damping * (state.v - desired.xdot_des)
        - params.stiffness * (state.p - desired.x_des);
    desired.xddot_des + params.lambda_chol.solve(&wrench)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorqueCommand {
    pub tau: DVector<f64>,
    pub qddot_cmd: DVector<f64>,
    /// Smallest singular value of the Jacobian fell below ten times the
    /// damping, so the realized acceleration may lag the command.
    pub near_singular: bool,
}

/// Joint torques realizing a task acceleration:
/// `q̈ = Jᵀ(JJᵀ + λ²I)⁻¹(u − J̇q̇)`, `τ = M q̈ + C q̇ + G`.
pub fn task_to_joint_torques(
    model: &ArmModel,
    state: &JointState,
    u_task: &Vec3,
    dls_damping: f64,
) -> Result<TorqueCommand> {
    model.check_state(state)?;
    let jac = model.jacobian(&state.q)?;
    let drift = model.jacobian_dot_qdot(state)?;
    let jjt: Mat3 = (&jac * jac.transpose()).fixed_view::<3, 3>(0, 0).into_owned();
    let sigma_min = jjt.symmetric_eigenvalues().min().max(0.0).sqrt();
    let regularized = jjt + Mat3::identity() * (dls_damping * dls_damping);
    let chol = regularized
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: "damped task-space Gram matrix".into(),
        })?;
    let y = chol.solve(&(u_task - drift));
    let qddot_cmd = jac.transpose() * DVector::from_column_slice(y.as_slice());
    let tau = model.mass_matrix(&state.q)? * &qddot_cmd + model.bias_forces(state)?;
    Ok(TorqueCommand {
        tau,
        qddot_cmd,
        near_singular: sigma_min < 10.0 * dls_damping,
    })
}
