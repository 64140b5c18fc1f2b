//! Closed-loop simulation: impedance law, safety filter, torque mapping and
//! forward dynamics in a single fixed-rate loop.

mod metrics;
mod scenarios;
mod trace;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::arm_model::{ArmModel, JointState};
use crate::error::{Error, Result};
use crate::impedance::{
    nominal_task_accel, task_to_joint_torques, ImpedanceParams, TaskState, Trajectory,
    DEFAULT_DLS_DAMPING,
};
use crate::safety_filter::{c3bf_value_extended, filter, FilterConfig, RelativeState};
use crate::world::{perceive, step_obstacles, Obstacle, PerceptionConfig};
use crate::Vec3;

pub use metrics::{compute_metrics, RunMetrics};
pub use scenarios::{builtin_scenario, builtin_scenarios, home_configuration, BUILTIN_NAMES};
pub use trace::{trace_header, write_trace_csv};

pub const DEFAULT_DT: f64 = 1.0 / 240.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// `q̇ += q̈ dt`, then `q += q̇ dt`.
    #[default]
    SemiImplicitEuler,
    /// Classical RK4 with the torque held over the step.
    Rk4,
}

impl Integrator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Integrator::SemiImplicitEuler => "semi_implicit_euler",
            Integrator::Rk4 => "rk4",
        }
    }

    pub fn advance(
        &self,
        arm: &ArmModel,
        state: &JointState,
        tau: &DVector<f64>,
        dt: f64,
    ) -> Result<JointState> {
        match self {
            Integrator::SemiImplicitEuler => {
                let qddot = arm.forward_dynamics(state, tau)?;
                let qdot = &state.qdot + qddot * dt;
                let q = &state.q + &qdot * dt;
                Ok(JointState::new(q, qdot))
            }
            Integrator::Rk4 => {
                let deriv = |s: &JointState| -> Result<(DVector<f64>, DVector<f64>)> {
                    Ok((s.qdot.clone(), arm.forward_dynamics(s, tau)?))
                };
                let offset = |(dq, dv): &(DVector<f64>, DVector<f64>), h: f64| {
                    JointState::new(&state.q + dq * h, &state.qdot + dv * h)
                };
                let k1 = deriv(state)?;
                let k2 = deriv(&offset(&k1, 0.5 * dt))?;
                let k3 = deriv(&offset(&k2, 0.5 * dt))?;
                let k4 = deriv(&offset(&k3, dt))?;
                let w = dt / 6.0;
                let q = &state.q + (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * w;
                let qdot = &state.qdot + (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * w;
                Ok(JointState::new(q, qdot))
            }
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi_implicit_euler" => Ok(Integrator::SemiImplicitEuler),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(Error::InvalidConfig(format!(
                "unknown integrator `{other}` (expected semi_implicit_euler or rk4)"
            ))),
        }
    }
}

/// Everything needed to run one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub name: String,
    pub dt: f64,
    pub duration: f64,
    pub integrator: Integrator,
    pub arm: ArmModel,
    pub impedance: ImpedanceParams,
    /// Damping of the least-squares pseudoinverse used for torque mapping.
    pub dls_damping: f64,
    pub f_ext: Vec3,
    pub trajectory: Trajectory,
    pub safety: FilterConfig,
    pub obstacles: Vec<Obstacle>,
    pub perception: PerceptionConfig,
    pub q0: DVector<f64>,
    pub qdot0: DVector<f64>,
}

impl SimConfig {
    /// Obstacle-free regulation of the default arm from `q0` to `x_des`.
    pub fn regulation(name: &str, q0: DVector<f64>, x_des: Vec3, duration: f64) -> Self {
        let n = q0.len();
        Self {
            name: name.to_string(),
            dt: DEFAULT_DT,
            duration,
            integrator: Integrator::default(),
            arm: ArmModel::default_six_dof(),
            impedance: ImpedanceParams::default(),
            dls_damping: DEFAULT_DLS_DAMPING,
            f_ext: Vec3::zeros(),
            trajectory: Trajectory::Constant(x_des),
            safety: FilterConfig::default(),
            obstacles: Vec::new(),
            perception: PerceptionConfig::default(),
            q0,
            qdot0: DVector::zeros(n),
        }
    }

    pub fn steps(&self) -> usize {
        ((self.duration / self.dt).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("sim.dt must be positive, got {}", self.dt));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return bad(format!(
                "sim.duration ({}) must be at least dt ({})",
                self.duration, self.dt
            ));
        }
        if !(self.dls_damping > 0.0 && self.dls_damping.is_finite()) {
            return bad("impedance.dls_damping must be positive".into());
        }
        if !self.f_ext.iter().all(|v| v.is_finite()) {
            return bad("impedance.f_ext must be finite".into());
        }
        let n = self.arm.dof();
        if self.q0.len() != n || self.qdot0.len() != n {
            return bad(format!(
                "initial state has {} positions and {} velocities, arm has {n} joints",
                self.q0.len(),
                self.qdot0.len()
            ));
        }
        if !JointState::new(self.q0.clone(), self.qdot0.clone()).is_finite() {
            return bad("initial state must be finite".into());
        }
        self.trajectory.validate()?;
        self.safety.validate()?;
        if !(self.perception.range > 0.0 && self.perception.range.is_finite()) {
            return bad("world.perception_range must be positive".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for obstacle in &self.obstacles {
            obstacle.validate()?;
            if !ids.insert(obstacle.id) {
                return bad(format!("duplicate obstacle id {}", obstacle.id));
            }
            let r = self.safety.combined_radius(obstacle.radius);
            if self.perception.range <= r {
                return bad(format!(
                    "perception range {} must exceed the safety radius {r} of obstacle {}",
                    self.perception.range, obstacle.id
                ));
            }
        }
        Ok(())
    }
}

/// Mutable state of a running scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step_index: usize,
    pub joints: JointState,
    pub obstacles: Vec<Obstacle>,
}

impl SimState {
    pub fn initial(cfg: &SimConfig) -> Self {
        Self {
            step_index: 0,
            joints: JointState::new(cfg.q0.clone(), cfg.qdot0.clone()),
            obstacles: cfg.obstacles.clone(),
        }
    }

    pub fn time(&self, cfg: &SimConfig) -> f64 {
        self.step_index as f64 * cfg.dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleRecord {
    pub id: u32,
    pub center: Vec3,
    /// ‖p_rel‖.
    pub distance: f64,
    /// ‖p_rel‖ − r.
    pub separation: f64,
    /// Collision-cone barrier value (continued by zero tangent length inside
    /// the safety sphere).
    pub h: f64,
    pub visible: bool,
    pub active: bool,
}

/// One control step, logged at the start of the step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub p_ee: Vec3,
    pub v_ee: Vec3,
    pub x_des: Vec3,
    pub u_nom: Vec3,
    pub u_safe: Vec3,
    pub tau: DVector<f64>,
    pub obstacles: Vec<ObstacleRecord>,
    /// The filter changed the nominal command.
    pub filter_modified: bool,
    pub infeasible: bool,
    pub near_singular: bool,
}

impl TraceRecord {
    fn blank(t: f64, joints: &JointState) -> Self {
        let nan3 = Vec3::repeat(f64::NAN);
        Self {
            t,
            q: joints.q.clone(),
            qdot: joints.qdot.clone(),
            p_ee: nan3,
            v_ee: nan3,
            x_des: nan3,
            u_nom: nan3,
            u_safe: nan3,
            tau: DVector::repeat(joints.q.len(), f64::NAN),
            obstacles: Vec::new(),
            filter_modified: false,
            infeasible: false,
            near_singular: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Kinematics,
    Nominal,
    Filter,
    Torque,
    Dynamics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Kinematics => "kinematics",
            Stage::Nominal => "nominal control",
            Stage::Filter => "safety filter",
            Stage::Torque => "torque mapping",
            Stage::Dynamics => "forward dynamics",
        })
    }
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub stage: Stage,
    pub t: f64,
    pub message: String,
}

impl fmt::Display for Abort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "aborted in {} at t = {:.4} s: {}", self.stage, self.t, self.message)
    }
}

fn all_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> bool {
    values.into_iter().all(|v| v.is_finite())
}

fn check(ok: bool, stage: Stage, t: f64) -> std::result::Result<(), Abort> {
    if ok {
        Ok(())
    } else {
        Err(Abort {
            stage,
            t,
            message: "non-finite value".into(),
        })
    }
}

/// Advances `state` by one control period and returns the record for the
/// step. On a non-finite value the record holds what was computed so far, the
/// state is left untouched and the abort reason is returned alongside.
pub fn step(state: &mut SimState, cfg: &SimConfig) -> (TraceRecord, Option<Abort>) {
    let t = state.time(cfg);
    let mut record = TraceRecord::blank(t, &state.joints);
    match step_inner(state, cfg, t, &mut record) {
        Ok(()) => (record, None),
        Err(abort) => (record, Some(abort)),
    }
}

fn step_inner(
    state: &mut SimState,
    cfg: &SimConfig,
    t: f64,
    record: &mut TraceRecord,
) -> std::result::Result<(), Abort> {
    let fail = |stage: Stage, err: Error| Abort {
        stage,
        t,
        message: err.to_string(),
    };

    let task = TaskState::from_joint_state(&cfg.arm, &state.joints)
        .map_err(|e| fail(Stage::Kinematics, e))?;
    record.p_ee = task.p;
    record.v_ee = task.v;
    check(all_finite(task.p.iter().chain(task.v.iter())), Stage::Kinematics, t)?;

    let visible = perceive(&state.obstacles, &task.p, &cfg.perception);

    let desired = cfg.trajectory.sample(t);
    record.x_des = desired.x_des;
    let u_nom = nominal_task_accel(&task, &desired, &cfg.f_ext, &cfg.impedance);
    record.u_nom = u_nom;
    check(all_finite(u_nom.iter()), Stage::Nominal, t)?;

    let filtered = filter(&u_nom, &task, &visible, &cfg.safety);
    record.u_safe = filtered.u_safe;
    record.filter_modified = filtered.diagnostics.modified;
    record.infeasible = filtered.diagnostics.infeasible;
    record.obstacles = state
        .obstacles
        .iter()
        .map(|o| {
            let rel = RelativeState::between(&task.p, &task.v, o, &cfg.safety);
            let seen = visible.iter().position(|v| std::ptr::eq(*v, o));
            ObstacleRecord {
                id: o.id,
                center: o.center,
                distance: rel.distance(),
                separation: rel.separation(),
                h: c3bf_value_extended(&rel),
                visible: seen.is_some(),
                active: seen
                    .and_then(|i| filtered.diagnostics.constraints.get(i))
                    .is_some_and(|d| d.active),
            }
        })
        .collect();
    check(all_finite(filtered.u_safe.iter()), Stage::Filter, t)?;

    let command = task_to_joint_torques(&cfg.arm, &state.joints, &filtered.u_safe, cfg.dls_damping)
        .map_err(|e| fail(Stage::Torque, e))?;
    record.tau = command.tau.clone();
    record.near_singular = command.near_singular;
    check(all_finite(command.tau.iter()), Stage::Torque, t)?;

    let next = cfg
        .integrator
        .advance(&cfg.arm, &state.joints, &command.tau, cfg.dt)
        .map_err(|e| fail(Stage::Dynamics, e))?;
    check(next.is_finite(), Stage::Dynamics, t)?;

    state.joints = next;
    step_obstacles(&mut state.obstacles, cfg.dt);
    state.step_index += 1;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub metrics: RunMetrics,
    pub abort: Option<Abort>,
}

/// Runs `cfg.steps()` control steps. An abort ends the run early; the trace
/// up to and including the failing step is kept.
pub fn run_scenario(cfg: &SimConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut state = SimState::initial(cfg);
    let steps = cfg.steps();
    let mut trace = Vec::with_capacity(steps);
    let mut abort = None;
    for _ in 0..steps {
        let (record, failure) = step(&mut state, cfg);
        trace.push(record);
        if let Some(failure) = failure {
            log::error!("{}: {failure}", cfg.name);
            abort = Some(failure);
            break;
        }
    }
    let metrics = compute_metrics(&trace)?;
    Ok(RunOutput {
        trace,
        metrics,
        abort,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safety_filter::FilterMode;

    fn zero_gravity_hold() -> SimConfig {
        let q0 = home_configuration();
        let mut arm = ArmModel::default_six_dof();
        arm.set_gravity(Vec3::zeros());
        let x = arm.forward_kinematics(&q0).unwrap().position;
        let mut cfg = SimConfig::regulation("hold", q0, x, 0.5);
        cfg.arm = arm;
        cfg
    }

    #[test]
    fn equilibrium_is_preserved() {
        let cfg = zero_gravity_hold();
        let mut state = SimState::initial(&cfg);
        for _ in 0..20 {
            let before = state.joints.clone();
            let (_, abort) = step(&mut state, &cfg);
            assert!(abort.is_none());
            assert!((&state.joints.q - &before.q).amax() < 1e-9);
            assert!((&state.joints.qdot - &before.qdot).amax() < 1e-9);
        }
    }

    #[test]
    fn semi_implicit_single_step_matches_hand_update() {
        let arm = ArmModel::default_six_dof();
        let state = JointState::new(
            home_configuration(),
            DVector::from_column_slice(&[0.2, -0.1, 0.3, 0.0, 0.5, -0.2]),
        );
        let tau = DVector::from_column_slice(&[1.0, -2.0, 0.5, 0.1, 0.0, 0.2]);
        let dt = 1.0 / 240.0;
        let next = Integrator::SemiImplicitEuler
            .advance(&arm, &state, &tau, dt)
            .unwrap();
        let mass = arm.mass_matrix(&state.q).unwrap();
        let bias = arm.bias_forces(&state).unwrap();
        let qddot = mass.lu().solve(&(&tau - bias)).unwrap();
        let qdot = &state.qdot + qddot * dt;
        assert!((&next.qdot - &qdot).amax() < 1e-12);
        assert!((&next.q - (&state.q + &qdot * dt)).amax() < 1e-12);
    }

    #[test]
    fn inactive_filter_mode_is_irrelevant_without_obstacles() {
        let mut cfg = zero_gravity_hold();
        cfg.arm = ArmModel::default_six_dof();
        cfg.trajectory = Trajectory::Constant(Vec3::new(0.4, 0.1, 0.4));
        let a = run_scenario(&cfg).unwrap();
        cfg.safety.mode = FilterMode::None;
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = zero_gravity_hold();
        cfg.dt = 0.0;
        assert!(run_scenario(&cfg).is_err());
        let mut cfg = zero_gravity_hold();
        cfg.duration = cfg.dt / 2.0;
        assert!(cfg.validate().is_err());
        let mut cfg = zero_gravity_hold();
        cfg.q0 = DVector::zeros(3);
        assert!(cfg.validate().is_err());
        let mut cfg = zero_gravity_hold();
        cfg.obstacles = vec![Obstacle::stationary(0, Vec3::zeros(), 0.95).unwrap()];
        assert!(cfg.validate().is_err());
        cfg.obstacles = vec![
            Obstacle::stationary(0, Vec3::zeros(), 0.1).unwrap(),
            Obstacle::stationary(0, Vec3::x(), 0.1).unwrap(),
        ];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn non_finite_input_aborts_with_stage() {
        let mut cfg = zero_gravity_hold();
        cfg.trajectory = Trajectory::Constant(Vec3::new(0.4, 0.0, 0.4));
        cfg.f_ext = Vec3::zeros();
        let mut state = SimState::initial(&cfg);
        state.joints.qdot[0] = f64::NAN;
        let (record, abort) = step(&mut state, &cfg);
        let abort = abort.expect("NaN velocity must abort");
        assert_eq!(abort.stage, Stage::Kinematics);
        assert!(record.p_ee.iter().all(|v| v.is_finite()));
        assert_eq!(state.step_index, 0);
    }

    #[test]
    fn step_count_follows_duration() {
        let mut cfg = zero_gravity_hold();
        cfg.duration = 10.0;
        assert_eq!(cfg.steps(), 2400);
    }

    #[test]
    fn integrator_names_round_trip() {
        for i in [Integrator::SemiImplicitEuler, Integrator::Rk4] {
            assert_eq!(i.as_str().parse::<Integrator>().unwrap(), i);
        }
        assert!("euler".parse::<Integrator>().is_err());
    }
}
