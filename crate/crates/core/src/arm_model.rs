//! Revolute serial-chain kinematics and dynamics.
//!
//! Links follow the standard Denavit-Hartenberg convention: the transform
//! from frame `i-1` to frame `i` is `Rz(q_i + theta_offset) Tz(d) Tx(a) Rx(alpha)`,
//! joint `i` rotates about `z_{i-1}`, and each link's inertial data is
//! expressed in its own (distal) frame `i`.
//!
//! Dynamics are evaluated with the recursive Newton-Euler algorithm (RNEA)
//! in base-frame coordinates. The mass matrix is assembled from `n` RNEA
//! calls with unit accelerations, and `C(q, qdot) qdot + G(q)` is a single
//! RNEA call with zero acceleration. `C` itself is never formed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

pub const STANDARD_GRAVITY: f64 = 9.81;

/// One revolute link in standard DH form with its rigid-body parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DhLink {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
    pub mass: f64,
    /// Center of mass in the link frame.
    pub com: Vec3,
    /// Rotational inertia about the center of mass, link frame.
    pub inertia: Mat3,
}

impl DhLink {
    /// A link whose mass is a solid cylinder spanning the segment between the
    /// proximal joint origin and the distal frame origin.
    pub fn rod(a: f64, alpha: f64, d: f64, theta_offset: f64, mass: f64, radius: f64) -> Self {
        // Proximal origin expressed in the distal frame: -Rx(alpha)^T (a, 0, d).
        let (sa, ca) = alpha.sin_cos();
        let proximal = Vec3::new(-a, -d * sa, -d * ca);
        let length = proximal.norm();
        let axis = if length > 0.0 {
            proximal / length
        } else {
            Vec3::z()
        };
        let axial = 0.5 * mass * radius * radius;
        let transverse = mass * (3.0 * radius * radius + length * length) / 12.0;
        let outer = axis * axis.transpose();
        let inertia = Mat3::identity() * transverse + outer * (axial - transverse);
        Self {
            a,
            alpha,
            d,
            theta_offset,
            mass,
            com: proximal * 0.5,
            inertia,
        }
    }

    /// Rotation and translation of this link's DH transform at joint angle `q`.
    fn transform(&self, q: f64) -> (Mat3, Vec3) {
        let (st, ct) = (q + self.theta_offset).sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        let rot = Mat3::new(
            ct,
            -st * ca,
            st * sa,
            st,
            ct * ca,
            -ct * sa,
            0.0,
            sa,
            ca,
        );
        (rot, Vec3::new(self.a * ct, self.a * st, self.d))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.alpha, self.d, self.theta_offset, self.mass]
            .iter()
            .all(|v| v.is_finite())
            && self.com.iter().all(|v| v.is_finite())
            && self.inertia.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("link parameters must be finite".into()));
        }
        if self.mass < 0.0 {
            return Err(Error::InvalidModel(format!(
                "link mass must be non-negative, got {}",
                self.mass
            )));
        }
        let asym = (self.inertia - self.inertia.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "link inertia is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let eig = self.inertia.symmetric_eigenvalues();
        if eig.iter().any(|&l| l < -1e-12) {
            return Err(Error::InvalidModel(format!(
                "link inertia is not positive semidefinite (eigenvalues {:?})",
                eig.as_slice()
            )));
        }
        // Principal moments must be realizable by a physical mass distribution.
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            if eig[j] + eig[k] < eig[i] - 1e-9 {
                return Err(Error::InvalidModel(
                    "link principal moments violate the triangle inequality".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Joint positions and velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl JointState {
    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Self {
        Self { q, qdot }
    }

    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            qdot: DVector::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

/// End-effector pose: position of the last DH frame and its orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: Mat3,
}

/// Frame rotations and origins for frames `0..=n`, frame 0 being the base.
struct ChainFrames {
    rot: Vec<Mat3>,
    origin: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    links: Vec<DhLink>,
    gravity: Vec3,
}

impl ArmModel {
    pub fn new(links: Vec<DhLink>, gravity: Vec3) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::InvalidModel("arm needs at least one link".into()));
        }
        for (i, link) in links.iter().enumerate() {
            link.validate()
                .map_err(|e| Error::InvalidModel(format!("link {i}: {e}")))?;
        }
        if !gravity.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("gravity must be finite".into()));
        }
        Ok(Self { links, gravity })
    }

    /// Same chain with standard gravity along -z.
    pub fn with_default_gravity(links: Vec<DhLink>) -> Result<Self> {
        Self::new(links, Vec3::new(0.0, 0.0, -STANDARD_GRAVITY))
    }

    /// Builtin 6-DOF anthropomorphic arm: base yaw on a 0.3 m column, shoulder
    /// and elbow pitch (0.3 m upper arm, 0.25 m forearm), then a compact wrist
    /// (0.1 m, 0.1 m, 0.08 m flange). Rod-like link inertias, 3/3/2/1/1/0.5 kg.
    pub fn default_six_dof() -> Self {
        use std::f64::consts::FRAC_PI_2;
        const R: f64 = 0.03;
        let links = vec![
            DhLink::rod(0.0, FRAC_PI_2, 0.3, 0.0, 3.0, R),
            DhLink::rod(0.3, 0.0, 0.0, 0.0, 3.0, R),
            DhLink::rod(0.25, 0.0, 0.0, 0.0, 2.0, R),
            DhLink::rod(0.1, FRAC_PI_2, 0.0, 0.0, 1.0, R),
            DhLink::rod(0.0, -FRAC_PI_2, 0.1, 0.0, 1.0, R),
            DhLink::rod(0.0, 0.0, 0.08, 0.0, 0.5, R),
        ];
        Self::with_default_gravity(links).expect("builtin arm is valid")
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[DhLink] {
        &self.links
    }

    pub fn gravity(&self) -> Vec3 {
        self.gravity
    }

    pub fn set_gravity(&mut self, gravity: Vec3) {
        self.gravity = gravity;
    }

    fn check_dim(&self, what: &'static str, got: usize) -> Result<()> {
        if got == self.dof() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what,
                expected: self.dof(),
                got,
            })
        }
    }

    pub fn check_state(&self, state: &JointState) -> Result<()> {
        self.check_dim("q", state.q.len())?;
        self.check_dim("qdot", state.qdot.len())
    }

    fn frames(&self, q: &DVector<f64>) -> ChainFrames {
        let n = self.dof();
        let mut rot = Vec::with_capacity(n + 1);
        let mut origin = Vec::with_capacity(n + 1);
        rot.push(Mat3::identity());
        origin.push(Vec3::zeros());
        for (i, link) in self.links.iter().enumerate() {
            let (r, p) = link.transform(q[i]);
            origin.push(origin[i] + rot[i] * p);
            rot.push(rot[i] * r);
        }
        ChainFrames { rot, origin }
    }

    pub fn forward_kinematics(&self, q: &DVector<f64>) -> Result<Pose> {
        self.check_dim("q", q.len())?;
        let frames = self.frames(q);
        let n = self.dof();
        Ok(Pose {
            position: frames.origin[n],
            rotation: frames.rot[n],
        })
    }

    /// Translational geometric Jacobian (3 x n) of the end-effector point.
    pub fn jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim("q", q.len())?;
        let frames = self.frames(q);
        let n = self.dof();
        let p_ee = frames.origin[n];
        let mut jac = DMatrix::zeros(3, n);
        for i in 0..n {
            let z = frames.rot[i].column(2).into_owned();
            jac.set_column(i, &z.cross(&(p_ee - frames.origin[i])));
        }
        Ok(jac)
    }

    /// Drift acceleration `Jdot(q, qdot) qdot` of the end-effector point.
    ///
    /// Evaluated as the end-effector acceleration of the outward RNEA pass with
    /// zero joint acceleration and no gravity.
    pub fn jacobian_dot_qdot(&self, state: &JointState) -> Result<Vec3> {
        self.check_state(state)?;
        let frames = self.frames(&state.q);
        let zero = DVector::zeros(self.dof());
        let motion = self.outward(&frames, &state.qdot, &zero, Vec3::zeros());
        Ok(motion.last().map(|m| m.acc).unwrap_or_default())
    }

    /// Outward pass: angular velocity/acceleration of each link and the linear
    /// acceleration of its distal frame origin, all in base coordinates.
    fn outward(
        &self,
        frames: &ChainFrames,
        qdot: &DVector<f64>,
        qddot: &DVector<f64>,
        base_acc: Vec3,
    ) -> Vec<LinkMotion> {
        let mut out = Vec::with_capacity(self.dof());
        let mut omega = Vec3::zeros();
        let mut omega_dot = Vec3::zeros();
        let mut acc = base_acc;
        for i in 0..self.dof() {
            let z = frames.rot[i].column(2).into_owned();
            let w_joint = z * qdot[i];
            omega_dot += z * qddot[i] + omega.cross(&w_joint);
            omega += w_joint;
            let r = frames.origin[i + 1] - frames.origin[i];
            acc += omega_dot.cross(&r) + omega.cross(&omega.cross(&r));
            out.push(LinkMotion {
                omega,
                omega_dot,
                acc,
            });
        }
        out
    }

    /// Recursive Newton-Euler inverse dynamics with an explicit gravity vector.
    fn rnea(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        qddot: &DVector<f64>,
        gravity: Vec3,
    ) -> DVector<f64> {
        let n = self.dof();
        let frames = self.frames(q);
        // Gravity enters as an upward acceleration of the base.
        let motion = self.outward(&frames, qdot, qddot, -gravity);

        let mut tau = DVector::zeros(n);
        let mut force = Vec3::zeros();
        // moment about the distal origin of the current link
        let mut moment = Vec3::zeros();
        for i in (0..n).rev() {
            let link = &self.links[i];
            let m = &motion[i];
            let rot = frames.rot[i + 1];
            let r = frames.origin[i + 1] - frames.origin[i];
            let c = rot * link.com;
            let acc_com = m.acc + m.omega_dot.cross(&c) + m.omega.cross(&m.omega.cross(&c));
            let inertia = rot * link.inertia * rot.transpose();
            let f_link = acc_com * link.mass;
            let n_link = inertia * m.omega_dot + m.omega.cross(&(inertia * m.omega));

            moment = n_link + (r + c).cross(&f_link) + moment + r.cross(&force);
            force += f_link;
            tau[i] = frames.rot[i].column(2).dot(&moment);
        }
        tau
    }

    /// Joint torques realizing `qddot` at `state` under the model's gravity.
    pub fn inverse_dynamics(&self, state: &JointState, qddot: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state(state)?;
        self.check_dim("qddot", qddot.len())?;
        Ok(self.rnea(&state.q, &state.qdot, qddot, self.gravity))
    }

    /// Joint-space inertia matrix, one RNEA column per unit acceleration.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim("q", q.len())?;
        let n = self.dof();
        let zero = DVector::zeros(n);
        let mut mass = DMatrix::zeros(n, n);
        let mut unit = DVector::zeros(n);
        for j in 0..n {
            unit[j] = 1.0;
            mass.set_column(j, &self.rnea(q, &zero, &unit, Vec3::zeros()));
            unit[j] = 0.0;
        }
        Ok(mass)
    }

    /// `C(q, qdot) qdot + G(q)`.
    pub fn bias_forces(&self, state: &JointState) -> Result<DVector<f64>> {
        self.check_state(state)?;
        let zero = DVector::zeros(self.dof());
        Ok(self.rnea(&state.q, &state.qdot, &zero, self.gravity))
    }

    /// `G(q)`: torques holding the arm static against gravity.
    pub fn gravity_torques(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim("q", q.len())?;
        let zero = DVector::zeros(self.dof());
        Ok(self.rnea(q, &zero, &zero, self.gravity))
    }

    /// Solves `M(q) qddot = tau - C(q, qdot) qdot - G(q)` by Cholesky.
    pub fn forward_dynamics(&self, state: &JointState, tau: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim("tau", tau.len())?;
        let mass = self.mass_matrix(&state.q)?;
        let rhs = tau - self.bias_forces(state)?;
        let chol = mass.cholesky().ok_or_else(|| Error::NotPositiveDefinite {
            context: format!("mass matrix at q = {:?}", state.q.as_slice()),
        })?;
        Ok(chol.solve(&rhs))
    }

    pub fn kinetic_energy(&self, state: &JointState) -> Result<f64> {
        self.check_state(state)?;
        let mass = self.mass_matrix(&state.q)?;
        Ok(0.5 * state.qdot.dot(&(mass * &state.qdot)))
    }
}

struct LinkMotion {
    omega: Vec3,
    omega_dot: Vec3,
    acc: Vec3,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn point_mass_link(a: f64, mass: f64) -> DhLink {
        DhLink {
            a,
            alpha: 0.0,
            d: 0.0,
            theta_offset: 0.0,
            mass,
            com: Vec3::zeros(),
            inertia: Mat3::zeros(),
        }
    }

    fn planar(n: usize) -> ArmModel {
        ArmModel::new(vec![point_mass_link(1.0, 1.0); n], Vec3::zeros()).unwrap()
    }

    /// One-link pendulum swinging in the vertical x-y plane.
    fn pendulum() -> ArmModel {
        ArmModel::new(
            vec![point_mass_link(1.0, 1.0)],
            Vec3::new(0.0, -STANDARD_GRAVITY, 0.0),
        )
        .unwrap()
    }

    fn random_q(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0))
    }

    fn dvec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn fk_single_link_zero_configuration() {
        let p = planar(1).forward_kinematics(&dvec(&[0.0])).unwrap().position;
        assert!((p - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fk_two_link_planar() {
        let arm = planar(2);
        let p = arm.forward_kinematics(&dvec(&[0.0, 0.0])).unwrap().position;
        assert!((p - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-15);
        let p = arm.forward_kinematics(&dvec(&[FRAC_PI_2, 0.0])).unwrap().position;
        assert!((p - Vec3::new(0.0, 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let arm = planar(2);
        assert!(matches!(
            arm.forward_kinematics(&dvec(&[0.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 1, .. })
        ));
        assert!(arm.jacobian(&dvec(&[0.0, 0.0, 0.0])).is_err());
        let bad = JointState::new(dvec(&[0.0, 0.0]), dvec(&[0.0]));
        assert!(arm.bias_forces(&bad).is_err());
        assert!(arm.jacobian_dot_qdot(&bad).is_err());
        let ok = JointState::at_rest(dvec(&[0.0, 0.0]));
        assert!(arm.forward_dynamics(&ok, &dvec(&[1.0])).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let j = planar(1).jacobian(&dvec(&[0.0])).unwrap();
        assert!((j.column(0) - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);

        let j = planar(2).jacobian(&dvec(&[0.0, 0.0])).unwrap();
        assert!((j.column(0) - Vec3::new(0.0, 2.0, 0.0)).norm() < 1e-15);
        assert!((j.column(1) - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);

        let arm = ArmModel::default_six_dof();
        let q = dvec(&[0.3, -0.2, 0.9, 0.1, -0.4, 0.7]);
        let v = arm.jacobian(&q).unwrap() * DVector::zeros(6);
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let arm = ArmModel::default_six_dof();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..50 {
            let q = random_q(&mut rng, 6);
            let jac = arm.jacobian(&q).unwrap();
            for i in 0..6 {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let fd = (arm.forward_kinematics(&qp).unwrap().position
                    - arm.forward_kinematics(&qm).unwrap().position)
                    / (2.0 * h);
                assert!((jac.column(i) - fd).amax() < 1e-6);
            }
        }
    }

    #[test]
    fn jdot_qdot_examples() {
        let arm = ArmModel::default_six_dof();
        let state = JointState::at_rest(dvec(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]));
        assert_eq!(arm.jacobian_dot_qdot(&state).unwrap(), Vec3::zeros());

        // (cos q, sin q) differentiated twice at q = 0, qdot = 1
        let one = planar(1);
        let a = one
            .jacobian_dot_qdot(&JointState::new(dvec(&[0.0]), dvec(&[1.0])))
            .unwrap();
        assert!((a - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn jdot_qdot_matches_finite_difference_of_jacobian() {
        let arm = ArmModel::default_six_dof();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let q = random_q(&mut rng, 6);
            let qdot: DVector<f64> = DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
            let h = 1e-6 / qdot.norm().max(1e-12);
            let jp = arm.jacobian(&(&q + &qdot * h)).unwrap();
            let jm = arm.jacobian(&(&q - &qdot * h)).unwrap();
            let fd = (jp - jm) / (2.0 * h) * &qdot;
            let analytic = arm
                .jacobian_dot_qdot(&JointState::new(q, qdot))
                .unwrap();
            assert!((analytic - Vec3::new(fd[0], fd[1], fd[2])).amax() < 1e-5);
        }
    }

    #[test]
    fn pendulum_mass_and_gravity() {
        let arm = pendulum();
        let m = arm.mass_matrix(&dvec(&[0.3])).unwrap();
        assert!((m[(0, 0)] - 1.0).abs() < 1e-14);

        let g = arm.gravity_torques(&dvec(&[0.0])).unwrap();
        assert!((g[0].abs() - STANDARD_GRAVITY).abs() < 1e-12);

        let qdd = arm
            .forward_dynamics(&JointState::at_rest(dvec(&[0.0])), &dvec(&[0.0]))
            .unwrap();
        assert!((qdd[0] + STANDARD_GRAVITY).abs() < 1e-12);
        // -(g/l) cos q elsewhere
        let qdd = arm
            .forward_dynamics(&JointState::at_rest(dvec(&[1.0])), &dvec(&[0.0]))
            .unwrap();
        assert!((qdd[0] + STANDARD_GRAVITY * 1.0f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn bias_vanishes_without_velocity_or_gravity() {
        let mut arm = ArmModel::default_six_dof();
        arm.set_gravity(Vec3::zeros());
        let b = arm
            .bias_forces(&JointState::at_rest(dvec(&[0.4, -1.0, 0.5, 2.0, 0.1, -0.3])))
            .unwrap();
        assert_eq!(b.amax(), 0.0);
    }

    #[test]
    fn mass_matrix_symmetric_positive_definite() {
        let arm = ArmModel::default_six_dof();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let m = arm.mass_matrix(&random_q(&mut rng, 6)).unwrap();
            assert!((&m - m.transpose()).amax() <= 1e-12);
            assert!(m.symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn gravity_compensation_is_static_equilibrium() {
        let arm = ArmModel::default_six_dof();
        let q = dvec(&[0.2, 0.7, -1.1, 0.3, 0.9, -0.5]);
        let state = JointState::at_rest(q.clone());
        let qdd = arm
            .forward_dynamics(&state, &arm.gravity_torques(&q).unwrap())
            .unwrap();
        assert!(qdd.amax() < 1e-10);
    }

    #[test]
    fn forward_then_inverse_dynamics_round_trip() {
        let arm = ArmModel::default_six_dof();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let state = JointState::new(
                random_q(&mut rng, 6),
                DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0)),
            );
            let tau = DVector::from_fn(6, |_, _| rng.random_range(-20.0..20.0));
            let qdd = arm.forward_dynamics(&state, &tau).unwrap();
            let back = arm.inverse_dynamics(&state, &qdd).unwrap();
            assert!((back - &tau).amax() < 1e-9);
        }
    }

    #[test]
    fn mass_matrix_matches_kinetic_energy_of_links() {
        // Independent route: sum over links of 1/2 m |v_c|^2 + 1/2 w^T I w,
        // with link velocities from finite differences of the frame chain.
        let arm = ArmModel::default_six_dof();
        let q = dvec(&[0.3, 0.5, -0.8, 0.2, 1.1, -0.4]);
        let qdot = dvec(&[0.7, -0.4, 0.9, -1.2, 0.5, 0.3]);
        let h = 1e-6;
        let fp = arm.frames(&(&q + &qdot * h));
        let fm = arm.frames(&(&q - &qdot * h));
        let f0 = arm.frames(&q);
        let mut ke = 0.0;
        for (i, link) in arm.links().iter().enumerate() {
            let com = |f: &ChainFrames| f.origin[i + 1] + f.rot[i + 1] * link.com;
            let v = (com(&fp) - com(&fm)) / (2.0 * h);
            let rdot = (fp.rot[i + 1] - fm.rot[i + 1]) / (2.0 * h);
            let skew = rdot * f0.rot[i + 1].transpose();
            let w = Vec3::new(skew[(2, 1)], skew[(0, 2)], skew[(1, 0)]);
            let inertia = f0.rot[i + 1] * link.inertia * f0.rot[i + 1].transpose();
            ke += 0.5 * link.mass * v.norm_squared() + 0.5 * w.dot(&(inertia * w));
        }
        let from_mass = arm.kinetic_energy(&JointState::new(q, qdot)).unwrap();
        assert!((ke - from_mass).abs() < 1e-7 * from_mass.max(1.0));
    }

    #[test]
    fn invalid_links_are_rejected() {
        let mut link = point_mass_link(1.0, -1.0);
        assert!(ArmModel::new(vec![link.clone()], Vec3::zeros()).is_err());
        link.mass = 1.0;
        link.inertia = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 3.0));
        assert!(link.validate().is_err());
        link.inertia = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -0.5));
        assert!(link.validate().is_err());
        assert!(ArmModel::new(vec![], Vec3::zeros()).is_err());
    }

    #[test]
    fn builtin_rods_are_physical() {
        for link in ArmModel::default_six_dof().links() {
            link.validate().unwrap();
            assert!(link.mass > 0.0);
        }
    }
}
