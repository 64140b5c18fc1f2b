//! TOML scenario files.
//!
//! A file has the sections `[sim]`, `[arm]`, `[impedance]`, `[trajectory]`,
//! `[safety]` and `[world]`. Only `sim.q0` and `[trajectory]` are required;
//! everything else falls back to the library defaults. Exporting a
//! [`SimConfig`] writes every value explicitly, so a re-loaded export runs
//! bit-for-bit the same simulation.
//!
//! ```toml
//! [sim]
//! name = "demo"
//! duration = 5.0
//! q0 = [0.0, 0.8, -1.4, 0.3, 1.2, 0.0]
//!
//! [trajectory]
//! kind = "constant"
//! position = [0.4, 0.0, 0.3]
//!
//! [[world.obstacles]]
//! id = 0
//! radius = 0.1
//! center = [0.8, 0.0, 0.3]
//! velocity = [-0.3, 0.0, 0.0]
//! ```

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::arm_model::{ArmModel, DhLink, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::impedance::{ImpedanceParams, Trajectory, Waypoint, DEFAULT_DLS_DAMPING};
use crate::safety_filter::{FilterConfig, FilterMode};
use crate::sim::{Integrator, SimConfig, DEFAULT_DT};
use crate::world::{Obstacle, ObstacleMotion, PerceptionConfig, DEFAULT_PERCEPTION_RANGE};
use crate::{Mat3, Vec3};

type Row3 = [f64; 3];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub sim: SimSection,
    #[serde(default)]
    pub arm: ArmSection,
    #[serde(default)]
    pub impedance: ImpedanceSection,
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub safety: SafetySection,
    #[serde(default)]
    pub world: WorldSection,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "default_integrator")]
    pub integrator: String,
    pub q0: Vec<f64>,
    /// Zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qdot0: Option<Vec<f64>>,
}

fn default_name() -> String {
    "custom".into()
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_integrator() -> String {
    Integrator::default().as_str().into()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSection {
    #[serde(default = "default_gravity")]
    pub gravity: Row3,
    /// DH chain base to flange. Empty means the builtin 6-DOF arm.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkEntry>,
}

fn default_gravity() -> Row3 {
    [0.0, 0.0, -STANDARD_GRAVITY]
}

impl Default for ArmSection {
    fn default() -> Self {
        Self {
            gravity: default_gravity(),
            links: Vec::new(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
    pub mass: f64,
    pub com: Row3,
    pub inertia: InertiaEntry,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InertiaEntry {
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
    #[serde(default)]
    pub ixy: f64,
    #[serde(default)]
    pub ixz: f64,
    #[serde(default)]
    pub iyz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpedanceSection {
    /// Desired inertia, row-major.
    pub inertia: [Row3; 3],
    pub damping: [Row3; 3],
    pub stiffness: [Row3; 3],
    #[serde(default = "default_dls")]
    pub dls_damping: f64,
    #[serde(default)]
    pub f_ext: Row3,
}

fn default_dls() -> f64 {
    DEFAULT_DLS_DAMPING
}

fn rows(m: &Mat3) -> [Row3; 3] {
    [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
}

fn from_rows(r: &[Row3; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| r[i][j])
}

impl Default for ImpedanceSection {
    fn default() -> Self {
        let p = ImpedanceParams::default();
        Self {
            inertia: rows(p.lambda()),
            damping: rows(p.damping()),
            stiffness: rows(p.stiffness()),
            dls_damping: DEFAULT_DLS_DAMPING,
            f_ext: [0.0; 3],
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointEntry {
    pub t: f64,
    pub position: Row3,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySection {
    Constant {
        position: Row3,
    },
    Waypoints {
        points: Vec<PointEntry>,
    },
    Circle {
        center: Row3,
        radius: f64,
        angular_rate: f64,
        #[serde(default = "z_axis")]
        normal: Row3,
        #[serde(default)]
        phase: f64,
    },
}

fn z_axis() -> Row3 {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetySection {
    pub mode: String,
    pub gamma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub eps_v: f64,
    pub ee_radius: f64,
    pub clearance: f64,
}

impl Default for SafetySection {
    fn default() -> Self {
        Self::from(&FilterConfig::default())
    }
}

impl From<&FilterConfig> for SafetySection {
    fn from(c: &FilterConfig) -> Self {
        Self {
            mode: c.mode.as_str().into(),
            gamma: c.gamma,
            gamma1: c.gamma1,
            gamma2: c.gamma2,
            eps_v: c.eps_v,
            ee_radius: c.ee_radius,
            clearance: c.clearance,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSection {
    #[serde(default = "default_range")]
    pub perception_range: f64,
    #[serde(default)]
    pub obstacles: Vec<ObstacleEntry>,
}

fn default_range() -> f64 {
    DEFAULT_PERCEPTION_RANGE
}

impl Default for WorldSection {
    fn default() -> Self {
        Self {
            perception_range: DEFAULT_PERCEPTION_RANGE,
            obstacles: Vec::new(),
        }
    }
}

/// Either `center` (plus optional `velocity`) or `waypoints`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub id: u32,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Row3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Row3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<Vec<PointEntry>>,
}

fn points(entries: &[PointEntry]) -> Vec<Waypoint> {
    entries
        .iter()
        .map(|p| Waypoint {
            t: p.t,
            position: Vec3::from(p.position),
        })
        .collect()
}

fn point_entries(points: &[Waypoint]) -> Vec<PointEntry> {
    points
        .iter()
        .map(|p| PointEntry {
            t: p.t,
            position: p.position.into(),
        })
        .collect()
}

impl ConfigFile {
    pub fn from_sim_config(cfg: &SimConfig) -> Self {
        let links = cfg
            .arm
            .links()
            .iter()
            .map(|l| LinkEntry {
                a: l.a,
                alpha: l.alpha,
                d: l.d,
                theta_offset: l.theta_offset,
                mass: l.mass,
                com: l.com.into(),
                inertia: InertiaEntry {
                    ixx: l.inertia[(0, 0)],
                    iyy: l.inertia[(1, 1)],
                    izz: l.inertia[(2, 2)],
                    ixy: l.inertia[(0, 1)],
                    ixz: l.inertia[(0, 2)],
                    iyz: l.inertia[(1, 2)],
                },
            })
            .collect();
        let trajectory = match &cfg.trajectory {
            Trajectory::Constant(p) => TrajectorySection::Constant { position: (*p).into() },
            Trajectory::Waypoints(w) => TrajectorySection::Waypoints {
                points: point_entries(w),
            },
            Trajectory::Circle {
                center,
                radius,
                angular_rate,
                normal,
                phase,
            } => TrajectorySection::Circle {
                center: (*center).into(),
                radius: *radius,
                angular_rate: *angular_rate,
                normal: (*normal).into(),
                phase: *phase,
            },
        };
        let obstacles = cfg
            .obstacles
            .iter()
            .map(|o| match &o.motion {
                ObstacleMotion::ConstantVelocity => ObstacleEntry {
                    id: o.id,
                    radius: o.radius,
                    center: Some(o.center.into()),
                    velocity: Some(o.velocity.into()),
                    waypoints: None,
                },
                ObstacleMotion::Waypoints(w) => ObstacleEntry {
                    id: o.id,
                    radius: o.radius,
                    center: None,
                    velocity: None,
                    waypoints: Some(point_entries(w)),
                },
            })
            .collect();
        Self {
            sim: SimSection {
                name: cfg.name.clone(),
                dt: cfg.dt,
                duration: cfg.duration,
                integrator: cfg.integrator.as_str().into(),
                q0: cfg.q0.iter().copied().collect(),
                qdot0: Some(cfg.qdot0.iter().copied().collect()),
            },
            arm: ArmSection {
                gravity: cfg.arm.gravity().into(),
                links,
            },
            impedance: ImpedanceSection {
                inertia: rows(cfg.impedance.lambda()),
                damping: rows(cfg.impedance.damping()),
                stiffness: rows(cfg.impedance.stiffness()),
                dls_damping: cfg.dls_damping,
                f_ext: cfg.f_ext.into(),
            },
            trajectory,
            safety: SafetySection::from(&cfg.safety),
            world: WorldSection {
                perception_range: cfg.perception.range,
                obstacles,
            },
        }
    }

    /// Builds and validates the simulation config.
    pub fn into_sim_config(self) -> Result<SimConfig> {
        let gravity = Vec3::from(self.arm.gravity);
        let arm = if self.arm.links.is_empty() {
            let mut arm = ArmModel::default_six_dof();
            arm.set_gravity(gravity);
            arm
        } else {
            let links = self
                .arm
                .links
                .iter()
                .map(|l| {
                    let i = &l.inertia;
                    DhLink {
                        a: l.a,
                        alpha: l.alpha,
                        d: l.d,
                        theta_offset: l.theta_offset,
                        mass: l.mass,
                        com: Vec3::from(l.com),
                        inertia: Mat3::new(
                            i.ixx, i.ixy, i.ixz, i.ixy, i.iyy, i.iyz, i.ixz, i.iyz, i.izz,
                        ),
                    }
                })
                .collect();
            ArmModel::new(links, gravity)?
        };

        let imp = &self.impedance;
        let impedance = ImpedanceParams::new(
            from_rows(&imp.inertia),
            from_rows(&imp.damping),
            from_rows(&imp.stiffness),
        )?;

        let trajectory = match self.trajectory {
            TrajectorySection::Constant { position } => Trajectory::Constant(Vec3::from(position)),
            TrajectorySection::Waypoints { points: p } => Trajectory::Waypoints(points(&p)),
            TrajectorySection::Circle {
                center,
                radius,
                angular_rate,
                normal,
                phase,
            } => Trajectory::Circle {
                center: Vec3::from(center),
                radius,
                angular_rate,
                normal: Vec3::from(normal),
                phase,
            },
        };

        let s = &self.safety;
        let safety = FilterConfig {
            mode: s.mode.parse::<FilterMode>()?,
            gamma: s.gamma,
            eps_v: s.eps_v,
            gamma1: s.gamma1,
            gamma2: s.gamma2,
            ee_radius: s.ee_radius,
            clearance: s.clearance,
        };

        let obstacles = self
            .world
            .obstacles
            .into_iter()
            .map(|o| match (o.center, o.velocity, o.waypoints) {
                (Some(c), v, None) => Obstacle::constant_velocity(
                    o.id,
                    Vec3::from(c),
                    v.map(Vec3::from).unwrap_or_else(Vec3::zeros),
                    o.radius,
                ),
                (None, None, Some(w)) => Obstacle::waypoints(o.id, points(&w), o.radius),
                _ => Err(Error::InvalidConfig(format!(
                    "obstacle {}: give either center (and optionally velocity) or waypoints",
                    o.id
                ))),
            })
            .collect::<Result<Vec<_>>>()?;

        let n = self.sim.q0.len();
        let cfg = SimConfig {
            name: self.sim.name,
            dt: self.sim.dt,
            duration: self.sim.duration,
            integrator: self.sim.integrator.parse()?,
            arm,
            impedance,
            dls_damping: imp.dls_damping,
            f_ext: Vec3::from(imp.f_ext),
            trajectory,
            safety,
            obstacles,
            perception: PerceptionConfig {
                range: self.world.perception_range,
            },
            q0: DVector::from_vec(self.sim.q0),
            qdot0: self
                .sim
                .qdot0
                .map(DVector::from_vec)
                .unwrap_or_else(|| DVector::zeros(n)),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_config(text: &str) -> Result<SimConfig> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    file.into_sim_config()
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn to_toml(cfg: &SimConfig) -> Result<String> {
    toml::to_string(&ConfigFile::from_sim_config(cfg))
        .map_err(|e| Error::InvalidConfig(format!("cannot serialize config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::builtin_scenarios;

    const MINIMAL: &str = r#"
[sim]
duration = 1.0
q0 = [0.0, 0.8, -1.4, 0.3, 1.2, 0.0]

[trajectory]
kind = "constant"
position = [0.4, 0.0, 0.3]
"#;

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.name, "custom");
        assert_eq!(cfg.dt, DEFAULT_DT);
        assert_eq!(cfg.safety, FilterConfig::default());
        assert_eq!(cfg.arm, ArmModel::default_six_dof());
        assert_eq!(cfg.impedance, ImpedanceParams::default());
        assert_eq!(cfg.qdot0, DVector::zeros(6));
        assert!(cfg.obstacles.is_empty());
    }

    #[test]
    fn builtins_survive_export_and_reload() {
        for cfg in builtin_scenarios() {
            let text = to_toml(&cfg).unwrap();
            let back = parse_config(&text).unwrap();
            assert_eq!(back.arm, cfg.arm, "{}", cfg.name);
            assert_eq!(back.trajectory, cfg.trajectory);
            assert_eq!(back.obstacles, cfg.obstacles);
            assert_eq!(back.safety, cfg.safety);
            assert_eq!(back.q0, cfg.q0);
            assert_eq!(back.dt, cfg.dt);
            assert_eq!(to_toml(&back).unwrap(), text);
        }
    }

    #[test]
    fn obstacle_kinds() {
        let text = format!(
            "{MINIMAL}
[world]
perception_range = 2.0

[[world.obstacles]]
id = 3
radius = 0.1
center = [1.0, 0.0, 0.3]

[[world.obstacles]]
id = 4
radius = 0.1
waypoints = [{{ t = 0.0, position = [1.0, 1.0, 0.3] }}, {{ t = 2.0, position = [1.0, -1.0, 0.3] }}]
"
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.obstacles[0].velocity, Vec3::zeros());
        assert_eq!(cfg.obstacles[1].velocity, Vec3::new(0.0, -1.0, 0.0));
        assert_eq!(cfg.perception.range, 2.0);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(parse_config("[sim]\nduration = 1.0"), Err(Error::InvalidConfig(_))));
        let typo = MINIMAL.replace("duration", "durration");
        assert!(parse_config(&typo).is_err());
        let mode = format!("{MINIMAL}\n[safety]\nmode = \"cone\"\ngamma = 1.0\ngamma1 = 1.0\ngamma2 = 1.0\neps_v = 1e-6\nee_radius = 0.05\nclearance = 0.02\n");
        assert!(parse_config(&mode).is_err());
        let both = format!(
            "{MINIMAL}\n[[world.obstacles]]\nid = 0\nradius = 0.1\ncenter = [1.0, 0.0, 0.0]\nwaypoints = [{{ t = 0.0, position = [1.0, 0.0, 0.0] }}]\n"
        );
        assert!(parse_config(&both).is_err());
        let short_q = MINIMAL.replace("q0 = [0.0, 0.8, -1.4, 0.3, 1.2, 0.0]", "q0 = [0.0]");
        assert!(parse_config(&short_q).is_err());
        let bad_gain = format!(
            "{MINIMAL}\n[impedance]\ninertia = [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]\ndamping = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]\nstiffness = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]\n"
        );
        assert!(parse_config(&bad_gain).is_err());
    }
}
