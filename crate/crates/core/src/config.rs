//! TOML run configuration.
//!
//! ```toml
//! [geometry]
//! eps = 1e-3
//! R1 = 0.5
//! mode = "planar"            # or "axisymmetric"
//! [geometry.profile]
//! kind = "power_m"           # holder_power | power_m | flat_plateau
//! m = 2
//! lambda = 1.0
//!
//! [mesh]
//! layers = 8
//!
//! [solve]
//! phi = { kind = "linear_xn" }
//!
//! [sweep]
//! range = [1e-4, 1e-2]
//! count = 8
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryData, GapGeometry, Mode, Order, Profile, ProfileKind};
use crate::harness::{log_space, Check, SweepConfig};
use crate::mesh::MeshParams;
use crate::solver::{SolveOptions, SolverBackend};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    HolderPower,
    PowerM,
    FlatPlateau,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub kind: ProfileName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Order>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collar: Option<f64>,
}

impl ProfileSpec {
    fn build(&self, section: &str, r1: f64) -> Result<Profile> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| {
                Error::Config(format!(
                    "{section}.{key} is required for kind {}",
                    serde_json::to_string(&self.kind).unwrap_or_default()
                ))
            })
        };
        let reject = |present: bool, key: &str| {
            if present {
                Err(Error::Config(format!(
                    "{section}.{key} does not apply to kind {}",
                    serde_json::to_string(&self.kind).unwrap_or_default()
                )))
            } else {
                Ok(())
            }
        };
        let kind = match self.kind {
            ProfileName::HolderPower => {
                reject(self.m.is_some(), "m")?;
                reject(self.lambda.is_some(), "lambda")?;
                reject(self.r0.is_some(), "r0")?;
                reject(self.collar.is_some(), "collar")?;
                ProfileKind::HolderPower {
                    alpha: need(self.alpha, "alpha")?,
                    kappa: need(self.kappa, "kappa")?,
                }
            }
            ProfileName::PowerM => {
                reject(self.alpha.is_some(), "alpha")?;
                reject(self.kappa.is_some(), "kappa")?;
                reject(self.r0.is_some(), "r0")?;
                reject(self.collar.is_some(), "collar")?;
                ProfileKind::PowerM {
                    m: self.m.ok_or_else(|| {
                        Error::Config(format!("{section}.m is required for kind \"power_m\""))
                    })?,
                    lambda: need(self.lambda, "lambda")?,
                }
            }
            ProfileName::FlatPlateau => {
                reject(self.alpha.is_some(), "alpha")?;
                reject(self.m.is_some(), "m")?;
                reject(self.lambda.is_some(), "lambda")?;
                ProfileKind::FlatPlateau {
                    r0: need(self.r0, "r0")?,
                    kappa: need(self.kappa, "kappa")?,
                    collar: self.collar.unwrap_or(0.0),
                }
            }
        };
        let p = Profile { kind, r1 };
        p.check().map_err(|e| Error::Config(format!("{section}: {e}")))?;
        Ok(p)
    }
}

fn one() -> f64 {
    1.0
}
fn four() -> f64 {
    4.0
}
fn half() -> f64 {
    0.5
}
fn planar() -> Mode {
    Mode::Planar
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub profile: ProfileSpec,
    /// Lower inclusion profile; mirror symmetric when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<ProfileSpec>,
    pub eps: f64,
    #[serde(rename = "R1", default = "half")]
    pub r1: f64,
    #[serde(default = "one")]
    pub inclusion_radius: f64,
    #[serde(default = "four")]
    pub outer_radius: f64,
    #[serde(default = "planar")]
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    pub phi: BoundaryData,
    pub tol: f64,
    pub backend: SolverBackend,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            phi: BoundaryData::LinearXn,
            tol: SolveOptions::default().tol,
            backend: SolverBackend::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Explicit ε list; takes precedence over `range`/`count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    pub range: [f64; 2],
    pub count: usize,
    pub checks: Vec<Check>,
    pub richardson: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            eps: None,
            range: [1e-4, 1e-2],
            count: 8,
            checks: Check::ALL.to_vec(),
            richardson: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
    pub plot: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
            plot: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    #[serde(default)]
    pub mesh: MeshParams,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn check_eps(key: &str, eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} = {eps} must lie in (0, 1/2)")))
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_toml(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_eps("geometry.eps", self.geometry.eps)?;
        if let Some(list) = &self.sweep.eps {
            if list.is_empty() {
                return Err(Error::Config("sweep.eps must not be empty".into()));
            }
            for &e in list {
                check_eps("sweep.eps", e)?;
            }
        } else {
            let [a, b] = self.sweep.range;
            check_eps("sweep.range", a)?;
            check_eps("sweep.range", b)?;
            if a >= b {
                return Err(Error::Config(format!("sweep.range must be increasing, got [{a}, {b}]")));
            }
            if self.sweep.count < 2 {
                return Err(Error::Config(format!("sweep.count must be at least 2, got {}", self.sweep.count)));
            }
        }
        if !(self.solve.tol > 0.0 && self.solve.tol < 1.0) {
            return Err(Error::Config(format!("solve.tol must lie in (0, 1), got {}", self.solve.tol)));
        }
        self.mesh.check()?;
        self.solve.phi.check(self.geometry.mode)?;
        self.geometry()?.check()?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<GapGeometry> {
        let g = &self.geometry;
        let upper = g.profile.build("geometry.profile", g.r1)?;
        let lower = match &g.lower {
            Some(spec) => spec.build("geometry.lower", g.r1)?,
            None => upper,
        };
        Ok(GapGeometry {
            upper,
            lower,
            eps: g.eps,
            inclusion_radius: g.inclusion_radius,
            outer_radius: g.outer_radius,
            symmetric: g.lower.is_none(),
            mode: g.mode,
        })
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            backend: self.solve.backend,
            tol: self.solve.tol,
        }
    }

    pub fn sweep_eps(&self) -> Vec<f64> {
        match &self.sweep.eps {
            Some(list) => list.clone(),
            None => log_space(self.sweep.range[0], self.sweep.range[1], self.sweep.count),
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let mut s = SweepConfig::new(self.geometry()?, self.sweep_eps());
        s.mesh = self.mesh.clone();
        s.phi = self.solve.phi.clone();
        s.solve = self.solve_options();
        s.richardson = self.sweep.richardson;
        Ok(s)
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[geometry]
eps = 1e-3
[geometry.profile]
kind = "power_m"
m = 2
lambda = 1.0
"#;

    #[test]
    fn minimal_config_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.mesh.layers, 8);
        assert_eq!(c.mesh.grading_exponent, 0.5);
        assert_eq!(c.solve.phi, BoundaryData::LinearXn);
        assert_eq!(c.solve.backend, SolverBackend::Cholesky);
        assert_eq!(c.sweep_eps().len(), 8);
        let g = c.geometry().unwrap();
        assert!(g.symmetric);
        assert_eq!(g.r1(), 0.5);
        assert_eq!(g.mode, Mode::Planar);
    }

    #[test]
    fn eps_outside_half_is_rejected() {
        let text = MINIMAL.replace("eps = 1e-3", "eps = 0.7");
        let e = RunConfig::from_toml(&text).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("(0, 1/2)"), "{e}");
        let text = format!("{MINIMAL}\n[sweep]\neps = [1e-3, 0.6]\n");
        assert!(RunConfig::from_toml(&text).unwrap_err().to_string().contains("(0, 1/2)"));
    }

    #[test]
    fn misspelled_key_is_named() {
        let text = MINIMAL.replace("eps = 1e-3", "eps = 1e-3\nepsilonn = 1e-3");
        let e = RunConfig::from_toml(&text).unwrap_err();
        assert!(e.to_string().contains("epsilonn"), "{e}");
        let text = format!("{MINIMAL}\n[mesh]\nlayerz = 4\n");
        assert!(RunConfig::from_toml(&text).unwrap_err().to_string().contains("layerz"));
    }

    #[test]
    fn missing_profile_parameter_is_named() {
        let text = MINIMAL.replace("lambda = 1.0", "");
        let e = RunConfig::from_toml(&text).unwrap_err();
        assert!(e.to_string().contains("geometry.profile.lambda"), "{e}");
        let text = MINIMAL.replace("lambda = 1.0", "lambda = 1.0\nalpha = 0.5");
        assert!(RunConfig::from_toml(&text).unwrap_err().to_string().contains("alpha"));
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"
[geometry]
eps = 1e-2
R1 = 0.5
mode = "axisymmetric"
[geometry.profile]
kind = "flat_plateau"
r0 = 0.3
kappa = 4.0
[mesh]
layers = 10
grading_exponent = 0.6
[solve]
phi = { kind = "polynomial", coeffs = [0.0, 1.0, 0.0, 2.0] }
tol = 1e-10
backend = "cg"
[sweep]
eps = [1e-3, 2e-3, 4e-3, 8e-3]
checks = ["rate", "capacity"]
richardson = false
[output]
dir = "results"
plot = true
"#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.sweep.checks, vec![Check::Rate, Check::Capacity]);
        assert_eq!(c.solve_options().backend, SolverBackend::Cg);
        let s = c.sweep_config().unwrap();
        assert_eq!(s.eps, vec![1e-3, 2e-3, 4e-3, 8e-3]);
        assert_eq!(s.mesh.layers, 10);
        assert!(!s.richardson);
        let back: RunConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_toml(MINIMAL).unwrap();
        let mut b = a.clone();
        b.mesh.layers = 9;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn x1_data_rejected_in_axisymmetric_mode() {
        let text = format!("{}\n[solve]\nphi = {{ kind = \"linear_x1\" }}\n", MINIMAL.replace("eps = 1e-3", "eps = 1e-3\nmode = \"axisymmetric\""));
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
    }
}
