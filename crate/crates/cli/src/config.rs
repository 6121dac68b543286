//! Experiment configuration: a single JSON document with every physical
//! quantity in SI units and the unit spelled in the field name. Parsing
//! keeps serde's line/column diagnostics; semantic checks name the field.

use std::fs;
use std::path::Path;

use holobeam_core::{
    make_basis, Aperture, BcdOptions, EhCircuit, InitScheme, MediumParams, Point3, Scenario,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Top-level document consumed by `holobeam run` and `holobeam pattern`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Physical setup. Omitted → the desk profile (or `--profile` choice).
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    /// Required by `run`; ignored by `pattern`.
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeId>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Quadrature grid for the discrete-array baselines (needs to resolve
    /// the λ²/8π element disks).
    #[serde(default = "default_fd_grid")]
    pub fd_grid: (usize, usize),
    /// Seed for the randomized initialization ablations.
    #[serde(default)]
    pub seed: u64,
    /// Default output directory; `--out` wins when both are given.
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Worker threads for the sweep pool (default: available cores).
    #[serde(default)]
    pub workers: Option<usize>,
    /// Focusing-study block consumed by `holobeam pattern`.
    #[serde(default)]
    pub study: Option<StudyConfig>,
}

fn default_schemes() -> Vec<SchemeId> {
    vec![
        SchemeId::HIdet,
        SchemeId::FdIdet,
        SchemeId::Fd,
        SchemeId::Mf,
        SchemeId::Upper,
    ]
}

fn default_fd_grid() -> (usize, usize) {
    (128, 128)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureConfig {
    pub lx_m: f64,
    pub ly_m: f64,
    /// Quadrature samples per axis; nx·ny is the integration sample count.
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EhConfig {
    /// Logistic steepness (1/W).
    pub a: f64,
    /// Logistic midpoint (W).
    #[serde(rename = "b_W")]
    pub b_w: f64,
    /// Saturation DC power (W).
    #[serde(rename = "m_W")]
    pub m_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub aperture: ApertureConfig,
    pub wavelength_m: f64,
    /// Wave impedance of the propagation medium (Ω).
    #[serde(default = "default_z0")]
    pub z0_ohm: f64,
    /// Harvester load impedance (Ω).
    #[serde(default = "default_z_load")]
    pub z_load_ohm: f64,
    /// Per-axis Fourier mode bound; omitted → the ⌈L/λ⌉ rule.
    #[serde(default)]
    pub basis_override_n: Option<i64>,
    pub du_positions_m: Vec<[f64; 3]>,
    #[serde(default)]
    pub eu_positions_m: Vec<[f64; 3]>,
    /// Transmit current budget Σ‖w‖².
    #[serde(rename = "pt_A2")]
    pub pt_a2: f64,
    /// Per-EU harvested DC floor; 0 disables the constraint.
    #[serde(rename = "p0_W", default)]
    pub p0_w: f64,
    /// Receive noise variance per field component.
    #[serde(rename = "noise_var_V2m2")]
    pub noise_var_v2m2: f64,
    /// Rectifier circuit; omitted → the reference sigmoid.
    #[serde(default)]
    pub eh_circuit: Option<EhConfig>,
    /// Energy-receiver incidence angle.
    #[serde(default)]
    pub phi_rad: f64,
}

fn default_z0() -> f64 {
    376.73
}

fn default_z_load() -> f64 {
    25.0
}

/// What a sweep varies. Serialized names carry the unit, matching the
/// scenario fields they override.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "pt_A2")]
    PtA2,
    #[serde(rename = "p0_W")]
    P0W,
    /// Square-aperture side; the basis follows the config's override or
    /// the ⌈L/λ⌉ rule at each size.
    #[serde(rename = "aperture_side_m")]
    ApertureSideM,
    /// Radial distance of every energy user along its original direction.
    #[serde(rename = "eu_distance_m")]
    EuDistanceM,
    /// Per-axis Fourier mode bound (integer values).
    #[serde(rename = "modes_n")]
    ModesN,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::PtA2 => "pt_A2",
            SweepVariable::P0W => "p0_W",
            SweepVariable::ApertureSideM => "aperture_side_m",
            SweepVariable::EuDistanceM => "eu_distance_m",
            SweepVariable::ModesN => "modes_n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// Scheme tags as they appear in configs, CSV rows, and report files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "H-IDET")]
    HIdet,
    #[serde(rename = "FD-IDET")]
    FdIdet,
    #[serde(rename = "FD")]
    Fd,
    #[serde(rename = "MF")]
    Mf,
    #[serde(rename = "UPPER")]
    Upper,
}

impl SchemeId {
    pub fn tag(&self) -> &'static str {
        match self {
            SchemeId::HIdet => "H-IDET",
            SchemeId::FdIdet => "FD-IDET",
            SchemeId::Fd => "FD",
            SchemeId::Mf => "MF",
            SchemeId::Upper => "UPPER",
        }
    }

    pub const ALL: [SchemeId; 5] = [
        SchemeId::HIdet,
        SchemeId::FdIdet,
        SchemeId::Fd,
        SchemeId::Mf,
        SchemeId::Upper,
    ];
}

impl std::str::FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .iter()
            .copied()
            .find(|id| id.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown scheme {s:?}; expected one of H-IDET, FD-IDET, FD, MF, UPPER"
                ))
            })
    }
}

impl std::fmt::Display for SchemeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Optimizer knobs; every field defaults to the engine's own default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub outer_tol: f64,
    pub outer_max: usize,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub subproblem_tol: f64,
    pub subproblem_max_iter: usize,
    pub rebuild_maxmin_each_outer: bool,
    /// "proposed", "random_sca", or "random_bcd".
    pub init: InitName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    Proposed,
    RandomSca,
    RandomBcd,
}

impl From<InitName> for InitScheme {
    fn from(n: InitName) -> Self {
        match n {
            InitName::Proposed => InitScheme::Proposed,
            InitName::RandomSca => InitScheme::RandomSca,
            InitName::RandomBcd => InitScheme::RandomBcd,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = BcdOptions::default();
        Self {
            outer_tol: d.outer_tol,
            outer_max: d.outer_max,
            inner_tol: d.inner_tol,
            inner_max: d.inner_max,
            subproblem_tol: d.subproblem_tol,
            subproblem_max_iter: d.subproblem_max_iter,
            rebuild_maxmin_each_outer: d.rebuild_maxmin_each_outer,
            init: InitName::Proposed,
        }
    }
}

impl SolverConfig {
    pub fn bcd_options(&self, seed: u64) -> BcdOptions {
        BcdOptions {
            outer_tol: self.outer_tol,
            outer_max: self.outer_max,
            inner_tol: self.inner_tol,
            inner_max: self.inner_max,
            subproblem_tol: self.subproblem_tol,
            subproblem_max_iter: self.subproblem_max_iter,
            rebuild_maxmin_each_outer: self.rebuild_maxmin_each_outer,
            init: self.init.into(),
            seed,
        }
    }
}

/// Focusing-study block for `holobeam pattern`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    /// Design foci for the pattern maps and the focus-scan comparison.
    pub foci_m: Vec<[f64; 3]>,
    /// Boresight scan for the harvest-versus-distance files.
    pub scan: ScanConfig,
    /// x–z map window (y = 0 plane) for the pattern files.
    pub map: MapConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub from_m: f64,
    pub to_m: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub x_halfwidth_m: f64,
    pub z_from_m: f64,
    pub z_to_m: f64,
    pub nx: usize,
    pub nz: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            foci_m: vec![[0.0, 0.0, 4.0], [0.0, 0.0, 8.0], [0.0, 0.0, 25.0]],
            scan: ScanConfig {
                from_m: 1.0,
                to_m: 50.0,
                points: 41,
            },
            map: MapConfig {
                x_halfwidth_m: 2.0,
                z_from_m: 1.0,
                z_to_m: 30.0,
                nx: 81,
                nz: 117,
            },
        }
    }
}

/// Built-in scenario presets selectable with `--profile`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Reduced instance: 2 data users, 1 energy user, 121 modes.
    Desk,
    /// 4 data users, 2 energy users, the full ⌈L/λ⌉ basis (441 modes).
    Full,
}

impl Profile {
    pub fn scenario(&self) -> ScenarioConfig {
        let base = ScenarioConfig {
            aperture: ApertureConfig {
                lx_m: 0.3,
                ly_m: 0.3,
                nx: 32,
                ny: 32,
            },
            wavelength_m: 0.03,
            z0_ohm: default_z0(),
            z_load_ohm: default_z_load(),
            basis_override_n: None,
            du_positions_m: Vec::new(),
            eu_positions_m: Vec::new(),
            pt_a2: 0.01,
            p0_w: 1e-3,
            noise_var_v2m2: 5.6e-3,
            eh_circuit: None,
            phi_rad: 0.0,
        };
        match self {
            Profile::Desk => ScenarioConfig {
                basis_override_n: Some(5),
                du_positions_m: vec![[-5.0, 5.0, 30.0], [5.0, 5.0, 30.0]],
                eu_positions_m: vec![[1.0, 1.0, 1.0]],
                ..base
            },
            Profile::Full => ScenarioConfig {
                du_positions_m: vec![
                    [5.0, 5.0, 30.0],
                    [5.0, -5.0, 30.0],
                    [-5.0, 5.0, 30.0],
                    [-5.0, -5.0, 30.0],
                ],
                eu_positions_m: vec![[1.0, 1.0, 1.0], [-1.0, 1.0, 1.0]],
                ..base
            },
        }
    }
}

/// Read and syntax-check a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Semantic checks shared by every subcommand. Returns the first problem
/// found, naming the config field.
pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.schemes.is_empty() {
        return Err(Error::Config("schemes must not be empty".into()));
    }
    for (i, s) in cfg.schemes.iter().enumerate() {
        if cfg.schemes[..i].contains(s) {
            return Err(Error::Config(format!("schemes: duplicate entry {s}")));
        }
    }
    if cfg.schemes.contains(&SchemeId::Upper) && !cfg.schemes.contains(&SchemeId::HIdet) {
        return Err(Error::Config(
            "schemes: UPPER is derived from the H-IDET solution; add H-IDET".into(),
        ));
    }
    if cfg.fd_grid.0 == 0 || cfg.fd_grid.1 == 0 {
        return Err(Error::Config("fd_grid axes must be positive".into()));
    }
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
    }
    if let Some(sweep) = &cfg.sweep {
        if sweep.values.is_empty() {
            return Err(Error::Config("sweep.values must not be empty".into()));
        }
        if sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep.values must be finite".into()));
        }
        if sweep.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "sweep.values must be strictly increasing".into(),
            ));
        }
        let positive_only = !matches!(sweep.variable, SweepVariable::P0W);
        if positive_only && sweep.values[0] <= 0.0 {
            return Err(Error::Config(format!(
                "sweep.values for {} must be positive",
                sweep.variable.name()
            )));
        }
        if sweep.variable == SweepVariable::P0W && sweep.values[0] < 0.0 {
            return Err(Error::Config("sweep.values for p0_W must be non-negative".into()));
        }
        if sweep.variable == SweepVariable::ModesN
            && sweep.values.iter().any(|v| v.fract() != 0.0)
        {
            return Err(Error::Config("sweep.values for modes_n must be integers".into()));
        }
    }
    if let Some(sc) = &cfg.scenario {
        validate_scenario(sc)?;
    }
    if let Some(study) = &cfg.study {
        if study.foci_m.is_empty() {
            return Err(Error::Config("study.foci_m must not be empty".into()));
        }
        if study.scan.points < 2 || !(study.scan.to_m > study.scan.from_m) {
            return Err(Error::Config(
                "study.scan needs at least 2 points and to_m > from_m".into(),
            ));
        }
        if study.map.nx < 2 || study.map.nz < 2 || !(study.map.z_to_m > study.map.z_from_m) {
            return Err(Error::Config(
                "study.map needs nx, nz >= 2 and z_to_m > z_from_m".into(),
            ));
        }
    }
    Ok(())
}

fn validate_scenario(sc: &ScenarioConfig) -> Result<()> {
    let a = &sc.aperture;
    if !(a.lx_m > 0.0) || !(a.ly_m > 0.0) {
        return Err(Error::Config("scenario.aperture sides must be positive".into()));
    }
    if a.nx == 0 || a.ny == 0 {
        return Err(Error::Config("scenario.aperture grid must be non-empty".into()));
    }
    if !(sc.wavelength_m > 0.0) {
        return Err(Error::Config("scenario.wavelength_m must be positive".into()));
    }
    if sc.du_positions_m.is_empty() {
        return Err(Error::Config("scenario.du_positions_m must not be empty".into()));
    }
    if !(sc.pt_a2 > 0.0) {
        return Err(Error::Config("scenario.pt_A2 must be positive".into()));
    }
    if sc.p0_w < 0.0 {
        return Err(Error::Config("scenario.p0_W must be non-negative".into()));
    }
    if !(sc.noise_var_v2m2 > 0.0) {
        return Err(Error::Config("scenario.noise_var_V2m2 must be positive".into()));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn medium(&self) -> Result<MediumParams> {
        Ok(MediumParams::from_wavelength(
            self.wavelength_m,
            self.z0_ohm,
            self.z_load_ohm,
        )?)
    }

    pub fn eh_circuit(&self) -> Result<EhCircuit> {
        Ok(match &self.eh_circuit {
            Some(c) => EhCircuit::new(c.m_w, c.a, c.b_w)?,
            None => EhCircuit::reference(),
        })
    }

    /// Instantiate the core scenario: quadrature grid, basis, channels.
    pub fn build(&self) -> Result<Scenario> {
        let aperture = Aperture::new(
            self.aperture.lx_m,
            self.aperture.ly_m,
            self.aperture.nx,
            self.aperture.ny,
        )?;
        let basis = make_basis(
            self.aperture.lx_m,
            self.aperture.ly_m,
            self.wavelength_m,
            self.basis_override_n,
        )?;
        let to_point = |p: &[f64; 3]| Point3::new(p[0], p[1], p[2]);
        Ok(Scenario::new(
            aperture,
            self.medium()?,
            basis,
            self.du_positions_m.iter().map(to_point).collect(),
            self.eu_positions_m.iter().map(to_point).collect(),
            self.pt_a2,
            self.p0_w,
            self.noise_var_v2m2,
            self.eh_circuit()?,
            self.phi_rad,
        )?)
    }

    /// The scenario with one sweep variable replaced. Geometry-changing
    /// variables rebuild the aperture and basis on the next `build`.
    pub fn with_sweep_value(&self, var: SweepVariable, value: f64) -> Result<ScenarioConfig> {
        let mut sc = self.clone();
        match var {
            SweepVariable::PtA2 => sc.pt_a2 = value,
            SweepVariable::P0W => sc.p0_w = value,
            SweepVariable::ApertureSideM => {
                if !(value > 0.0) {
                    return Err(Error::Config("aperture side must be positive".into()));
                }
                sc.aperture.lx_m = value;
                sc.aperture.ly_m = value;
            }
            SweepVariable::EuDistanceM => {
                for p in &mut sc.eu_positions_m {
                    let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    if !(norm > 0.0) {
                        return Err(Error::Config(
                            "eu_distance_m sweep needs energy users away from the origin".into(),
                        ));
                    }
                    for c in p.iter_mut() {
                        *c *= value / norm;
                    }
                }
            }
            SweepVariable::ModesN => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::Config("modes_n values must be non-negative integers".into()));
                }
                sc.basis_override_n = Some(value as i64);
            }
        }
        Ok(sc)
    }
}
