//! Sum-rate beamforming optimizer with harvest floors.
//!
//! The design variable is one beam-weight vector per stream (data streams
//! first, then one stream per energy user), all expressed in the transmit
//! basis. The solver alternates three blocks:
//!
//! 1. `rho`: per-user MSE weights ρ_k = 1/M_k (closed form),
//! 2. `psi`: receive combiners — MMSE for data users, principal-eigenvector
//!    for energy users (both closed form),
//! 3. `w`: transmit weights via successive convex approximation — the
//!    harvest floor `Σ_j |h_lᴴw_j|² ≥ P0′` is replaced by its first-order
//!    lower bound at the incumbent, which keeps every iterate truly
//!    feasible, and each linearized problem goes to the interior-point
//!    solver in [`crate::convex`].
//!
//! The weighted-MSE objective `R_eq = Σ_k (ρ_k M_k − ln ρ_k)` decreases at
//! every block, which is what the monotonicity audit on the report checks.
//! The only allowed exception is an opt-in rebuild of the SCA base between
//! outer rounds (`rebuild_maxmin_each_outer`), whose jumps are recorded
//! separately instead of counted as violations.
//!
//! Feasibility is decided up front by a max-min-harvest solve: γ* is the
//! best worst-EU RF power any unit-budget beam set can deliver, and the
//! run is declared infeasible when the requested floor exceeds it.

use std::time::Instant;

use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convex::{self, lift, AffineConstraint, ConvexSubproblem, QuadTerm, SolveStatus};
use crate::energy::{eh_output, eh_threshold, poynting_power, EhCircuit, ReceiverGeometry};
use crate::error::{Error, Result};
use crate::focusing::principal_combiner;
use crate::geometry::{
    current_power, radiate_field, sample_user_channel, Aperture, MediumParams, Point3, UserChannel,
};
use crate::wavenumber::{
    channel_transform, synthesize_on_grid, BeamWeights, FourierBasisSet, WavenumberChannel,
};

/// Everything that defines one experiment: geometry, users, budgets and
/// the transmit basis.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub aperture: Aperture,
    pub medium: MediumParams,
    pub basis: FourierBasisSet,
    pub du_positions: Vec<Point3>,
    pub eu_positions: Vec<Point3>,
    /// Transmit current budget Σ‖w‖² (A²).
    pub pt: f64,
    /// Per-EU harvested DC floor (W).
    pub p0: f64,
    /// Receive noise variance per field component (V²/m²).
    pub noise_var: f64,
    pub eh: EhCircuit,
    /// Energy-receiver incidence angle (rad).
    pub phi: f64,
}

impl Scenario {
    pub fn new(
        aperture: Aperture,
        medium: MediumParams,
        basis: FourierBasisSet,
        du_positions: Vec<Point3>,
        eu_positions: Vec<Point3>,
        pt: f64,
        p0: f64,
        noise_var: f64,
        eh: EhCircuit,
        phi: f64,
    ) -> Result<Self> {
        if du_positions.is_empty() {
            return Err(Error::InvalidArgument("at least one data user is required".into()));
        }
        if !(pt > 0.0) || !pt.is_finite() {
            return Err(Error::InvalidArgument("power budget must be positive".into()));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        if !(p0 >= 0.0) || !p0.is_finite() {
            return Err(Error::InvalidArgument("harvest floor must be non-negative".into()));
        }
        basis.check_grid(&aperture)?;
        // the incidence validation lives in ReceiverGeometry
        ReceiverGeometry::from_wavelength(medium.wavelength, phi, medium.z_load)?;
        Ok(Self {
            aperture,
            medium,
            basis,
            du_positions,
            eu_positions,
            pt,
            p0,
            noise_var,
            eh,
            phi,
        })
    }

    pub fn receiver_geometry(&self) -> ReceiverGeometry {
        // validated in `new`
        ReceiverGeometry::from_wavelength(self.medium.wavelength, self.phi, self.medium.z_load)
            .expect("validated at construction")
    }

    /// Sample the exact channel for every user and project it onto the
    /// transmit basis.
    pub fn channels(&self) -> Result<Channels> {
        let spatial = |positions: &[Point3]| -> Result<Vec<UserChannel>> {
            positions
                .iter()
                .map(|p| sample_user_channel(p, &self.aperture, &self.medium))
                .collect()
        };
        let du_spatial = spatial(&self.du_positions)?;
        let eu_spatial = spatial(&self.eu_positions)?;
        let modes = |chans: &[UserChannel]| -> Result<Vec<WavenumberChannel>> {
            chans
                .iter()
                .map(|c| channel_transform(c, &self.basis, &self.aperture))
                .collect()
        };
        let du_modes = modes(&du_spatial)?;
        let eu_modes = modes(&eu_spatial)?;
        Ok(Channels {
            du_spatial,
            eu_spatial,
            du_modes,
            eu_modes,
        })
    }
}

/// Exact spatial channels and their basis projections for all users.
#[derive(Debug, Clone)]
pub struct Channels {
    pub du_spatial: Vec<UserChannel>,
    pub eu_spatial: Vec<UserChannel>,
    pub du_modes: Vec<WavenumberChannel>,
    pub eu_modes: Vec<WavenumberChannel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitScheme {
    /// Energy-matched seed beams plus one MMSE combiner pass.
    Proposed,
    /// Random base point for the max-min harvest initialization.
    RandomSca,
    /// Random initial beams (blended toward feasibility if needed).
    RandomBcd,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BcdOptions {
    /// Relative sum-rate change that ends the outer loop.
    pub outer_tol: f64,
    pub outer_max: usize,
    /// Relative weighted-MSE improvement that ends one SCA pass.
    pub inner_tol: f64,
    pub inner_max: usize,
    pub subproblem_tol: f64,
    pub subproblem_max_iter: usize,
    /// Restart each SCA pass from the max-min-harvest beams instead of the
    /// incumbent. Objective jumps at that boundary are recorded, not
    /// counted as monotonicity violations.
    pub rebuild_maxmin_each_outer: bool,
    pub init: InitScheme,
    pub seed: u64,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            outer_tol: 1e-3,
            outer_max: 30,
            inner_tol: 1e-4,
            inner_max: 50,
            subproblem_tol: 1e-8,
            subproblem_max_iter: 200,
            rebuild_maxmin_each_outer: false,
            init: InitScheme::Proposed,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockId {
    Init,
    Rho,
    Psi,
    W,
}

/// One equivalent-objective sample in the block-update history.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReqEntry {
    pub outer: usize,
    pub block: BlockId,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityAudit {
    /// No block transition increased R_eq beyond rounding noise.
    pub ok: bool,
    /// Largest increase over non-rebuild transitions.
    pub max_violation: f64,
    /// R_eq jumps at SCA-base rebuild boundaries (empty unless enabled).
    pub step5_jumps: Vec<f64>,
    /// Raw SCA candidate sequence never needed the acceptance guard.
    pub inner_monotone: bool,
    pub inner_rejections: usize,
}

/// Which transmit basis produced the weights in a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BasisDescriptor {
    Fourier { n_max_x: i64, n_max_y: i64, modes: usize },
    Discrete { elements: usize, element_area: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioEcho {
    pub num_du: usize,
    pub num_eu: usize,
    pub mode_count: usize,
    pub pt_a2: f64,
    pub p0_w: f64,
    pub noise_v2m2: f64,
    pub wavelength_m: f64,
    pub lx_m: f64,
    pub ly_m: f64,
    pub nx: usize,
    pub ny: usize,
    pub phi_rad: f64,
}

/// Modelling conventions that differ between implementations often enough
/// to be worth stating on every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conventions {
    pub harvest_threshold: String,
    pub power_accounting: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            harvest_threshold:
                "rf_floor = 2*z_load/(a_r*cos(phi)) * inverse_rectifier(p0)".into(),
            power_accounting: "sum_j sum_n ||w_{j,n}||^2 <= p_t".into(),
        }
    }
}

/// Full outcome of one optimizer run. All numeric fields are reproducible
/// bit-for-bit across runs with the same inputs, except `wall_seconds`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub scheme: String,
    pub status: RunStatus,
    /// Sum rate (bit/s/Hz) evaluated through the exact spatial channel.
    pub r_sum_bits: f64,
    pub du_rates_bits: Vec<f64>,
    pub du_sinr: Vec<f64>,
    pub du_signal: Vec<f64>,
    pub du_interference: Vec<f64>,
    pub du_noise: Vec<f64>,
    /// RF power intercepted along the EU combiner (W).
    pub eu_rf_projected_w: Vec<f64>,
    /// RF power in the full three-component field (W).
    pub eu_rf_unprojected_w: Vec<f64>,
    pub eu_harvest_projected_w: Vec<f64>,
    pub eu_harvest_unprojected_w: Vec<f64>,
    /// Constraint-side harvest metric Σ_j |h_lᴴw_j|² (field-power units).
    pub eu_constraint_value: Vec<f64>,
    /// Best achievable worst-EU value of the same metric (max-min solve);
    /// absent when the scheme has no energy users or never solves for it.
    pub gamma_star: Option<f64>,
    /// Required floor on that metric, from the rectifier inverse; absent
    /// when floors are off or no finite RF power can meet the DC demand.
    pub p0_threshold: Option<f64>,
    pub power_used: f64,
    pub iterations: usize,
    pub r_sum_history: Vec<f64>,
    pub r_eq_history: Vec<ReqEntry>,
    pub audit: MonotonicityAudit,
    /// Stream-major beam weights as (re, im), xyz interleaved per mode.
    pub weights: Vec<Vec<(f64, f64)>>,
    pub du_combiners: Vec<Vec<(f64, f64)>>,
    pub eu_combiners: Vec<Vec<(f64, f64)>>,
    pub basis: BasisDescriptor,
    pub scenario_echo: ScenarioEcho,
    pub conventions: Conventions,
    pub wall_seconds: f64,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// signal-model building blocks
// ---------------------------------------------------------------------------

/// h with h[3n+c] = (Ω_nᴴψ)_c, so that hᴴw = ψᴴ(Σ_n Ω_n w_n): the scalar
/// channel seen through a fixed combiner.
pub fn effective_vector(channel: &WavenumberChannel, psi: &Vector3<Complex64>) -> DVector<Complex64> {
    let omega = channel.omega();
    let mut h = DVector::zeros(3 * omega.len());
    for (n, om) in omega.iter().enumerate() {
        let v = om.adjoint() * psi;
        h[3 * n] = v[0];
        h[3 * n + 1] = v[1];
        h[3 * n + 2] = v[2];
    }
    h
}

/// Field at a user from one stream's flat weight vector.
pub fn field_from_flat(omega: &[Matrix3<Complex64>], w: &DVector<Complex64>) -> Vector3<Complex64> {
    let mut f = Vector3::zeros();
    for (n, om) in omega.iter().enumerate() {
        let wn = Vector3::new(w[3 * n], w[3 * n + 1], w[3 * n + 2]);
        f += om * wn;
    }
    f
}

/// Mean-square symbol error at one user for unit-power streams:
/// Σ_j |ψᴴf_j|² − 2Re(ψᴴf_own) + 1 + σ²‖ψ‖².
pub fn mse_with_combiner(
    fields: &[Vector3<Complex64>],
    psi: &Vector3<Complex64>,
    own: usize,
    noise_var: f64,
) -> f64 {
    let mut m = 1.0 + noise_var * psi.norm_squared();
    for (j, f) in fields.iter().enumerate() {
        let gain = psi.dotc(f);
        m += gain.norm_sqr();
        if j == own {
            m -= 2.0 * gain.re;
        }
    }
    m
}

/// The combiner minimizing [`mse_with_combiner`]: (Σ ffᴴ + σ²I)⁻¹ f_own.
pub fn mmse_combiner(
    fields: &[Vector3<Complex64>],
    own: usize,
    noise_var: f64,
) -> Result<Vector3<Complex64>> {
    let mut c = Matrix3::<Complex64>::identity() * Complex64::from(noise_var);
    for f in fields {
        c += f * f.adjoint();
    }
    c.lu()
        .solve(&fields[own])
        .ok_or_else(|| Error::Numerical("singular receive covariance".into()))
}

/// (signal, interference, noise) powers at one user for a fixed combiner.
pub fn sinr_parts(
    fields: &[Vector3<Complex64>],
    psi: &Vector3<Complex64>,
    own: usize,
    noise_var: f64,
) -> (f64, f64, f64) {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (j, f) in fields.iter().enumerate() {
        let p = psi.dotc(f).norm_sqr();
        if j == own {
            signal = p;
        } else {
            interference += p;
        }
    }
    (signal, interference, noise_var * psi.norm_squared())
}

pub fn rate_bits(signal: f64, interference: f64, noise: f64) -> f64 {
    (1.0 + signal / (interference + noise)).log2()
}

/// Energy-matched seed beams: each EU stream gets its own combiner-matched
/// beam, inverse-gain weighted so every EU harvests the same, then jointly
/// scaled to the full budget. Returns (per-EU-stream weights, combiners,
/// per-EU matched gains ζ).
pub fn equal_harvest_seed(
    eu_modes: &[WavenumberChannel],
    pt: f64,
) -> Result<(Vec<DVector<Complex64>>, Vec<Vector3<Complex64>>, Vec<f64>)> {
    if eu_modes.is_empty() {
        return Err(Error::InvalidArgument("no energy users".into()));
    }
    let mut combiners = Vec::with_capacity(eu_modes.len());
    let mut beams = Vec::with_capacity(eu_modes.len());
    let mut gains = Vec::with_capacity(eu_modes.len());
    for ch in eu_modes {
        let mut gram = Matrix3::<Complex64>::zeros();
        for om in ch.omega() {
            gram += om * om.adjoint();
        }
        let (psi, _) = principal_combiner(&gram)?;
        let h = effective_vector(ch, &psi);
        let zeta = h.norm_squared();
        if !(zeta > 0.0) {
            return Err(Error::DegenerateChannel(
                "energy user has no coupling to the aperture".into(),
            ));
        }
        beams.push(&h / Complex64::from(zeta));
        combiners.push(psi);
        gains.push(zeta);
    }
    let total: f64 = beams.iter().map(|w| w.norm_squared()).sum();
    let scale = Complex64::from((pt / total).sqrt());
    for w in &mut beams {
        *w *= scale;
    }
    Ok((beams, combiners, gains))
}

// ---------------------------------------------------------------------------
// SCA machinery
// ---------------------------------------------------------------------------

fn lift_streams(ws: &[DVector<Complex64>]) -> DVector<f64> {
    let per = 2 * ws[0].len();
    let mut x = DVector::zeros(per * ws.len());
    for (j, w) in ws.iter().enumerate() {
        x.rows_mut(j * per, per).copy_from(&lift::real_from_complex(w));
    }
    x
}

fn unlift_streams(x: &DVector<f64>, streams: usize) -> Vec<DVector<Complex64>> {
    let per = x.len() / streams;
    (0..streams)
        .map(|j| lift::complex_from_real(&x.rows(j * per, per).into_owned()))
        .collect()
}

/// First-order lower bound of Σ_j |hᴴw_j|² at the incumbent `w_bar`,
/// shifted by the floor: since the quadratic is convex, the bound is global
/// and any point satisfying it satisfies the true constraint.
fn linearized_floor(
    h: &DVector<Complex64>,
    w_bar: &[DVector<Complex64>],
    floor: f64,
) -> AffineConstraint {
    let streams = w_bar.len();
    let per = 2 * h.len();
    let (a, b) = lift::real_pair(h);
    let mut normal = DVector::zeros(per * streams);
    let mut anchor = 0.0;
    for (j, wj) in w_bar.iter().enumerate() {
        let c = h.dotc(wj);
        let mut seg = &a * (2.0 * c.re);
        seg.axpy(2.0 * c.im, &b, 1.0);
        normal.rows_mut(j * per, per).copy_from(&seg);
        anchor += c.norm_sqr();
    }
    AffineConstraint { normal, offset: floor + anchor }
}

fn assemble_rate_subproblem(
    g: &[DVector<Complex64>],
    h_active: &[DVector<Complex64>],
    rho: &[f64],
    pt: f64,
    floor: f64,
    streams: usize,
    w_bar: &[DVector<Complex64>],
    start: Option<DVector<f64>>,
) -> ConvexSubproblem {
    let per = 2 * g[0].len();
    let dim = per * streams;
    let mut quad = Vec::with_capacity(2 * g.len() * streams);
    let mut linear = DVector::zeros(dim);
    for (k, gk) in g.iter().enumerate() {
        let (a, b) = lift::real_pair(gk);
        for j in 0..streams {
            quad.push(QuadTerm { weight: rho[k], factor: lift::embed(&a, j, streams) });
            quad.push(QuadTerm { weight: rho[k], factor: lift::embed(&b, j, streams) });
        }
        let mut own = lift::embed(&a, k, streams);
        own *= -2.0 * rho[k];
        linear += own;
    }
    let constraints = h_active
        .iter()
        .map(|hl| linearized_floor(hl, w_bar, floor))
        .collect();
    ConvexSubproblem {
        dim,
        quad,
        linear,
        ball_radius_sq: pt,
        constraints,
        epigraph: false,
        start,
    }
}

/// Variable part of the weighted MSE: Σ_k ρ_k(Σ_j |g_kᴴw_j|² − 2Re(g_kᴴw_k)).
fn weighted_mse_variable(
    g: &[DVector<Complex64>],
    rho: &[f64],
    weights: &[DVector<Complex64>],
) -> f64 {
    let mut v = 0.0;
    for (k, gk) in g.iter().enumerate() {
        for (j, wj) in weights.iter().enumerate() {
            let c = gk.dotc(wj);
            v += rho[k] * c.norm_sqr();
            if j == k {
                v -= 2.0 * rho[k] * c.re;
            }
        }
    }
    v
}

fn min_harvest(h: &[DVector<Complex64>], weights: &[DVector<Complex64>]) -> f64 {
    h.iter()
        .map(|hl| weights.iter().map(|w| hl.dotc(w).norm_sqr()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Max-min harvest over the power ball: iterate the linearized epigraph
/// problem. The true worst-EU harvest of the iterates is nondecreasing
/// (each round's incumbent is feasible for the next linearization at its
/// own true value).
fn maxmin_harvest(
    h: &[DVector<Complex64>],
    pt: f64,
    base: Vec<DVector<Complex64>>,
    sub_opts: &convex::SolveOptions,
) -> Result<(Vec<DVector<Complex64>>, f64, usize)> {
    let streams = base.len();
    let per = 2 * h[0].len();
    let dim = per * streams;
    let mut w_bar = base;
    let mut best = w_bar.clone();
    let mut gamma = min_harvest(h, &w_bar);
    let mut iters = 0;
    for it in 0..30 {
        iters = it + 1;
        let constraints = h.iter().map(|hl| linearized_floor(hl, &w_bar, 0.0)).collect();
        let sub = ConvexSubproblem {
            dim,
            quad: Vec::new(),
            linear: DVector::zeros(dim),
            ball_radius_sq: pt,
            constraints,
            epigraph: true,
            start: None,
        };
        let cert = convex::solve(&sub, sub_opts)?;
        let w_new = unlift_streams(&cert.x, streams);
        let gamma_new = min_harvest(h, &w_new);
        let improve = gamma_new - gamma;
        if gamma_new > gamma {
            gamma = gamma_new;
            best = w_new.clone();
            w_bar = w_new;
        }
        if improve <= 1e-4 * gamma.abs().max(1e-300) {
            break;
        }
    }
    Ok((best, gamma, iters))
}

struct ScaOutcome {
    weights: Vec<DVector<Complex64>>,
    rejections: usize,
    subproblem_infeasible: bool,
    cap_hits: usize,
}

/// One SCA pass on the transmit weights: repeatedly solve the linearized
/// problem, accepting only candidates that do not worsen the true weighted
/// MSE (the guard catches the rare tolerance-level regressions).
#[allow(clippy::too_many_arguments)]
fn sca_w_block(
    g: &[DVector<Complex64>],
    h_active: &[DVector<Complex64>],
    rho: &[f64],
    pt: f64,
    floor: f64,
    streams: usize,
    base: Vec<DVector<Complex64>>,
    opts: &BcdOptions,
) -> Result<ScaOutcome> {
    let sub_opts = convex::SolveOptions {
        tol: opts.subproblem_tol,
        max_iter: opts.subproblem_max_iter,
    };
    let mut incumbent = base;
    let mut incumbent_v = weighted_mse_variable(g, rho, &incumbent);
    let mut rejections = 0;
    let mut subproblem_infeasible = false;
    let mut cap_hits = 0;
    for _ in 0..opts.inner_max {
        let start = lift_streams(&incumbent);
        let sub = assemble_rate_subproblem(
            g,
            h_active,
            rho,
            pt,
            floor,
            streams,
            &incumbent,
            Some(start),
        );
        let cert = convex::solve(&sub, &sub_opts)?;
        if cert.status == SolveStatus::Infeasible {
            subproblem_infeasible = true;
            break;
        }
        if cert.status == SolveStatus::MaxIterations {
            cap_hits += 1;
        }
        let candidate = unlift_streams(&cert.x, streams);
        let v = weighted_mse_variable(g, rho, &candidate);
        if v > incumbent_v + 1e-9 * (1.0 + incumbent_v.abs()) {
            rejections += 1;
            break;
        }
        let improve = incumbent_v - v;
        incumbent = candidate;
        incumbent_v = v;
        if h_active.is_empty() {
            // without floors the problem is a plain QP: one solve is exact
            break;
        }
        if improve <= opts.inner_tol * (1.0 + v.abs()) {
            break;
        }
    }
    Ok(ScaOutcome {
        weights: incumbent,
        rejections,
        subproblem_infeasible,
        cap_hits,
    })
}

// ---------------------------------------------------------------------------
// the block-coordinate engine
// ---------------------------------------------------------------------------

pub(crate) struct EngineResult {
    pub weights: Vec<DVector<Complex64>>,
    pub psi_du: Vec<Vector3<Complex64>>,
    pub psi_eu: Vec<Vector3<Complex64>>,
    pub status: RunStatus,
    pub iterations: usize,
    pub gamma_star: f64,
    pub r_sum_history: Vec<f64>,
    pub r_eq_history: Vec<ReqEntry>,
    pub audit: MonotonicityAudit,
    pub warnings: Vec<String>,
}

fn principal_of_mode_gram(ch: &WavenumberChannel) -> Result<Vector3<Complex64>> {
    let mut gram = Matrix3::<Complex64>::zeros();
    for om in ch.omega() {
        gram += om * om.adjoint();
    }
    Ok(principal_combiner(&gram)?.0)
}

fn random_flat(rng: &mut ChaCha8Rng, len: usize) -> DVector<Complex64> {
    DVector::from_fn(len, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// Run the block-coordinate loop on already-projected channels. The floor
/// is in constraint units (Σ|hᴴw|²); pass 0 to disable it.
pub(crate) fn run_engine(
    du: &[WavenumberChannel],
    eu: &[WavenumberChannel],
    pt: f64,
    noise_var: f64,
    floor: f64,
    opts: &BcdOptions,
) -> Result<EngineResult> {
    let k_du = du.len();
    let l_eu = eu.len();
    let streams = k_du + l_eu;
    if k_du == 0 {
        return Err(Error::InvalidArgument("engine needs at least one data user".into()));
    }
    let nf = du[0].mode_count();
    if du.iter().chain(eu.iter()).any(|c| c.mode_count() != nf) {
        return Err(Error::InvalidArgument("users projected onto different bases".into()));
    }
    let dimc = 3 * nf;
    let mut warnings = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let sub_opts = convex::SolveOptions {
        tol: opts.subproblem_tol,
        max_iter: opts.subproblem_max_iter,
    };

    // initial combiners: strongest receive direction of each user's
    // projected channel
    let mut psi_du: Vec<Vector3<Complex64>> = du
        .iter()
        .map(principal_of_mode_gram)
        .collect::<Result<_>>()?;
    let mut psi_eu: Vec<Vector3<Complex64>> = eu
        .iter()
        .map(principal_of_mode_gram)
        .collect::<Result<_>>()?;
    let mut g: Vec<DVector<Complex64>> =
        du.iter().zip(&psi_du).map(|(c, p)| effective_vector(c, p)).collect();
    let mut h: Vec<DVector<Complex64>> =
        eu.iter().zip(&psi_eu).map(|(c, p)| effective_vector(c, p)).collect();

    // max-min harvest: feasibility certificate and a guaranteed-feasible
    // fallback beam set
    let (w_maxmin, gamma_star) = if l_eu > 0 {
        let base: Vec<DVector<Complex64>> = (0..streams)
            .map(|j| {
                if opts.init == InitScheme::RandomSca {
                    let r = random_flat(&mut rng, dimc);
                    let n = r.norm();
                    r * Complex64::from((pt / streams as f64).sqrt() / n)
                } else {
                    let ch = if j < k_du { &g[j] } else { &h[j - k_du] };
                    let n = ch.norm();
                    ch * Complex64::from((pt / streams as f64).sqrt() / n)
                }
            })
            .collect();
        let (w_mm, gamma, _) = maxmin_harvest(&h, pt, base, &sub_opts)?;
        (Some(w_mm), gamma)
    } else {
        (None, f64::INFINITY)
    };

    let floors_active = floor > 0.0 && l_eu > 0;
    if floors_active && floor > gamma_star * (1.0 + 1e-9) {
        warnings.push(format!(
            "required floor {floor:.6e} exceeds the max-min capability {gamma_star:.6e}"
        ));
        let weights = w_maxmin.expect("floors imply energy users");
        return Ok(EngineResult {
            weights,
            psi_du,
            psi_eu,
            status: RunStatus::Infeasible,
            iterations: 0,
            gamma_star,
            r_sum_history: Vec::new(),
            r_eq_history: Vec::new(),
            audit: MonotonicityAudit {
                ok: true,
                max_violation: 0.0,
                step5_jumps: Vec::new(),
                inner_monotone: true,
                inner_rejections: 0,
            },
            warnings,
        })
    }

    // initial beams
    let mut weights: Vec<DVector<Complex64>> = match opts.init {
        InitScheme::Proposed | InitScheme::RandomSca => {
            if floors_active {
                // feasibility-preserving seed: equal-harvest energy beams
                // sized to hold the floor with 5% headroom, leftover budget
                // on matched data beams. Data streams only add harvest, so
                // the floor stays met; starting them at real power keeps the
                // first weighted-MSE step from landing on a weak-field
                // interior optimum that takes many outers to escape.
                let (eu_beams, eu_psi, _) = equal_harvest_seed(eu, pt)?;
                psi_eu = eu_psi;
                h = eu.iter().zip(&psi_eu).map(|(c, p)| effective_vector(c, p)).collect();
                let mut w = vec![DVector::<Complex64>::zeros(dimc); streams];
                for (l, beam) in eu_beams.into_iter().enumerate() {
                    w[k_du + l] = beam;
                }
                let gamma_eq = min_harvest(&h, &w);
                let keep = ((1.05 * floor) / gamma_eq).min(1.0);
                if keep < 1.0 {
                    let s = Complex64::from(keep.sqrt());
                    for wl in w.iter_mut().skip(k_du) {
                        *wl *= s;
                    }
                    let leftover = pt * (1.0 - keep);
                    for (k, gk) in g.iter().enumerate() {
                        let n = gk.norm();
                        w[k] = gk * Complex64::from((leftover / k_du as f64).sqrt() / n);
                    }
                }
                w
            } else {
                // nothing binds: split the budget across matched (or random)
                // data beams; energy beams start at zero and stay unused
                // unless the psi/w blocks find them worthwhile
                let mut w = vec![DVector::<Complex64>::zeros(dimc); streams];
                for k in 0..k_du {
                    let dir = if opts.init == InitScheme::RandomSca {
                        random_flat(&mut rng, dimc)
                    } else {
                        g[k].clone()
                    };
                    let n = dir.norm();
                    w[k] = dir * Complex64::from((pt / k_du as f64).sqrt() / n);
                }
                w
            }
        }
        InitScheme::RandomBcd => {
            let raw: Vec<DVector<Complex64>> = (0..streams).map(|_| random_flat(&mut rng, dimc)).collect();
            let total: f64 = raw.iter().map(|w| w.norm_squared()).sum();
            let scale = Complex64::from((pt / total).sqrt());
            let mut w: Vec<DVector<Complex64>> = raw.into_iter().map(|v| v * scale).collect();
            if floors_active {
                // blend toward the max-min beams until the floor holds
                let mm = w_maxmin.as_ref().expect("floors imply energy users");
                let mut t = 0.0;
                while min_harvest(&h, &w) < floor && t < 1.0 {
                    t += 0.1;
                    let total_mix: f64 = w
                        .iter()
                        .zip(mm)
                        .map(|(a, b)| (a * Complex64::from(1.0 - t) + b * Complex64::from(t)).norm_squared())
                        .sum();
                    let s = Complex64::from((pt / total_mix).sqrt());
                    w = w
                        .iter()
                        .zip(mm)
                        .map(|(a, b)| (a * Complex64::from(1.0 - t) + b * Complex64::from(t)) * s)
                        .collect();
                }
                if min_harvest(&h, &w) < floor {
                    w = mm.clone();
                }
            }
            w
        }
    };

    // make sure the starting point honors the floor; the max-min beams do
    if floors_active && min_harvest(&h, &weights) < floor {
        weights = w_maxmin.clone().expect("floors imply energy users");
    }

    // one MMSE refinement of the data combiners against the initial beams
    for k in 0..k_du {
        let fields: Vec<Vector3<Complex64>> =
            weights.iter().map(|w| field_from_flat(du[k].omega(), w)).collect();
        if fields[k].norm_squared() > 0.0 {
            psi_du[k] = mmse_combiner(&fields, k, noise_var)?;
            g[k] = effective_vector(&du[k], &psi_du[k]);
        }
    }

    let mse_of = |g: &[DVector<Complex64>],
                  psi_du: &[Vector3<Complex64>],
                  weights: &[DVector<Complex64>]|
     -> Vec<f64> {
        (0..k_du)
            .map(|k| {
                let mut m = 1.0 + noise_var * psi_du[k].norm_squared();
                for (j, wj) in weights.iter().enumerate() {
                    let c = g[k].dotc(wj);
                    m += c.norm_sqr();
                    if j == k {
                        m -= 2.0 * c.re;
                    }
                }
                m
            })
            .collect()
    };
    let req_of = |rho: &[f64], ms: &[f64]| -> f64 {
        rho.iter().zip(ms).map(|(r, m)| r * m - r.ln()).sum()
    };
    let rates_of = |g: &[DVector<Complex64>],
                    psi_du: &[Vector3<Complex64>],
                    weights: &[DVector<Complex64>]|
     -> f64 {
        (0..k_du)
            .map(|k| {
                let mut signal = 0.0;
                let mut interference = 0.0;
                for (j, wj) in weights.iter().enumerate() {
                    let p = g[k].dotc(wj).norm_sqr();
                    if j == k {
                        signal = p;
                    } else {
                        interference += p;
                    }
                }
                rate_bits(signal, interference, noise_var * psi_du[k].norm_squared())
            })
            .sum()
    };

    let mut rho = vec![1.0f64; k_du];
    let mut r_eq_history = Vec::new();
    let mut r_sum_history = Vec::new();
    let mut prev_req = req_of(&rho, &mse_of(&g, &psi_du, &weights));
    r_eq_history.push(ReqEntry { outer: 0, block: BlockId::Init, value: prev_req });

    let mut max_violation = 0.0f64;
    let mut step5_jumps = Vec::new();
    let mut rejections_total = 0usize;
    let mut cap_hits_total = 0usize;
    let mut status = RunStatus::MaxIterations;
    let mut iterations = 0usize;
    let h_active: &[DVector<Complex64>] = if floors_active { &h } else { &[] };
    let mut h_active = h_active.to_vec();

    for outer in 1..=opts.outer_max {
        iterations = outer;

        // rho block: closed-form reweighting
        let ms = mse_of(&g, &psi_du, &weights);
        rho = ms.iter().map(|m| 1.0 / m).collect();
        let v = req_of(&rho, &ms);
        max_violation = max_violation.max(v - prev_req);
        prev_req = v;
        r_eq_history.push(ReqEntry { outer, block: BlockId::Rho, value: v });

        // psi block: MMSE data combiners, eigen energy combiners
        for k in 0..k_du {
            let fields: Vec<Vector3<Complex64>> =
                weights.iter().map(|w| field_from_flat(du[k].omega(), w)).collect();
            if fields[k].norm_squared() > 0.0 {
                psi_du[k] = mmse_combiner(&fields, k, noise_var)?;
                g[k] = effective_vector(&du[k], &psi_du[k]);
            }
        }
        for l in 0..l_eu {
            let mut cov = Matrix3::<Complex64>::zeros();
            for w in &weights {
                let f = field_from_flat(eu[l].omega(), w);
                cov += f * f.adjoint();
            }
            if cov.trace().re > 0.0 {
                psi_eu[l] = principal_combiner(&cov)?.0;
                h[l] = effective_vector(&eu[l], &psi_eu[l]);
            }
        }
        if floors_active {
            h_active = h.clone();
        }
        let v = req_of(&rho, &mse_of(&g, &psi_du, &weights));
        max_violation = max_violation.max(v - prev_req);
        prev_req = v;
        r_eq_history.push(ReqEntry { outer, block: BlockId::Psi, value: v });

        // w block: SCA from the incumbent (or the max-min beams on rebuild)
        let rebuild = opts.rebuild_maxmin_each_outer && l_eu > 0;
        let base = if rebuild {
            w_maxmin.clone().expect("rebuild requires energy users")
        } else {
            weights.clone()
        };
        let sca = sca_w_block(
            &g,
            &h_active,
            &rho,
            pt,
            floor,
            streams,
            base,
            opts,
        )?;
        rejections_total += sca.rejections;
        cap_hits_total += sca.cap_hits;
        if sca.subproblem_infeasible {
            warnings.push(format!(
                "outer {outer}: linearized floor became infeasible; kept the incumbent beams"
            ));
        } else {
            weights = sca.weights;
        }
        let v = req_of(&rho, &mse_of(&g, &psi_du, &weights));
        if rebuild {
            step5_jumps.push((v - prev_req).max(0.0));
        } else {
            max_violation = max_violation.max(v - prev_req);
        }
        prev_req = v;
        r_eq_history.push(ReqEntry { outer, block: BlockId::W, value: v });

        // outer convergence on the mode-domain sum rate
        let r_sum = rates_of(&g, &psi_du, &weights);
        let done = r_sum_history
            .last()
            .is_some_and(|prev: &f64| (r_sum - prev).abs() <= opts.outer_tol * r_sum.abs().max(1.0));
        r_sum_history.push(r_sum);
        if done {
            status = RunStatus::Converged;
            break;
        }
    }

    if cap_hits_total > 0 {
        warnings.push(format!(
            "{cap_hits_total} weight subproblem(s) stopped at the iteration cap; \
             the candidates were still screened by the monotonicity guard"
        ));
    }
    let audit = MonotonicityAudit {
        ok: max_violation <= 1e-8,
        max_violation,
        step5_jumps,
        inner_monotone: rejections_total == 0,
        inner_rejections: rejections_total,
    };
    Ok(EngineResult {
        weights,
        psi_du,
        psi_eu,
        status,
        iterations,
        gamma_star,
        r_sum_history,
        r_eq_history,
        audit,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// public driver: channels → engine → spatially evaluated report
// ---------------------------------------------------------------------------

fn pack_complex(v: &DVector<Complex64>) -> Vec<(f64, f64)> {
    v.iter().map(|c| (c.re, c.im)).collect()
}

fn pack_vector3(v: &Vector3<Complex64>) -> Vec<(f64, f64)> {
    v.iter().map(|c| (c.re, c.im)).collect()
}

/// Optimize a scenario and evaluate the result through the exact spatial
/// channel (the basis projection is only the optimizer's search space).
pub fn solve(scenario: &Scenario, opts: &BcdOptions) -> Result<SolveReport> {
    let t0 = Instant::now();
    let channels = scenario.channels()?;
    solve_with_channels(scenario, &channels, opts, t0)
}

/// Same as [`solve`] for callers that already hold the sampled channels
/// (parameter sweeps that vary only budgets can reuse them).
pub fn solve_with_channels(
    scenario: &Scenario,
    channels: &Channels,
    opts: &BcdOptions,
    t0: Instant,
) -> Result<SolveReport> {
    let geom = scenario.receiver_geometry();
    let mut warnings = Vec::new();

    let floor = if scenario.p0 > 0.0 && !scenario.eu_positions.is_empty() {
        match eh_threshold(scenario.p0, &geom, &scenario.eh) {
            Ok(v) => v,
            Err(Error::InfeasibleRequirement(msg)) => {
                warnings.push(format!("harvest floor unreachable for any input: {msg}"));
                f64::INFINITY
            }
            Err(e) => return Err(e),
        }
    } else {
        0.0
    };

    if floor.is_infinite() {
        // the rectifier can never emit that much DC; report without solving
        let engine = run_engine(&channels.du_modes, &channels.eu_modes, scenario.pt, scenario.noise_var, 0.0, opts)?;
        let mut report = build_report(scenario, channels, &geom, engine, floor, opts, t0)?;
        report.status = RunStatus::Infeasible;
        report.warnings.append(&mut warnings);
        return Ok(report);
    }

    let engine = run_engine(
        &channels.du_modes,
        &channels.eu_modes,
        scenario.pt,
        scenario.noise_var,
        floor,
        opts,
    )?;
    let mut report = build_report(scenario, channels, &geom, engine, floor, opts, t0)?;
    report.warnings.append(&mut warnings);
    Ok(report)
}

fn build_report(
    scenario: &Scenario,
    channels: &Channels,
    geom: &ReceiverGeometry,
    engine: EngineResult,
    floor: f64,
    _opts: &BcdOptions,
    t0: Instant,
) -> Result<SolveReport> {
    let k_du = scenario.du_positions.len();
    let l_eu = scenario.eu_positions.len();
    let noise_var = scenario.noise_var;
    let rf_scale = geom.a_r * geom.phi.cos() / (2.0 * geom.z);

    // exact spatial evaluation of the optimized beams
    let currents: Vec<Vec<Vector3<Complex64>>> = engine
        .weights
        .iter()
        .map(|w| synthesize_on_grid(&BeamWeights::from_flat(w)?, &scenario.basis, &scenario.aperture))
        .collect::<Result<_>>()?;

    let mut du_rates = Vec::with_capacity(k_du);
    let mut du_sinr = Vec::with_capacity(k_du);
    let mut du_signal = Vec::with_capacity(k_du);
    let mut du_interference = Vec::with_capacity(k_du);
    let mut du_noise = Vec::with_capacity(k_du);
    for k in 0..k_du {
        let fields: Vec<Vector3<Complex64>> = currents
            .iter()
            .map(|c| radiate_field(&channels.du_spatial[k], c, &scenario.aperture))
            .collect::<Result<_>>()?;
        let (s, i, n) = sinr_parts(&fields, &engine.psi_du[k], k, noise_var);
        du_signal.push(s);
        du_interference.push(i);
        du_noise.push(n);
        du_sinr.push(s / (i + n));
        du_rates.push(rate_bits(s, i, n));
    }
    let r_sum: f64 = du_rates.iter().sum();

    let mut eu_rf_proj = Vec::with_capacity(l_eu);
    let mut eu_rf_unproj = Vec::with_capacity(l_eu);
    let mut eu_dc_proj = Vec::with_capacity(l_eu);
    let mut eu_dc_unproj = Vec::with_capacity(l_eu);
    let mut eu_constraint = Vec::with_capacity(l_eu);
    for l in 0..l_eu {
        let fields: Vec<Vector3<Complex64>> = currents
            .iter()
            .map(|c| radiate_field(&channels.eu_spatial[l], c, &scenario.aperture))
            .collect::<Result<_>>()?;
        let proj: f64 = fields.iter().map(|f| engine.psi_eu[l].dotc(f).norm_sqr()).sum();
        let unproj = poynting_power(&fields, geom);
        eu_rf_proj.push(rf_scale * proj);
        eu_rf_unproj.push(unproj);
        eu_dc_proj.push(eh_output(rf_scale * proj, &scenario.eh)?);
        eu_dc_unproj.push(eh_output(unproj, &scenario.eh)?);
        let h = effective_vector(&channels.eu_modes[l], &engine.psi_eu[l]);
        eu_constraint.push(engine.weights.iter().map(|w| h.dotc(w).norm_sqr()).sum());
    }

    let power_used: f64 = engine.weights.iter().map(|w| w.norm_squared()).sum();
    let mut warnings = engine.warnings;
    // Parseval consistency between the mode-domain budget and the grid
    let spatial_power: f64 = currents
        .iter()
        .map(|c| current_power(c, &scenario.aperture))
        .sum::<Result<f64>>()?;
    if (spatial_power - power_used).abs() > 1e-6 * power_used.max(1e-300) {
        warnings.push(format!(
            "grid power {spatial_power:.9e} drifted from mode power {power_used:.9e}"
        ));
    }

    Ok(SolveReport {
        scheme: "H-IDET".into(),
        status: engine.status,
        r_sum_bits: r_sum,
        du_rates_bits: du_rates,
        du_sinr,
        du_signal,
        du_interference,
        du_noise,
        eu_rf_projected_w: eu_rf_proj,
        eu_rf_unprojected_w: eu_rf_unproj,
        eu_harvest_projected_w: eu_dc_proj,
        eu_harvest_unprojected_w: eu_dc_unproj,
        eu_constraint_value: eu_constraint,
        gamma_star: (l_eu > 0).then_some(engine.gamma_star),
        p0_threshold: (floor > 0.0 && floor.is_finite()).then_some(floor),
        power_used,
        iterations: engine.iterations,
        r_sum_history: engine.r_sum_history,
        r_eq_history: engine.r_eq_history,
        audit: engine.audit,
        weights: engine.weights.iter().map(pack_complex).collect(),
        du_combiners: engine.psi_du.iter().map(pack_vector3).collect(),
        eu_combiners: engine.psi_eu.iter().map(pack_vector3).collect(),
        basis: BasisDescriptor::Fourier {
            n_max_x: scenario.basis.n_max_x,
            n_max_y: scenario.basis.n_max_y,
            modes: scenario.basis.mode_count(),
        },
        scenario_echo: ScenarioEcho {
            num_du: k_du,
            num_eu: l_eu,
            mode_count: scenario.basis.mode_count(),
            pt_a2: scenario.pt,
            p0_w: scenario.p0,
            noise_v2m2: scenario.noise_var,
            wavelength_m: scenario.medium.wavelength,
            lx_m: scenario.aperture.lx,
            ly_m: scenario.aperture.ly,
            nx: scenario.aperture.nx,
            ny: scenario.aperture.ny,
            phi_rad: scenario.phi,
        },
        conventions: Conventions::default(),
        wall_seconds: t0.elapsed().as_secs_f64(),
        warnings,
    })
}
