//! Reference schemes the optimizer is measured against.
//!
//! * `FD` / `FD-IDET`: the aperture replaced by a half-wavelength grid of
//!   M = ⌈2Lx/λ⌉·⌈2Ly/λ⌉ disk antennas of effective area λ²/8π each,
//!   driven by a fully digital beamformer. `FD-IDET` keeps the harvest
//!   floors; plain `FD` serves the energy users as extra data users. Both
//!   run through the same block-coordinate engine as the holographic
//!   scheme — the per-element aggregated channels simply replace the
//!   Fourier-mode channels. Power accounting uses each disk's quadrature
//!   area Â_m (Σ of captured sample weights), which makes Σ Â_m‖v_m‖²
//!   exactly the grid integral of the rect-supported current; the nominal
//!   λ²/8π fixes the disk radius, and Â_m → λ²/8π as the grid refines.
//!   Substituting w_m = √Â_m·v_m lines this up with the engine's Σ‖w_m‖².
//! * `MF`: per-user matched beams θ_j ∝ G_jᴴψ with a fixed y-polarized
//!   combiner, power split across users proportionally to their matched
//!   gains so the full budget is spent.
//! * `UPPER`: the rate the optimized beams would give if interference were
//!   fully canceled — drop the interference term user by user.

use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64;

use crate::energy::eh_threshold;
use crate::error::{Error, Result};
use crate::geometry::{current_power, radiate_field, Aperture, UserChannel};
use crate::optimizer::{
    effective_vector, field_from_flat, rate_bits, run_engine, BasisDescriptor, BcdOptions,
    Channels, Conventions, MonotonicityAudit, RunStatus, Scenario, ScenarioEcho, SolveReport,
};
use crate::wavenumber::WavenumberChannel;

/// Half-wavelength grid of disk antennas over the aperture footprint.
#[derive(Debug, Clone)]
pub struct DiscreteArray {
    /// Element centers on the aperture plane.
    pub centers: Vec<(f64, f64)>,
    /// Disk radius √(A_m/π).
    pub radius: f64,
    /// Effective area per element, λ²/8π.
    pub element_area: f64,
    /// Quadrature samples inside each disk as (sample index, weight).
    captured: Vec<Vec<(usize, f64)>>,
    /// Σ of captured weights per element (the disk's quadrature area).
    pub captured_area: Vec<f64>,
}

impl DiscreteArray {
    pub fn element_count(&self) -> usize {
        self.centers.len()
    }

    pub fn captured(&self, m: usize) -> &[(usize, f64)] {
        &self.captured[m]
    }
}

/// Element count per axis: one antenna per half wavelength, with the same
/// backoff as the mode-count rule so exact ratios don't spill over.
fn element_bound(side: f64, lambda: f64) -> usize {
    (2.0 * side / lambda - 1e-9).ceil().max(1.0) as usize
}

/// Build the nominal half-wavelength array for this aperture.
pub fn build_discrete_array(aperture: &Aperture, lambda: f64) -> Result<DiscreteArray> {
    build_discrete_array_custom(
        aperture,
        lambda,
        element_bound(aperture.lx, lambda),
        element_bound(aperture.ly, lambda),
    )
}

/// Array with an explicit element grid (used by resolution studies). The
/// disks must stay disjoint and inside the footprint.
pub fn build_discrete_array_custom(
    aperture: &Aperture,
    lambda: f64,
    mx: usize,
    my: usize,
) -> Result<DiscreteArray> {
    if mx == 0 || my == 0 {
        return Err(Error::InvalidArgument("element grid must be non-empty".into()));
    }
    let element_area = lambda * lambda / (8.0 * std::f64::consts::PI);
    let radius = (element_area / std::f64::consts::PI).sqrt();
    let (sx, sy) = (aperture.lx / mx as f64, aperture.ly / my as f64);
    if 2.0 * radius > sx.min(sy) {
        return Err(Error::InvalidArgument(format!(
            "{mx}x{my} elements of radius {radius:.4} m overlap at spacing {:.4} m",
            sx.min(sy)
        )));
    }
    let centers: Vec<(f64, f64)> = (0..mx)
        .flat_map(|i| {
            let x = -aperture.lx / 2.0 + (i as f64 + 0.5) * sx;
            (0..my).map(move |j| (x, -aperture.ly / 2.0 + (j as f64 + 0.5) * sy))
        })
        .collect();

    let mut captured = vec![Vec::new(); centers.len()];
    for (idx, s) in aperture.samples().iter().enumerate() {
        // nearest element center, then the exact disk test
        let i = (((s.position.x + aperture.lx / 2.0) / sx) as usize).min(mx - 1);
        let j = (((s.position.y + aperture.ly / 2.0) / sy) as usize).min(my - 1);
        let m = i * my + j;
        let (cx, cy) = centers[m];
        let (dx, dy) = (s.position.x - cx, s.position.y - cy);
        if dx * dx + dy * dy <= radius * radius {
            captured[m].push((idx, s.weight));
        }
    }
    let captured_area: Vec<f64> = captured
        .iter()
        .map(|c| c.iter().map(|(_, w)| w).sum())
        .collect();
    if let Some(empty) = captured_area.iter().position(|&a| a == 0.0) {
        return Err(Error::GridTooCoarse(format!(
            "element {empty} captures no quadrature samples; use a finer aperture grid \
             (cells must be smaller than the {radius:.4} m element radius)"
        )));
    }
    Ok(DiscreteArray {
        centers,
        radius,
        element_area,
        captured,
        captured_area,
    })
}

/// Per-element aggregated channel H_m = ∫_{S_m} G(s) ds via the captured
/// quadrature samples.
pub fn fd_effective_channel(
    channel: &UserChannel,
    array: &DiscreteArray,
) -> Vec<Matrix3<Complex64>> {
    array
        .captured
        .iter()
        .map(|caps| {
            let mut h = Matrix3::<Complex64>::zeros();
            for &(idx, w) in caps {
                h += channel.samples()[idx].map(|v| v * Complex64::from(w));
            }
            h
        })
        .collect()
}

/// The engine-facing channel of one user: Ω̃_m = H_m/√Â_m, so that flat
/// weights w_m = √Â_m·v_m reproduce both the field Σ H_m v_m and the power
/// Σ Â_m‖v_m‖² = Σ‖w_m‖² (Â_m = quadrature area of disk m).
fn fd_engine_channel(channel: &UserChannel, array: &DiscreteArray) -> WavenumberChannel {
    let omega = fd_effective_channel(channel, array)
        .into_iter()
        .zip(&array.captured_area)
        .map(|(h, &a)| h.map(|v| v / Complex64::from(a.sqrt())))
        .collect();
    WavenumberChannel::from_modes(channel.user_position, omega)
}

/// Digital beamformer entries v_{j,m} recovered from engine weights.
pub fn fd_beamformer(weights: &DVector<Complex64>, array: &DiscreteArray) -> Vec<Vector3<Complex64>> {
    (0..array.element_count())
        .map(|m| {
            let root = Complex64::from(array.captured_area[m].sqrt());
            Vector3::new(weights[3 * m], weights[3 * m + 1], weights[3 * m + 2]) / root
        })
        .collect()
}

/// Solve the discrete-array counterpart of a scenario. `with_floors`
/// selects FD-IDET (harvest constraints kept) versus plain FD (energy
/// users served as data users, sum rate over all K+L streams).
pub fn fd_solve(
    scenario: &Scenario,
    fd_grid: (usize, usize),
    with_floors: bool,
    opts: &BcdOptions,
) -> Result<SolveReport> {
    let t0 = std::time::Instant::now();
    let fine = Aperture::new(scenario.aperture.lx, scenario.aperture.ly, fd_grid.0, fd_grid.1)?;
    let array = build_discrete_array(&fine, scenario.medium.wavelength)?;

    let du_spatial: Vec<UserChannel> = scenario
        .du_positions
        .iter()
        .map(|p| crate::geometry::sample_user_channel(p, &fine, &scenario.medium))
        .collect::<Result<_>>()?;
    let eu_spatial: Vec<UserChannel> = scenario
        .eu_positions
        .iter()
        .map(|p| crate::geometry::sample_user_channel(p, &fine, &scenario.medium))
        .collect::<Result<_>>()?;

    let mut du_modes: Vec<WavenumberChannel> =
        du_spatial.iter().map(|c| fd_engine_channel(c, &array)).collect();
    let mut eu_modes: Vec<WavenumberChannel> =
        eu_spatial.iter().map(|c| fd_engine_channel(c, &array)).collect();
    if !with_floors {
        // plain FD: every user is a data user
        du_modes.append(&mut eu_modes);
    }

    let geom = scenario.receiver_geometry();
    let mut warnings = Vec::new();
    let floor = if with_floors && scenario.p0 > 0.0 && !eu_modes.is_empty() {
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
    let unreachable = floor.is_infinite();
    let engine = run_engine(
        &du_modes,
        &eu_modes,
        scenario.pt,
        scenario.noise_var,
        if unreachable { 0.0 } else { floor },
        opts,
    )?;

    let k_streams = du_modes.len();
    let l_eu = eu_modes.len();
    let rf_scale = geom.a_r * geom.phi.cos() / (2.0 * geom.z);

    let mut du_rates = Vec::with_capacity(k_streams);
    let mut du_sinr = Vec::with_capacity(k_streams);
    let mut du_signal = Vec::with_capacity(k_streams);
    let mut du_interference = Vec::with_capacity(k_streams);
    let mut du_noise = Vec::with_capacity(k_streams);
    for k in 0..k_streams {
        let mut signal = 0.0;
        let mut interference = 0.0;
        for (j, w) in engine.weights.iter().enumerate() {
            let f = field_from_flat(du_modes[k].omega(), w);
            let p = engine.psi_du[k].dotc(&f).norm_sqr();
            if j == k {
                signal = p;
            } else {
                interference += p;
            }
        }
        let n = scenario.noise_var * engine.psi_du[k].norm_squared();
        du_signal.push(signal);
        du_interference.push(interference);
        du_noise.push(n);
        du_sinr.push(signal / (interference + n));
        du_rates.push(rate_bits(signal, interference, n));
    }

    let mut eu_rf_proj = Vec::with_capacity(l_eu);
    let mut eu_rf_unproj = Vec::with_capacity(l_eu);
    let mut eu_dc_proj = Vec::with_capacity(l_eu);
    let mut eu_dc_unproj = Vec::with_capacity(l_eu);
    let mut eu_constraint = Vec::with_capacity(l_eu);
    for l in 0..l_eu {
        let h = effective_vector(&eu_modes[l], &engine.psi_eu[l]);
        let proj: f64 = engine.weights.iter().map(|w| h.dotc(w).norm_sqr()).sum();
        let unproj: f64 = engine
            .weights
            .iter()
            .map(|w| field_from_flat(eu_modes[l].omega(), w).norm_squared())
            .sum();
        eu_constraint.push(proj);
        eu_rf_proj.push(rf_scale * proj);
        eu_rf_unproj.push(rf_scale * unproj);
        eu_dc_proj.push(crate::energy::eh_output(rf_scale * proj, &scenario.eh)?);
        eu_dc_unproj.push(crate::energy::eh_output(rf_scale * unproj, &scenario.eh)?);
    }

    let mut engine_warnings = engine.warnings;
    warnings.append(&mut engine_warnings);
    Ok(SolveReport {
        scheme: if with_floors { "FD-IDET".into() } else { "FD".into() },
        status: if unreachable { RunStatus::Infeasible } else { engine.status },
        r_sum_bits: du_rates.iter().sum(),
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
        p0_threshold: (!unreachable && floor > 0.0).then_some(floor),
        power_used: engine.weights.iter().map(|w| w.norm_squared()).sum(),
        iterations: engine.iterations,
        r_sum_history: engine.r_sum_history,
        r_eq_history: engine.r_eq_history,
        audit: engine.audit,
        weights: engine
            .weights
            .iter()
            .map(|w| w.iter().map(|c| (c.re, c.im)).collect())
            .collect(),
        du_combiners: engine
            .psi_du
            .iter()
            .map(|p| p.iter().map(|c| (c.re, c.im)).collect())
            .collect(),
        eu_combiners: engine
            .psi_eu
            .iter()
            .map(|p| p.iter().map(|c| (c.re, c.im)).collect())
            .collect(),
        basis: BasisDescriptor::Discrete {
            elements: array.element_count(),
            element_area: array.element_area,
        },
        scenario_echo: ScenarioEcho {
            num_du: scenario.du_positions.len(),
            num_eu: scenario.eu_positions.len(),
            mode_count: array.element_count(),
            pt_a2: scenario.pt,
            p0_w: scenario.p0,
            noise_v2m2: scenario.noise_var,
            wavelength_m: scenario.medium.wavelength,
            lx_m: scenario.aperture.lx,
            ly_m: scenario.aperture.ly,
            nx: fine.nx,
            ny: fine.ny,
            phi_rad: scenario.phi,
        },
        conventions: Conventions::default(),
        wall_seconds: t0.elapsed().as_secs_f64(),
        warnings,
    })
}

/// Matched-filter beams: θ_j(s) = μ_j·G_jᴴ(s)ψ with ψ = (0,1,0)ᵀ for every
/// user (data and energy alike). The default allocation spends the whole
/// budget with per-user power proportional to the matched gain
/// E_j = ∫‖G_jᴴψ‖²ds (common μ = √(P_t/Σ_j E_j)); `equal_power` gives each
/// of the K+L users P_t/(K+L) instead.
pub fn mf_solve(scenario: &Scenario, channels: &Channels, equal_power: bool) -> Result<SolveReport> {
    let t0 = std::time::Instant::now();
    let psi = Vector3::new(
        Complex64::from(0.0),
        Complex64::from(1.0),
        Complex64::from(0.0),
    );
    let k_du = channels.du_spatial.len();
    let l_eu = channels.eu_spatial.len();
    let all: Vec<&UserChannel> = channels
        .du_spatial
        .iter()
        .chain(channels.eu_spatial.iter())
        .collect();

    let aperture = &scenario.aperture;
    let gains: Vec<f64> = all
        .iter()
        .map(|ch| {
            ch.samples()
                .iter()
                .zip(aperture.samples())
                .map(|(gm, s)| s.weight * (gm.adjoint() * psi).norm_squared())
                .sum()
        })
        .collect();
    let total_gain: f64 = gains.iter().sum();
    if gains.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::DegenerateChannel(
            "a matched beam vanishes for the fixed combiner".into(),
        ));
    }
    let currents: Vec<Vec<Vector3<Complex64>>> = all
        .iter()
        .zip(&gains)
        .map(|(ch, &gain)| {
            let mu = if equal_power {
                (scenario.pt / (all.len() as f64 * gain)).sqrt()
            } else {
                (scenario.pt / total_gain).sqrt()
            };
            ch.samples()
                .iter()
                .map(|gm| (gm.adjoint() * psi).map(|v| v * Complex64::from(mu)))
                .collect()
        })
        .collect();

    let power_used: f64 = currents
        .iter()
        .map(|c| current_power(c, aperture))
        .sum::<Result<f64>>()?;

    let geom = scenario.receiver_geometry();
    let rf_scale = geom.a_r * geom.phi.cos() / (2.0 * geom.z);
    let noise = scenario.noise_var * psi.norm_squared();

    let mut du_rates = Vec::with_capacity(k_du);
    let mut du_sinr = Vec::with_capacity(k_du);
    let mut du_signal = Vec::with_capacity(k_du);
    let mut du_interference = Vec::with_capacity(k_du);
    let mut du_noise = Vec::with_capacity(k_du);
    for k in 0..k_du {
        let mut signal = 0.0;
        let mut interference = 0.0;
        for (j, c) in currents.iter().enumerate() {
            let f = radiate_field(&channels.du_spatial[k], c, aperture)?;
            let p = psi.dotc(&f).norm_sqr();
            if j == k {
                signal = p;
            } else {
                interference += p;
            }
        }
        du_signal.push(signal);
        du_interference.push(interference);
        du_noise.push(noise);
        du_sinr.push(signal / (interference + noise));
        du_rates.push(rate_bits(signal, interference, noise));
    }

    let mut eu_rf_proj = Vec::with_capacity(l_eu);
    let mut eu_rf_unproj = Vec::with_capacity(l_eu);
    let mut eu_dc_proj = Vec::with_capacity(l_eu);
    let mut eu_dc_unproj = Vec::with_capacity(l_eu);
    let mut eu_constraint = Vec::with_capacity(l_eu);
    for l in 0..l_eu {
        let mut proj = 0.0;
        let mut unproj = 0.0;
        for c in &currents {
            let f = radiate_field(&channels.eu_spatial[l], c, aperture)?;
            proj += psi.dotc(&f).norm_sqr();
            unproj += f.norm_squared();
        }
        eu_constraint.push(proj);
        eu_rf_proj.push(rf_scale * proj);
        eu_rf_unproj.push(rf_scale * unproj);
        eu_dc_proj.push(crate::energy::eh_output(rf_scale * proj, &scenario.eh)?);
        eu_dc_unproj.push(crate::energy::eh_output(rf_scale * unproj, &scenario.eh)?);
    }

    let floor = if scenario.p0 > 0.0 && l_eu > 0 {
        eh_threshold(scenario.p0, &geom, &scenario.eh).ok()
    } else {
        None
    };
    Ok(SolveReport {
        scheme: "MF".into(),
        status: RunStatus::Converged,
        r_sum_bits: du_rates.iter().sum(),
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
        gamma_star: None,
        p0_threshold: floor,
        power_used,
        iterations: 0,
        r_sum_history: Vec::new(),
        r_eq_history: Vec::new(),
        audit: MonotonicityAudit {
            ok: true,
            max_violation: 0.0,
            step5_jumps: Vec::new(),
            inner_monotone: true,
            inner_rejections: 0,
        },
        weights: currents
            .iter()
            .map(|c| c.iter().flat_map(|v| v.iter().map(|z| (z.re, z.im))).collect())
            .collect(),
        du_combiners: (0..k_du)
            .map(|_| psi.iter().map(|c| (c.re, c.im)).collect())
            .collect(),
        eu_combiners: (0..l_eu)
            .map(|_| psi.iter().map(|c| (c.re, c.im)).collect())
            .collect(),
        basis: BasisDescriptor::Discrete {
            elements: aperture.sample_count(),
            element_area: aperture.lx * aperture.ly / aperture.sample_count() as f64,
        },
        scenario_echo: ScenarioEcho {
            num_du: k_du,
            num_eu: l_eu,
            mode_count: aperture.sample_count(),
            pt_a2: scenario.pt,
            p0_w: scenario.p0,
            noise_v2m2: scenario.noise_var,
            wavelength_m: scenario.medium.wavelength,
            lx_m: aperture.lx,
            ly_m: aperture.ly,
            nx: aperture.nx,
            ny: aperture.ny,
            phi_rad: scenario.phi,
        },
        conventions: Conventions::default(),
        wall_seconds: t0.elapsed().as_secs_f64(),
        warnings: Vec::new(),
    })
}

/// Interference-free rate of an already-solved state: same beams and
/// combiners, interference dropped. Always ≥ the reported sum rate.
pub fn upper_bound_rate(report: &SolveReport) -> f64 {
    report
        .du_signal
        .iter()
        .zip(&report.du_noise)
        .map(|(s, n)| (1.0 + s / n).log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EhCircuit;
    use crate::geometry::{MediumParams, Point3};
    use crate::optimizer::solve as solve_hidet;
    use crate::wavenumber::make_basis;
    use nalgebra::Matrix3;

    fn toy_scenario(du: Vec<Point3>, eu: Vec<Point3>, p0: f64) -> Scenario {
        let lx = 0.09;
        let medium = MediumParams::from_wavelength(0.03, 376.73, 25.0).unwrap();
        let aperture = Aperture::new(lx, lx, 12, 12).unwrap();
        let basis = make_basis(lx, lx, 0.03, Some(2)).unwrap();
        Scenario::new(
            aperture,
            medium,
            basis,
            du,
            eu,
            0.01,
            p0,
            5.6e-3,
            EhCircuit::reference(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn nominal_array_matches_ceiling_counts() {
        let ap = Aperture::new(0.3, 0.3, 128, 128).unwrap();
        let array = build_discrete_array(&ap, 0.03).unwrap();
        assert_eq!(array.element_count(), 400);
        // disks stay inside the footprint
        for &(x, y) in &array.centers {
            assert!(x.abs() + array.radius <= 0.15 + 1e-12);
            assert!(y.abs() + array.radius <= 0.15 + 1e-12);
        }
        // captured quadrature area approaches M·A_m; boundary cells bound
        // the error by (perimeter × cell diagonal) per disk
        let total: f64 = array.captured_area.iter().sum();
        let nominal = 400.0 * array.element_area;
        let cell_diag = (2f64).sqrt() * 0.3 / 128.0;
        let bound = 400.0 * 2.0 * std::f64::consts::PI * array.radius * cell_diag;
        assert!(
            (total - nominal).abs() <= bound,
            "captured {total:.6e} vs nominal {nominal:.6e} (bound {bound:.2e})"
        );
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let ap = Aperture::new(0.3, 0.3, 32, 32).unwrap();
        match build_discrete_array(&ap, 0.03) {
            Err(Error::GridTooCoarse(_)) => {}
            other => panic!("expected a resolution error, got {other:?}"),
        }
    }

    #[test]
    fn constant_kernel_aggregates_to_captured_area() {
        let ap = Aperture::new(0.09, 0.09, 48, 48).unwrap();
        let array = build_discrete_array(&ap, 0.03).unwrap();
        let g = Matrix3::<Complex64>::identity() * Complex64::new(2.0, -1.0);
        let ch = UserChannel::from_samples(Point3::new(0.0, 0.0, 1.0), vec![g; ap.sample_count()]);
        let h = fd_effective_channel(&ch, &array);
        for (m, hm) in h.iter().enumerate() {
            let expect = g.map(|v| v * Complex64::from(array.captured_area[m]));
            assert!((hm - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn fd_power_accounting_matches_the_quadrature() {
        let sc = toy_scenario(vec![Point3::new(0.0, 0.0, 0.5)], vec![], 0.0);
        let report = fd_solve(&sc, (48, 48), false, &BcdOptions::default()).unwrap();
        let ap = Aperture::new(0.09, 0.09, 48, 48).unwrap();
        let array = build_discrete_array(&ap, 0.03).unwrap();
        // Σ Â_m‖v‖² recomputed from the beamformer equals the engine's
        // power account ...
        let mut quadrature = 0.0;
        let mut direct = 0.0;
        for w in &report.weights {
            let flat =
                DVector::from_iterator(w.len(), w.iter().map(|&(re, im)| Complex64::new(re, im)));
            let v = fd_beamformer(&flat, &array);
            direct += v
                .iter()
                .zip(&array.captured_area)
                .map(|(vm, &a)| a * vm.norm_squared())
                .sum::<f64>();
            // ... and both equal the grid integral of the rect-supported
            // current density
            let mut current = vec![Vector3::<Complex64>::zeros(); ap.sample_count()];
            for (m, vm) in v.iter().enumerate() {
                for &(idx, _) in array.captured(m) {
                    current[idx] = *vm;
                }
            }
            quadrature += current_power(&current, &ap).unwrap();
        }
        assert!(
            (direct - report.power_used).abs() <= 1e-8 * report.power_used,
            "Σ Â‖v‖² = {direct} vs engine {}",
            report.power_used
        );
        assert!(
            (quadrature - report.power_used).abs() <= 1e-8 * report.power_used,
            "grid integral {quadrature} vs engine {}",
            report.power_used
        );
        assert!(report.power_used <= sc.pt * (1.0 + 1e-8));
    }

    #[test]
    fn denser_arrays_close_on_the_continuous_aperture() {
        let sc = toy_scenario(vec![Point3::new(0.0, 0.0, 0.5)], vec![], 0.0);
        let hidet = solve_hidet(&sc, &BcdOptions::default()).unwrap();
        let ap = Aperture::new(0.09, 0.09, 48, 48).unwrap();
        let mut last = 0.0;
        for m in [3usize, 4, 6] {
            let array = build_discrete_array_custom(&ap, 0.03, m, m).unwrap();
            let ch = crate::geometry::sample_user_channel(
                &Point3::new(0.0, 0.0, 0.5),
                &ap,
                &sc.medium,
            )
            .unwrap();
            let modes = vec![fd_engine_channel(&ch, &array)];
            let engine = run_engine(&modes, &[], sc.pt, sc.noise_var, 0.0, &BcdOptions::default()).unwrap();
            let rate = *engine.r_sum_history.last().unwrap();
            assert!(rate > last, "rate {rate} did not improve on {last} at {m}x{m}");
            last = rate;
        }
        assert!(
            last <= hidet.r_sum_bits * (1.0 + 1e-6),
            "densest array {last} exceeded the continuous solution {}",
            hidet.r_sum_bits
        );
    }

    #[test]
    fn matched_beams_spend_the_budget_and_best_serve_one_user() {
        let sc = toy_scenario(
            vec![Point3::new(-0.05, 0.0, 0.5), Point3::new(0.05, 0.0, 0.5)],
            vec![Point3::new(0.0, 0.02, 0.4)],
            1e-6,
        );
        let channels = sc.channels().unwrap();
        let report = mf_solve(&sc, &channels, false).unwrap();
        assert!(
            (report.power_used - sc.pt).abs() <= 1e-8 * sc.pt,
            "power {} vs budget {}",
            report.power_used,
            sc.pt
        );
        let equal = mf_solve(&sc, &channels, true).unwrap();
        assert!((equal.power_used - sc.pt).abs() <= 1e-8 * sc.pt);
        // equal split: every stream carries exactly P_t/(K+L)
        let share = sc.pt / equal.weights.len() as f64;
        for w in &equal.weights {
            let stream_power: f64 = w
                .chunks_exact(3)
                .zip(sc.aperture.samples())
                .map(|(v, s)| {
                    s.weight * v.iter().map(|(re, im)| re * re + im * im).sum::<f64>()
                })
                .sum();
            assert!(
                (stream_power - share).abs() <= 1e-10 * share,
                "stream power {stream_power} vs equal share {share}"
            );
        }

        // the matched direction maximizes own-signal power among
        // equal-power beams (Cauchy–Schwarz)
        let psi = Vector3::new(
            Complex64::from(0.0),
            Complex64::from(1.0),
            Complex64::from(0.0),
        );
        let ch = &channels.du_spatial[0];
        let matched: Vec<Vector3<Complex64>> =
            ch.samples().iter().map(|g| g.adjoint() * psi).collect();
        let p_m = current_power(&matched, &sc.aperture).unwrap();
        let f = radiate_field(ch, &matched, &sc.aperture).unwrap();
        let best = psi.dotc(&f).norm_sqr() / p_m;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let random: Vec<Vector3<Complex64>> = (0..ch.sample_count())
                .map(|_| {
                    Vector3::from_fn(|_, _| {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    })
                })
                .collect();
            let p_r = current_power(&random, &sc.aperture).unwrap();
            let fr = radiate_field(ch, &random, &sc.aperture).unwrap();
            let got = psi.dotc(&fr).norm_sqr() / p_r;
            assert!(got <= best * (1.0 + 1e-10), "random beam beat matched: {got} > {best}");
        }
    }

    #[test]
    fn upper_bound_dominates_and_collapses_without_interference() {
        let sc = toy_scenario(
            vec![Point3::new(-0.05, 0.0, 0.5), Point3::new(0.05, 0.0, 0.5)],
            vec![Point3::new(0.0, 0.02, 0.4)],
            1e-6,
        );
        let report = solve_hidet(&sc, &BcdOptions::default()).unwrap();
        let upper = upper_bound_rate(&report);
        assert!(upper >= report.r_sum_bits - 1e-12);

        let single = toy_scenario(vec![Point3::new(0.0, 0.0, 0.5)], vec![], 0.0);
        let r1 = solve_hidet(&single, &BcdOptions::default()).unwrap();
        assert!(
            (upper_bound_rate(&r1) - r1.r_sum_bits).abs() <= 1e-12,
            "no interference: bound {} vs rate {}",
            upper_bound_rate(&r1),
            r1.r_sum_bits
        );
    }
}
