//! End-to-end acceptance checks, one per shipped guarantee. Each test
//! prints a single PASS/FAIL line with the measured quantity so the suite
//! output doubles as a report (`cargo test --test acceptance -- --nocapture
//! --test-threads=1` for ordered lines).

use holobeam_core::convex::lift;
use holobeam_core::energy::{eh_inverse, eh_output, poynting_power, EhCircuit, ReceiverGeometry};
use holobeam_core::focusing::{beam_pattern, channel_gram, matched_beam, principal_combiner};
use holobeam_core::geometry::{
    correlation_metric, current_power, radiate_field, sample_user_channel, Aperture, FresnelOrder,
    MediumParams, Point3, UserChannel,
};
use holobeam_core::optimizer::{
    effective_vector, equal_harvest_seed, field_from_flat, mmse_combiner, mse_with_combiner,
    rate_bits, sinr_parts, solve as solve_scenario, BcdOptions, RunStatus, Scenario,
};
use holobeam_core::wavenumber::{
    channel_transform, discrete_gram, field_from_weights, make_basis, project_current,
    synthesize_on_grid, BeamWeights,
};
use holobeam_core::{
    fd_solve, fresnel_channel, mf_solve, solve_subproblem, upper_bound_rate, AffineConstraint,
    ConvexSubproblem, QuadTerm, SubproblemOptions,
};
use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 0.03;
const Z0: f64 = 376.73;
const Z_LOAD: f64 = 25.0;
const NOISE_VAR: f64 = 5.6e-3;

fn verdict(name: &str, ok: bool, detail: String) {
    if ok {
        println!("PASS [{name}] {detail}");
    } else {
        println!("FAIL [{name}] {detail}");
        panic!("[{name}] {detail}");
    }
}

fn medium() -> MediumParams {
    MediumParams::from_wavelength(LAMBDA, Z0, Z_LOAD).unwrap()
}

fn receiver() -> ReceiverGeometry {
    ReceiverGeometry::from_wavelength(LAMBDA, 0.0, Z_LOAD).unwrap()
}

fn random_flat(rng: &mut ChaCha8Rng, len: usize) -> DVector<Complex64> {
    DVector::from_fn(len, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// The two-data-user/one-energy-user reference scenario every optimizer
/// check runs on: 0.3×0.3 m aperture, 32×32 quadrature, 121-mode basis.
fn desk_scenario(pt: f64, p0: f64) -> Scenario {
    sized_scenario(0.3, Some(5), pt, p0)
}

fn sized_scenario(side: f64, override_n: Option<i64>, pt: f64, p0: f64) -> Scenario {
    let aperture = Aperture::new(side, side, 32, 32).unwrap();
    let basis = make_basis(side, side, LAMBDA, override_n).unwrap();
    Scenario::new(
        aperture,
        medium(),
        basis,
        vec![Point3::new(-5.0, 5.0, 30.0), Point3::new(5.0, 5.0, 30.0)],
        vec![Point3::new(1.0, 1.0, 1.0)],
        pt,
        p0,
        NOISE_VAR,
        EhCircuit::reference(),
        0.0,
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// 01 — rectifier model identities
// ---------------------------------------------------------------------------

#[test]
fn rectifier_is_anchored_saturating_monotone_and_invertible() {
    let c = EhCircuit::reference();

    let zero = eh_output(0.0, &c).unwrap().abs();
    let sat_gap = (eh_output(2.2, &c).unwrap() - c.m).abs();

    // strict monotonicity over the knee region; far beyond it the sigmoid
    // increments fall under one ulp of M and strictness is unrepresentable
    let grid = 1000;
    let mut strictly_increasing = true;
    let mut prev = -f64::INFINITY;
    for i in 0..grid {
        let p = 5.0 * c.b * i as f64 / (grid - 1) as f64;
        let v = eh_output(p, &c).unwrap();
        if v <= prev {
            strictly_increasing = false;
        }
        prev = v;
    }

    let mut round_trip = 0.0f64;
    for p0 in [1e-4, 1e-3, 3e-3] {
        let p = eh_inverse(p0, &c).unwrap();
        round_trip = round_trip.max((eh_output(p, &c).unwrap() - p0).abs() / p0);
    }

    verdict(
        "01 rectifier-identities",
        zero <= 1e-12 && sat_gap <= 1e-3 * c.m && strictly_increasing && round_trip <= 1e-9,
        format!(
            "zero-input {zero:.2e} W, saturation gap {:.2e}·M, 1000-pt grid strictly increasing: {strictly_increasing}, worst inverse round-trip {round_trip:.2e} rel",
            sat_gap / c.m
        ),
    );
}

// ---------------------------------------------------------------------------
// 02 — transmit basis orthonormality and power preservation
// ---------------------------------------------------------------------------

#[test]
fn fourier_family_is_orthonormal_and_power_preserving() {
    let basis = make_basis(0.3, 0.3, LAMBDA, None).unwrap();
    assert_eq!(basis.mode_count(), 441);
    let aperture = Aperture::new(0.3, 0.3, 64, 64).unwrap();

    let gram = discrete_gram(&basis, &aperture);
    let mut gram_dev = 0.0f64;
    for k in 0..441 {
        for l in 0..441 {
            let target = if k == l { 1.0 } else { 0.0 };
            gram_dev = gram_dev.max((gram[(k, l)] - Complex64::from(target)).norm());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut parseval_dev = 0.0f64;
    for _ in 0..20 {
        let w = BeamWeights::from_flat(&random_flat(&mut rng, 3 * 441)).unwrap();
        let theta = synthesize_on_grid(&w, &basis, &aperture).unwrap();
        let spatial = current_power(&theta, &aperture).unwrap();
        parseval_dev = parseval_dev.max((spatial - w.power()).abs() / w.power());
    }

    verdict(
        "02 basis-orthonormality",
        gram_dev <= 1e-10 && parseval_dev <= 1e-6,
        format!(
            "441-mode Gram on 64×64 deviates from identity by {gram_dev:.2e}, worst spatial/mode power mismatch {parseval_dev:.2e} rel over 20 random beams"
        ),
    );
}

// ---------------------------------------------------------------------------
// 03 — mode-domain channel vs spatial radiation
// ---------------------------------------------------------------------------

#[test]
fn mode_channel_reproduces_spatial_fields() {
    let med = medium();
    let users = [
        Point3::new(5.0, 5.0, 30.0),
        Point3::new(5.0, -5.0, 30.0),
        Point3::new(-5.0, 5.0, 30.0),
        Point3::new(-5.0, -5.0, 30.0),
        Point3::new(1.0, 1.0, 1.0),
        Point3::new(-1.0, 1.0, 1.0),
    ];
    let ap32 = Aperture::new(0.3, 0.3, 32, 32).unwrap();
    let ap128 = Aperture::new(0.3, 0.3, 128, 128).unwrap();
    let basis441 = make_basis(0.3, 0.3, LAMBDA, None).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut commute_dev = 0.0f64;
    let mut refine_dev = 0.0f64;
    let mut truncation_monotone = true;
    let mut coarsest = 0.0f64;
    let mut finest = 0.0f64;

    for pos in &users {
        let ch32 = sample_user_channel(pos, &ap32, &med).unwrap();
        let ch128 = sample_user_channel(pos, &ap128, &med).unwrap();
        let omega = channel_transform(&ch32, &basis441, &ap32).unwrap();

        // (a) on the shared quadrature grid the mode path and the spatial
        // path are the same finite sum
        let w = BeamWeights::from_flat(&random_flat(&mut rng, 3 * 441)).unwrap();
        let via_modes = field_from_weights(&omega, &w).unwrap();
        let theta = synthesize_on_grid(&w, &basis441, &ap32).unwrap();
        let via_space = radiate_field(&ch32, &theta, &ap32).unwrap();
        commute_dev = commute_dev.max((via_modes - via_space).norm() / via_space.norm());

        // (b) the 32×32 mode channel agrees with a 4×-refined quadrature of
        // the same synthesized beam to within 1%
        let mut gram3 = nalgebra::Matrix3::<Complex64>::zeros();
        for om in omega.omega() {
            gram3 += om * om.adjoint();
        }
        let (psi, _) = principal_combiner(&gram3).unwrap();
        let h = effective_vector(&omega, &psi);
        let matched = BeamWeights::from_flat(&(&h / Complex64::from(h.norm()))).unwrap();
        let coarse_field = field_from_weights(&omega, &matched).unwrap();
        let theta_fine = synthesize_on_grid(&matched, &basis441, &ap128).unwrap();
        let fine_field = radiate_field(&ch128, &theta_fine, &ap128).unwrap();
        refine_dev = refine_dev.max((coarse_field - fine_field).norm() / fine_field.norm());

        // (c) the residual of projecting the exact matched current onto the
        // basis shrinks as the retained band grows
        let (psi_sp, _) = principal_combiner(&channel_gram(&ch32, &ap32).unwrap()).unwrap();
        let raw: Vec<Vector3<Complex64>> =
            ch32.samples().iter().map(|g| g.adjoint() * psi_sp).collect();
        let norm = current_power(&raw, &ap32).unwrap().sqrt();
        let current: Vec<Vector3<Complex64>> =
            raw.into_iter().map(|v| v / Complex64::from(norm)).collect();
        let reference = radiate_field(&ch32, &current, &ap32).unwrap();
        let mut errs = Vec::new();
        for n in [1i64, 5, 10] {
            let basis = make_basis(0.3, 0.3, LAMBDA, Some(n)).unwrap();
            let w_n = project_current(&current, &basis, &ap32).unwrap();
            let om_n = channel_transform(&ch32, &basis, &ap32).unwrap();
            let f_n = field_from_weights(&om_n, &w_n).unwrap();
            errs.push((f_n - reference).norm() / reference.norm());
        }
        if !(errs[1] <= errs[0] && errs[2] <= errs[1]) {
            truncation_monotone = false;
        }
        coarsest = coarsest.max(errs[0]);
        finest = finest.max(errs[2]);
    }

    verdict(
        "03 mode-field-consistency",
        commute_dev <= 1e-10 && refine_dev <= 1e-2 && truncation_monotone,
        format!(
            "same-grid commutation {commute_dev:.2e} rel, refined-quadrature agreement {refine_dev:.3e} rel at 441 modes, truncation residual monotone over 9/121/441 modes: {truncation_monotone} (worst {coarsest:.2} → {finest:.3})"
        ),
    );
}

// ---------------------------------------------------------------------------
// 04 — single-receiver matched beam attains the eigenvalue bound
// ---------------------------------------------------------------------------

#[test]
fn matched_beam_attains_the_closed_form_power() {
    let med = medium();
    let geom = receiver();
    let aperture = Aperture::new(0.3, 0.3, 32, 32).unwrap();
    let pt = 0.01;
    let ch = sample_user_channel(&Point3::new(1.0, 1.0, 1.0), &aperture, &med).unwrap();

    let gram = channel_gram(&ch, &aperture).unwrap();
    let (_, lambda_max) = principal_combiner(&gram).unwrap();
    let closed_form = geom.a_r * geom.phi.cos() / (2.0 * geom.z) * pt * lambda_max;

    let sol = matched_beam(&ch, pt, &aperture, &geom).unwrap();
    let closed_dev = (sol.p_eh - closed_form).abs() / closed_form;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_ratio = 0.0f64;
    for _ in 0..200 {
        let raw: Vec<Vector3<Complex64>> = (0..aperture.sample_count())
            .map(|_| {
                Vector3::new(
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                )
            })
            .collect();
        let scale = (pt / current_power(&raw, &aperture).unwrap()).sqrt();
        let beam: Vec<Vector3<Complex64>> =
            raw.into_iter().map(|v| v.map(|z| z * Complex64::from(scale))).collect();
        let field = radiate_field(&ch, &beam, &aperture).unwrap();
        let p = poynting_power(std::slice::from_ref(&field), &geom);
        worst_ratio = worst_ratio.max(p / sol.p_eh);
    }

    verdict(
        "04 single-receiver-closed-form",
        closed_dev <= 1e-6 && worst_ratio <= 1.0 + 1e-10,
        format!(
            "quadrature vs eigenvalue formula {closed_dev:.2e} rel, best of 200 random equal-power beams reaches {worst_ratio:.6} of the matched beam"
        ),
    );
}

// ---------------------------------------------------------------------------
// 05 — near-field focusing along the boresight
// ---------------------------------------------------------------------------

#[test]
fn compensated_pattern_peaks_at_the_design_focus() {
    let med = medium();
    let geom = receiver();
    let aperture = Aperture::new(1.5, 0.5, 240, 80).unwrap();
    let pt = 0.003;

    let mut detail = Vec::new();
    let mut ok = true;
    for zf in [4.0, 8.0, 25.0] {
        let focus = Point3::new(0.0, 0.0, zf);
        let ch = sample_user_channel(&focus, &aperture, &med).unwrap();
        let sol = matched_beam(&ch, pt, &aperture, &geom).unwrap();

        let mut scan: Vec<Point3> = (0..41)
            .map(|i| Point3::new(0.0, 0.0, 1.0 + 49.0 * i as f64 / 40.0))
            .collect();
        scan.push(focus);
        let pat = beam_pattern(&sol.currents, &aperture, &med, &scan).unwrap();
        // distance-compensated comparison is normalization-free on ranks
        let comp: Vec<f64> = pat
            .raw
            .iter()
            .zip(&scan)
            .map(|(v, r)| v * (r.x * r.x + r.y * r.y + r.z * r.z))
            .collect();
        let at_focus = comp[41];
        let better = comp[..41].iter().filter(|&&v| v > at_focus).count();
        // top 5% of a 41-point scan = at most 2 scan points above the focus
        if better > 2 {
            ok = false;
        }
        detail.push(format!("focus {zf} m: {better} scan points above"));
    }

    verdict("05 near-field-focusing", ok, detail.join(", "));
}

// ---------------------------------------------------------------------------
// 06 — exact-kernel designs dominate first-order paraxial designs
// ---------------------------------------------------------------------------

#[test]
fn exact_channel_designs_out_harvest_fresnel_designs() {
    let med = medium();
    let geom = receiver();
    let aperture = Aperture::new(1.5, 0.5, 240, 80).unwrap();
    let pt = 0.003;

    let diag = (1.5f64.powi(2) + 0.5f64.powi(2)).sqrt();
    let fresnel_lower = 0.5 * (diag.powi(3) / LAMBDA).sqrt();

    let distances: Vec<f64> = (0..10).map(|i| 1.0 + 4.5 * i as f64 / 9.0).collect();
    assert!(distances.iter().all(|&d| d < fresnel_lower));

    let mut gaps = Vec::new();
    let mut dominated = true;
    for &d in &distances {
        let user = Point3::new(0.0, 0.0, d);
        let exact = sample_user_channel(&user, &aperture, &med).unwrap();
        let paraxial_samples = aperture
            .samples()
            .iter()
            .map(|s| fresnel_channel(&user, &s.position, &med, FresnelOrder::First))
            .collect::<Result<Vec<_>, _>>()
            .unwrap();
        let paraxial = UserChannel::from_samples(user, paraxial_samples);

        let em = matched_beam(&exact, pt, &aperture, &geom).unwrap();
        let fres = matched_beam(&paraxial, pt, &aperture, &geom).unwrap();
        // both designs are judged through the exact kernel
        let fres_field = radiate_field(&exact, &fres.currents, &aperture).unwrap();
        let p_fres = poynting_power(std::slice::from_ref(&fres_field), &geom);

        if p_fres > em.p_eh * (1.0 + 1e-12) {
            dominated = false;
        }
        gaps.push((em.p_eh - p_fres) / em.p_eh);
    }
    let inversions = gaps.windows(2).filter(|w| w[1] > w[0]).count();

    verdict(
        "06 exact-vs-fresnel",
        dominated && inversions <= 1,
        format!(
            "exact design dominates at all 10 distances below {fresnel_lower:.2} m: {dominated}; relative gap {:.3} → {:.4} with {inversions} inversion(s)",
            gaps.first().unwrap(),
            gaps.last().unwrap()
        ),
    );
}

// ---------------------------------------------------------------------------
// 07 — interior-point subproblem solver vs exhaustive search
// ---------------------------------------------------------------------------

fn subproblem_objective(p: &ConvexSubproblem, x: &DVector<f64>) -> f64 {
    let mut f = p.linear.dot(x);
    for t in &p.quad {
        let v = t.factor.dot(x);
        f += t.weight * v * v;
    }
    f
}

fn subproblem_feasible(p: &ConvexSubproblem, x: &DVector<f64>) -> bool {
    x.norm_squared() <= p.ball_radius_sq
        && p.constraints.iter().all(|c| c.normal.dot(x) >= c.offset)
}

/// Derivative-free reference: a 2000×2000 sweep of the ball's bounding box,
/// then another 2000×2000 sweep of a ±3-cell window around the first
/// incumbent. The refined cell is ~1e-6·r, so the grid minimum certifies
/// the objective to well below the 1e-4 acceptance gate.
fn exhaustive_minimum(p: &ConvexSubproblem, pts: usize) -> f64 {
    let r = p.ball_radius_sq.sqrt();
    let sweep = |lo: [f64; 2], hi: [f64; 2]| -> (f64, [f64; 2]) {
        let mut best = (f64::INFINITY, [f64::NAN; 2]);
        for i in 0..pts {
            let x0 = lo[0] + (hi[0] - lo[0]) * i as f64 / (pts - 1) as f64;
            for j in 0..pts {
                let x1 = lo[1] + (hi[1] - lo[1]) * j as f64 / (pts - 1) as f64;
                let x = DVector::from_column_slice(&[x0, x1]);
                if subproblem_feasible(p, &x) {
                    let f = subproblem_objective(p, &x);
                    if f < best.0 {
                        best = (f, [x0, x1]);
                    }
                }
            }
        }
        best
    };
    let (coarse, centre) = sweep([-r, -r], [r, r]);
    assert!(coarse.is_finite(), "no feasible grid point");
    let w = 3.0 * 2.0 * r / (pts - 1) as f64;
    let (fine, _) = sweep([centre[0] - w, centre[1] - w], [centre[0] + w, centre[1] + w]);
    coarse.min(fine)
}

fn vec2(rng: &mut ChaCha8Rng, s: f64) -> DVector<f64> {
    DVector::from_column_slice(&[rng.gen_range(-s..s), rng.gen_range(-s..s)])
}

fn random_subproblem(seed: u64) -> ConvexSubproblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q1 = vec2(&mut rng, 1.0);
    let q2 = vec2(&mut rng, 1.0);
    let w1 = rng.gen_range(0.05..0.5);
    let w2 = rng.gen_range(0.05..0.5);
    let linear = if seed % 2 == 0 {
        // pull toward an interior target so some optima sit strictly inside
        let target = vec2(&mut rng, 0.5);
        let mut c = DVector::zeros(2);
        c.axpy(-2.0 * w1 * q1.dot(&target), &q1, 1.0);
        c.axpy(-2.0 * w2 * q2.dot(&target), &q2, 1.0);
        c
    } else {
        vec2(&mut rng, 0.1)
    };
    let anchor = vec2(&mut rng, 0.4);
    let constraints = (0..2)
        .map(|_| {
            let normal = vec2(&mut rng, 1.0);
            let offset = normal.dot(&anchor) - rng.gen_range(0.2..0.5);
            AffineConstraint { normal, offset }
        })
        .collect();
    ConvexSubproblem {
        dim: 2,
        quad: vec![QuadTerm { weight: w1, factor: q1 }, QuadTerm { weight: w2, factor: q2 }],
        linear,
        ball_radius_sq: 1.0,
        constraints,
        epigraph: false,
        start: None,
    }
}

#[test]
fn subproblem_solver_matches_exhaustive_search() {
    let opts = SubproblemOptions::default();
    let mut worst_gap = 0.0f64;
    let mut worst_kkt = 0.0f64;
    let mut bitwise = true;
    for seed in 0..25u64 {
        let p = random_subproblem(seed);
        let cert = solve_subproblem(&p, &opts).unwrap();
        assert_eq!(
            cert.status,
            holobeam_core::SolveStatus::Optimal,
            "instance {seed} did not reach optimality"
        );
        worst_kkt = worst_kkt
            .max(cert.stationarity)
            .max(cert.complementarity)
            .max(cert.primal_residual);

        let reference = exhaustive_minimum(&p, 2000);
        worst_gap = worst_gap.max((cert.objective - reference).abs());

        let again = solve_subproblem(&p, &opts).unwrap();
        if again.objective.to_bits() != cert.objective.to_bits()
            || again.x.iter().zip(cert.x.iter()).any(|(a, b)| a.to_bits() != b.to_bits())
        {
            bitwise = false;
        }
    }

    verdict(
        "07 subproblem-vs-grid",
        worst_gap <= 1e-4 && worst_kkt <= 1e-6 && bitwise,
        format!(
            "25 instances: worst |solver − grid| {worst_gap:.2e}, worst KKT residual {worst_kkt:.2e}, bitwise deterministic: {bitwise}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 08 — the MMSE receiver certifies the achievable rate
// ---------------------------------------------------------------------------

#[test]
fn mmse_receivers_certify_the_rate() {
    let sc = desk_scenario(0.01, 1e-3);
    let channels = sc.channels().unwrap();
    let n_flat = 3 * sc.basis.mode_count();
    let streams = sc.du_positions.len() + sc.eu_positions.len();

    let mut worst = 0.0f64;
    for state in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(state);
        let weights: Vec<DVector<Complex64>> =
            (0..streams).map(|_| random_flat(&mut rng, n_flat)).collect();
        for (k, du) in channels.du_modes.iter().enumerate() {
            let fields: Vec<Vector3<Complex64>> =
                weights.iter().map(|w| field_from_flat(du.omega(), w)).collect();
            let psi = mmse_combiner(&fields, k, NOISE_VAR).unwrap();
            let mse = mse_with_combiner(&fields, &psi, k, NOISE_VAR);
            let (s, i, n) = sinr_parts(&fields, &psi, k, NOISE_VAR);
            let rate = rate_bits(s, i, n);
            worst = worst.max(((1.0 / mse).log2() - rate).abs());
        }
    }

    verdict(
        "08 rate-mse-duality",
        worst <= 1e-8,
        format!("worst |log2(1/MSE) − rate| over 10 random states × 2 users: {worst:.2e} bits"),
    );
}

// ---------------------------------------------------------------------------
// 09 — block-coordinate descent never regresses its surrogate objective
// ---------------------------------------------------------------------------

#[test]
fn block_updates_never_regress() {
    // pick a floor the desk configuration can really deliver — half its
    // measured max-min harvest level — then force a long run so the audit
    // covers many block transitions, not just the quick converged head
    let opts = BcdOptions::default();
    let circuit = EhCircuit::reference();
    let free = solve_scenario(&desk_scenario(0.01, 0.0), &opts).unwrap();
    let gamma = free.gamma_star.unwrap();
    let geom = desk_scenario(0.01, 0.0).receiver_geometry();
    let rf_scale = geom.a_r * geom.phi.cos() / (2.0 * geom.z);
    let p0 = eh_output(0.5 * rf_scale * gamma, &circuit).unwrap();

    let sc = desk_scenario(0.01, p0);
    let long = BcdOptions { outer_tol: 1e-9, outer_max: 40, ..opts };
    let report = solve_scenario(&sc, &long).unwrap();
    assert_ne!(report.status, RunStatus::Infeasible);

    // re-derive the audit from the recorded history (no rebuilds requested,
    // so every transition must descend)
    let mut external_max = 0.0f64;
    for pair in report.r_eq_history.windows(2) {
        external_max = external_max.max(pair[1].value - pair[0].value);
    }

    let rebuilt = solve_scenario(
        &sc,
        &BcdOptions { rebuild_maxmin_each_outer: true, ..opts },
    )
    .unwrap();

    verdict(
        "09 descent-monotonicity",
        report.audit.ok
            && external_max <= 1e-6
            && rebuilt.audit.ok
            && !rebuilt.audit.step5_jumps.is_empty(),
        format!(
            "worst inter-block rise {external_max:.2e} over {} entries ({} outer iterations); rebuild variant stays monotone off-boundary with {} recorded boundary jumps",
            report.r_eq_history.len(),
            report.iterations,
            rebuilt.audit.step5_jumps.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 10 — returned solutions respect the constraints; impossible floors are
//      reported, not crashed on
// ---------------------------------------------------------------------------

#[test]
fn constraints_hold_and_impossible_floors_are_reported() {
    let opts = BcdOptions::default();
    let circuit = EhCircuit::reference();
    let free = solve_scenario(&desk_scenario(0.01, 0.0), &opts).unwrap();
    let gamma = free.gamma_star.expect("max-min harvest level must be reported");
    let geom = desk_scenario(0.01, 0.0).receiver_geometry();
    let rf_scale = geom.a_r * geom.phi.cos() / (2.0 * geom.z);

    let sc = desk_scenario(0.01, eh_output(0.5 * rf_scale * gamma, &circuit).unwrap());
    let report = solve_scenario(&sc, &opts).unwrap();
    assert_ne!(report.status, RunStatus::Infeasible);

    let power_ok = report.power_used <= sc.pt * (1.0 + 1e-8);
    let floor = report.p0_threshold.expect("active floor must be reported");
    let floor_ok = report
        .eu_constraint_value
        .iter()
        .all(|&v| v >= floor * (1.0 - 1e-6));

    // impossible demands must come back as status reports, not crashes:
    // double the measured max-min reach, and a 1 mW ask that the 121-mode
    // configuration cannot deliver to this receiver (its dominant spatial
    // frequency falls outside the truncated mode window)
    let p0_bad = eh_output(2.0 * rf_scale * gamma, &circuit).unwrap();
    let impossible = solve_scenario(&desk_scenario(0.01, p0_bad), &opts).unwrap();
    let impossible_mw = solve_scenario(&desk_scenario(0.01, 1e-3), &opts).unwrap();

    verdict(
        "10 feasibility-and-graceful-infeasible",
        power_ok
            && floor_ok
            && impossible.status == RunStatus::Infeasible
            && !impossible.warnings.is_empty()
            && impossible_mw.status == RunStatus::Infeasible,
        format!(
            "power {:.9e} ≤ budget {:.0e}, worst floor margin {:.3e} (floor {floor:.4e}); doubled-demand run: {:?} with {} warning(s); 1 mW ask: {:?}",
            report.power_used,
            sc.pt,
            report
                .eu_constraint_value
                .iter()
                .map(|&v| v / floor - 1.0)
                .fold(f64::INFINITY, f64::min),
            impossible.status,
            impossible.warnings.len(),
            impossible_mw.status
        ),
    );
}

// ---------------------------------------------------------------------------
// 11 — rates move the right way along power, floor, and area sweeps, and
//      the continuous-aperture scheme dominates the baselines throughout
// ---------------------------------------------------------------------------

struct SweepPoint {
    label: String,
    h: f64,
    fd: f64,
    mf: f64,
    upper: f64,
}

fn run_point(sc: &Scenario, fd_grid: (usize, usize)) -> SweepPoint {
    let opts = BcdOptions::default();
    let h = solve_scenario(sc, &opts).unwrap();
    assert_ne!(h.status, RunStatus::Infeasible, "sweep point must be feasible");
    let fd = fd_solve(sc, fd_grid, true, &opts).unwrap();
    assert_ne!(fd.status, RunStatus::Infeasible, "discrete baseline must be feasible");
    let channels = sc.channels().unwrap();
    let mf = mf_solve(sc, &channels, false).unwrap();
    SweepPoint {
        label: String::new(),
        h: h.r_sum_bits,
        fd: fd.r_sum_bits,
        mf: mf.r_sum_bits,
        upper: upper_bound_rate(&h),
    }
}

fn dominance_holds(p: &SweepPoint) -> bool {
    p.h >= p.fd && p.fd >= 0.0 && p.h >= p.mf && p.upper >= p.h
}

#[test]
fn sweeps_trend_correctly_and_dominate_baselines() {
    let fd_grid = (128usize, 128usize);
    let opts = BcdOptions::default();
    let circuit = EhCircuit::reference();

    // measure what each scheme can actually deliver before choosing sweep
    // values, so every point below is genuinely feasible for both
    let free = solve_scenario(&desk_scenario(0.01, 0.0), &opts).unwrap();
    let free_fd = fd_solve(&desk_scenario(0.01, 0.0), fd_grid, true, &opts).unwrap();
    let gamma = free
        .gamma_star
        .unwrap()
        .min(free_fd.gamma_star.unwrap());
    let geom = desk_scenario(0.01, 0.0).receiver_geometry();
    let rf_scale = geom.a_r * geom.phi.cos() / (2.0 * geom.z);

    let mut failures = Vec::new();
    let mut points = Vec::new();

    // transmit-power sweep: geometric grid around the desk default, with a
    // floor sized from the softest scheme's reach at the smallest budget so
    // every point is feasible for both schemes
    let pt_grid = [0.0025, 0.005, 0.01, 0.02, 0.04];
    let p0_pt = eh_output(0.2 * rf_scale * gamma * (pt_grid[0] / 0.01), &circuit).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for &pt in &pt_grid {
        let mut p = run_point(&desk_scenario(pt, p0_pt), fd_grid);
        p.label = format!("pt={pt:.2e}");
        if p.h < prev - 1e-6 {
            failures.push(format!("rate fell along the power sweep at {}", p.label));
        }
        prev = p.h;
        if !dominance_holds(&p) {
            failures.push(format!("dominance broken at {}", p.label));
        }
        points.push(p);
    }

    // floor sweep as fractions of the softest scheme's max-min reach at the
    // default budget
    let mut prev = f64::INFINITY;
    for frac in [0.05, 0.2, 0.35, 0.5] {
        let p0 = eh_output(frac * rf_scale * gamma, &circuit).unwrap();
        let mut p = run_point(&desk_scenario(0.01, p0), fd_grid);
        p.label = format!("p0={p0:.2e}");
        if p.h > prev + 1e-6 {
            failures.push(format!("rate rose along the floor sweep at {}", p.label));
        }
        prev = p.h;
        if !dominance_holds(&p) {
            failures.push(format!("dominance broken at {}", p.label));
        }
        points.push(p);
    }

    // area sweep with the default per-size basis; the floor is set from the
    // smallest aperture's reach so all three points stay feasible
    let small_free = solve_scenario(&sized_scenario(0.15, None, 0.01, 0.0), &opts).unwrap();
    let small_free_fd =
        fd_solve(&sized_scenario(0.15, None, 0.01, 0.0), fd_grid, true, &opts).unwrap();
    let gamma_small = small_free
        .gamma_star
        .unwrap()
        .min(small_free_fd.gamma_star.unwrap());
    let p0_area = eh_output(0.2 * rf_scale * gamma_small, &circuit).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for side in [0.15, 0.3, 0.45] {
        let mut p = run_point(&sized_scenario(side, None, 0.01, p0_area), fd_grid);
        p.label = format!("area={:.4}", side * side);
        if p.h < prev - 1e-6 {
            failures.push(format!("rate fell along the area sweep at {}", p.label));
        }
        prev = p.h;
        if !dominance_holds(&p) {
            failures.push(format!("dominance broken at {}", p.label));
        }
        points.push(p);
    }

    let summary = points
        .iter()
        .map(|p| format!("{}: h={:.2} fd={:.2} mf={:.2} ub={:.2}", p.label, p.h, p.fd, p.mf, p.upper))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(
        "11 trend-suite",
        failures.is_empty(),
        if failures.is_empty() { summary } else { failures.join("; ") },
    );
}

// ---------------------------------------------------------------------------
// 12 — growing the aperture separates co-angle users
// ---------------------------------------------------------------------------

#[test]
fn longer_apertures_decorrelate_distinct_users() {
    let med = medium();
    let u1 = Point3::new(3.0, 0.0, 1.0);
    let u2 = Point3::new(5.0, 0.0, 2.0);
    let metric = |c: f64| {
        let n = ((c / LAMBDA) * 8.0).ceil() as usize;
        correlation_metric(c, &u1, &u2, &med, n.max(64)).unwrap()
    };
    let short = metric(10.0 * LAMBDA);
    let long = metric(100.0 * LAMBDA);

    verdict(
        "12 spatial-orthogonality",
        long <= short / 3.0,
        format!(
            "correlation {short:.3e} at 10λ vs {long:.3e} at 100λ (ratio {:.3} ≤ 1/3)",
            long / short
        ),
    );
}

// ---------------------------------------------------------------------------
// 13 — mirrored energy users start from an equal-harvest seed
// ---------------------------------------------------------------------------

#[test]
fn mirror_energy_users_harvest_equally_from_the_seed() {
    let med = medium();
    let aperture = Aperture::new(0.3, 0.3, 32, 32).unwrap();
    let basis = make_basis(0.3, 0.3, LAMBDA, None).unwrap();
    let pt = 0.01;

    let eu_modes: Vec<_> = [Point3::new(1.0, 1.0, 1.0), Point3::new(-1.0, 1.0, 1.0)]
        .iter()
        .map(|p| {
            let ch = sample_user_channel(p, &aperture, &med).unwrap();
            channel_transform(&ch, &basis, &aperture).unwrap()
        })
        .collect();

    let (beams, psis, gains) = equal_harvest_seed(&eu_modes, pt).unwrap();
    let total: f64 = beams.iter().map(|w| w.norm_squared()).sum();

    let harvest: Vec<f64> = eu_modes
        .iter()
        .zip(&psis)
        .map(|(om, psi)| {
            let h = effective_vector(om, psi);
            beams.iter().map(|w| h.dotc(w).norm_sqr()).sum::<f64>()
        })
        .collect();
    let harvest_dev = (harvest[0] - harvest[1]).abs() / harvest[0].max(harvest[1]);
    let power_dev = (total - pt).abs() / pt;
    let gain_dev = (gains[0] - gains[1]).abs() / gains[0].max(gains[1]);

    verdict(
        "13 mirror-symmetry-seed",
        harvest_dev <= 1e-6 && power_dev <= 1e-8,
        format!(
            "per-user harvest mismatch {harvest_dev:.2e} rel, total power off budget by {power_dev:.2e} rel, matched gains differ {gain_dev:.2e}"
        ),
    );
}

// keep the lift helpers honest in the shipped build, not only in unit tests
#[test]
fn complex_lifting_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let w = random_flat(&mut rng, 7);
    let h = random_flat(&mut rng, 7);
    let x = lift::real_from_complex(&w);
    let (a, b) = lift::real_pair(&h);
    let ip = h.dotc(&w);
    assert!((a.dot(&x) - ip.re).abs() <= 1e-12);
    assert!((b.dot(&x) - ip.im).abs() <= 1e-12);
    assert_eq!(lift::complex_from_real(&x), w);
}
