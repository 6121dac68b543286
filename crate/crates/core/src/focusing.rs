//! Closed-form single-receiver beam focusing and beam-pattern evaluation.
//!
//! For one harvesting receiver the optimal transmit current under the power
//! budget P_t is matched filtering: θ(s) = μ·Gᴴ(s)ψ, where ψ is the
//! principal eigenvector of the 3×3 channel Gram A = ∫G(s)Gᴴ(s)ds and μ
//! normalizes the power. The intercepted RF power then takes the closed
//! form (A_R cosφ/2Z)·P_t·λ_max(A) — the Cauchy–Schwarz optimum; no other
//! equal-power current delivers more.
//!
//! Beam patterns sample ‖∫G(r,s)θ(s)ds‖² over spatial grids, optionally
//! compensated by the center-referenced path loss ‖r‖² and normalized so
//! the map maximum is exactly 1 (the form the focusing studies plot).

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::energy::{poynting_power, ReceiverGeometry};
use crate::error::{Error, Result};
use crate::geometry::{dyadic_green, radiate_field, Aperture, MediumParams, Point3, UserChannel};
use crate::linalg::hermitian_eigen_3x3;

/// Aperture-integrated channel Gram A = Σ_m weight_m·G_m·G_mᴴ (3×3
/// Hermitian PSD). Its spectrum fixes both the optimal combiner and the
/// best achievable single-receiver power transfer.
pub fn channel_gram(channel: &UserChannel, aperture: &Aperture) -> Result<Matrix3<Complex64>> {
    if channel.sample_count() != aperture.sample_count() {
        return Err(Error::InvalidArgument(
            "channel was sampled on a different grid".into(),
        ));
    }
    let mut acc = Matrix3::<Complex64>::zeros();
    for (g, s) in channel.samples().iter().zip(aperture.samples()) {
        acc += (g * g.adjoint()).map(|v| v * Complex64::from(s.weight));
    }
    Ok(acc)
}

/// Deterministic global-phase convention: rotate so the first component of
/// largest magnitude is real and non-negative.
fn fix_phase(v: &Vector3<Complex64>) -> Vector3<Complex64> {
    let mut best = 0usize;
    for i in 1..3 {
        if v[i].norm() > v[best].norm() {
            best = i;
        }
    }
    let n = v[best].norm();
    if n == 0.0 {
        return *v;
    }
    let rot = v[best].conj() / Complex64::from(n);
    v.map(|c| c * rot)
}

/// Optimal receive combiner for one user: the principal unit eigenvector of
/// the channel Gram, with the phase convention of [`fix_phase`]. Also
/// returns λ_max, the matched-beam power-transfer coefficient.
pub fn optimal_eu_combiner(
    channel: &UserChannel,
    aperture: &Aperture,
) -> Result<(Vector3<Complex64>, f64)> {
    let a = channel_gram(channel, aperture)?;
    principal_combiner(&a)
}

/// The combiner/eigenvalue pair from an already-formed channel Gram.
pub fn principal_combiner(gram: &Matrix3<Complex64>) -> Result<(Vector3<Complex64>, f64)> {
    let trace: f64 = (0..3).map(|i| gram[(i, i)].re).sum();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::DegenerateChannel(format!(
            "channel Gram trace {trace:.3e} is not positive"
        )));
    }
    let (vals, vecs) = hermitian_eigen_3x3(gram);
    let psi = fix_phase(&vecs.column(0).into_owned());
    Ok((psi, vals[0]))
}

/// A matched-filter focusing solution: combiner, normalization, current
/// samples, the received field, and the intercepted RF power.
#[derive(Debug, Clone)]
pub struct FocusSolution {
    /// Unit receive combiner ψ.
    pub combiner: Vector3<Complex64>,
    /// Power normalization μ in θ(s) = μ·Gᴴ(s)ψ.
    pub mu: f64,
    /// θ at the aperture samples (grid order).
    pub currents: Vec<Vector3<Complex64>>,
    /// Received field e = ∫G θ ds at the focus.
    pub field: Vector3<Complex64>,
    /// Intercepted RF power at the receiver, watts (pre-rectifier).
    pub p_eh: f64,
}

/// Matched beam for a *given* combiner: θ(s) = μGᴴ(s)ψ with
/// μ = √(P_t/∫‖Gᴴψ‖²), so the transmit power is exactly P_t on the
/// quadrature grid. Callers wanting the optimum pass the principal
/// combiner; baselines pass fixed polarizations.
pub fn matched_beam_for(
    channel: &UserChannel,
    psi: &Vector3<Complex64>,
    p_t: f64,
    aperture: &Aperture,
    geom: &ReceiverGeometry,
) -> Result<FocusSolution> {
    if !(p_t > 0.0) {
        return Err(Error::InvalidArgument("transmit power must be positive".into()));
    }
    if channel.sample_count() != aperture.sample_count() {
        return Err(Error::InvalidArgument(
            "channel was sampled on a different grid".into(),
        ));
    }
    let raw: Vec<Vector3<Complex64>> = channel
        .samples()
        .iter()
        .map(|g| g.adjoint() * psi)
        .collect();
    let denom: f64 = raw
        .iter()
        .zip(aperture.samples())
        .map(|(j, s)| s.weight * j.norm_squared())
        .sum();
    if !(denom > 0.0) {
        return Err(Error::DegenerateChannel(
            "matched current has zero power; channel is degenerate for this combiner".into(),
        ));
    }
    let mu = (p_t / denom).sqrt();
    let currents: Vec<Vector3<Complex64>> = raw
        .into_iter()
        .map(|j| j.map(|v| v * Complex64::from(mu)))
        .collect();
    let field = radiate_field(channel, &currents, aperture)?;
    let p_eh = poynting_power(std::slice::from_ref(&field), geom);
    Ok(FocusSolution {
        combiner: *psi,
        mu,
        currents,
        field,
        p_eh,
    })
}

/// Optimal single-receiver beam: matched filtering against the principal
/// combiner. The intercepted power equals (A_R cosφ/2Z)·P_t·λ_max(A).
pub fn matched_beam(
    channel: &UserChannel,
    p_t: f64,
    aperture: &Aperture,
    geom: &ReceiverGeometry,
) -> Result<FocusSolution> {
    let (psi, _) = optimal_eu_combiner(channel, aperture)?;
    matched_beam_for(channel, &psi, p_t, aperture, geom)
}

/// Raw and path-loss-compensated beam-pattern values over a scan grid, in
/// scan order.
#[derive(Debug, Clone)]
pub struct BeamPattern {
    /// ‖∫G(r,s)θ(s)ds‖² per scan point.
    pub raw: Vec<f64>,
    /// raw·‖r‖², normalized so the maximum over the scan is exactly 1.
    pub compensated: Vec<f64>,
}

/// Which beam-pattern normalization a scan consumer wants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternNormalization {
    Raw,
    PathlossCompensated,
}

/// Evaluate the radiated power pattern of a current distribution over scan
/// points. Path-loss compensation multiplies by the squared distance to the
/// aperture center, then scales the whole map by its maximum. Scan points
/// inside the λ/100 guard of any aperture sample fail with
/// [`Error::SingularGeometry`].
pub fn beam_pattern(
    currents: &[Vector3<Complex64>],
    aperture: &Aperture,
    medium: &MediumParams,
    scan: &[Point3],
) -> Result<BeamPattern> {
    if currents.len() != aperture.sample_count() {
        return Err(Error::InvalidArgument(
            "current samples do not match the aperture grid".into(),
        ));
    }
    let raw: Result<Vec<f64>> = scan
        .par_iter()
        .map(|r| {
            let mut acc = Vector3::<Complex64>::zeros();
            for (s, j) in aperture.samples().iter().zip(currents) {
                let g = dyadic_green(r, &s.position, medium)?;
                acc += (g * j).map(|v| v * Complex64::from(s.weight));
            }
            Ok(acc.norm_squared())
        })
        .collect();
    let raw = raw?;
    let centre = aperture.centre();
    let mut compensated: Vec<f64> = raw
        .iter()
        .zip(scan)
        .map(|(v, r)| v * r.sub(centre).norm_squared())
        .collect();
    let max = compensated.iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        for v in &mut compensated {
            *v /= max;
        }
    }
    Ok(BeamPattern { raw, compensated })
}

/// Single-normalization convenience wrapper over [`beam_pattern`].
pub fn beam_pattern_scan(
    currents: &[Vector3<Complex64>],
    aperture: &Aperture,
    medium: &MediumParams,
    scan: &[Point3],
    normalization: PatternNormalization,
) -> Result<Vec<f64>> {
    let p = beam_pattern(currents, aperture, medium, scan)?;
    Ok(match normalization {
        PatternNormalization::Raw => p.raw,
        PatternNormalization::PathlossCompensated => p.compensated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::ReceiverGeometry;
    use crate::geometry::{current_power, sample_user_channel, Z0_FREE_SPACE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn medium_30mm() -> MediumParams {
        MediumParams::from_wavelength(0.03, Z0_FREE_SPACE, 25.0).unwrap()
    }

    fn geom_normal() -> ReceiverGeometry {
        ReceiverGeometry::from_wavelength(0.03, 0.0, 25.0).unwrap()
    }

    #[test]
    fn combiner_of_synthetic_diagonal_gram() {
        // one-sample aperture with weight 1 makes the Gram equal G·Gᴴ
        let ap = Aperture::new(1.0, 1.0, 1, 1).unwrap();
        let g = Matrix3::from_diagonal(&Vector3::new(
            Complex64::from(2.0f64.sqrt()),
            Complex64::from(1.0),
            Complex64::from(0.0),
        ));
        let ch = UserChannel::from_samples(Point3::new(0.0, 0.0, 1.0), vec![g]);
        let a = channel_gram(&ch, &ap).unwrap();
        assert!((a[(0, 0)].re - 2.0).abs() < 1e-15);
        let (psi, lmax) = optimal_eu_combiner(&ch, &ap).unwrap();
        assert!((lmax - 2.0).abs() < 1e-12);
        assert!((psi - Vector3::new(Complex64::from(1.0), Complex64::from(0.0), Complex64::from(0.0))).norm() < 1e-12);
    }

    #[test]
    fn combiner_dominates_random_directions_and_is_deterministic() {
        let medium = medium_30mm();
        let ap = Aperture::new(0.3, 0.3, 24, 24).unwrap();
        let ch = sample_user_channel(&Point3::new(1.0, 1.0, 1.0), &ap, &medium).unwrap();
        let a = channel_gram(&ch, &ap).unwrap();
        let (psi, lmax) = optimal_eu_combiner(&ch, &ap).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let quad = (psi.adjoint() * a * psi)[(0, 0)].re;
        assert!((quad - lmax).abs() < 1e-9 * lmax);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let mut v = Vector3::new(
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            );
            v /= Complex64::from(v.norm());
            let r = (v.adjoint() * a * v)[(0, 0)].re;
            assert!(r <= lmax * (1.0 + 1e-10), "Rayleigh quotient exceeded λ_max");
        }

        let (psi2, lmax2) = optimal_eu_combiner(&ch, &ap).unwrap();
        assert_eq!(psi, psi2);
        assert_eq!(lmax, lmax2);
    }

    /// A broadside user sees only the transverse part of the radiating
    /// term, so the optimal polarization lies in the aperture plane.
    #[test]
    fn broadside_combiner_is_transverse() {
        let medium = medium_30mm();
        let ap = Aperture::new(0.3, 0.3, 24, 24).unwrap();
        let ch = sample_user_channel(&Point3::new(0.0, 0.0, 30.0), &ap, &medium).unwrap();
        let (psi, _) = optimal_eu_combiner(&ch, &ap).unwrap();
        assert!(psi[2].norm() < 1e-3, "z-component {:.3e}", psi[2].norm());
    }

    #[test]
    fn matched_beam_hits_the_closed_form() {
        let medium = medium_30mm();
        let ap = Aperture::new(0.3, 0.3, 24, 24).unwrap();
        let geom = geom_normal();
        let ch = sample_user_channel(&Point3::new(0.5, -0.2, 2.0), &ap, &medium).unwrap();
        let p_t = 0.01;
        let sol = matched_beam(&ch, p_t, &ap, &geom).unwrap();

        assert!((current_power(&sol.currents, &ap).unwrap() - p_t).abs() < 1e-10 * p_t);
        let (_, lmax) = optimal_eu_combiner(&ch, &ap).unwrap();
        let closed = geom.a_r * geom.phi.cos() / (2.0 * geom.z) * p_t * lmax;
        assert!(
            (sol.p_eh - closed).abs() < 1e-6 * closed,
            "closed form {closed:.6e} vs quadrature {:.6e}",
            sol.p_eh
        );

        // quadratic power scaling, linear field scaling
        let sol4 = matched_beam(&ch, 4.0 * p_t, &ap, &geom).unwrap();
        assert!((sol4.p_eh - 4.0 * sol.p_eh).abs() < 1e-9 * sol4.p_eh);
        assert!((sol4.field - sol.field.map(|v| v * Complex64::from(2.0))).norm() < 1e-9 * sol4.field.norm());
    }

    #[test]
    fn matched_beam_beats_random_equal_power_beams() {
        let medium = medium_30mm();
        let ap = Aperture::new(0.3, 0.3, 16, 16).unwrap();
        let geom = geom_normal();
        let ch = sample_user_channel(&Point3::new(1.0, 1.0, 1.0), &ap, &medium).unwrap();
        let p_t = 0.01;
        let best = matched_beam(&ch, p_t, &ap, &geom).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..25 {
            let mut currents: Vec<Vector3<Complex64>> = (0..ap.sample_count())
                .map(|_| {
                    Vector3::new(
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    )
                })
                .collect();
            let p = current_power(&currents, &ap).unwrap();
            let scale = Complex64::from((p_t / p).sqrt());
            for c in &mut currents {
                *c = c.map(|v| v * scale);
            }
            let field = radiate_field(&ch, &currents, &ap).unwrap();
            let p_rand = poynting_power(&[field], &geom);
            assert!(
                p_rand <= best.p_eh * (1.0 + 1e-10),
                "random beam beat the matched optimum: {p_rand:.6e} vs {:.6e}",
                best.p_eh
            );
        }
    }

    #[test]
    fn pattern_normalization_and_guards() {
        let medium = medium_30mm();
        let ap = Aperture::new(0.3, 0.3, 12, 12).unwrap();
        let geom = geom_normal();
        let focus = Point3::new(0.0, 0.0, 3.0);
        let ch = sample_user_channel(&focus, &ap, &medium).unwrap();
        let sol = matched_beam(&ch, 0.01, &ap, &geom).unwrap();

        let scan: Vec<Point3> = (1..=15).map(|i| Point3::new(0.0, 0.0, i as f64)).collect();
        let p = beam_pattern(&sol.currents, &ap, &medium, &scan).unwrap();
        assert_eq!(p.raw.len(), scan.len());
        let max = p.compensated.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, 1.0, "compensated maximum must be exactly 1");
        // the compensated peak sits at (or next to) the focus
        let peak_idx = p
            .compensated
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((scan[peak_idx].z - focus.z).abs() <= 1.0, "peak at {:?}", scan[peak_idx]);

        let raw_only =
            beam_pattern_scan(&sol.currents, &ap, &medium, &scan, PatternNormalization::Raw).unwrap();
        assert_eq!(raw_only, p.raw);

        // scanning onto a quadrature node trips the singularity guard
        let bad = [ap.samples()[0].position];
        assert!(matches!(
            beam_pattern(&sol.currents, &ap, &medium, &bad),
            Err(Error::SingularGeometry { .. })
        ));
    }
}
