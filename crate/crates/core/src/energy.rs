//! Receive-side power accounting and the nonlinear energy-harvesting
//! rectifier.
//!
//! A harvester with effective area A_R (one wavelength-scale antenna,
//! A_R = λ²/4π) intercepts RF power proportional to the squared field
//! magnitudes at its location (time-averaged Poynting flux through the
//! tilted surface). The rectifier then maps intercepted RF power to DC with
//! a saturating logistic curve Ξ calibrated so that Ξ(0) = 0 exactly:
//!
//! ```text
//! Ξ(P) = M/(X·(1+e^{−a(P−b)})) − Y,   X = e^{ab}/(1+e^{ab}),  Y = M/e^{ab}.
//! ```
//!
//! Ξ is strictly increasing with range [0, M), so harvest requirements
//! P_dc ≥ P0 < M translate into RF-power thresholds through the closed-form
//! inverse, and further into thresholds on squared projected field norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectifier transfer curve parameters with the calibration constants
/// precomputed at construction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EhCircuit {
    /// Saturation DC power in watts.
    pub m: f64,
    /// Logistic steepness in 1/W.
    pub a: f64,
    /// Logistic midpoint in W.
    pub b: f64,
    x: f64,
    y: f64,
}

impl EhCircuit {
    pub fn new(m: f64, a: f64, b: f64) -> Result<Self> {
        if !(m > 0.0) || !(a > 0.0) || !(b >= 0.0) {
            return Err(Error::InvalidArgument(
                "rectifier needs M, a > 0 and b ≥ 0".into(),
            ));
        }
        let eab = (a * b).exp();
        Ok(Self {
            m,
            a,
            b,
            x: eab / (1.0 + eab),
            y: m / eab,
        })
    }

    /// The 10 GHz harvester curve used throughout the studies:
    /// a = 1500 /W, b = 2.2 mW, M = 3.9 mW.
    pub fn reference() -> Self {
        Self::new(3.9e-3, 1500.0, 2.2e-3).expect("constants are valid")
    }
}

/// Geometry and load of one harvesting receiver.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReceiverGeometry {
    /// Effective receive area in m².
    pub a_r: f64,
    /// Incidence angle between the Poynting vector and the surface normal.
    pub phi: f64,
    /// Harvester wave impedance in ohms.
    pub z: f64,
}

impl ReceiverGeometry {
    pub fn new(a_r: f64, phi: f64, z: f64) -> Result<Self> {
        if !(a_r > 0.0) || !(z > 0.0) {
            return Err(Error::InvalidArgument(
                "receive area and impedance must be positive".into(),
            ));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&phi) {
            return Err(Error::InvalidArgument(
                "incidence angle must lie in [0, π/2]".into(),
            ));
        }
        Ok(Self { a_r, phi, z })
    }

    /// Single-antenna effective area A_R = λ²/4π at normal incidence.
    pub fn from_wavelength(lambda: f64, phi: f64, z: f64) -> Result<Self> {
        Self::new(lambda * lambda / (4.0 * std::f64::consts::PI), phi, z)
    }
}

/// RF power intercepted by the receiver from a set of per-stream fields:
/// (A_R·cosφ / 2Z)·Σ_j ‖e_j‖². Streams are uncorrelated, so their fluxes
/// add.
pub fn poynting_power(fields: &[nalgebra::Vector3<num_complex::Complex64>], geom: &ReceiverGeometry) -> f64 {
    geom.a_r * geom.phi.cos() / (2.0 * geom.z)
        * fields.iter().map(|e| e.norm_squared()).sum::<f64>()
}

/// DC output Ξ(P) of the rectifier for intercepted RF power P.
pub fn eh_output(p: f64, circuit: &EhCircuit) -> Result<f64> {
    if p < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "RF power must be non-negative, got {p:.3e} W"
        )));
    }
    Ok(circuit.m / (circuit.x * (1.0 + (-circuit.a * (p - circuit.b)).exp())) - circuit.y)
}

/// The unique RF power P with Ξ(P) = P0, by the closed form
/// P = b − (1/a)·ln(M/(X(P0+Y)) − 1). Defined for P0 ∈ [0, M).
pub fn eh_inverse(p0: f64, circuit: &EhCircuit) -> Result<f64> {
    if p0 < 0.0 {
        return Err(Error::InvalidArgument(
            "DC requirement must be non-negative".into(),
        ));
    }
    if p0 >= circuit.m {
        return Err(Error::InfeasibleRequirement(format!(
            "requested {:.3e} W DC but the rectifier saturates at {:.3e} W",
            p0, circuit.m
        )));
    }
    Ok(circuit.b - (circuit.m / (circuit.x * (p0 + circuit.y)) - 1.0).ln() / circuit.a)
}

/// Threshold on the summed squared projected field norms Σ_j|ψᴴe_j|² that
/// makes the intercepted power reach Ξ⁻¹(P0):
///
/// ```text
/// P0' = (2Z / (A_R cosφ)) · Ξ⁻¹(P0),
/// ```
///
/// the exact inversion of [`poynting_power`] (so meeting the threshold is
/// equivalent to harvesting P0 DC). Grazing incidence (cosφ = 0) intercepts
/// nothing and is rejected.
pub fn eh_threshold(p0: f64, geom: &ReceiverGeometry, circuit: &EhCircuit) -> Result<f64> {
    // cos(π/2) rounds to ~6e-17 rather than 0 in f64, so gate on the angle
    if geom.phi >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::InfeasibleRequirement(
            "grazing incidence: no power crosses the receive surface".into(),
        ));
    }
    Ok(2.0 * geom.z / (geom.a_r * geom.phi.cos()) * eh_inverse(p0, circuit)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use num_complex::Complex64;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn rectifier_calibration_forces_zero_at_zero() {
        let c = EhCircuit::reference();
        assert!(eh_output(0.0, &c).unwrap().abs() < 1e-12);
        // 40-digit reference values for the calibration constants
        assert!(rel_err(c.x, 0.9644288107273638) < 1e-14);
        assert!(rel_err(c.y, 1.438443528648360e-4) < 1e-14);
    }

    #[test]
    fn rectifier_matches_high_precision_samples() {
        let c = EhCircuit::reference();
        // Ξ at the logistic midpoint and at 1 mW, 40-digit references
        assert!(rel_err(eh_output(2.2e-3, &c).unwrap(), 1.878077823567582e-3) < 1e-12);
        assert!(rel_err(eh_output(1.0e-3, &c).unwrap(), 4.297792748808649e-4) < 1e-12);
    }

    #[test]
    fn rectifier_saturates_and_increases_strictly() {
        let c = EhCircuit::reference();
        assert!(rel_err(eh_output(2.2, &c).unwrap(), c.m) < 1e-3);
        // Strict growth over the live range; past ~5b the curve is within
        // one ulp of M and equality is allowed to within rounding.
        let mut prev = -1.0;
        for i in 0..=1000 {
            let p = 5.0 * c.b * i as f64 / 1000.0;
            let v = eh_output(p, &c).unwrap();
            assert!(v > prev, "Ξ not strictly increasing at P = {p:.4e}");
            prev = v;
        }
        assert!(prev < c.m);
        assert!(eh_output(-1e-9, &c).is_err());
    }

    #[test]
    fn inverse_round_trips_and_respects_saturation() {
        let c = EhCircuit::reference();
        assert!(eh_inverse(0.0, &c).unwrap().abs() < 1e-15);
        // 40-digit references for the closed form
        assert!(rel_err(eh_inverse(1.0e-4, &c).unwrap(), 3.691825186268240e-4) < 1e-12);
        assert!(rel_err(eh_inverse(1.0e-3, &c).unwrap(), 1.579789394347167e-3) < 1e-12);
        assert!(rel_err(eh_inverse(3.0e-3, &c).unwrap(), 3.033871255275381e-3) < 1e-12);
        for p0 in [1e-5, 1e-4, 1e-3, 3e-3, 3.89e-3] {
            let p = eh_inverse(p0, &c).unwrap();
            assert!(rel_err(eh_output(p, &c).unwrap(), p0) < 1e-9);
        }
        assert!(matches!(
            eh_inverse(c.m, &c),
            Err(Error::InfeasibleRequirement(_))
        ));
        assert!(eh_inverse(c.m * 1.5, &c).is_err());
    }

    #[test]
    fn poynting_power_matches_reference_and_is_quadratic() {
        // λ = 0.03 m → A_R = 7.161972439135290e-5 m² (40-digit reference)
        let geom = ReceiverGeometry::from_wavelength(0.03, 0.0, 25.0).unwrap();
        assert!(rel_err(geom.a_r, 7.161972439135290e-5) < 1e-14);
        let unit = vec![Vector3::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        )];
        assert!(rel_err(poynting_power(&unit, &geom), 1.432394487827058e-6) < 1e-12);
        assert_eq!(poynting_power(&[], &geom), 0.0);

        // additive over streams, quadratic in field scale
        let e1 = Vector3::new(
            Complex64::new(0.3, 1.0),
            Complex64::new(-0.2, 0.1),
            Complex64::new(0.0, 0.7),
        );
        let e2 = e1.map(|v| v * Complex64::new(0.0, 2.0));
        let p1 = poynting_power(&[e1], &geom);
        let p2 = poynting_power(&[e2], &geom);
        assert!(rel_err(p2, 4.0 * p1) < 1e-12);
        assert!(rel_err(poynting_power(&[e1, e2], &geom), p1 + p2) < 1e-12);

        // grazing incidence intercepts nothing
        let grazing = ReceiverGeometry::from_wavelength(0.03, std::f64::consts::FRAC_PI_2, 25.0).unwrap();
        assert!(poynting_power(&[e1], &grazing).abs() < 1e-20);
    }

    #[test]
    fn threshold_inverts_the_poynting_map() {
        let c = EhCircuit::reference();
        let geom = ReceiverGeometry::from_wavelength(0.03, 0.0, 25.0).unwrap();
        assert_eq!(eh_threshold(0.0, &geom, &c).unwrap(), 0.0);
        // 40-digit reference at P0 = 1 mW
        let t = eh_threshold(1.0e-3, &geom, &c).unwrap();
        assert!(rel_err(t, 1102.90105677780648) < 1e-12);

        // a field with Σ‖e‖² = P0' intercepts exactly Ξ⁻¹(P0)
        let e = Vector3::new(Complex64::new(t.sqrt(), 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let rf = poynting_power(&[e], &geom);
        assert!(rel_err(rf, eh_inverse(1.0e-3, &c).unwrap()) < 1e-12);
        assert!(rel_err(eh_output(rf, &c).unwrap(), 1.0e-3) < 1e-9);

        let grazing = ReceiverGeometry::from_wavelength(0.03, std::f64::consts::FRAC_PI_2, 25.0).unwrap();
        assert!(matches!(
            eh_threshold(1e-3, &grazing, &c),
            Err(Error::InfeasibleRequirement(_))
        ));
        let oblique = ReceiverGeometry::from_wavelength(0.03, 1.0, 25.0).unwrap();
        assert!(eh_threshold(1e-3, &oblique, &c).unwrap() > t);
    }
}
