//! Aperture sampling and exact electromagnetic point-to-point channels.
//!
//! The transmitter is a planar aperture in the z = 0 plane, centred on the
//! origin, carrying a surface current density j(s) ∈ C³ (A/m). The field at
//! an observation point r is the aperture integral of the free-space dyadic
//! Green function,
//!
//! ```text
//! e(r) = ∫_A G(r,s) j(s) ds,          G : C³ → C³ per source point,
//! ```
//!
//! evaluated here by midpoint quadrature on a uniform rectangular grid.
//! Sample weights are the cell areas, so the weights sum to the aperture
//! area exactly and smooth integrands converge at second order.
//!
//! Conventions: e^{+iκr} outgoing phase, distances in metres, fields in
//! V/m, transmit "power" ∫‖j‖²ds in A² (the squared current measure that
//! the power budget P_t constrains).

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical speed of light, used when deriving a wavelength from a carrier
/// frequency. Studies that quote mode counts for λ = 0.03 m should construct
/// the medium from the wavelength directly.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space wave impedance in ohms.
pub const Z0_FREE_SPACE: f64 = 376.73;

/// A point in 3-space (metres).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    /// Displacement `self − other`.
    pub fn sub(self, other: Point3) -> Vector3<f64> {
        self.to_vector() - other.to_vector()
    }

    pub fn norm(self) -> f64 {
        self.to_vector().norm()
    }
}

/// Carrier and impedance parameters of the propagation setup.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MediumParams {
    /// Carrier frequency in Hz.
    pub frequency: f64,
    /// Wavelength λ in metres.
    pub wavelength: f64,
    /// Free-space wave impedance Z₀ in ohms.
    pub z0: f64,
    /// Receiver load impedance Z in ohms (used by the harvest model).
    pub z_load: f64,
}

impl MediumParams {
    /// Build from a carrier frequency using the physical speed of light.
    pub fn from_frequency(frequency: f64, z0: f64, z_load: f64) -> Result<Self> {
        if !(frequency > 0.0) || !(z0 > 0.0) || !(z_load > 0.0) {
            return Err(Error::InvalidArgument(
                "frequency and impedances must be positive".into(),
            ));
        }
        Ok(Self {
            frequency,
            wavelength: SPEED_OF_LIGHT / frequency,
            z0,
            z_load,
        })
    }

    /// Build from a wavelength; the nominal frequency is derived with the
    /// physical speed of light.
    pub fn from_wavelength(wavelength: f64, z0: f64, z_load: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !(z0 > 0.0) || !(z_load > 0.0) {
            return Err(Error::InvalidArgument(
                "wavelength and impedances must be positive".into(),
            ));
        }
        Ok(Self {
            frequency: SPEED_OF_LIGHT / wavelength,
            wavelength,
            z0,
            z_load,
        })
    }

    /// Wavenumber κ = 2π/λ (rad/m).
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Radiating near-field (Fresnel) bounds for an aperture of projected
    /// size `d`: the region between `0.5·√(d³/λ)` and `2d²/λ`. Because the
    /// relevant projection is direction dependent, callers typically log the
    /// bounds for both the larger side length and the diagonal.
    pub fn fresnel_bounds(&self, d: f64) -> (f64, f64) {
        (
            0.5 * (d.powi(3) / self.wavelength).sqrt(),
            2.0 * d * d / self.wavelength,
        )
    }
}

/// One quadrature node of the aperture: a position on z = 0 and the area
/// weight of its grid cell.
#[derive(Debug, Clone, Copy)]
pub struct ApertureSample {
    pub position: Point3,
    pub weight: f64,
}

/// A planar rectangular aperture [−Lx/2, Lx/2] × [−Ly/2, Ly/2] × {0} with a
/// uniform midpoint quadrature grid.
#[derive(Debug, Clone)]
pub struct Aperture {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    samples: Vec<ApertureSample>,
}

impl Aperture {
    /// Lay out the nx×ny midpoint grid. Sample (i, j) sits at
    /// x = −Lx/2 + (i+½)·Lx/nx, y = −Ly/2 + (j+½)·Ly/ny with weight
    /// Lx·Ly/(nx·ny); the weights therefore sum to the aperture area.
    ///
    /// Grids should keep the cell aspect near square (nx/ny ≈ Lx/Ly) so the
    /// quadrature error is isotropic; this is the caller's choice and not
    /// enforced here.
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx > 0.0) || !(ly > 0.0) {
            return Err(Error::InvalidArgument(
                "aperture side lengths must be positive".into(),
            ));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(
                "aperture grid needs at least one sample per axis".into(),
            ));
        }
        let weight = lx * ly / (nx as f64 * ny as f64);
        let mut samples = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let x = -lx / 2.0 + (i as f64 + 0.5) * lx / nx as f64;
            for j in 0..ny {
                let y = -ly / 2.0 + (j as f64 + 0.5) * ly / ny as f64;
                samples.push(ApertureSample {
                    position: Point3::new(x, y, 0.0),
                    weight,
                });
            }
        }
        Ok(Self {
            lx,
            ly,
            nx,
            ny,
            samples,
        })
    }

    pub fn samples(&self) -> &[ApertureSample] {
        &self.samples
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Aperture centre (the origin for this planar layout).
    pub fn centre(&self) -> Point3 {
        Point3::new(0.0, 0.0, 0.0)
    }
}

/// The three additive parts of the dyadic kernel, ordered by radial decay:
/// `far` ~ 1/r (radiating), `mid` ~ 1/r², `near` ~ 1/r³.
#[derive(Debug, Clone, Copy)]
pub struct GreenTerms {
    pub far: Matrix3<Complex64>,
    pub mid: Matrix3<Complex64>,
    pub near: Matrix3<Complex64>,
}

impl GreenTerms {
    pub fn total(&self) -> Matrix3<Complex64> {
        self.far + self.mid + self.near
    }
}

fn green_prefactor(medium: &MediumParams, dist: f64) -> Complex64 {
    let kappa = medium.wavenumber();
    // iκZ₀/4π · e^{iκr}/r
    Complex64::new(0.0, kappa * medium.z0 / (4.0 * std::f64::consts::PI))
        * Complex64::new(0.0, kappa * dist).exp()
        / dist
}

/// Exact free-space dyadic channel between a source point s and an
/// observation point r, split into its far/mid/near terms:
///
/// ```text
/// G(r,s) = (iκZ₀/4π)·(e^{iκ‖p‖}/‖p‖)·[ (I − p̂p̂ᵀ)
///          + (i/(κ‖p‖))·(I − 3p̂p̂ᵀ) + (1/(κ‖p‖)²)·(I − 3p̂p̂ᵀ) ],   p = r − s.
/// ```
///
/// Fails with [`Error::SingularGeometry`] when ‖r−s‖ < λ/100.
pub fn dyadic_green_terms(r: &Point3, s: &Point3, medium: &MediumParams) -> Result<GreenTerms> {
    let p = r.sub(*s);
    let dist = p.norm();
    let guard = medium.wavelength / 100.0;
    if dist < guard {
        return Err(Error::SingularGeometry { dist, guard });
    }
    let phat = p / dist;
    let outer = phat * phat.transpose();
    let eye = Matrix3::<f64>::identity();
    let transverse = eye - outer;
    let near_dyad = eye - 3.0 * outer;

    let pref = green_prefactor(medium, dist);
    let kp = medium.wavenumber() * dist;
    let far = transverse.map(|v| pref * v);
    let mid_coef = pref * Complex64::new(0.0, 1.0 / kp);
    let near_coef = pref / (kp * kp);
    let mid = near_dyad.map(|v| mid_coef * v);
    let near = near_dyad.map(|v| near_coef * v);
    Ok(GreenTerms { far, mid, near })
}

/// Exact dyadic channel (sum of all three terms). See [`dyadic_green_terms`].
pub fn dyadic_green(r: &Point3, s: &Point3, medium: &MediumParams) -> Result<Matrix3<Complex64>> {
    dyadic_green_terms(r, s, medium).map(|t| t.total())
}

/// Radiating (1/r) part of the dyadic channel only. This is the kernel that
/// the paraxial/Fresnel approximations model; the scalar linear-aperture
/// kernel is its (3,3) entry.
pub fn dyadic_green_far(r: &Point3, s: &Point3, medium: &MediumParams) -> Result<Matrix3<Complex64>> {
    dyadic_green_terms(r, s, medium).map(|t| t.far)
}

/// Truncation order of the Fresnel phase expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FresnelOrder {
    First,
    Second,
}

/// Fresnel approximation of the radiating channel term.
///
/// The exact propagation distance ‖r − s‖ = ‖r‖·√(1+x) with
/// x = (‖s‖² − 2 r·s)/‖r‖² is replaced by its Taylor expansion
/// (order 1: 1 + x/2, order 2: 1 + x/2 − x²/8), while the amplitude decay
/// and the transverse polarization dyad are frozen at the aperture centre
/// direction r̂. At s = 0 this reproduces the exact far term.
pub fn fresnel_channel(
    r: &Point3,
    s: &Point3,
    medium: &MediumParams,
    order: FresnelOrder,
) -> Result<Matrix3<Complex64>> {
    let rv = r.to_vector();
    let rho = rv.norm();
    let guard = medium.wavelength / 100.0;
    if rho < guard {
        return Err(Error::SingularGeometry { dist: rho, guard });
    }
    let sv = s.to_vector();
    let x = (sv.norm_squared() - 2.0 * rv.dot(&sv)) / (rho * rho);
    let expansion = match order {
        FresnelOrder::First => 1.0 + 0.5 * x,
        FresnelOrder::Second => 1.0 + 0.5 * x - 0.125 * x * x,
    };
    let dist_approx = rho * expansion;

    let rhat = rv / rho;
    let transverse = Matrix3::<f64>::identity() - rhat * rhat.transpose();
    let kappa = medium.wavenumber();
    let pref = Complex64::new(0.0, kappa * medium.z0 / (4.0 * std::f64::consts::PI))
        * Complex64::new(0.0, kappa * dist_approx).exp()
        / rho;
    Ok(transverse.map(|v| pref * v))
}

/// The exact channel of one user against every aperture sample, in grid
/// order. This is the per-user input to field synthesis and to the
/// wavenumber-domain transform.
#[derive(Debug, Clone)]
pub struct UserChannel {
    pub user_position: Point3,
    samples: Vec<Matrix3<Complex64>>,
}

impl UserChannel {
    pub fn samples(&self) -> &[Matrix3<Complex64>] {
        &self.samples
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Assemble a channel from precomputed per-sample kernels (used by the
    /// Fresnel-model studies which evaluate a different kernel on the same
    /// grid).
    pub fn from_samples(user_position: Point3, samples: Vec<Matrix3<Complex64>>) -> Self {
        Self {
            user_position,
            samples,
        }
    }
}

/// Evaluate the exact dyadic channel at every aperture sample.
///
/// Positions on the aperture plane inside the footprint hit the λ/100
/// self-interaction guard and are rejected; users must be off the surface.
pub fn sample_user_channel(
    user: &Point3,
    aperture: &Aperture,
    medium: &MediumParams,
) -> Result<UserChannel> {
    let samples: Result<Vec<_>> = aperture
        .samples()
        .par_iter()
        .map(|s| dyadic_green(user, &s.position, medium))
        .collect();
    Ok(UserChannel {
        user_position: *user,
        samples: samples?,
    })
}

/// Midpoint-quadrature aperture integral e = Σ_m weight_m·G_m·j_m for a
/// current density given at the aperture samples.
pub fn radiate_field(
    channel: &UserChannel,
    currents: &[Vector3<Complex64>],
    aperture: &Aperture,
) -> Result<Vector3<Complex64>> {
    if channel.sample_count() != aperture.sample_count() || currents.len() != aperture.sample_count()
    {
        return Err(Error::InvalidArgument(format!(
            "mismatched sampling: channel has {}, currents {}, aperture {}",
            channel.sample_count(),
            currents.len(),
            aperture.sample_count()
        )));
    }
    let mut acc = Vector3::<Complex64>::zeros();
    for ((g, j), s) in channel
        .samples()
        .iter()
        .zip(currents.iter())
        .zip(aperture.samples().iter())
    {
        acc += (g * j).map(|v| v * Complex64::from(s.weight));
    }
    Ok(acc)
}

/// Quadrature value of the transmit power measure ∫‖j‖²ds (A²).
pub fn current_power(currents: &[Vector3<Complex64>], aperture: &Aperture) -> Result<f64> {
    if currents.len() != aperture.sample_count() {
        return Err(Error::InvalidArgument(
            "current samples do not match the aperture grid".into(),
        ));
    }
    Ok(currents
        .iter()
        .zip(aperture.samples().iter())
        .map(|(j, s)| s.weight * j.norm_squared())
        .sum())
}

/// Scalar kernel of the linear-aperture (strip) model: source on the z-axis,
/// user laterally offset by d, observing the x-polarized ... — concretely
///
/// ```text
/// G = iκZ₀ d² e^{iκD} / (4π D³),    D² = (Δz)² + d²,  d² = Δx² + Δy²,
/// ```
///
/// which is exactly the (3,3) entry of the radiating dyadic term when the
/// offset lies in x (1 − p̂_z² = d²/D²). The mid/near dyadic terms are not
/// part of this reduced model.
pub fn scalar_green_linear(r: &Point3, s: &Point3, medium: &MediumParams) -> Result<Complex64> {
    let axial = r.z - s.z;
    let lateral_sq = (r.x - s.x).powi(2) + (r.y - s.y).powi(2);
    let dist = (axial * axial + lateral_sq).sqrt();
    let guard = medium.wavelength / 100.0;
    if dist < guard {
        return Err(Error::SingularGeometry { dist, guard });
    }
    let kappa = medium.wavenumber();
    Ok(
        Complex64::new(0.0, kappa * medium.z0 * lateral_sq / (4.0 * std::f64::consts::PI))
            * Complex64::new(0.0, kappa * dist).exp()
            / dist.powi(3),
    )
}

/// Channel-correlation magnitude of two users sharing a linear aperture of
/// length c along the z-axis:
///
/// ```text
/// (1/c)·| ∫_{−c/2}^{c/2} conj(G(u₁,s))·G(u₂,s) ds |
/// ```
///
/// by n-point midpoint quadrature. Users are given as (lateral offset,
/// axial coordinate) points, i.e. x/y are lateral and z runs along the
/// aperture. For distinct users this decays ~1/c once the aperture is long
/// enough to resolve their phase-curvature difference.
pub fn correlation_metric(
    c: f64,
    user1: &Point3,
    user2: &Point3,
    medium: &MediumParams,
    n: usize,
) -> Result<f64> {
    if !(c > 0.0) || n == 0 {
        return Err(Error::InvalidArgument(
            "aperture length and sample count must be positive".into(),
        ));
    }
    if user1 == user2 {
        return Err(Error::InvalidArgument(
            "correlation metric requires two distinct users".into(),
        ));
    }
    let w = c / n as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..n {
        let sz = -c / 2.0 + (m as f64 + 0.5) * w;
        let s = Point3::new(0.0, 0.0, sz);
        let g1 = scalar_green_linear(user1, &s, medium)?;
        let g2 = scalar_green_linear(user2, &s, medium)?;
        acc += g1.conj() * g2 * Complex64::from(w);
    }
    Ok(acc.norm() / c)
}
