//! Truncated Fourier current basis and the mode-domain channel transform.
//!
//! Currents on the rectangular aperture are expanded in the orthonormal
//! family
//!
//! ```text
//! Υ_n(s) = (1/√A_T)·exp(2πi[ n_x(s_x−Lx/2)/Lx + n_y(s_y−Ly/2)/Ly ]),
//! ```
//!
//! truncated at |n_x| ≤ Nx, |n_y| ≤ Ny. Per-user channels become finite
//! lists of 3×3 mode couplings Ω_n = ∫ G(r,s)Υ_n(s) ds, beamformers become
//! stacked coefficient vectors, and the transmit power measure becomes the
//! plain squared norm of the coefficients (Parseval). All of the
//! optimization machinery downstream works on these coefficient vectors.
//!
//! On the midpoint quadrature grid the basis is orthonormal *exactly*
//! (sums of roots of unity), provided each axis has more samples than the
//! two-sided mode span — otherwise modes alias onto each other and the
//! Parseval power accounting silently breaks. The quadrature-based
//! operations therefore refuse under-resolved grids.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Aperture, Point3, UserChannel};

/// Truncated planar Fourier basis with a frozen lexicographic mode
/// ordering: n_x runs −Nx..=Nx outer, n_y runs −Ny..=Ny inner. Every
/// stacked coefficient vector in the crate inherits this ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierBasisSet {
    pub lx: f64,
    pub ly: f64,
    pub n_max_x: i64,
    pub n_max_y: i64,
    indices: Vec<(i64, i64)>,
}

/// Mode-count rule: one mode per wavelength that fits across the side,
/// N = ⌈L/λ⌉. The ratio is computed with a small backoff so that exact
/// integer ratios (0.3/0.03 = 10 up to f64 rounding) do not spill to N+1.
fn default_mode_bound(side: f64, lambda: f64) -> i64 {
    (side / lambda - 1e-9).ceil().max(0.0) as i64
}

/// Build the truncated basis for an Lx×Ly aperture at wavelength λ.
/// `override_n` forces both per-axis bounds (used by reduced-size runs).
pub fn make_basis(lx: f64, ly: f64, lambda: f64, override_n: Option<i64>) -> Result<FourierBasisSet> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("wavelength must be positive".into()));
    }
    let (n_max_x, n_max_y) = match override_n {
        Some(n) if n < 0 => {
            return Err(Error::InvalidArgument(
                "mode bound override must be non-negative".into(),
            ))
        }
        Some(n) => (n, n),
        None => (default_mode_bound(lx, lambda), default_mode_bound(ly, lambda)),
    };
    make_basis_rect(lx, ly, n_max_x, n_max_y)
}

/// Build a basis with explicit per-axis bounds, in the frozen row-major
/// ordering (x-index outer, y-index inner). Used to reconstruct the basis
/// a saved report was produced with.
pub fn make_basis_rect(lx: f64, ly: f64, n_max_x: i64, n_max_y: i64) -> Result<FourierBasisSet> {
    if !(lx > 0.0) || !(ly > 0.0) {
        return Err(Error::InvalidArgument("aperture sides must be positive".into()));
    }
    if n_max_x < 0 || n_max_y < 0 {
        return Err(Error::InvalidArgument("mode bounds must be non-negative".into()));
    }
    let mut indices = Vec::with_capacity(((2 * n_max_x + 1) * (2 * n_max_y + 1)) as usize);
    for nx in -n_max_x..=n_max_x {
        for ny in -n_max_y..=n_max_y {
            indices.push((nx, ny));
        }
    }
    Ok(FourierBasisSet {
        lx,
        ly,
        n_max_x,
        n_max_y,
        indices,
    })
}

impl FourierBasisSet {
    /// Number of retained modes, (2Nx+1)(2Ny+1).
    pub fn mode_count(&self) -> usize {
        self.indices.len()
    }

    /// The frozen mode ordering.
    pub fn indices(&self) -> &[(i64, i64)] {
        &self.indices
    }

    /// Flat position of a mode pair in the frozen ordering.
    pub fn index_of(&self, n: (i64, i64)) -> Option<usize> {
        let (nx, ny) = n;
        if nx.abs() > self.n_max_x || ny.abs() > self.n_max_y {
            return None;
        }
        let row = (nx + self.n_max_x) as usize;
        let col = (ny + self.n_max_y) as usize;
        Some(row * (2 * self.n_max_y + 1) as usize + col)
    }

    fn inv_sqrt_area(&self) -> f64 {
        1.0 / (self.lx * self.ly).sqrt()
    }

    /// Υ_n(s) for a mode given by its index pair.
    pub fn eval(&self, n: (i64, i64), s: &Point3) -> Result<Complex64> {
        if n.0.abs() > self.n_max_x || n.1.abs() > self.n_max_y {
            return Err(Error::InvalidArgument(format!(
                "mode {n:?} outside basis bounds ({}, {})",
                self.n_max_x, self.n_max_y
            )));
        }
        Ok(self.eval_unchecked(n, s))
    }

    fn eval_unchecked(&self, n: (i64, i64), s: &Point3) -> Complex64 {
        let phase = 2.0
            * std::f64::consts::PI
            * (n.0 as f64 * (s.x - self.lx / 2.0) / self.lx
                + n.1 as f64 * (s.y - self.ly / 2.0) / self.ly);
        Complex64::new(0.0, phase).exp() * self.inv_sqrt_area()
    }

    /// Υ at a flat mode index (panics on out-of-range, which is a bug in
    /// the caller, not a runtime condition).
    pub fn eval_flat(&self, idx: usize, s: &Point3) -> Complex64 {
        self.eval_unchecked(self.indices[idx], s)
    }

    /// Smallest per-axis sample counts for which the midpoint-grid Gram of
    /// the truncated family is exactly the identity: mode-index differences
    /// span −2N..2N, so anything above 2N samples cannot alias.
    pub fn min_grid(&self) -> (usize, usize) {
        (2 * self.n_max_x as usize + 1, 2 * self.n_max_y as usize + 1)
    }

    /// Refuse grids on which distinct retained modes alias (nx ≤ 2Nx or
    /// ny ≤ 2Ny). Every quadrature-backed transform calls this.
    pub fn check_grid(&self, aperture: &Aperture) -> Result<()> {
        let (min_x, min_y) = self.min_grid();
        if aperture.nx < min_x || aperture.ny < min_y {
            return Err(Error::GridTooCoarse(format!(
                "aperture grid {}×{} aliases the ±({},{}) mode set; need at least {}×{} samples",
                aperture.nx, aperture.ny, self.n_max_x, self.n_max_y, min_x, min_y
            )));
        }
        if (aperture.lx - self.lx).abs() > 1e-12 * self.lx.max(1.0)
            || (aperture.ly - self.ly).abs() > 1e-12 * self.ly.max(1.0)
        {
            return Err(Error::InvalidArgument(
                "aperture and basis describe different footprints".into(),
            ));
        }
        Ok(())
    }

    /// Per-axis phase tables on the aperture grid: `ex[a][i]` is the x-axis
    /// factor of mode offset a = nx+Nx at grid column i (and likewise ey).
    /// Υ at sample (i,j) is then inv_sqrt_area·ex[a][i]·ey[b][j], which
    /// turns every grid transform into cheap table lookups.
    fn axis_tables(&self, aperture: &Aperture) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
        let xs: Vec<f64> = (0..aperture.nx)
            .map(|i| -aperture.lx / 2.0 + (i as f64 + 0.5) * aperture.lx / aperture.nx as f64)
            .collect();
        let ys: Vec<f64> = (0..aperture.ny)
            .map(|j| -aperture.ly / 2.0 + (j as f64 + 0.5) * aperture.ly / aperture.ny as f64)
            .collect();
        let table = |nmax: i64, coords: &[f64], side: f64| -> Vec<Vec<Complex64>> {
            (-nmax..=nmax)
                .map(|n| {
                    coords
                        .iter()
                        .map(|&c| {
                            let phase =
                                2.0 * std::f64::consts::PI * n as f64 * (c - side / 2.0) / side;
                            Complex64::new(0.0, phase).exp()
                        })
                        .collect()
                })
                .collect()
        };
        (
            table(self.n_max_x, &xs, self.lx),
            table(self.n_max_y, &ys, self.ly),
        )
    }
}

/// Mode-domain channel of one user: Ω_n = ∫ G(r,s)Υ_n(s) ds in basis order.
#[derive(Debug, Clone)]
pub struct WavenumberChannel {
    pub user_position: Point3,
    omega: Vec<Matrix3<Complex64>>,
}

impl WavenumberChannel {
    pub fn omega(&self) -> &[Matrix3<Complex64>] {
        &self.omega
    }

    pub fn mode_count(&self) -> usize {
        self.omega.len()
    }

    pub fn from_modes(user_position: Point3, omega: Vec<Matrix3<Complex64>>) -> Self {
        Self {
            user_position,
            omega,
        }
    }
}

/// One beamformer as stacked per-mode C³ coefficients in basis order.
/// The flat layout interleaves components mode-major: [w_n.x, w_n.y, w_n.z]
/// per mode, giving a 3·N_F complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    modes: Vec<Vector3<Complex64>>,
}

impl BeamWeights {
    pub fn zeros(mode_count: usize) -> Self {
        Self {
            modes: vec![Vector3::zeros(); mode_count],
        }
    }

    pub fn from_modes(modes: Vec<Vector3<Complex64>>) -> Self {
        Self { modes }
    }

    pub fn modes(&self) -> &[Vector3<Complex64>] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [Vector3<Complex64>] {
        &mut self.modes
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Coefficient power Σ_n ‖w_n‖² — by Parseval, the transmit power
    /// measure ∫‖θ‖²ds of the synthesized current.
    pub fn power(&self) -> f64 {
        self.modes.iter().map(|m| m.norm_squared()).sum()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            modes: self.modes.iter().map(|m| m.map(|v| v * factor)).collect(),
        }
    }

    pub fn to_flat(&self) -> DVector<Complex64> {
        let mut v = DVector::zeros(3 * self.modes.len());
        for (n, m) in self.modes.iter().enumerate() {
            v[3 * n] = m.x;
            v[3 * n + 1] = m.y;
            v[3 * n + 2] = m.z;
        }
        v
    }

    pub fn from_flat(v: &DVector<Complex64>) -> Result<Self> {
        if v.len() % 3 != 0 {
            return Err(Error::InvalidArgument(
                "flat beam vector length must be a multiple of 3".into(),
            ));
        }
        Ok(Self {
            modes: (0..v.len() / 3)
                .map(|n| Vector3::new(v[3 * n], v[3 * n + 1], v[3 * n + 2]))
                .collect(),
        })
    }
}

/// Project the sampled channel onto the basis: Ω_n = Σ_m weight_m G_m Υ_n(s_m)
/// (midpoint quadrature of ∫GΥ_n ds; no conjugate — the transform pairs with
/// synthesis, not with an inner product).
pub fn channel_transform(
    channel: &UserChannel,
    basis: &FourierBasisSet,
    aperture: &Aperture,
) -> Result<WavenumberChannel> {
    basis.check_grid(aperture)?;
    if channel.sample_count() != aperture.sample_count() {
        return Err(Error::InvalidArgument(
            "channel was sampled on a different grid".into(),
        ));
    }
    let (ex, ey) = basis.axis_tables(aperture);
    let scale = Complex64::from(basis.inv_sqrt_area());
    let ny = aperture.ny;
    let weights: Vec<f64> = aperture.samples().iter().map(|s| s.weight).collect();
    let omega: Vec<Matrix3<Complex64>> = basis
        .indices()
        .par_iter()
        .map(|&(nx, ny_mode)| {
            let tx = &ex[(nx + basis.n_max_x) as usize];
            let ty = &ey[(ny_mode + basis.n_max_y) as usize];
            let mut acc = Matrix3::<Complex64>::zeros();
            for (m, g) in channel.samples().iter().enumerate() {
                let ups = tx[m / ny] * ty[m % ny] * scale * Complex64::from(weights[m]);
                acc += g.map(|v| v * ups);
            }
            acc
        })
        .collect();
    Ok(WavenumberChannel {
        user_position: channel.user_position,
        omega,
    })
}

/// Continuous beamformer value θ(s) = Σ_n w_n Υ_n(s) at one point.
pub fn synthesize(w: &BeamWeights, basis: &FourierBasisSet, s: &Point3) -> Result<Vector3<Complex64>> {
    if w.mode_count() != basis.mode_count() {
        return Err(Error::InvalidArgument(
            "weight vector does not match the basis size".into(),
        ));
    }
    let mut acc = Vector3::<Complex64>::zeros();
    for (idx, m) in w.modes().iter().enumerate() {
        let ups = basis.eval_flat(idx, s);
        acc += m.map(|v| v * ups);
    }
    Ok(acc)
}

/// θ evaluated at every aperture sample (grid order), using the per-axis
/// phase tables.
pub fn synthesize_on_grid(
    w: &BeamWeights,
    basis: &FourierBasisSet,
    aperture: &Aperture,
) -> Result<Vec<Vector3<Complex64>>> {
    if w.mode_count() != basis.mode_count() {
        return Err(Error::InvalidArgument(
            "weight vector does not match the basis size".into(),
        ));
    }
    let (ex, ey) = basis.axis_tables(aperture);
    let scale = Complex64::from(basis.inv_sqrt_area());
    let ny = aperture.ny;
    Ok((0..aperture.sample_count())
        .into_par_iter()
        .map(|m| {
            let (i, j) = (m / ny, m % ny);
            let mut acc = Vector3::<Complex64>::zeros();
            for (idx, &(nx_mode, ny_mode)) in basis.indices().iter().enumerate() {
                let ups = ex[(nx_mode + basis.n_max_x) as usize][i]
                    * ey[(ny_mode + basis.n_max_y) as usize][j]
                    * scale;
                acc += w.modes()[idx].map(|v| v * ups);
            }
            acc
        })
        .collect())
}

/// Mode-domain field Σ_n Ω_n w_n — the wavenumber form of the aperture
/// integral ∫Gθ ds. On the quadrature grid that defined Ω this commutes
/// with radiating the synthesized current exactly (same finite sum).
pub fn field_from_weights(omega: &WavenumberChannel, w: &BeamWeights) -> Result<Vector3<Complex64>> {
    if omega.mode_count() != w.mode_count() {
        return Err(Error::InvalidArgument(
            "channel and weights have different mode counts".into(),
        ));
    }
    let mut acc = Vector3::<Complex64>::zeros();
    for (om, m) in omega.omega().iter().zip(w.modes()) {
        acc += om * m;
    }
    Ok(acc)
}

/// Total transmit power measure of a set of beamformers, Σ_k Σ_n ‖w_{k,n}‖².
pub fn power_from_weights(all: &[BeamWeights]) -> f64 {
    all.iter().map(|w| w.power()).sum()
}

/// Projection of sampled currents onto the basis: w_n = Σ_m weight_m θ(s_m)·conj(Υ_n(s_m)).
/// Recovers the coefficients of any basis-bandlimited current exactly on a
/// resolving grid (discrete orthonormality).
pub fn project_current(
    currents: &[Vector3<Complex64>],
    basis: &FourierBasisSet,
    aperture: &Aperture,
) -> Result<BeamWeights> {
    basis.check_grid(aperture)?;
    if currents.len() != aperture.sample_count() {
        return Err(Error::InvalidArgument(
            "current samples do not match the aperture grid".into(),
        ));
    }
    let (ex, ey) = basis.axis_tables(aperture);
    let scale = Complex64::from(basis.inv_sqrt_area());
    let ny = aperture.ny;
    let weights: Vec<f64> = aperture.samples().iter().map(|s| s.weight).collect();
    let modes: Vec<Vector3<Complex64>> = basis
        .indices()
        .par_iter()
        .map(|&(nx_mode, ny_mode)| {
            let tx = &ex[(nx_mode + basis.n_max_x) as usize];
            let ty = &ey[(ny_mode + basis.n_max_y) as usize];
            let mut acc = Vector3::<Complex64>::zeros();
            for (m, j) in currents.iter().enumerate() {
                let ups = (tx[m / ny] * ty[m % ny] * scale).conj() * Complex64::from(weights[m]);
                acc += j.map(|v| v * ups);
            }
            acc
        })
        .collect();
    Ok(BeamWeights { modes })
}

/// Midpoint-grid Gram matrix Σ_m weight_m·conj(Υ_k(s_m))·Υ_l(s_m) of the
/// whole retained family. Diagnostic: unlike the transforms it runs on any
/// grid, so aliasing on under-resolved grids is observable.
pub fn discrete_gram(basis: &FourierBasisSet, aperture: &Aperture) -> DMatrix<Complex64> {
    let (ex, ey) = basis.axis_tables(aperture);
    let scale = basis.inv_sqrt_area();
    let ny = aperture.ny;
    let n_modes = basis.mode_count();
    let weights: Vec<f64> = aperture.samples().iter().map(|s| s.weight).collect();
    let rows: Vec<Vec<Complex64>> = (0..n_modes)
        .into_par_iter()
        .map(|k| {
            let (kx, ky) = basis.indices()[k];
            let txk = &ex[(kx + basis.n_max_x) as usize];
            let tyk = &ey[(ky + basis.n_max_y) as usize];
            (0..n_modes)
                .map(|l| {
                    let (lx, ly) = basis.indices()[l];
                    let txl = &ex[(lx + basis.n_max_x) as usize];
                    let tyl = &ey[(ly + basis.n_max_y) as usize];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (m, &wm) in weights.iter().enumerate() {
                        let (i, j) = (m / ny, m % ny);
                        acc += (txk[i] * tyk[j]).conj()
                            * txl[i]
                            * tyl[j]
                            * Complex64::from(wm * scale * scale);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(n_modes, n_modes, |k, l| rows[k][l])
}
