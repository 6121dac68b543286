//! Small dense linear-algebra helpers: an eigensolver for 3×3 complex
//! Hermitian matrices by cyclic Jacobi rotations.
//!
//! The closed-form cubic for 3×3 eigenvalues is numerically treacherous for
//! clustered spectra; Jacobi sweeps cost microseconds at this size and are
//! backward stable, so robustness wins. Iteration is strictly deterministic
//! (fixed sweep order, no pivot randomization), which the beamforming code
//! relies on for bitwise-reproducible runs.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

/// Eigen-decomposition of a Hermitian 3×3 matrix.
///
/// Returns eigenvalues in descending order with matching unit eigenvector
/// columns. The input is symmetrized as (A+Aᴴ)/2 first, so tiny Hermiticity
/// violations from accumulation error are absorbed rather than amplified.
/// Sweeps stop once the off-diagonal Frobenius norm falls below 1e-12 of
/// the matrix scale.
pub fn hermitian_eigen_3x3(a: &Matrix3<Complex64>) -> (Vector3<f64>, Matrix3<Complex64>) {
    let mut m = Matrix3::from_fn(|i, j| (a[(i, j)] + a[(j, i)].conj()) * Complex64::from(0.5));
    let mut v = Matrix3::<Complex64>::identity();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let target = 1e-12 * scale;

    for _sweep in 0..40 {
        let off = (m[(0, 1)].norm_sqr() + m[(0, 2)].norm_sqr() + m[(1, 2)].norm_sqr()).sqrt();
        if off * std::f64::consts::SQRT_2 <= target {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let gamma = m[(p, q)];
            if gamma.norm() <= 1e-300 {
                continue;
            }
            // Dephase the pivot to a real value (D = diag(1, e^{−iφ}) on the
            // p,q plane), then rotate it away with a real Givens angle J.
            // The combined unitary U = D·J has block
            //   [ c        s        ]
            //   [ −s·e^{−iφ}  c·e^{−iφ} ].
            let phase = gamma / Complex64::from(gamma.norm());
            let alpha = m[(p, p)].re;
            let beta = m[(q, q)].re;
            let tau = (beta - alpha) / (2.0 * gamma.norm());
            let t = if tau >= 0.0 {
                1.0 / (tau + (1.0 + tau * tau).sqrt())
            } else {
                -1.0 / (-tau + (1.0 + tau * tau).sqrt())
            };
            let c = Complex64::from(1.0 / (1.0 + t * t).sqrt());
            let s = c * Complex64::from(t);

            // M ← M·U (columns), then M ← Uᴴ·M (rows)
            for i in 0..3 {
                let mp = m[(i, p)];
                let mq = m[(i, q)];
                m[(i, p)] = c * mp - s * phase.conj() * mq;
                m[(i, q)] = s * mp + c * phase.conj() * mq;
            }
            for j in 0..3 {
                let mp = m[(p, j)];
                let mq = m[(q, j)];
                m[(p, j)] = c * mp - s * phase * mq;
                m[(q, j)] = s * mp + c * phase * mq;
            }
            // V accumulates the column transforms only
            for i in 0..3 {
                let vp = v[(i, p)];
                let vq = v[(i, q)];
                v[(i, p)] = c * vp - s * phase.conj() * vq;
                v[(i, q)] = s * vp + c * phase.conj() * vq;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    let diag = [m[(0, 0)].re, m[(1, 1)].re, m[(2, 2)].re];
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let vals = Vector3::new(diag[order[0]], diag[order[1]], diag[order[2]]);
    let mut vecs = Matrix3::<Complex64>::zeros();
    for (col, &src) in order.iter().enumerate() {
        let mut column = v.column(src).into_owned();
        let n = column.norm();
        if n > 0.0 {
            column /= Complex64::from(n);
        }
        vecs.set_column(col, &column);
    }
    (vals, vecs)
}
