//! Deterministic interior-point solver for the beamforming subproblems.
//!
//! Every subproblem this crate generates has the same shape after lifting
//! complex beam coefficients to stacked real vectors:
//!
//! ```text
//! minimize   Σ_t w_t·(v_tᵀx)² + cᵀx          (PSD quadratic, rank-1 terms)
//! subject to ‖x‖² ≤ ρ                        (transmit power ball)
//!            a_iᵀx ≥ b_i    i = 1..m          (linearized harvest floors)
//! ```
//!
//! or, in epigraph mode, `maximize γ s.t. a_iᵀx − b_i ≥ γ, ‖x‖² ≤ ρ`
//! (the max-min initialization). Solutions come with a checkable KKT
//! certificate.
//!
//! The solver is a surrogate-gap primal-dual interior-point method with
//! log-barrier duals on the ball and the affine rows, Newton steps, a 0.99
//! fraction-to-boundary rule, and residual-norm backtracking. The Newton
//! matrix is `αI + (low rank)` — the objective contributes 2K(K+L) rank-1
//! factors and each constraint one more — so each step solves a small
//! capacitance system instead of an n×n factorization; n reaches ~16k at
//! full scale and would be hopeless dense. Everything is intentionally
//! sequential and allocation-stable: identical inputs give bitwise-identical
//! certificates.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One rank-1 quadratic objective term `weight·(factorᵀx)²`.
#[derive(Debug, Clone)]
pub struct QuadTerm {
    pub weight: f64,
    pub factor: DVector<f64>,
}

/// One affine row `normalᵀx ≥ offset`.
#[derive(Debug, Clone)]
pub struct AffineConstraint {
    pub normal: DVector<f64>,
    pub offset: f64,
}

/// A beamforming subproblem in lifted real coordinates.
#[derive(Debug, Clone)]
pub struct ConvexSubproblem {
    pub dim: usize,
    pub quad: Vec<QuadTerm>,
    pub linear: DVector<f64>,
    /// Squared ball radius ρ (the power budget).
    pub ball_radius_sq: f64,
    pub constraints: Vec<AffineConstraint>,
    /// Maximize the common constraint slack γ instead of the quadratic
    /// objective.
    pub epigraph: bool,
    /// Warm start; used only if strictly feasible, otherwise phase-1 runs.
    pub start: Option<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// One logged interior-point iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub stationarity: f64,
    pub surrogate_gap: f64,
    pub step: f64,
}

/// Solver outcome plus the data needed to audit it.
#[derive(Debug, Clone)]
pub struct SolveCertificate {
    /// Minimizer in original coordinates.
    pub x: DVector<f64>,
    /// Objective value in original units (for epigraph mode, the achieved γ).
    pub objective: f64,
    /// Achieved common slack γ (epigraph mode; phase-1 max-min slack when
    /// the problem was infeasible).
    pub epigraph_value: Option<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    /// ‖∇f + Σλ∇g‖₂ against the *unregularized* objective, internal frame.
    pub stationarity: f64,
    /// max(0, max_i g_i) at the returned point, internal frame.
    pub primal_residual: f64,
    /// Surrogate duality gap Σλᵢsᵢ, internal frame.
    pub complementarity: f64,
    /// Whether every accepted step achieved the backtracking decrease.
    pub merit_monotone: bool,
    pub trace: Vec<TraceRow>,
}

impl SolveCertificate {
    /// Dump the iteration log as CSV (`iteration,objective,stationarity,gap,step`).
    pub fn write_trace_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,objective,stationarity,surrogate_gap,step")?;
        for row in &self.trace {
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e}",
                row.iteration, row.objective, row.stationarity, row.surrogate_gap, row.step
            )?;
        }
        Ok(())
    }
}

/// Solver knobs. The defaults match the certificate tolerances the
/// acceptance checks assert.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Residual/gap threshold for declaring optimality (internal frame).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// Real lifting of complex beamforming quantities.
///
/// A complex vector w becomes x = [Re w; Im w]. For a channel h, the pair
/// of lifted vectors (a, b) = ([Re h; Im h], [−Im h; Re h]) satisfies
/// Re(hᴴw) = aᵀx, Im(hᴴw) = bᵀx, and hence |hᴴw|² = (aᵀx)² + (bᵀx)² — the
/// whole problem becomes real quadratic with rank-2 pieces per (user,
/// stream) pair, preserving objective and constraint values exactly.
pub mod lift {
    use nalgebra::DVector;
    use num_complex::Complex64;

    /// x = [Re w; Im w].
    pub fn real_from_complex(w: &DVector<Complex64>) -> DVector<f64> {
        let m = w.len();
        DVector::from_fn(2 * m, |i, _| if i < m { w[i].re } else { w[i - m].im })
    }

    /// Inverse of [`real_from_complex`]; `x.len()` must be even.
    pub fn complex_from_real(x: &DVector<f64>) -> DVector<Complex64> {
        let m = x.len() / 2;
        DVector::from_fn(m, |i, _| Complex64::new(x[i], x[i + m]))
    }

    /// The (a, b) pair with aᵀx = Re(hᴴw) and bᵀx = Im(hᴴw).
    pub fn real_pair(h: &DVector<Complex64>) -> (DVector<f64>, DVector<f64>) {
        let m = h.len();
        let a = DVector::from_fn(2 * m, |i, _| if i < m { h[i].re } else { h[i - m].im });
        let b = DVector::from_fn(2 * m, |i, _| if i < m { -h[i].im } else { h[i - m].re });
        (a, b)
    }

    /// Place a per-stream lifted vector into the stacked all-streams
    /// coordinate space (stream-major blocks of equal size).
    pub fn embed(block: &DVector<f64>, stream: usize, n_streams: usize) -> DVector<f64> {
        let bs = block.len();
        let mut v = DVector::zeros(bs * n_streams);
        v.rows_mut(stream * bs, bs).copy_from(block);
        v
    }
}

// ---------------------------------------------------------------------------
// internal normalized model
// ---------------------------------------------------------------------------

/// The problem after variable/constraint scaling, with an optional γ
/// coordinate appended (epigraph mode and phase-1).
struct Normalized {
    n: usize,
    /// γ coordinate present (objective = −γ).
    has_gamma: bool,
    /// γ participates in the ball constraint (phase-1 trick that keeps the
    /// canonical start strictly interior).
    gamma_in_ball: bool,
    quad_w: Vec<f64>,
    quad_v: Vec<DVector<f64>>,
    lin: DVector<f64>,
    rows: Vec<DVector<f64>>,
    offs: Vec<f64>,
    /// Tikhonov weight pinning objective-flat directions (internal frame).
    reg: f64,
}

impl Normalized {
    fn constraint_value(&self, x: &DVector<f64>, gamma: f64, i: usize) -> f64 {
        // g_i ≤ 0 form: b̂_i (+ γ) − â_iᵀx
        self.offs[i] + if self.has_gamma { gamma } else { 0.0 } - self.rows[i].dot(x)
    }

    fn ball_value(&self, x: &DVector<f64>, gamma: f64) -> f64 {
        x.norm_squared() - 1.0 + if self.gamma_in_ball { gamma } else { 0.0 }
    }

    /// Objective (without regularization) and its x-gradient; the γ part of
    /// the gradient is the constant −1 when γ exists.
    fn objective(&self, x: &DVector<f64>, gamma: f64) -> f64 {
        if self.has_gamma {
            return -gamma;
        }
        let mut f = self.lin.dot(x);
        for (w, v) in self.quad_w.iter().zip(&self.quad_v) {
            let t = v.dot(x);
            f += w * t * t;
        }
        f
    }

    fn objective_grad_x(&self, x: &DVector<f64>, regularized: bool) -> DVector<f64> {
        if self.has_gamma {
            return if regularized {
                x * (2.0 * self.reg)
            } else {
                DVector::zeros(self.n)
            };
        }
        let mut g = self.lin.clone();
        for (w, v) in self.quad_w.iter().zip(&self.quad_v) {
            g.axpy(2.0 * w * v.dot(x), v, 1.0);
        }
        if regularized {
            g.axpy(2.0 * self.reg, x, 1.0);
        }
        g
    }
}

struct IpmOutcome {
    x: DVector<f64>,
    gamma: f64,
    iterations: usize,
    stationarity: f64,
    primal: f64,
    gap: f64,
    converged: bool,
    merit_monotone: bool,
    trace: Vec<TraceRow>,
}

/// Fraction-to-boundary coefficient.
const BOUNDARY: f64 = 0.99;
/// Centering parameter σ.
const SIGMA: f64 = 0.1;

/// Core primal-dual loop on a normalized problem. `x0`/`gamma0` must be
/// strictly interior.
fn run_ipm(p: &Normalized, x0: DVector<f64>, gamma0: f64, opts: &SolveOptions) -> IpmOutcome {
    let n = p.n;
    let m_aff = p.rows.len();
    let m_total = m_aff + 1; // + ball
    let mut x = x0;
    let mut gamma = gamma0;

    // slacks: s_i = −g_i > 0; duals start at 1/s (unit products)
    let slack = |x: &DVector<f64>, gamma: f64| -> (Vec<f64>, f64) {
        let aff: Vec<f64> = (0..m_aff).map(|i| -p.constraint_value(x, gamma, i)).collect();
        (aff, -p.ball_value(x, gamma))
    };
    let (s_aff0, s_ball0) = slack(&x, gamma);
    let mut lam: Vec<f64> = s_aff0.iter().map(|s| (1.0 / s).clamp(1e-8, 1e8)).collect();
    let mut lam_ball = (1.0 / s_ball0).clamp(1e-8, 1e8);

    // static low-rank columns: objective factors then affine normals; the
    // ball gradient column is appended fresh each iteration
    let r_static = p.quad_v.len() + m_aff;
    let mut cols: Vec<&DVector<f64>> = Vec::with_capacity(r_static);
    cols.extend(p.quad_v.iter());
    cols.extend(p.rows.iter());
    let mut gram_static = DMatrix::<f64>::zeros(r_static, r_static);
    for i in 0..r_static {
        for j in 0..=i {
            let v = cols[i].dot(cols[j]);
            gram_static[(i, j)] = v;
            gram_static[(j, i)] = v;
        }
    }

    let dual_residual = |x: &DVector<f64>,
                         lam: &[f64],
                         lam_ball: f64,
                         regularized: bool|
     -> (DVector<f64>, f64) {
        // returns (x-part, γ-part) of ∇f + Σλ∇g
        let mut r = p.objective_grad_x(x, regularized);
        let mut r_gamma = if p.has_gamma { -1.0 } else { 0.0 };
        for (i, l) in lam.iter().enumerate() {
            r.axpy(-l, &p.rows[i], 1.0);
            if p.has_gamma {
                r_gamma += l;
            }
        }
        r.axpy(2.0 * lam_ball, x, 1.0);
        if p.gamma_in_ball {
            r_gamma += lam_ball;
        }
        (r, r_gamma)
    };

    let mut merit_monotone = true;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let (s_aff, s_ball) = slack(&x, gamma);
        let eta: f64 = lam.iter().zip(&s_aff).map(|(l, s)| l * s).sum::<f64>() + lam_ball * s_ball;
        let (rd_x, rd_g) = dual_residual(&x, &lam, lam_ball, true);
        let stat = (rd_x.norm_squared() + rd_g * rd_g).sqrt();

        trace.push(TraceRow {
            iteration: iter,
            objective: p.objective(&x, gamma),
            stationarity: stat,
            surrogate_gap: eta,
            step: 0.0,
        });

        if stat <= opts.tol && eta <= opts.tol {
            converged = true;
            break;
        }

        // Newton system on the reduced (primal) variables:
        //   M dz = −∇f − Σ (μ/s_i)∇g_i,   M = ∇²f + 2λ_ball·E + Σ (λ_i/s_i)∇g_i∇g_iᵀ
        let mu = SIGMA * eta / m_total as f64;
        let alpha_diag = 2.0 * lam_ball + 2.0 * p.reg;

        // rhs
        let mut rhs_x = -p.objective_grad_x(&x, true);
        let mut rhs_g = if p.has_gamma { 1.0 } else { 0.0 };
        for i in 0..m_aff {
            let c = mu / s_aff[i];
            rhs_x.axpy(c, &p.rows[i], 1.0);
            if p.has_gamma {
                rhs_g -= c;
            }
        }
        {
            let c = mu / s_ball;
            rhs_x.axpy(-2.0 * c, &x, 1.0);
            if p.gamma_in_ball {
                rhs_g -= c;
            }
        }

        // capacitance factorization of M_xx = αI + U D Uᵀ
        let r_cols = r_static + 1;
        let mut d = Vec::with_capacity(r_cols);
        for w in &p.quad_w {
            d.push(2.0 * w);
        }
        for i in 0..m_aff {
            d.push(lam[i] / s_aff[i]);
        }
        d.push(4.0 * lam_ball / s_ball);

        let mut gram = DMatrix::<f64>::zeros(r_cols, r_cols);
        gram.view_mut((0, 0), (r_static, r_static)).copy_from(&gram_static);
        for i in 0..r_static {
            let v = cols[i].dot(&x);
            gram[(i, r_static)] = v;
            gram[(r_static, i)] = v;
        }
        gram[(r_static, r_static)] = x.norm_squared();

        let sqrt_d: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
        let mut a_cap = DMatrix::<f64>::identity(r_cols, r_cols);
        for i in 0..r_cols {
            for j in 0..r_cols {
                a_cap[(i, j)] += sqrt_d[i] * gram[(i, j)] * sqrt_d[j] / alpha_diag;
            }
        }
        let chol = match Cholesky::new(a_cap) {
            Some(c) => c,
            None => break, // numerically stuck; report what we have
        };

        let apply_m = |v: &DVector<f64>| -> DVector<f64> {
            let mut out = v * alpha_diag;
            for i in 0..r_static {
                out.axpy(d[i] * cols[i].dot(v), cols[i], 1.0);
            }
            out.axpy(d[r_static] * x.dot(v), &x, 1.0);
            out
        };
        let apply_minv_raw = |r: &DVector<f64>| -> DVector<f64> {
            // M_xx⁻¹ r = (r − U S A⁻¹ S Uᵀ r/α)/α
            let mut ut_r = DVector::<f64>::zeros(r_cols);
            for i in 0..r_static {
                ut_r[i] = cols[i].dot(r);
            }
            ut_r[r_static] = x.dot(r);
            for i in 0..r_cols {
                ut_r[i] *= sqrt_d[i];
            }
            let mut y: DVector<f64> = chol.solve(&ut_r);
            for i in 0..r_cols {
                y[i] *= sqrt_d[i];
            }
            let mut out = r.clone();
            for i in 0..r_static {
                out.axpy(-y[i] / alpha_diag, cols[i], 1.0);
            }
            out.axpy(-y[r_static] / alpha_diag, &x, 1.0);
            out /= alpha_diag;
            out
        };
        let apply_minv = |r: &DVector<f64>| -> DVector<f64> {
            // one refinement pass: the capacitance route loses digits when
            // the ball multiplier (hence the diagonal α) is nearly zero
            let first = apply_minv_raw(r);
            let resid = r - apply_m(&first);
            first + apply_minv_raw(&resid)
        };

        let (dx, dgamma) = if p.has_gamma || p.gamma_in_ball {
            // Schur complement on the γ coordinate
            let mut m_xg = DVector::<f64>::zeros(n);
            let mut m_gg = 0.0;
            if p.has_gamma {
                for i in 0..m_aff {
                    let c = lam[i] / s_aff[i];
                    m_xg.axpy(-c, &p.rows[i], 1.0);
                    m_gg += c;
                }
            }
            if p.gamma_in_ball {
                let c = lam_ball / s_ball;
                m_xg.axpy(2.0 * c, &x, 1.0);
                m_gg += c;
            }
            let minv_rhs = apply_minv(&rhs_x);
            let minv_mxg = apply_minv(&m_xg);
            let denom = m_gg - m_xg.dot(&minv_mxg);
            let dgamma = (rhs_g - m_xg.dot(&minv_rhs)) / denom;
            let mut reduced = rhs_x.clone();
            reduced.axpy(-dgamma, &m_xg, 1.0);
            (apply_minv(&reduced), dgamma)
        } else {
            (apply_minv(&rhs_x), 0.0)
        };

        // dual directions: dλ_i = −λ_i + μ/s_i + (λ_i/s_i)·(∇g_iᵀ dz)
        let gdot = |i: usize| -> f64 {
            let mut v = -p.rows[i].dot(&dx);
            if p.has_gamma {
                v += dgamma;
            }
            v
        };
        let dlam: Vec<f64> = (0..m_aff)
            .map(|i| -lam[i] + mu / s_aff[i] + lam[i] / s_aff[i] * gdot(i))
            .collect();
        let gball_dot = {
            let mut v = 2.0 * x.dot(&dx);
            if p.gamma_in_ball {
                v += dgamma;
            }
            v
        };
        let dlam_ball = -lam_ball + mu / s_ball + lam_ball / s_ball * gball_dot;

        // fraction-to-boundary on the duals, then interiority on the slacks
        let mut step = 1.0f64;
        for (l, dl) in lam.iter().zip(&dlam).chain(std::iter::once((&lam_ball, &dlam_ball))) {
            if *dl < 0.0 {
                step = step.min(-BOUNDARY * l / dl);
            }
        }
        let interior = |a: f64| -> bool {
            let xt = &x + &dx * a;
            let gt = gamma + dgamma * a;
            (0..m_aff).all(|i| p.constraint_value(&xt, gt, i) < 0.0) && p.ball_value(&xt, gt) < 0.0
        };
        let mut guard = 0;
        while !interior(step) && guard < 60 {
            step *= 0.5;
            guard += 1;
        }

        // backtrack on the fixed-μ KKT residual norm
        let merit = |x: &DVector<f64>, gamma: f64, lam: &[f64], lam_ball: f64| -> f64 {
            let (s_a, s_b) = slack(x, gamma);
            let (rd_x, rd_g) = dual_residual(x, lam, lam_ball, true);
            let mut sq = rd_x.norm_squared() + rd_g * rd_g;
            for i in 0..m_aff {
                let rc = lam[i] * s_a[i] - mu;
                sq += rc * rc;
            }
            let rcb = lam_ball * s_b - mu;
            sq += rcb * rcb;
            sq.sqrt()
        };
        let base = merit(&x, gamma, &lam, lam_ball);
        let mut accepted = false;
        let mut bt = 0;
        while bt < 40 {
            let xt = &x + &dx * step;
            let gt = gamma + dgamma * step;
            let lt: Vec<f64> = lam.iter().zip(&dlam).map(|(l, dl)| l + dl * step).collect();
            let ltb = lam_ball + dlam_ball * step;
            if merit(&xt, gt, &lt, ltb) <= (1.0 - 0.01 * step) * base {
                x = xt;
                gamma = gt;
                lam = lt;
                lam_ball = ltb;
                accepted = true;
                break;
            }
            step *= 0.5;
            bt += 1;
        }
        if !accepted {
            // take the tiny step anyway to avoid stalling, but record it
            merit_monotone = false;
            x += &dx * step;
            gamma += dgamma * step;
            for (l, dl) in lam.iter_mut().zip(&dlam) {
                *l += dl * step;
            }
            lam_ball += dlam_ball * step;
        }
        if let Some(last) = trace.last_mut() {
            last.step = step;
        }
    }

    let (s_aff, s_ball) = slack(&x, gamma);
    let eta: f64 = lam.iter().zip(&s_aff).map(|(l, s)| l * s).sum::<f64>() + lam_ball * s_ball;
    let (rd_x, rd_g) = dual_residual(&x, &lam, lam_ball, false);
    let stat = (rd_x.norm_squared() + rd_g * rd_g).sqrt();
    let primal = s_aff
        .iter()
        .chain(std::iter::once(&s_ball))
        .fold(0.0f64, |acc, s| acc.max(-s));
    IpmOutcome {
        x,
        gamma,
        iterations,
        stationarity: stat,
        primal,
        gap: eta,
        converged,
        merit_monotone,
        trace,
    }
}

// ---------------------------------------------------------------------------
// public driver: scaling, phase-1, certificates
// ---------------------------------------------------------------------------

fn validate(p: &ConvexSubproblem) -> Result<()> {
    if p.dim == 0 {
        return Err(Error::InvalidArgument("empty problem".into()));
    }
    if !(p.ball_radius_sq > 0.0) || !p.ball_radius_sq.is_finite() {
        return Err(Error::InvalidArgument(
            "ball radius (power budget) must be positive and finite".into(),
        ));
    }
    if p.linear.len() != p.dim {
        return Err(Error::InvalidArgument("linear term has wrong dimension".into()));
    }
    for t in &p.quad {
        if t.factor.len() != p.dim {
            return Err(Error::InvalidArgument("quadratic factor has wrong dimension".into()));
        }
        if !(t.weight >= 0.0) {
            return Err(Error::InvalidArgument(
                "quadratic weights must be non-negative (PSD objective)".into(),
            ));
        }
    }
    for c in &p.constraints {
        if c.normal.len() != p.dim {
            return Err(Error::InvalidArgument("constraint row has wrong dimension".into()));
        }
    }
    if p.epigraph && p.constraints.is_empty() {
        return Err(Error::InvalidArgument(
            "epigraph mode needs at least one constraint".into(),
        ));
    }
    Ok(())
}

/// Solve a subproblem to a KKT certificate. See the module docs for the
/// problem shape and method.
pub fn solve(p: &ConvexSubproblem, opts: &SolveOptions) -> Result<SolveCertificate> {
    validate(p)?;
    let sqrt_rho = p.ball_radius_sq.sqrt();

    // objective scaling to O(1) coefficients
    let mut f_scale = 0.0f64;
    for t in &p.quad {
        f_scale = f_scale.max(t.weight * t.factor.norm_squared() * p.ball_radius_sq);
    }
    f_scale = f_scale.max(p.linear.norm() * sqrt_rho).max(1e-300);

    // constraint scaling: per-row normally, a common scale in epigraph mode
    // so the shared γ means the same margin on every row
    let row_norms: Vec<f64> = p.constraints.iter().map(|c| c.normal.norm() * sqrt_rho).collect();
    let common = row_norms.iter().cloned().fold(0.0f64, f64::max).max(1e-300);

    let mut rows = Vec::with_capacity(p.constraints.len());
    let mut offs = Vec::with_capacity(p.constraints.len());
    for (c, rn) in p.constraints.iter().zip(&row_norms) {
        if *rn <= 1e-300 && !p.epigraph {
            // zero row: vacuous or plainly infeasible
            if c.offset <= 0.0 {
                continue;
            }
            return Ok(SolveCertificate {
                x: DVector::zeros(p.dim),
                objective: f64::NAN,
                epigraph_value: None,
                status: SolveStatus::Infeasible,
                iterations: 0,
                stationarity: 0.0,
                primal_residual: c.offset,
                complementarity: 0.0,
                merit_monotone: true,
                trace: Vec::new(),
            });
        }
        let s = if p.epigraph { common } else { rn.max(1e-300) };
        rows.push(&c.normal * (sqrt_rho / s));
        offs.push(c.offset / s);
    }

    let quad_w: Vec<f64> = p.quad.iter().map(|t| t.weight * p.ball_radius_sq / f_scale).collect();
    let quad_v: Vec<DVector<f64>> = p.quad.iter().map(|t| t.factor.clone()).collect();
    let lin = &p.linear * (sqrt_rho / f_scale);

    if p.epigraph {
        let model = Normalized {
            n: p.dim,
            has_gamma: true,
            gamma_in_ball: false,
            quad_w: Vec::new(),
            quad_v: Vec::new(),
            lin: DVector::zeros(p.dim),
            rows,
            offs,
            reg: 1e-10,
        };
        // always interior-startable: γ low enough that every slack exceeds 1
        let gamma0 = model.offs.iter().cloned().map(|b| -b).fold(0.0f64, f64::min) - 1.0;
        let out = run_ipm(&model, DVector::zeros(p.dim), gamma0, opts);
        let status = if out.converged {
            SolveStatus::Optimal
        } else {
            SolveStatus::MaxIterations
        };
        return Ok(SolveCertificate {
            x: &out.x * sqrt_rho,
            objective: out.gamma * common,
            epigraph_value: Some(out.gamma * common),
            status,
            iterations: out.iterations,
            stationarity: out.stationarity,
            primal_residual: out.primal,
            complementarity: out.gap,
            merit_monotone: out.merit_monotone,
            trace: out.trace,
        });
    }

    let model = Normalized {
        n: p.dim,
        has_gamma: false,
        gamma_in_ball: false,
        quad_w,
        quad_v,
        lin,
        rows,
        offs,
        reg: 1e-10,
    };

    // strict-interior start: the caller's warm start if it qualifies,
    // otherwise a phase-1 max-min-slack solve. A hint hugging the ball is
    // pulled radially inward first: a merely-technically-interior start
    // (slack ~1e-7) initializes the ball dual at 1/s ~ 1e7, and the first
    // fraction-to-boundary clamp then collapses that dual before x can
    // move — the surrogate gap dies and the iteration stalls at the hint.
    // 5% slack costs one radial re-extension and removes the failure mode.
    // If the pull-in breaks an affine row the hint is discarded instead.
    let margin = 1e-10;
    let min_ball_slack = 0.05;
    let warm = p
        .start
        .as_ref()
        .filter(|x0| x0.len() == p.dim)
        .map(|x0| {
            let mut x0 = x0 / sqrt_rho;
            let cap = 1.0 - min_ball_slack;
            let n2 = x0.norm_squared();
            if n2 > cap {
                x0 *= (cap / n2).sqrt();
            }
            x0
        })
        .filter(|x0| {
            model.ball_value(x0, 0.0) < -margin
                && (0..model.rows.len()).all(|i| model.constraint_value(x0, 0.0, i) < -margin)
        });

    let x0 = match warm {
        Some(x0) => x0,
        None => {
            if model.rows.is_empty() {
                DVector::zeros(p.dim)
            } else {
                // phase-1: maximize the minimum slack t with the ball
                // constraint relaxed to ‖x‖² + t ≤ 1 so that the canonical
                // start (0, very-negative t) is strictly interior
                let phase1 = Normalized {
                    n: p.dim,
                    has_gamma: true,
                    gamma_in_ball: true,
                    quad_w: Vec::new(),
                    quad_v: Vec::new(),
                    lin: DVector::zeros(p.dim),
                    rows: model.rows.clone(),
                    offs: model.offs.clone(),
                    reg: 1e-10,
                };
                let gamma0 = phase1.offs.iter().cloned().map(|b| -b).fold(0.0f64, f64::min) - 1.0;
                let p1 = run_ipm(&phase1, DVector::zeros(p.dim), gamma0, opts);
                if p1.gamma <= margin {
                    // no strictly feasible point exists (max-min slack ≤ 0)
                    return Ok(SolveCertificate {
                        x: &p1.x * sqrt_rho,
                        objective: f64::NAN,
                        epigraph_value: Some(p1.gamma * common),
                        status: SolveStatus::Infeasible,
                        iterations: p1.iterations,
                        stationarity: p1.stationarity,
                        primal_residual: -p1.gamma,
                        complementarity: p1.gap,
                        merit_monotone: p1.merit_monotone,
                        trace: p1.trace,
                    });
                }
                p1.x
            }
        }
    };

    let out = run_ipm(&model, x0, 0.0, opts);
    let status = if out.converged {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIterations
    };
    let x_orig = &out.x * sqrt_rho;
    // objective reported in original units, recomputed from original data
    let mut obj = p.linear.dot(&x_orig);
    for t in &p.quad {
        let v = t.factor.dot(&x_orig);
        obj += t.weight * v * v;
    }
    Ok(SolveCertificate {
        x: x_orig,
        objective: obj,
        epigraph_value: None,
        status,
        iterations: out.iterations,
        stationarity: out.stationarity,
        primal_residual: out.primal,
        complementarity: out.gap,
        merit_monotone: out.merit_monotone,
        trace: out.trace,
    })
}
