//! The l1-penalised D-trace estimator of `S1^{-1} - S2^{-1}`.
//!
//! Loss:
//!
//! ```text
//! L(D) = 1/4 (<S2 D, D S1> + <S1 D, D S2>) - <D, S2 - S1>
//! ```
//!
//! with gradient `(S2 D S1 + S1 D S2)/2 - (S2 - S1)`, which vanishes at
//! `D = S1^{-1} - S2^{-1}`. The penalised problem `L(D) + tau * |D|_1` is
//! solved by consensus ADMM. `L` is split into its two asymmetric halves
//! `1/4 tr(D' S1 D S2)` and `1/4 tr(D' S2 D S1)`. Each half is diagonal in a
//! fixed eigenbasis pair, so its subproblem has a closed form. The iterates
//! keep the second copy equal to the transpose of the first, so only one
//! subproblem is solved per iteration.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SddError};
use crate::realspace::{project_block_structure, ExpandedMatrix};

/// Entries below this magnitude are set to exactly zero in solver output.
pub const HARD_ZERO: f64 = 1e-10;

/// Smallest eigenvalue accepted for a positive semidefinite input.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Initial augmented-Lagrangian parameter.
    pub rho: f64,
    pub max_iters: usize,
    /// Max-norm of `D - Z`.
    pub primal_tol: f64,
    /// Max-norm of `rho (Z_k - Z_{k-1})`.
    pub dual_tol: f64,
    /// Return `(D + D')/2` after block projection.
    pub symmetrize: bool,
    /// Rebalance `rho` from the residual ratio during the first half of the run.
    pub adaptive_rho: bool,
    /// Keep the penalised objective at every iterate (diagnostics only).
    pub record_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 2000,
            primal_tol: 1e-7,
            dual_tol: 1e-7,
            symmetrize: true,
            adaptive_rho: true,
            record_objective: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(SddError::Argument(format!("rho must be positive, got {}", self.rho)));
        }
        if self.max_iters < 1 {
            return Err(SddError::Argument("max_iters must be at least 1".into()));
        }
        if !(self.primal_tol > 0.0 && self.dual_tol > 0.0) {
            return Err(SddError::Argument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub final_rho: f64,
    /// Penalised objective at each sparse iterate, when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

/// An estimate of the difference of inverse spectral densities.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceEstimate {
    pub delta_expanded: ExpandedMatrix,
    pub delta_complex: DMatrix<Complex64>,
    /// Penalty (or threshold) that produced this estimate.
    pub tau: Option<f64>,
    /// Present for iterative solves only.
    pub diagnostics: Option<SolverDiagnostics>,
}

impl DifferenceEstimate {
    pub fn new(
        delta_expanded: ExpandedMatrix,
        tau: Option<f64>,
        diagnostics: Option<SolverDiagnostics>,
    ) -> Self {
        let delta_complex = delta_expanded.to_complex();
        Self {
            delta_expanded,
            delta_complex,
            tau,
            diagnostics,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.delta_expanded.matrix()
    }

    pub fn p(&self) -> usize {
        self.delta_expanded.p()
    }

    pub fn converged(&self) -> bool {
        self.diagnostics.as_ref().is_none_or(|d| d.converged)
    }

    pub fn iterations(&self) -> usize {
        self.diagnostics.as_ref().map_or(0, |d| d.iterations)
    }

    pub fn kkt_residual(&self) -> Option<f64> {
        self.diagnostics.as_ref().map(|d| d.kkt_residual)
    }

    /// Number of nonzero entries of the expanded matrix.
    pub fn count_nonzeros(&self) -> usize {
        self.matrix().iter().filter(|v| **v != 0.0).count()
    }
}

fn check_square_pair(d: &DMatrix<f64>, s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<()> {
    let n = s1.nrows();
    let ok = s1.is_square() && s2.shape() == (n, n) && d.shape() == (n, n);
    if ok {
        Ok(())
    } else {
        Err(SddError::Argument(format!(
            "dimension mismatch: D {:?}, S1 {:?}, S2 {:?}",
            d.shape(),
            s1.shape(),
            s2.shape()
        )))
    }
}

/// `<X, Y> = tr(X' Y)`.
fn inner(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

pub fn dtrace_loss(d: &DMatrix<f64>, s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    check_square_pair(d, s1, s2)?;
    let quad = inner(&(s2 * d), &(d * s1)) + inner(&(s1 * d), &(d * s2));
    Ok(0.25 * quad - inner(d, &(s2 - s1)))
}

pub fn dtrace_gradient(
    d: &DMatrix<f64>,
    s1: &DMatrix<f64>,
    s2: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_square_pair(d, s1, s2)?;
    Ok((s2 * d * s1 + s1 * d * s2) * 0.5 - (s2 - s1))
}

/// `L(D) + tau * sum |D_ij|`.
pub fn penalized_objective(
    d: &DMatrix<f64>,
    s1: &DMatrix<f64>,
    s2: &DMatrix<f64>,
    tau: f64,
) -> Result<f64> {
    Ok(dtrace_loss(d, s1, s2)? + tau * d.iter().map(|v| v.abs()).sum::<f64>())
}

fn kkt_from_gradient(d: &DMatrix<f64>, g: &DMatrix<f64>, tau: f64) -> f64 {
    d.iter()
        .zip(g.iter())
        .map(|(&x, &gx)| {
            if x != 0.0 {
                (gx + tau * x.signum()).abs()
            } else {
                (gx.abs() - tau).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Max-norm violation of the subgradient optimality conditions at `D`.
pub fn kkt_residual(
    d: &DMatrix<f64>,
    s1: &DMatrix<f64>,
    s2: &DMatrix<f64>,
    tau: f64,
) -> Result<f64> {
    let g = dtrace_gradient(d, s1, s2)?;
    Ok(kkt_from_gradient(d, &g, tau))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// ADMM iterate carried between solves on the same problem.
#[derive(Debug, Clone)]
pub struct AdmmState {
    z: DMatrix<f64>,
    // scaled dual for the first copy; the second copy's dual is its transpose
    w: DMatrix<f64>,
    rho: f64,
}

/// Precomputed eigendecompositions of one `(S1, S2)` pair.
#[derive(Debug, Clone)]
pub struct DtraceProblem {
    s1: DMatrix<f64>,
    s2: DMatrix<f64>,
    u: DMatrix<f64>,
    ut: DMatrix<f64>,
    vecs2: DMatrix<f64>,
    vecs2_t: DMatrix<f64>,
    eig1: DVector<f64>,
    eig2: DVector<f64>,
    p: usize,
}

fn checked_symmetric(s: &ExpandedMatrix, name: &str) -> Result<(DMatrix<f64>, SymmetricEigen<f64, nalgebra::Dyn>)> {
    let m = s.matrix();
    let scale = max_abs(m).max(1.0);
    let asym = max_abs(&(m - m.transpose()));
    if asym > 1e-8 * scale {
        return Err(SddError::Argument(format!(
            "{name} is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL {
        return Err(SddError::NotPsd { min_eigenvalue: min });
    }
    Ok((sym, eig))
}

impl DtraceProblem {
    pub fn new(s1: &ExpandedMatrix, s2: &ExpandedMatrix) -> Result<Self> {
        if s1.dim() != s2.dim() {
            return Err(SddError::Argument(format!(
                "S1 is {0}x{0} but S2 is {1}x{1}",
                s1.dim(),
                s2.dim()
            )));
        }
        let (m1, e1) = checked_symmetric(s1, "S1")?;
        let (m2, e2) = checked_symmetric(s2, "S2")?;
        Ok(Self {
            ut: e1.eigenvectors.transpose(),
            u: e1.eigenvectors,
            vecs2_t: e2.eigenvectors.transpose(),
            vecs2: e2.eigenvectors,
            eig1: e1.eigenvalues,
            eig2: e2.eigenvalues,
            s1: m1,
            s2: m2,
            p: s1.p(),
        })
    }

    pub fn s1(&self) -> &DMatrix<f64> {
        &self.s1
    }

    pub fn s2(&self) -> &DMatrix<f64> {
        &self.s2
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `max |S1 - S2|`, the smallest penalty at which zero is optimal.
    pub fn zero_penalty(&self) -> f64 {
        max_abs(&(&self.s1 - &self.s2))
    }

    pub fn gradient(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let m = &self.s1 * d * &self.s2;
        let mt = &self.s2 * d * &self.s1;
        (m + mt) * 0.5 - (&self.s2 - &self.s1)
    }

    pub fn objective(&self, d: &DMatrix<f64>, tau: f64) -> f64 {
        // loss = 1/2 <D, Hess(D)> - <D, S2 - S1> on any D
        let hd = (&self.s1 * d * &self.s2 + &self.s2 * d * &self.s1) * 0.5;
        0.5 * inner(d, &hd) - inner(d, &(&self.s2 - &self.s1))
            + tau * d.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn zero_estimate(&self, tau: f64, warm_rho: f64) -> (DifferenceEstimate, AdmmState) {
        let dim = 2 * self.p;
        let diag = SolverDiagnostics {
            iterations: 0,
            converged: true,
            kkt_residual: kkt_from_gradient(&DMatrix::zeros(dim, dim), &(&self.s1 - &self.s2), tau),
            primal_residual: 0.0,
            dual_residual: 0.0,
            final_rho: warm_rho,
            objective_trace: Vec::new(),
        };
        let est = DifferenceEstimate::new(ExpandedMatrix::zeros(self.p), Some(tau), Some(diag));
        let state = AdmmState {
            z: DMatrix::zeros(dim, dim),
            w: DMatrix::zeros(dim, dim),
            rho: warm_rho,
        };
        (est, state)
    }

    /// Solves the penalised problem at `tau`, optionally starting from a
    /// previous iterate (e.g. the neighbouring point on a penalty path).
    pub fn solve(
        &self,
        tau: f64,
        opts: &SolverOptions,
        warm: Option<&AdmmState>,
    ) -> Result<(DifferenceEstimate, AdmmState)> {
        opts.validate()?;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(SddError::Argument(format!("tau must be positive, got {tau}")));
        }
        let dim = 2 * self.p;
        // zero satisfies the optimality conditions exactly
        if self.zero_penalty() <= tau {
            return Ok(self.zero_estimate(tau, warm.map_or(opts.rho, |w| w.rho)));
        }

        let half_c = (&self.s2 - &self.s1) * 0.5;
        let (mut z, mut w, mut rho) = match warm {
            Some(s) if s.z.nrows() == dim => (s.z.clone(), s.w.clone(), s.rho),
            _ => (DMatrix::zeros(dim, dim), DMatrix::zeros(dim, dim), opts.rho),
        };
        let mut denom = self.denominators(rho);

        let mut rhs = DMatrix::zeros(dim, dim);
        let mut tmp = DMatrix::zeros(dim, dim);
        let mut coef = DMatrix::zeros(dim, dim);
        let mut d1 = DMatrix::zeros(dim, dim);
        let mut z_prev = DMatrix::zeros(dim, dim);
        let mut trace = Vec::new();

        let mut iterations = 0;
        let mut converged = false;
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        let adapt_until = opts.max_iters / 2;

        while iterations < opts.max_iters {
            iterations += 1;

            // D1 = argmin 1/4 tr(D' S1 D S2) - 1/2 <D, S2 - S1> + rho/2 |D - Z + W|^2
            rhs.copy_from(&half_c);
            rhs += (&z - &w) * rho;
            self.ut.mul_to(&rhs, &mut tmp);
            tmp.mul_to(&self.vecs2, &mut coef);
            coef.component_div_assign(&denom);
            self.u.mul_to(&coef, &mut tmp);
            tmp.mul_to(&self.vecs2_t, &mut d1);

            // Z = soft(avg of both copies, tau / (2 rho))
            std::mem::swap(&mut z_prev, &mut z);
            let thresh = tau / (2.0 * rho);
            for j in 0..dim {
                for i in 0..dim {
                    let a = 0.5 * (d1[(i, j)] + w[(i, j)] + d1[(j, i)] + w[(j, i)]);
                    z[(i, j)] = soft_threshold(a, thresh);
                }
            }

            primal = 0.0;
            for ((wv, dv), zv) in w.iter_mut().zip(d1.iter()).zip(z.iter()) {
                let r = dv - zv;
                *wv += r;
                primal = primal.max(r.abs());
            }
            dual = rho
                * z.iter()
                    .zip(z_prev.iter())
                    .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));

            if opts.record_objective {
                trace.push(self.objective(&z, tau));
            }

            if primal <= opts.primal_tol && dual <= opts.dual_tol {
                converged = true;
                break;
            }

            if opts.adaptive_rho && iterations <= adapt_until && iterations % 10 == 0 {
                let factor = if primal > 10.0 * dual {
                    2.0
                } else if dual > 10.0 * primal {
                    0.5
                } else {
                    1.0
                };
                if factor != 1.0 {
                    rho *= factor;
                    w /= factor;
                    denom = self.denominators(rho);
                }
            }
        }

        let state = AdmmState {
            z: z.clone(),
            w,
            rho,
        };
        let delta = self.finalize(z, opts.symmetrize)?;
        let kkt = kkt_from_gradient(delta.matrix(), &self.gradient(delta.matrix()), tau);
        let diag = SolverDiagnostics {
            iterations,
            converged,
            kkt_residual: kkt,
            primal_residual: primal,
            dual_residual: dual,
            final_rho: rho,
            objective_trace: trace,
        };
        Ok((DifferenceEstimate::new(delta, Some(tau), Some(diag)), state))
    }

    fn denominators(&self, rho: f64) -> DMatrix<f64> {
        let dim = 2 * self.p;
        DMatrix::from_fn(dim, dim, |i, j| 0.5 * self.eig1[i] * self.eig2[j] + rho)
    }

    fn finalize(&self, z: DMatrix<f64>, symmetrize: bool) -> Result<ExpandedMatrix> {
        let projected = project_block_structure(&z)?;
        let mut m = projected.into_matrix();
        if symmetrize {
            m = (&m + m.transpose()) * 0.5;
        }
        m.iter_mut().for_each(|v| {
            if v.abs() < HARD_ZERO {
                *v = 0.0
            }
        });
        project_block_structure(&m)
    }
}

/// Minimises `L(D) + tau |D|_1` from a cold start.
pub fn solve_sdd(
    s1: &ExpandedMatrix,
    s2: &ExpandedMatrix,
    tau: f64,
    opts: &SolverOptions,
) -> Result<DifferenceEstimate> {
    Ok(DtraceProblem::new(s1, s2)?.solve(tau, opts, None)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realspace::expand;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn hermitian_pd(seed: u64, p: usize) -> DMatrix<Complex64> {
        // deterministic LCG fill; well-conditioned via diagonal shift
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let g = DMatrix::from_fn(p, p, |_, _| c(next(), next()));
        &g * g.adjoint() + DMatrix::identity(p, p) * c(p as f64 * 0.5, 0.0)
    }

    #[test]
    fn loss_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let z = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(dtrace_loss(&z, &i2, &i2).unwrap(), 0.0);
        assert_eq!(dtrace_loss(&i2, &i2, &i2).unwrap(), 1.0);
        assert!(dtrace_loss(&z, &DMatrix::identity(3, 3), &i2).is_err());
    }

    #[test]
    fn gradient_at_zero_is_s1_minus_s2() {
        let s1 = expand(&hermitian_pd(1, 3)).into_matrix();
        let s2 = expand(&hermitian_pd(2, 3)).into_matrix();
        let g = dtrace_gradient(&DMatrix::zeros(6, 6), &s1, &s2).unwrap();
        assert!(max_abs(&(g - (&s1 - &s2))) < 1e-14);
    }

    #[test]
    fn equal_inputs_give_zero() {
        let s = expand(&hermitian_pd(3, 3));
        let est = solve_sdd(&s, &s, 0.01, &SolverOptions::default()).unwrap();
        assert_eq!(est.count_nonzeros(), 0);
        assert!(est.converged());
    }

    #[test]
    fn zero_penalty_shortcut_certifies() {
        let s1 = expand(&hermitian_pd(4, 2));
        let s2 = expand(&hermitian_pd(5, 2));
        let tau = max_abs(&(s1.matrix() - s2.matrix()));
        let est = solve_sdd(&s1, &s2, tau, &SolverOptions::default()).unwrap();
        assert_eq!(est.count_nonzeros(), 0);
        assert_eq!(est.kkt_residual(), Some(0.0));
        let k = kkt_residual(est.matrix(), s1.matrix(), s2.matrix(), tau).unwrap();
        assert_eq!(k, 0.0);
    }

    #[test]
    fn small_penalty_matches_inverse_difference() {
        let f1 = hermitian_pd(6, 3);
        let f2 = hermitian_pd(7, 3);
        let s1 = expand(&f1);
        let s2 = expand(&f2);
        let est = solve_sdd(&s1, &s2, 1e-8, &SolverOptions::default()).unwrap();
        let truth = s1.matrix().clone().try_inverse().unwrap() - s2.matrix().clone().try_inverse().unwrap();
        let err = (est.matrix() - truth).norm();
        assert!(err < 1e-4, "frobenius error {err}");
        assert!(est.converged());
        let kkt = est.kkt_residual().unwrap();
        assert!(kkt <= 1e-6, "kkt {kkt}");
    }

    #[test]
    fn rejects_indefinite_input() {
        let mut f = DMatrix::<Complex64>::identity(2, 2);
        f[(1, 1)] = c(-1.0, 0.0);
        let s = expand(&f);
        let id = ExpandedMatrix::identity(2);
        assert!(matches!(
            solve_sdd(&s, &id, 0.1, &SolverOptions::default()),
            Err(SddError::NotPsd { .. })
        ));
    }

    #[test]
    fn rejects_bad_options() {
        let id = ExpandedMatrix::identity(2);
        let opts = SolverOptions {
            max_iters: 0,
            ..Default::default()
        };
        assert!(solve_sdd(&id, &id, 0.1, &opts).is_err());
        assert!(solve_sdd(&id, &id, 0.0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let s1 = expand(&hermitian_pd(8, 3));
        let s2 = expand(&hermitian_pd(9, 3));
        let opts = SolverOptions {
            max_iters: 2,
            ..Default::default()
        };
        let est = solve_sdd(&s1, &s2, 1e-3, &opts).unwrap();
        assert!(!est.converged());
        assert_eq!(est.iterations(), 2);
        assert!(est.kkt_residual().unwrap() > 0.0);
    }
}
