//! L1-penalized least squares by ADMM.
//!
//! The problem is stated on second-order statistics,
//!
//! ```text
//! minimize  ½ dᵀ R d − rᵀ d + κ ‖d‖₁        (R = XᵀX, r = Xᵀs)
//! ```
//!
//! which equals `½‖s − Xd‖² + κ‖d‖₁` up to the constant `½ sᵀs`. With the
//! ½ scaling, `d = 0` is optimal exactly when `κ ≥ ‖r‖_∞`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmOptions {
    /// Augmented-Lagrangian penalty relative to `trace(R)/dim`.
    pub rho: f64,
    /// Relative tolerance on primal and dual residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Re-solve on the detected support after convergence and keep the
    /// result if it satisfies the optimality conditions.
    pub polish: bool,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            tol: 1e-6,
            max_iter: 2000,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub weights: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Scaled dual variable, kept for warm starts.
    pub dual: DVector<f64>,
}

impl LassoSolution {
    fn zero(n: usize) -> Self {
        Self {
            weights: DVector::zeros(n),
            converged: true,
            iterations: 0,
            dual: DVector::zeros(n),
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// ADMM solver for a fixed `R`; the factorization of `R + ρI` is reused
/// across right-hand sides and penalty weights.
pub struct AdmmSolver {
    rxx: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    rho: f64,
    opts: AdmmOptions,
}

impl AdmmSolver {
    pub fn new(rxx: &DMatrix<f64>, opts: AdmmOptions) -> Result<Self> {
        if !(opts.rho > 0.0) || !(opts.tol > 0.0) {
            return Err(AadError::param("admm", "rho and tol must be positive"));
        }
        let n = rxx.nrows();
        let scale = rxx.trace() / n.max(1) as f64;
        let rho = opts.rho * if scale > 0.0 { scale } else { 1.0 };
        let shifted = rxx + DMatrix::identity(n, n) * rho;
        let factor = shifted
            .cholesky()
            .ok_or(AadError::NonFinite("ADMM system matrix"))?;
        Ok(Self {
            rxx: rxx.clone(),
            factor,
            rho,
            opts,
        })
    }

    pub fn dim(&self) -> usize {
        self.rxx.nrows()
    }

    /// Minimizes `½ dᵀRd − rᵀd + κ‖d‖₁`, optionally warm-started.
    pub fn solve(&self, rxs: &DVector<f64>, kappa: f64, warm: Option<&LassoSolution>) -> LassoSolution {
        let n = self.dim();
        if kappa >= rxs.amax() {
            return LassoSolution::zero(n);
        }
        let rho = self.rho;
        let (mut z, mut u) = match warm {
            Some(w) if w.weights.len() == n => (w.weights.clone(), w.dual.clone()),
            _ => (DVector::zeros(n), DVector::zeros(n)),
        };
        let thresh = kappa / rho;
        let tol = self.opts.tol;
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=self.opts.max_iter {
            iterations = it;
            let d = self.factor.solve(&(rxs + (&z - &u) * rho));
            let z_old = std::mem::replace(&mut z, d.clone());
            for (zi, ui) in z.iter_mut().zip(u.iter()) {
                *zi = soft_threshold(*zi + ui, thresh);
            }
            u += &d - &z;
            let primal = (&d - &z).norm();
            let dual = (&z - &z_old).norm();
            let scale = d.norm().max(z.norm()).max(u.norm()).max(f64::MIN_POSITIVE);
            if primal <= tol * scale && dual <= tol * scale {
                converged = true;
                break;
            }
        }
        let mut sol = LassoSolution {
            weights: z,
            converged,
            iterations,
            dual: u,
        };
        if self.opts.polish {
            if let Some(p) = self.polish(rxs, kappa, &sol.weights) {
                sol.weights = p;
            }
        }
        sol
    }

    /// Solves the stationarity equations on the support of `z` with its sign
    /// pattern and returns the result if it is a certified optimum.
    fn polish(&self, rxs: &DVector<f64>, kappa: f64, z: &DVector<f64>) -> Option<DVector<f64>> {
        let support: Vec<usize> = (0..z.len()).filter(|&i| z[i] != 0.0).collect();
        if support.is_empty() {
            return None;
        }
        let k = support.len();
        let r_ss = DMatrix::from_fn(k, k, |a, b| self.rxx[(support[a], support[b])]);
        let rhs = DVector::from_fn(k, |a, _| rxs[support[a]] - kappa * z[support[a]].signum());
        let chol = r_ss.cholesky()?;
        let d_s = chol.solve(&rhs);
        if support.iter().zip(d_s.iter()).any(|(&i, &v)| v == 0.0 || v.signum() != z[i].signum()) {
            return None;
        }
        let mut d = DVector::zeros(z.len());
        for (&i, &v) in support.iter().zip(d_s.iter()) {
            d[i] = v;
        }
        let grad = &self.rxx * &d - rxs;
        let slack = 1e-9 * rxs.amax().max(f64::MIN_POSITIVE);
        for i in 0..z.len() {
            if d[i] == 0.0 && grad[i].abs() > kappa + slack {
                return None;
            }
        }
        Some(d)
    }
}

/// `½ dᵀRd − rᵀd + ½ sᵀs + κ‖d‖₁`, i.e. `½‖s − Xd‖² + κ‖d‖₁`.
pub fn lasso_objective(
    rxx: &DMatrix<f64>,
    rxs: &DVector<f64>,
    target_energy: f64,
    d: &DVector<f64>,
    kappa: f64,
) -> f64 {
    0.5 * d.dot(&(rxx * d)) - rxs.dot(d) + 0.5 * target_energy + kappa * d.lp_norm(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn problem(seed: u64, rows: usize, cols: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
        let x = DMatrix::from_fn(rows, cols, |_, _| g());
        let s = DVector::from_fn(rows, |_, _| g());
        (x, s)
    }

    /// Proximal gradient with step 1/‖R‖₂, run until the iterates stop moving.
    fn ista(r: &DMatrix<f64>, b: &DVector<f64>, kappa: f64) -> DVector<f64> {
        let lip = r.clone().symmetric_eigenvalues().amax();
        let step = 1.0 / lip;
        let mut d = DVector::zeros(b.len());
        for _ in 0..200_000 {
            let g = r * &d - b;
            let next = (&d - g * step).map(|v| soft_threshold(v, kappa * step));
            let delta = (&next - &d).amax();
            d = next;
            if delta < 1e-15 {
                break;
            }
        }
        d
    }

    #[test]
    fn matches_ista_objective() {
        for seed in 0..5 {
            let (x, s) = problem(seed, 20, 8);
            let (r, b) = (x.tr_mul(&x), x.tr_mul(&s));
            let kappa = 0.1 * b.amax();
            let solver = AdmmSolver::new(&r, AdmmOptions::default()).unwrap();
            let sol = solver.solve(&b, kappa, None);
            assert!(sol.converged);
            let oracle = ista(&r, &b, kappa);
            let ss = s.norm_squared();
            let f_admm = lasso_objective(&r, &b, ss, &sol.weights, kappa);
            let f_ista = lasso_objective(&r, &b, ss, &oracle, kappa);
            assert!((f_admm - f_ista).abs() < 1e-6 * f_ista.abs().max(1.0), "{f_admm} vs {f_ista}");
        }
    }

    #[test]
    fn threshold_gives_exact_zero() {
        let (x, s) = problem(9, 30, 6);
        let (r, b) = (x.tr_mul(&x), x.tr_mul(&s));
        let solver = AdmmSolver::new(&r, AdmmOptions::default()).unwrap();
        for lam in [1.0, 1.5, 10.0] {
            let sol = solver.solve(&b, lam * b.amax(), None);
            assert!(sol.weights.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn unpolished_admm_still_converges() {
        let (x, s) = problem(4, 40, 10);
        let (r, b) = (x.tr_mul(&x), x.tr_mul(&s));
        let kappa = 0.05 * b.amax();
        let opts = AdmmOptions {
            polish: false,
            ..Default::default()
        };
        let sol = AdmmSolver::new(&r, opts).unwrap().solve(&b, kappa, None);
        assert!(sol.converged && sol.iterations > 1);
        let oracle = ista(&r, &b, kappa);
        assert!((&sol.weights - &oracle).amax() < 1e-4 * oracle.amax());
    }

    #[test]
    fn warm_start_needs_fewer_iterations() {
        let (x, s) = problem(2, 60, 12);
        let (r, b) = (x.tr_mul(&x), x.tr_mul(&s));
        let opts = AdmmOptions {
            polish: false,
            ..Default::default()
        };
        let solver = AdmmSolver::new(&r, opts).unwrap();
        let k1 = 0.10 * b.amax();
        let k2 = 0.09 * b.amax();
        let first = solver.solve(&b, k1, None);
        let cold = solver.solve(&b, k2, None);
        let warm = solver.solve(&b, k2, Some(&first));
        assert!(warm.iterations < cold.iterations, "{} vs {}", warm.iterations, cold.iterations);
    }
}
