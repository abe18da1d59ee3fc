//! Weighted ℓ1 minimisation under an ℓ2 residual budget:
//!
//! ```text
//! minimise  λ‖x_T‖₁ + ‖x_{T^c}‖₁   subject to   ‖y − Φx‖₂ ≤ ξ
//! ```
//!
//! Solved by ADMM on the split `z = Φx`, `u = x`: the `z` step projects onto the
//! ball of radius `ξ` around `y`, the `u` step is a weighted soft-threshold and
//! the `x` step solves `(Φ'Φ + I)x = b`. The ADMM iterate is then polished: on
//! its support and sign pattern the restricted problem has a closed-form
//! solution, and when that solution satisfies the optimality conditions the
//! result is exact rather than approximate.

use ndarray::{Array1, ArrayView1, Zip};

use super::ls::{back_substitute, forward_substitute_transpose, well_conditioned};
use super::SupportSet;
use crate::error::{Error, Result};
use crate::linalg::svd::householder_qr;
use crate::operator::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Relative slack on the residual budget accepted as feasible.
    pub feas_slack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 2000,
            rel_tol: 1e-6,
            feas_slack: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.rel_tol > 0.0) || !(self.feas_slack > 0.0) {
            return Err(Error::Config(
                "solver max_iters, rel_tol and feas_slack must be positive".into(),
            ));
        }
        Ok(())
    }
}

pub struct L1Problem<'a> {
    pub phi: &'a dyn LinearOperator,
    pub y: ArrayView1<'a, f64>,
    pub xi: f64,
    pub weight_set: SupportSet,
    pub lambda: f64,
}

impl<'a> L1Problem<'a> {
    /// Unweighted problem (`λ = 1`).
    pub fn plain(phi: &'a dyn LinearOperator, y: ArrayView1<'a, f64>, xi: f64) -> Self {
        L1Problem {
            phi,
            y,
            xi,
            weight_set: SupportSet::empty(),
            lambda: 1.0,
        }
    }

    pub fn weighted(
        phi: &'a dyn LinearOperator,
        y: ArrayView1<'a, f64>,
        xi: f64,
        weight_set: SupportSet,
        lambda: f64,
    ) -> Self {
        L1Problem {
            phi,
            y,
            xi,
            weight_set,
            lambda,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.y.len() != self.phi.rows() {
            return Err(Error::dims(self.phi.rows(), self.y.len()));
        }
        if !(self.xi >= 0.0) {
            return Err(Error::OutOfRange(format!("residual budget {} < 0", self.xi)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::OutOfRange(format!("weight {} outside [0, 1]", self.lambda)));
        }
        if self.weight_set.indices().last().is_some_and(|&i| i >= self.phi.cols()) {
            return Err(Error::OutOfRange("weight set outside operator".into()));
        }
        Ok(())
    }

    /// Per-coordinate weights: `λ` on the weight set, 1 elsewhere.
    pub fn weights(&self) -> Array1<f64> {
        let mut w = Array1::from_elem(self.phi.cols(), 1.0);
        if self.lambda != 1.0 {
            for i in self.weight_set.iter() {
                w[i] = self.lambda;
            }
        }
        w
    }

    pub fn objective(&self, x: ArrayView1<'_, f64>) -> f64 {
        weighted_l1(&self.weights(), x)
    }

    pub fn residual_norm(&self, x: ArrayView1<'_, f64>) -> f64 {
        let r = &self.y - &self.phi.apply(x);
        r.dot(&r).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct L1Solution {
    pub x: Array1<f64>,
    /// False when ADMM ran out of iterations without a certified polish, or when
    /// the returned point violates the residual budget (e.g. `ξ` below the
    /// distance from `y` to `range(Φ)`).
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
}

fn weighted_l1(w: &Array1<f64>, x: ArrayView1<'_, f64>) -> f64 {
    w.iter().zip(x.iter()).map(|(w, x)| w * x.abs()).sum()
}

pub fn solve_weighted_l1(prob: &L1Problem<'_>, cfg: &SolverConfig) -> Result<L1Solution> {
    solve_weighted_l1_from(prob, cfg, None)
}

/// As [`solve_weighted_l1`], starting ADMM from `x0`.
pub fn solve_weighted_l1_from(
    prob: &L1Problem<'_>,
    cfg: &SolverConfig,
    x0: Option<ArrayView1<'_, f64>>,
) -> Result<L1Solution> {
    prob.validate()?;
    cfg.validate()?;
    let n = prob.phi.cols();
    let y_norm = prob.y.dot(&prob.y).sqrt();

    if prob.xi >= y_norm {
        return Ok(L1Solution {
            x: Array1::zeros(n),
            converged: true,
            iterations: 0,
            residual_norm: y_norm,
        });
    }

    let w = prob.weights();
    let admm = run_admm(prob, cfg, &w, y_norm, x0);

    let feasible_limit = prob.xi * (1.0 + cfg.feas_slack);
    let mut best: Option<(Array1<f64>, bool)> = None;
    let mut tried: Vec<SupportSet> = Vec::new();
    for candidate in [&admm.u, &admm.x] {
        let peak = candidate.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if peak == 0.0 {
            continue;
        }
        for rel in [1e-9, 1e-7, 1e-5, 1e-3, 1e-2] {
            let support: SupportSet = candidate
                .iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > rel * peak)
                .map(|(i, _)| i)
                .collect();
            if tried.contains(&support) {
                continue;
            }
            tried.push(support.clone());
            if let Some((x, certified)) = polish(prob, &w, candidate, &support, cfg) {
                if certified {
                    let residual_norm = prob.residual_norm(x.view());
                    return Ok(L1Solution {
                        x,
                        converged: true,
                        iterations: admm.iterations,
                        residual_norm,
                    });
                }
                let better = match &best {
                    Some((b, _)) => weighted_l1(&w, x.view()) < weighted_l1(&w, b.view()),
                    None => true,
                };
                if better {
                    best = Some((x, false));
                }
            }
        }
    }

    let u_res = prob.residual_norm(admm.u.view());
    let admm_feasible = u_res <= feasible_limit;
    let (x, converged) = match best {
        Some((x, _))
            if !admm_feasible || weighted_l1(&w, x.view()) <= weighted_l1(&w, admm.u.view()) =>
        {
            (x, admm.converged)
        }
        _ => (admm.u, admm.converged && admm_feasible),
    };
    let residual_norm = prob.residual_norm(x.view());
    Ok(L1Solution {
        converged: converged && residual_norm <= feasible_limit,
        x,
        iterations: admm.iterations,
        residual_norm,
    })
}

struct AdmmOutput {
    x: Array1<f64>,
    u: Array1<f64>,
    converged: bool,
    iterations: usize,
}

fn project_ball(v: &mut Array1<f64>, center: ArrayView1<'_, f64>, radius: f64) {
    let mut diff = &*v - &center;
    let norm = diff.dot(&diff).sqrt();
    if norm > radius {
        diff.mapv_inplace(|d| d * (radius / norm));
        *v = &center + &diff;
    }
}

fn soft_threshold(v: &Array1<f64>, w: &Array1<f64>, scale: f64) -> Array1<f64> {
    Zip::from(v).and(w).map_collect(|&x, &w| {
        let t = w * scale;
        if x > t {
            x - t
        } else if x < -t {
            x + t
        } else {
            0.0
        }
    })
}

fn run_admm(
    prob: &L1Problem<'_>,
    cfg: &SolverConfig,
    w: &Array1<f64>,
    y_norm: f64,
    x0: Option<ArrayView1<'_, f64>>,
) -> AdmmOutput {
    let phi = prob.phi;
    let n = phi.cols();
    let m = phi.rows();
    let gram = phi.shifted_gram_solver();

    // Penalty scaled so the soft-threshold level is comparable to entry size.
    let mut rho = (m as f64).sqrt() / y_norm.max(f64::MIN_POSITIVE);

    let mut x = match x0 {
        Some(v) if v.len() == n => v.to_owned(),
        _ => Array1::zeros(n),
    };
    let mut u = x.clone();
    let mut z = phi.apply(x.view());
    project_ball(&mut z, prob.y, prob.xi);
    let mut d1 = Array1::<f64>::zeros(m);
    let mut d2 = Array1::<f64>::zeros(n);

    let abs_tol = 1e-3 * cfg.rel_tol * y_norm;
    let dim_scale = ((m + n) as f64).sqrt();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iters {
        iterations = it;
        let mut rhs = phi.apply_adjoint((&z - &d1).view());
        rhs += &(&u - &d2);
        x = gram.solve(rhs.view());
        let ax = phi.apply(x.view());

        let z_old = z.clone();
        z = &ax + &d1;
        project_ball(&mut z, prob.y, prob.xi);

        let u_old = u.clone();
        u = soft_threshold(&(&x + &d2), w, 1.0 / rho);

        let r1 = &ax - &z;
        let r2 = &x - &u;
        d1 += &r1;
        d2 += &r2;

        let primal = (r1.dot(&r1) + r2.dot(&r2)).sqrt();
        let dz = phi.apply_adjoint((&z - &z_old).view());
        let du = &u - &u_old;
        let dual = rho * (dz.dot(&dz) + du.dot(&du)).sqrt();

        let primal_scale = (ax.dot(&ax) + x.dot(&x))
            .sqrt()
            .max((z.dot(&z) + u.dot(&u)).sqrt());
        let atd = phi.apply_adjoint(d1.view());
        let dual_scale = rho * (atd.dot(&atd) + d2.dot(&d2)).sqrt();
        let eps_pri = dim_scale * abs_tol + cfg.rel_tol * primal_scale;
        let eps_dual = dim_scale * abs_tol + cfg.rel_tol * dual_scale;
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }

        if it % 10 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                d1.mapv_inplace(|v| v * 0.5);
                d2.mapv_inplace(|v| v * 0.5);
            } else if dual > 10.0 * primal {
                rho *= 0.5;
                d1.mapv_inplace(|v| v * 2.0);
                d2.mapv_inplace(|v| v * 2.0);
            }
        }
    }
    AdmmOutput {
        x,
        u,
        converged,
        iterations,
    }
}

/// Closed-form solution of the problem restricted to `support` with the sign
/// pattern of `guide`. Returns the point and whether it passed the full
/// optimality check (sign consistency and dual feasibility off the support).
fn polish(
    prob: &L1Problem<'_>,
    w: &Array1<f64>,
    guide: &Array1<f64>,
    support: &SupportSet,
    cfg: &SolverConfig,
) -> Option<(Array1<f64>, bool)> {
    let phi = prob.phi;
    let k = support.len();
    if k == 0 || k > phi.rows() {
        return None;
    }
    let a = phi.columns(support.indices());
    if !well_conditioned(&a) {
        return None;
    }
    let (q, r) = householder_qr(a.view());
    let qty = q.t().dot(&prob.y);
    let x_ls = back_substitute(&r, qty);
    let resid_ls = &prob.y - &a.dot(&x_ls);
    let resid_ls_sq = resid_ls.dot(&resid_ls);
    let limit = prob.xi * (1.0 + cfg.feas_slack);
    if resid_ls_sq.sqrt() > limit {
        return None;
    }

    let signs: Vec<f64> = support.iter().map(|i| guide[i].signum()).collect();
    let c: Array1<f64> = support
        .iter()
        .zip(&signs)
        .map(|(i, s)| w[i] * s)
        .collect();
    // h = (A'A)^{-1} c via R'R.
    let rt_c = forward_substitute_transpose(&r, c.clone());
    let c_h = rt_c.dot(&rt_c);
    let h = back_substitute(&r, rt_c);

    let budget = prob.xi * prob.xi - resid_ls_sq;
    let (coeffs, inv_mu) = if c_h <= f64::MIN_POSITIVE || budget <= 0.0 {
        (x_ls, 0.0)
    } else {
        let inv_mu = (budget / c_h).sqrt();
        (&x_ls - &(&h * inv_mu), inv_mu)
    };

    let mut x = Array1::zeros(phi.cols());
    for (kk, i) in support.iter().enumerate() {
        x[i] = coeffs[kk];
    }

    let scale = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let signs_ok = support
        .iter()
        .zip(coeffs.iter().zip(&signs))
        .all(|(i, (v, s))| w[i] == 0.0 || v * s >= -1e-12 * scale);
    if !signs_ok {
        return None;
    }

    let certified = if c_h <= f64::MIN_POSITIVE {
        // Zero objective on a feasible point is globally optimal.
        true
    } else if inv_mu > 0.0 {
        let resid = &prob.y - &a.dot(&coeffs);
        let nu = resid / inv_mu;
        let corr = phi.apply_adjoint(nu.view());
        (0..phi.cols())
            .filter(|&j| !support.contains(j))
            .all(|j| corr[j].abs() <= w[j] * (1.0 + 1e-7) + 1e-12)
    } else {
        false
    };
    Some((x, certified))
}
