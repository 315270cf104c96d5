//! Block system matrix and exact steady-state operators.
//!
//! Stacking `x(t) = [y(t); y_hat(t-1)]` the dynamics read
//! `x(t+1) = P x(t) + [(I - Lambda) y(0); 0]` with
//!
//! ```text
//! P11 = Lambda (Wd + Wo Phi)      P12 = Lambda Wo (I - Phi) M
//! P21 = Phi                       P22 = (I - Phi) M
//! ```
//!
//! where `Wd` is the diagonal and `Wo` the off-diagonal part of `W`. When
//! the convergence hypotheses hold, `y* = R y(0)` and `y_hat* = S y*` with
//! `S = (I - P22)^-1 P21` and `R = (I - P11 - P12 S)^-1 (I - Lambda)`.

use nalgebra::{DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::dynamics::{initial_state, step, AgentParameters, PublicOpinion};
use crate::error::{AssumptionViolation, Error, Result};
use crate::graph::{is_primitive, is_strongly_connected, rows_of, InfluenceNetwork};

/// Margin used when checking that parameters lie in the open unit interval.
pub const PARAMETER_MARGIN: f64 = 1e-12;
/// Allowed deviation of a row sum of `R` or `S` from 1.
pub const STOCHASTIC_TOL: f64 = 1e-10;

const POWER_MAX_ITER: usize = 20_000;
const POWER_REL_TOL: f64 = 1e-12;

/// The four `n x n` blocks of `P` together with the data they were built
/// from.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemBlocks {
    pub p11: DMatrix<f64>,
    pub p12: DMatrix<f64>,
    pub p21: DMatrix<f64>,
    pub p22: DMatrix<f64>,
    w: DMatrix<f64>,
    m: DMatrix<f64>,
    lambda: DVector<f64>,
    phi: DVector<f64>,
    mode: PublicOpinion,
}

impl SystemBlocks {
    pub fn n(&self) -> usize {
        self.p11.nrows()
    }

    /// Conformity matrix in effect: `M` in local mode, `(1/n) 11^T` in global
    /// mode.
    pub fn conformity(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn phi(&self) -> &DVector<f64> {
        &self.phi
    }

    pub fn mode(&self) -> PublicOpinion {
        self.mode
    }

    /// The assembled `2n x 2n` matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut p = DMatrix::zeros(2 * n, 2 * n);
        p.view_mut((0, 0), (n, n)).copy_from(&self.p11);
        p.view_mut((0, n), (n, n)).copy_from(&self.p12);
        p.view_mut((n, 0), (n, n)).copy_from(&self.p21);
        p.view_mut((n, n), (n, n)).copy_from(&self.p22);
        p
    }
}

/// Assembles the blocks of `P` for `net` and `params`.
pub fn build_p(net: &InfluenceNetwork, params: &AgentParameters, mode: PublicOpinion) -> Result<SystemBlocks> {
    let n = net.n();
    if params.n() != n {
        return Err(Error::Dimension {
            what: "agent parameters",
            expected: n,
            found: params.n(),
        });
    }
    let w = net.w().clone();
    let m = match mode {
        PublicOpinion::Local => net.m().clone(),
        PublicOpinion::Global => DMatrix::from_element(n, n, 1.0 / n as f64),
    };
    let lambda = params.lambda().clone();
    let phi = params.phi().clone();

    let w_diag = DMatrix::from_diagonal(&w.diagonal());
    let mut w_off = w.clone();
    w_off.fill_diagonal(0.0);
    let lam = DMatrix::from_diagonal(&lambda);
    let ph = DMatrix::from_diagonal(&phi);
    let one_minus_phi = DMatrix::from_diagonal(&phi.map(|x| 1.0 - x));

    let p22 = &one_minus_phi * &m;
    let p11 = &lam * (&w_diag + &w_off * &ph);
    let p12 = &lam * &w_off * &p22;
    Ok(SystemBlocks {
        p11,
        p12,
        p21: ph,
        p22,
        w,
        m,
        lambda,
        phi,
        mode,
    })
}

/// Checks the convergence hypotheses: strongly connected aperiodic
/// influence graph and every susceptibility and resilience strictly inside
/// (0, 1).
pub fn check_assumption(
    w: &DMatrix<f64>,
    params_lambda: &DVector<f64>,
    params_phi: &DVector<f64>,
) -> std::result::Result<(), AssumptionViolation> {
    if !is_strongly_connected(w) {
        return Err(AssumptionViolation::NotStronglyConnected);
    }
    if !is_primitive(w) {
        return Err(AssumptionViolation::Periodic);
    }
    let inside = |x: f64| (PARAMETER_MARGIN..=1.0 - PARAMETER_MARGIN).contains(&x);
    if let Some((index, &value)) = params_lambda.iter().enumerate().find(|(_, &x)| !inside(x)) {
        return Err(AssumptionViolation::Susceptibility { index, value });
    }
    if let Some((index, &value)) = params_phi.iter().enumerate().find(|(_, &x)| !inside(x)) {
        return Err(AssumptionViolation::Resilience { index, value });
    }
    Ok(())
}

/// How much of the convergence hypotheses [`compute_rs_with`] enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Validation {
    /// Enforce the hypotheses and entrywise positivity of `R` and `S`.
    #[default]
    Strict,
    /// Allow boundary parameters and disconnected graphs (frozen agents,
    /// fully resilient agents). Still requires solvable systems,
    /// row-stochastic results and `rho(P) < 1`.
    Relaxed,
}

/// Blocks of `P` completed with the steady-state operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub blocks: SystemBlocks,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub rho_p: f64,
}

impl SystemMatrices {
    pub fn n(&self) -> usize {
        self.blocks.n()
    }

    pub fn mode(&self) -> PublicOpinion {
        self.blocks.mode
    }

    pub fn to_dump(&self) -> MatrixDump {
        MatrixDump {
            r: rows_of(&self.r),
            s: rows_of(&self.s),
            rho_p: self.rho_p,
        }
    }
}

/// Serialized form `{"R": [[...]], "S": [[...]], "rho_P": x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDump {
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
    #[serde(rename = "rho_P")]
    pub rho_p: f64,
}

pub fn compute_rs(blocks: SystemBlocks) -> Result<SystemMatrices> {
    compute_rs_with(blocks, Validation::Strict)
}

/// Solves for `S` and `R` with dense LU and validates the result.
pub fn compute_rs_with(blocks: SystemBlocks, validation: Validation) -> Result<SystemMatrices> {
    if validation == Validation::Strict {
        check_assumption(&blocks.w, &blocks.lambda, &blocks.phi)?;
    }
    let n = blocks.n();
    let eye = DMatrix::<f64>::identity(n, n);

    let s = (&eye - &blocks.p22)
        .lu()
        .solve(&blocks.p21)
        .ok_or(Error::Singular { what: "S" })?;
    let lhs = &eye - &blocks.p11 - &blocks.p12 * &s;
    let rhs = DMatrix::from_diagonal(&blocks.lambda.map(|x| 1.0 - x));
    let r = lhs.lu().solve(&rhs).ok_or(Error::Singular { what: "R" })?;

    for (what, a) in [("S", &s), ("R", &r)] {
        check_stochastic(what, a, validation == Validation::Strict)?;
    }

    let rho_p = spectral_radius(&blocks.full())?;
    if rho_p >= 1.0 {
        return Err(Error::Conditioning {
            what: "P",
            row: 0,
            detail: format!("spectral radius {rho_p} is not below 1"),
        });
    }
    Ok(SystemMatrices { blocks, r, s, rho_p })
}

fn check_stochastic(what: &'static str, a: &DMatrix<f64>, positive: bool) -> Result<()> {
    for (row, r) in a.row_iter().enumerate() {
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::Conditioning {
                what,
                row,
                detail: "has non-finite entries".into(),
            });
        }
        let sum: f64 = r.sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Conditioning {
                what,
                row,
                detail: format!("sums to {sum}"),
            });
        }
        if positive {
            if let Some(&v) = r.iter().find(|&&x| x <= 0.0) {
                return Err(Error::Conditioning {
                    what,
                    row,
                    detail: format!("has non-positive entry {v}"),
                });
            }
        } else if let Some(&v) = r.iter().find(|&&x| x < -STOCHASTIC_TOL) {
            return Err(Error::Conditioning {
                what,
                row,
                detail: format!("has negative entry {v}"),
            });
        }
    }
    Ok(())
}

/// Validated hypotheses, `P`, `R` and `S` in one call.
pub fn steady_state(net: &InfluenceNetwork, params: &AgentParameters, mode: PublicOpinion) -> Result<SystemMatrices> {
    compute_rs(build_p(net, params, mode)?)
}

/// Limit opinions `(y*, y_hat*) = (R y0, S R y0)`.
pub fn limits(sys: &SystemMatrices, y0: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if y0.len() != sys.n() {
        return Err(Error::Dimension {
            what: "initial opinions",
            expected: sys.n(),
            found: y0.len(),
        });
    }
    let y_star = &sys.r * y0;
    let y_hat_star = &sys.s * &y_star;
    Ok((y_star, y_hat_star))
}

/// Consensus value reached when every agent is maximally susceptible.
///
/// With `lambda = 1` the matrix `P` is row-stochastic and primitive, so the
/// stacked state converges to `alpha 1` with `alpha = l^T x(1)`, where `l` is
/// the left Perron vector of `P` normalized to sum 1 and
/// `x(1) = [y(1); y_hat(0)]` is the first state the stacked recursion
/// applies to.
pub fn consensus_value(
    net: &InfluenceNetwork,
    params: &AgentParameters,
    mode: PublicOpinion,
    y0: &DVector<f64>,
) -> Result<f64> {
    let n = net.n();
    if y0.len() != n {
        return Err(Error::Dimension {
            what: "initial opinions",
            expected: n,
            found: y0.len(),
        });
    }
    if let Some((i, &l)) = params.lambda().iter().enumerate().find(|(_, &l)| l != 1.0) {
        return Err(Error::Precondition(format!(
            "consensus requires lambda = 1 for every agent; lambda[{i}] = {l}"
        )));
    }
    if let Some((index, &value)) = params
        .phi()
        .iter()
        .enumerate()
        .find(|(_, &x)| !(PARAMETER_MARGIN..=1.0 - PARAMETER_MARGIN).contains(&x))
    {
        return Err(AssumptionViolation::Resilience { index, value }.into());
    }
    if !net.is_strongly_connected() {
        return Err(AssumptionViolation::NotStronglyConnected.into());
    }
    if !net.is_primitive() {
        return Err(AssumptionViolation::Periodic.into());
    }

    let p = build_p(net, params, mode)?.full();
    let ell = left_perron_vector(&p)?;
    let s0 = initial_state(y0.clone())?;
    let s1 = step(&s0, net, params, mode)?;
    let stacked = DVector::from_iterator(2 * n, s1.y().iter().chain(s0.y_hat().iter()).copied());
    Ok(ell.dot(&stacked))
}

/// Left eigenvector `l` of a row-stochastic matrix with `l^T A = l^T` and
/// entries summing to 1, from the linear system `(I - A)^T l = 0`,
/// `1^T l = 1`.
pub fn left_perron_vector(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    let mut sys = (DMatrix::<f64>::identity(n, n) - a).transpose();
    sys.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    sys.lu().solve(&rhs).ok_or(Error::Singular {
        what: "left Perron vector",
    })
}

/// Largest eigenvalue modulus of a square matrix.
///
/// Nonnegative matrices go through shifted power iteration with
/// Collatz-Wielandt bounds; when those do not close (reducible patterns,
/// slow mixing) or the matrix has negative entries the eigenvalues are
/// taken from a real Schur decomposition.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty);
    }
    if a.iter().all(|&x| x >= 0.0) {
        if let Some(rho) = power_iteration_radius(a, POWER_MAX_ITER, POWER_REL_TOL) {
            return Ok(rho);
        }
    }
    schur_radius(a)
}

/// Perron root of a nonnegative matrix by power iteration on `A + cI`,
/// `c = |A|_inf`. Returns `None` if the Collatz-Wielandt bounds have not
/// closed to `rel_tol` after `max_iter` steps.
pub fn power_iteration_radius(a: &DMatrix<f64>, max_iter: usize, rel_tol: f64) -> Option<f64> {
    let n = a.nrows();
    let shift = a.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    if shift == 0.0 {
        return Some(0.0);
    }
    let mut x = DVector::from_element(n, 1.0);
    for _ in 0..max_iter {
        let y = a * &x + &x * shift;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for (yi, xi) in y.iter().zip(x.iter()) {
            let ratio = yi / xi;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        if hi - lo <= rel_tol * hi {
            return Some((0.5 * (hi + lo) - shift).max(0.0));
        }
        let scale = y.max();
        x = y / scale;
        if x.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return None;
        }
    }
    None
}

fn schur_radius(a: &DMatrix<f64>) -> Result<f64> {
    const MAX_ITER: usize = 10_000;
    let schur =
        Schur::try_new(a.clone(), f64::EPSILON, MAX_ITER).ok_or(Error::EigenNonConvergence { iterations: MAX_ITER })?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}
