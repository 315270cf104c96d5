//! Disagreement metrics, ergodicity bounds and resilience sensitivities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::PublicOpinion;
use crate::error::{Error, Result};
use crate::steady_state::{limits, SystemMatrices};

/// Absolute tolerance for declaring `y_i* == y_hat_i*`.
pub const COINCIDENCE_TOL: f64 = 1e-12;
/// Margin required for the strict steady-state inequalities.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Initial opinions with spread below this are treated as a consensus.
pub const CONSENSUS_SPREAD: f64 = 1e-9;
const STOCHASTIC_INPUT_TOL: f64 = 1e-9;

/// Spread `max(x) - min(x)`; zero iff `x` is a consensus vector.
pub fn disagreement(x: &DVector<f64>) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    Ok(x.max() - x.min())
}

/// Coefficient of ergodicity
/// `tau(A) = 1 - min_{i,j} sum_s min(a_is, a_js)` of a row-stochastic
/// matrix. It bounds the contraction `V(Ax) <= tau(A) V(x)`.
pub fn ergodicity_coefficient(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::NotSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::Empty);
    }
    for (row, r) in a.row_iter().enumerate() {
        if let Some(col) = r.iter().position(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::InvalidEntry {
                row,
                col,
                value: r[col],
            });
        }
        let sum = r.sum();
        if (sum - 1.0).abs() > STOCHASTIC_INPUT_TOL {
            return Err(Error::RowSum { row, sum });
        }
    }
    let mut min_overlap = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let overlap: f64 = (0..n).map(|s| a[(i, s)].min(a[(j, s)])).sum();
            min_overlap = min_overlap.min(overlap);
        }
    }
    if n == 1 {
        return Ok(0.0);
    }
    Ok((1.0 - min_overlap).clamp(0.0, 1.0))
}

/// `kappa(phi) = 1 - (phi_min / phi_max)(1 - phi_max)`.
pub fn kappa(phi: &DVector<f64>) -> Result<f64> {
    if phi.is_empty() {
        return Err(Error::Empty);
    }
    if let Some((index, &value)) = phi.iter().enumerate().find(|(_, &x)| !(x > 0.0 && x < 1.0)) {
        return Err(Error::Parameter {
            name: "phi",
            index,
            value,
            range: "(0, 1)",
        });
    }
    let (lo, hi) = (phi.min(), phi.max());
    Ok(1.0 - lo / hi * (1.0 - hi))
}

/// Lower bound `V(y_hat*) / kappa(phi)` on the spread of the private limit.
/// Only valid when every agent conforms to the global public opinion.
pub fn private_gap_lower_bound(v_yhat_star: f64, phi: &DVector<f64>, mode: PublicOpinion) -> Result<f64> {
    if mode != PublicOpinion::Global {
        return Err(Error::Precondition(
            "the private disagreement bound holds only for the global public opinion".into(),
        ));
    }
    Ok(v_yhat_star / kappa(phi)?)
}

/// Outcome of the strict steady-state ordering checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InequalityChecks {
    /// `max y(0) > max y* > max y_hat*`
    pub upper_chain: bool,
    /// `min y(0) < min y* < min y_hat*`
    pub lower_chain: bool,
    /// `min y_hat* != max y_hat*`
    pub expressed_disagree: bool,
}

impl InequalityChecks {
    pub fn all(&self) -> bool {
        self.upper_chain && self.lower_chain && self.expressed_disagree
    }
}

/// Checks the strict orderings between initial, private-limit and
/// expressed-limit extremes, each with margin [`STRICT_MARGIN`].
pub fn check_steady_inequalities(
    y0: &DVector<f64>,
    y_star: &DVector<f64>,
    y_hat_star: &DVector<f64>,
) -> Result<InequalityChecks> {
    if disagreement(y0)? < CONSENSUS_SPREAD {
        return Err(Error::Precondition(
            "initial opinions are a consensus; the strict orderings do not apply".into(),
        ));
    }
    for v in [y_star, y_hat_star] {
        if v.len() != y0.len() {
            return Err(Error::Dimension {
                what: "limit opinions",
                expected: y0.len(),
                found: v.len(),
            });
        }
    }
    let gt = |a: f64, b: f64| a - b > STRICT_MARGIN;
    Ok(InequalityChecks {
        upper_chain: gt(y0.max(), y_star.max()) && gt(y_star.max(), y_hat_star.max()),
        lower_chain: gt(y_star.min(), y0.min()) && gt(y_hat_star.min(), y_star.min()),
        expressed_disagree: gt(y_hat_star.max(), y_hat_star.min()),
    })
}

/// `dS/dphi_i = phi_i^-2 S e_i (e_i - m_i)^T S`, with `m_i` the i-th row of
/// the conformity matrix in effect.
pub fn resilience_sensitivity(sys: &SystemMatrices, i: usize) -> Result<DMatrix<f64>> {
    let n = sys.n();
    if i >= n {
        return Err(Error::AgentIndex { index: i, n });
    }
    let phi_i = sys.blocks.phi()[i];
    let s = &sys.s;
    let mut direction = -sys.blocks.conformity().row(i).into_owned();
    direction[i] += 1.0;
    let row = direction * s;
    let col = s.column(i) / (phi_i * phi_i);
    Ok(col * row)
}

/// Every steady-state disagreement metric for one initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementReport {
    pub v_y0: f64,
    pub v_y_star: f64,
    pub v_yhat_star: f64,
    pub kappa: Option<f64>,
    pub private_gap_lower_bound: Option<f64>,
    pub tau_s: f64,
    pub per_agent_discrepancy: Vec<f64>,
    /// Agents with `|y_i* - y_hat_i*| < COINCIDENCE_TOL`.
    pub flagged_agents: Vec<usize>,
    /// `None` when the initial opinions are a consensus.
    pub inequalities: Option<InequalityChecks>,
}

impl DisagreementReport {
    pub fn inequalities_hold(&self) -> bool {
        self.inequalities.is_some_and(|c| c.all())
    }

    /// `agent,discrepancy` rows.
    pub fn discrepancy_csv(&self) -> String {
        let mut out = String::from("agent,discrepancy\n");
        for (i, d) in self.per_agent_discrepancy.iter().enumerate() {
            out.push_str(&format!("{i},{d}\n"));
        }
        out
    }
}

pub fn discrepancy_report(y0: &DVector<f64>, sys: &SystemMatrices) -> Result<DisagreementReport> {
    let (y_star, y_hat_star) = limits(sys, y0)?;
    let v_y0 = disagreement(y0)?;
    let v_y_star = disagreement(&y_star)?;
    let v_yhat_star = disagreement(&y_hat_star)?;
    let phi = sys.blocks.phi();
    let (kappa, bound) = match sys.mode() {
        PublicOpinion::Global => match kappa(phi) {
            Ok(k) => (Some(k), Some(v_yhat_star / k)),
            Err(_) => (None, None),
        },
        PublicOpinion::Local => (None, None),
    };
    let per_agent_discrepancy: Vec<f64> = y_star.iter().zip(y_hat_star.iter()).map(|(a, b)| a - b).collect();
    let flagged_agents = per_agent_discrepancy
        .iter()
        .enumerate()
        .filter(|(_, d)| d.abs() < COINCIDENCE_TOL)
        .map(|(i, _)| i)
        .collect();
    let inequalities = if v_y0 < CONSENSUS_SPREAD {
        None
    } else {
        Some(check_steady_inequalities(y0, &y_star, &y_hat_star)?)
    };
    Ok(DisagreementReport {
        v_y0,
        v_y_star,
        v_yhat_star,
        kappa,
        private_gap_lower_bound: bound,
        tau_s: ergodicity_coefficient(&sys.s)?,
        per_agent_discrepancy,
        flagged_agents,
        inequalities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::AgentParameters;
    use crate::sampling::{random_instance, BetaPresets};
    use crate::steady_state::{build_p, compute_rs_with, steady_state, Validation};
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn disagreement_examples() {
        assert_eq!(disagreement(&dvector![0.3, 0.3, 0.3]).unwrap(), 0.0);
        assert_eq!(disagreement(&dvector![1.0, 0.0]).unwrap(), 1.0);
        assert!(disagreement(&DVector::zeros(0)).is_err());
    }

    #[test]
    fn ergodicity_examples() {
        let z = dvector![0.2, 0.5, 0.3];
        let rank_one = DMatrix::from_fn(3, 3, |_, j| z[j]);
        assert_abs_diff_eq!(ergodicity_coefficient(&rank_one).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(ergodicity_coefficient(&DMatrix::identity(2, 2)).unwrap(), 1.0);
        assert_abs_diff_eq!(
            ergodicity_coefficient(&dmatrix![0.5, 0.5; 0.25, 0.75]).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        assert!(ergodicity_coefficient(&dmatrix![0.5, 0.6; 0.25, 0.75]).is_err());
    }

    #[test]
    fn kappa_examples() {
        // reported resilience extremes of an 18-agent run
        assert_abs_diff_eq!(kappa(&dvector![0.1994, 0.5, 0.9437]).unwrap(), 0.9881, epsilon = 1e-4);
        assert_abs_diff_eq!(kappa(&dvector![0.4, 0.4]).unwrap(), 0.4, epsilon = 1e-15);
        let k = kappa(&dvector![1e-9, 0.6]).unwrap();
        assert!(k < 1.0 && 1.0 - k < 1e-8);
        assert!(kappa(&dvector![0.0, 0.5]).is_err());
        assert!(kappa(&dvector![1.0, 0.5]).is_err());
    }

    #[test]
    fn bound_examples() {
        let phi = dvector![0.1994, 0.9437];
        let b = private_gap_lower_bound(0.1613, &phi, PublicOpinion::Global).unwrap();
        assert_abs_diff_eq!(b, 0.163, epsilon = 1e-3);
        assert!(b <= 0.3455);
        assert_eq!(
            private_gap_lower_bound(0.0, &dvector![0.3, 0.3], PublicOpinion::Global).unwrap(),
            0.0
        );
        assert!(private_gap_lower_bound(0.1, &phi, PublicOpinion::Local).is_err());
    }

    #[test]
    fn consensus_initial_is_rejected() {
        let v = dvector![0.5, 0.5];
        assert!(check_steady_inequalities(&v, &v, &v).is_err());
    }

    #[test]
    fn sensitivity_index_range() {
        let inst = random_instance(6, 1, &BetaPresets::default()).unwrap();
        let sys = steady_state(&inst.net, &inst.params, PublicOpinion::Local).unwrap();
        assert!(matches!(resilience_sensitivity(&sys, 6), Err(Error::AgentIndex { .. })));
        let d = resilience_sensitivity(&sys, 2).unwrap();
        for r in d.row_iter() {
            assert!(r.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn report_consensus_flags_everyone() {
        let inst = random_instance(7, 2, &BetaPresets::default()).unwrap();
        let sys = steady_state(&inst.net, &inst.params, PublicOpinion::Global).unwrap();
        let r = discrepancy_report(&DVector::from_element(7, 0.4), &sys).unwrap();
        assert_eq!(r.flagged_agents, (0..7).collect::<Vec<_>>());
        assert!(r.inequalities.is_none());
        assert!(r.kappa.is_some());
    }

    #[test]
    fn report_flags_fully_resilient_agent() {
        let inst = random_instance(7, 3, &BetaPresets::default()).unwrap();
        let mut phi = inst.params.phi().clone();
        phi[4] = 1.0;
        let params = AgentParameters::new(inst.params.lambda().clone(), phi).unwrap();
        let sys = compute_rs_with(
            build_p(&inst.net, &params, PublicOpinion::Local).unwrap(),
            Validation::Relaxed,
        )
        .unwrap();
        let r = discrepancy_report(&inst.y0, &sys).unwrap();
        assert_eq!(r.flagged_agents, vec![4]);
        assert!(r.kappa.is_none());
        assert!(r.discrepancy_csv().starts_with("agent,discrepancy\n0,"));
    }
}
