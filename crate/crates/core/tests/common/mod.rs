//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use conformity::prelude::*;

/// Transitive closure by Floyd-Warshall on the boolean pattern.
pub fn reachability(adj: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut r = adj.to_vec();
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                let via = r[k].clone();
                for (dst, &hop) in r[i].iter_mut().zip(&via) {
                    *dst |= hop;
                }
            }
        }
    }
    r
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Primitivity by definition: strongly connected and the gcd of all simple
/// cycle lengths is 1. Cycles are enumerated by DFS from their smallest
/// vertex, so this is only usable for tiny graphs.
pub fn primitive_by_cycles(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    let reach = reachability(adj);
    if !(0..n).all(|i| (0..n).all(|j| reach[i][j])) {
        return false;
    }
    let mut g = 0;
    for start in 0..n {
        let mut stack = vec![(start, vec![start])];
        while let Some((v, path)) = stack.pop() {
            for (w, _) in adj[v].iter().enumerate().filter(|(_, &e)| e) {
                if w == start {
                    g = gcd(g, path.len());
                } else if w > start && !path.contains(&w) {
                    let mut p = path.clone();
                    p.push(w);
                    stack.push((w, p));
                }
            }
        }
    }
    g == 1
}

pub fn pattern_matrix(adj: &[Vec<bool>]) -> DMatrix<f64> {
    let n = adj.len();
    DMatrix::from_fn(n, n, |i, j| if adj[i][j] { 1.0 } else { 0.0 })
}

/// Digraph on `n` nodes whose edges are the set bits of `mask`.
pub fn digraph_from_mask(n: usize, mask: u64) -> Vec<Vec<bool>> {
    (0..n)
        .map(|i| (0..n).map(|j| mask >> (i * n + j) & 1 == 1).collect())
        .collect()
}

/// Step for the finite-difference checks.
pub const FD_STEP: f64 = 1e-6;

/// Central finite difference of `S` with respect to `phi_i`, re-solving the
/// whole steady state at `phi_i +- h`. The centre is clamped to
/// `[10h, 1 - 10h]`; the clamped centre is returned with the derivative.
pub fn fd_sensitivity(
    net: &InfluenceNetwork,
    params: &AgentParameters,
    mode: PublicOpinion,
    i: usize,
) -> (AgentParameters, DMatrix<f64>) {
    let h = FD_STEP;
    let mut phi = params.phi().clone();
    phi[i] = phi[i].clamp(10.0 * h, 1.0 - 10.0 * h);
    let centre = params.with_phi(phi.clone()).unwrap();
    let s_at = |delta: f64| {
        let mut p = phi.clone();
        p[i] += delta;
        let params = params.with_phi(p).unwrap();
        steady_state(net, &params, mode).unwrap().s
    };
    let d = (s_at(h) - s_at(-h)) / (2.0 * h);
    (centre, d)
}

/// Runs the engine long enough to use its final state as the limit.
pub fn iterate_limit(
    y0: &DVector<f64>,
    net: &InfluenceNetwork,
    params: &AgentParameters,
    mode: PublicOpinion,
) -> SimulationResult {
    let stop = StopCriteria {
        max_steps: 200_000,
        tol: 1e-13,
        stride: usize::MAX,
    };
    simulate(y0, net, params, mode, Model::Continuous, stop).unwrap()
}

pub fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
