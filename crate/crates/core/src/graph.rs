//! Influence networks: construction, validation and random generation.
//!
//! An [`InfluenceNetwork`] pairs the row-stochastic influence matrix `W`
//! with the conformity-weight matrix `M` used to form each agent's local
//! public opinion. Both share the same sparsity pattern.

use std::io::Read;

use nalgebra::DMatrix;
use rand::distributions::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums of a constructed network.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Inputs whose rows are within this distance of 1 are renormalized instead
/// of rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;
/// Number of full regenerations attempted by [`generate_k_regular`].
pub const CONNECTIVITY_RETRIES: usize = 100;
const PAIRING_ATTEMPTS: usize = 1000;

/// How the conformity weights `M` are derived from the influence weights.
#[derive(Debug, Clone, PartialEq)]
pub enum ConformityMode {
    /// `m_ij = 1 / |N_i|` on every neighbour `j` of `i` (self included when
    /// `w_ii > 0`).
    Uniform,
    /// `M = W`.
    Mirror,
    /// A caller-supplied matrix with the same sparsity pattern as `W`.
    Explicit(DMatrix<f64>),
}

/// Directed weighted influence graph together with its conformity weights.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceNetwork {
    w: DMatrix<f64>,
    m: DMatrix<f64>,
}

impl InfluenceNetwork {
    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Row-stochastic influence matrix `W`.
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Row-stochastic conformity-weight matrix `M`.
    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Indices `j` with `w_ij > 0`, in ascending order.
    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| self.w[(i, j)] > 0.0)
    }

    pub fn is_strongly_connected(&self) -> bool {
        is_strongly_connected(&self.w)
    }

    pub fn is_primitive(&self) -> bool {
        is_primitive(&self.w)
    }

    /// Copy of this network with `M` replaced, re-validated against `W`.
    pub fn with_conformity(&self, mode: ConformityMode) -> Result<Self> {
        build_network(self.w.clone(), mode)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            n: self.n(),
            w: rows_of(&self.w),
            m_mode: MMode::Explicit,
            m: Some(rows_of(&self.m)),
        }
    }
}

/// Builds a network from nonnegative weights, normalizing every row of `W`
/// and deriving `M` according to `mode`.
pub fn build_network(weights: DMatrix<f64>, mode: ConformityMode) -> Result<InfluenceNetwork> {
    let n = check_square(&weights)?;
    check_nonnegative(&weights)?;
    let mut w = weights;
    for i in 0..n {
        let sum: f64 = w.row(i).sum();
        if sum <= 0.0 {
            return Err(Error::ZeroRow { row: i });
        }
        w.row_mut(i).unscale_mut(sum);
    }

    let m = match mode {
        ConformityMode::Uniform => {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                let deg = w.row(i).iter().filter(|&&x| x > 0.0).count() as f64;
                for j in 0..n {
                    if w[(i, j)] > 0.0 {
                        m[(i, j)] = 1.0 / deg;
                    }
                }
            }
            m
        }
        ConformityMode::Mirror => w.clone(),
        ConformityMode::Explicit(m) => {
            let rows = check_square(&m)?;
            if rows != n {
                return Err(Error::Dimension {
                    what: "conformity matrix",
                    expected: n,
                    found: rows,
                });
            }
            check_nonnegative(&m)?;
            let mut m = m;
            for i in 0..n {
                let sum: f64 = m.row(i).sum();
                if (sum - 1.0).abs() > RENORMALIZE_TOL {
                    return Err(Error::RowSum { row: i, sum });
                }
                m.row_mut(i).unscale_mut(sum);
            }
            m
        }
    };

    for i in 0..n {
        for j in 0..n {
            if (w[(i, j)] > 0.0) != (m[(i, j)] > 0.0) {
                return Err(Error::SparsityMismatch { row: i, col: j });
            }
        }
    }
    Ok(InfluenceNetwork { w, m })
}

fn check_square(a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Err(Error::Empty);
    }
    Ok(a.nrows())
}

fn check_nonnegative(a: &DMatrix<f64>) -> Result<()> {
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Random network on a `k`-regular undirected topology with a self-loop at
/// every node.
///
/// The topology comes from the pairing (configuration) construction,
/// rejecting pairings that contain self-pairs or parallel edges. Each
/// positive weight, self-loops included, is drawn from the open interval
/// (0, 1) and rows are then normalized; `M` is uniform over neighbours.
///
/// Random stream: a `ChaCha8Rng` seeded with `seed`. Stub shuffles for the
/// pairing are drawn first (one shuffle per attempt), followed by one
/// weight per positive entry in row-major order. A topology that is not
/// connected is discarded and the whole draw repeated, up to
/// [`CONNECTIVITY_RETRIES`] times.
pub fn generate_k_regular(n: usize, k: usize, seed: u64) -> Result<InfluenceNetwork> {
    if k == 0 || n <= k || !(n * k).is_multiple_of(2) {
        return Err(Error::InfeasibleRegular { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CONNECTIVITY_RETRIES {
        let Some(adj) = pair_stubs(n, k, &mut rng) else {
            continue;
        };
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            w[(i, i)] = 1.0;
            for &j in &adj[i] {
                w[(i, j)] = 1.0;
            }
        }
        if !is_strongly_connected(&w) {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                if w[(i, j)] > 0.0 {
                    w[(i, j)] = rng.sample::<f64, _>(Open01);
                }
            }
        }
        return build_network(w, ConformityMode::Uniform);
    }
    Err(Error::ConnectivityBudget {
        attempts: CONNECTIVITY_RETRIES,
    })
}

fn pair_stubs(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<usize>>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    'attempt: for _ in 0..PAIRING_ATTEMPTS {
        stubs.shuffle(rng);
        let mut adj = vec![Vec::with_capacity(k); n];
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || adj[a].contains(&b) {
                continue 'attempt;
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        return Some(adj);
    }
    None
}

/// Whether the directed graph of positive entries of `a` is strongly
/// connected.
pub fn is_strongly_connected(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return false;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let edge = if forward { a[(u, v)] } else { a[(v, u)] };
                if edge > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Whether some power of the nonnegative matrix `a` is entrywise positive.
///
/// Only the sparsity pattern is used: `a^k > 0` is checked on the boolean
/// semiring for `k = (n - 1)^2 + 1`, the Wielandt exponent, beyond which a
/// primitive pattern stays full.
pub fn is_primitive(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return false;
    }
    let base = BoolMatrix::from_pattern(a);
    let exponent = (n - 1) * (n - 1) + 1;
    base.pow(exponent).is_full()
}

/// Square boolean matrix stored as packed row bitsets.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BoolMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BoolMatrix {
    fn zeros(n: usize) -> Self {
        let words = n.div_ceil(64);
        Self {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i);
        }
        m
    }

    fn from_pattern(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] > 0.0 {
                    m.set(i, j);
                }
            }
        }
        m
    }

    fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                if self.get(i, k) {
                    let src = other.row(k);
                    let dst = &mut out.bits[i * self.words..(i + 1) * self.words];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d |= s;
                    }
                }
            }
        }
        out
    }

    fn pow(&self, mut e: usize) -> Self {
        let mut result = Self::identity(self.n);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    fn is_full(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j)))
    }
}

/// How `M` is specified in a network file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MMode {
    Uniform,
    Mirror,
    Explicit,
}

/// On-disk network description:
/// `{"n": int, "w": [[...]], "m_mode": "uniform"|"mirror"|"explicit", "m": [[...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub w: Vec<Vec<f64>>,
    pub m_mode: MMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
}

impl NetworkFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network file serializes")
    }

    pub fn build(&self) -> Result<InfluenceNetwork> {
        let w = matrix_from_rows(self.n, &self.w)?;
        let mode = match (self.m_mode, &self.m) {
            (MMode::Uniform, None) => ConformityMode::Uniform,
            (MMode::Mirror, None) => ConformityMode::Mirror,
            (MMode::Explicit, Some(m)) => ConformityMode::Explicit(matrix_from_rows(self.n, m)?),
            (MMode::Explicit, None) => return Err(Error::Format("m_mode \"explicit\" requires \"m\"".into())),
            (_, Some(_)) => return Err(Error::Format("\"m\" is only allowed with m_mode \"explicit\"".into())),
        };
        build_network(w, mode)
    }
}

/// Dense matrix from row vectors, checking that there are `n` rows of
/// length `n`.
pub fn matrix_from_rows(n: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::Dimension {
            what: "matrix rows",
            expected: n,
            found: rows.len(),
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::Dimension {
            what: "matrix row length",
            expected: n,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn rows_of(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Reads an edge list of `i,j,w_ij` records with 0-based indices. A leading
/// header line and `#` comments are skipped. The number of agents is
/// `n` when given, otherwise one more than the largest index seen.
pub fn read_edge_list<R: Read>(reader: R, n: Option<usize>, mode: ConformityMode) -> Result<InfluenceNetwork> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut edges = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        if record.len() != 3 {
            return Err(Error::Format(format!(
                "edge record {} has {} fields, expected 3",
                line + 1,
                record.len()
            )));
        }
        let parsed = (
            record[0].parse::<usize>(),
            record[1].parse::<usize>(),
            record[2].parse::<f64>(),
        );
        match parsed {
            (Ok(i), Ok(j), Ok(w)) => edges.push((i, j, w)),
            _ if line == 0 => continue,
            _ => return Err(Error::Format(format!("edge record {} is not `i,j,w`", line + 1))),
        }
    }
    let inferred = edges.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0);
    let n = n.unwrap_or(inferred);
    if inferred > n {
        return Err(Error::Format(format!(
            "edge index {} out of range for {n} agents",
            inferred - 1
        )));
    }
    let mut w = DMatrix::zeros(n, n);
    for (i, j, v) in edges {
        w[(i, j)] += v;
    }
    build_network(w, mode)
}
