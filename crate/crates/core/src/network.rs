//! Directed coupling topology with a single global transmission delay.
//!
//! Strength `ε_ij` is the pulse weight from oscillator `i` to oscillator `j`,
//! so rows are sources and columns are targets. Every oscillator's
//! presynaptic strengths (its column) sum to the aggregate strength `ε`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_model::check_open_unit;

/// Largest network stored as a dense matrix; bigger ones use adjacency lists.
pub const DENSE_LIMIT: usize = 1024;

/// Tolerance on the in-strength normalization and pair-symmetry checks.
pub const STRENGTH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Couplings {
    /// Row-major `n × n`.
    Dense(Vec<f64>),
    /// Outgoing `(target, strength)` lists, sorted by target.
    Sparse(Vec<Vec<(usize, f64)>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRecord", into = "TopologyRecord")]
pub struct NetworkTopology {
    n: usize,
    tau: f64,
    eps: f64,
    couplings: Couplings,
}

/// Serialized form: the full strength matrix plus delay and aggregate strength.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyRecord {
    tau: f64,
    eps: f64,
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<TopologyRecord> for NetworkTopology {
    type Error = Error;

    fn try_from(r: TopologyRecord) -> Result<Self> {
        if r.eps == 0.0 && r.matrix.iter().flatten().all(|&w| w == 0.0) {
            return NetworkTopology::uncoupled(r.matrix.len(), r.tau);
        }
        NetworkTopology::custom(r.matrix, r.tau, r.eps)
    }
}

impl From<NetworkTopology> for TopologyRecord {
    fn from(t: NetworkTopology) -> Self {
        TopologyRecord {
            tau: t.tau,
            eps: t.eps,
            matrix: t.to_matrix(),
        }
    }
}

impl NetworkTopology {
    /// Complete graph with uniform strengths `ε / (n − 1)`.
    pub fn all_to_all(n: usize, tau: f64, eps: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!(
                "all-to-all coupling needs at least 2 oscillators, got {n}"
            )));
        }
        check_open_unit("tau", tau)?;
        check_open_unit("eps", eps)?;
        let w = eps / (n - 1) as f64;
        let couplings = if n <= DENSE_LIMIT {
            let mut m = vec![w; n * n];
            for i in 0..n {
                m[i * n + i] = 0.0;
            }
            Couplings::Dense(m)
        } else {
            Couplings::Sparse(
                (0..n)
                    .map(|i| (0..n).filter(|&j| j != i).map(|j| (j, w)).collect())
                    .collect(),
            )
        };
        let topo = NetworkTopology {
            n,
            tau,
            eps,
            couplings,
        };
        topo.check_normalization()?;
        Ok(topo)
    }

    /// Arbitrary strength matrix (`matrix[i][j] = ε_ij`).
    pub fn custom(matrix: Vec<Vec<f64>>, tau: f64, eps: f64) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::Parameter("empty strength matrix".into()));
        }
        check_open_unit("tau", tau)?;
        check_open_unit("eps", eps)?;
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parameter(format!(
                    "strength matrix is not square: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &w) in row.iter().enumerate() {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::Parameter(format!(
                        "strength ({i}, {j}) = {w} must be finite and non-negative"
                    )));
                }
            }
            if row[i] != 0.0 {
                return Err(Error::SelfCoupling {
                    oscillator: i,
                    strength: row[i],
                });
            }
        }
        let couplings = if n <= DENSE_LIMIT {
            Couplings::Dense(matrix.into_iter().flatten().collect())
        } else {
            Couplings::Sparse(
                matrix
                    .into_iter()
                    .map(|row| {
                        row.into_iter()
                            .enumerate()
                            .filter(|&(_, w)| w > 0.0)
                            .collect()
                    })
                    .collect(),
            )
        };
        let topo = NetworkTopology {
            n,
            tau,
            eps,
            couplings,
        };
        topo.check_normalization()?;
        Ok(topo)
    }

    /// `n` oscillators with no coupling at all (`ε = 0`); a diagnostic network
    /// whose firing times are known in closed form.
    pub fn uncoupled(n: usize, tau: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("network needs at least one oscillator".into()));
        }
        check_open_unit("tau", tau)?;
        let couplings = if n <= DENSE_LIMIT {
            Couplings::Dense(vec![0.0; n * n])
        } else {
            Couplings::Sparse(vec![Vec::new(); n])
        };
        Ok(NetworkTopology {
            n,
            tau,
            eps: 0.0,
            couplings,
        })
    }

    fn check_normalization(&self) -> Result<()> {
        let mut sums = vec![0.0; self.n];
        let mut has_pre = vec![false; self.n];
        for i in 0..self.n {
            self.for_each_target(i, |j, w| {
                sums[j] += w;
                has_pre[j] |= w > 0.0;
            });
        }
        for j in 0..self.n {
            if !has_pre[j] {
                if self.n == 1 {
                    continue;
                }
                return Err(Error::IsolatedOscillator { oscillator: j });
            }
            if (sums[j] - self.eps).abs() > STRENGTH_TOL {
                return Err(Error::Normalization {
                    oscillator: j,
                    sum: sums[j],
                    expected: self.eps,
                });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.couplings, Couplings::Dense(_))
    }

    /// `ε_ij`, zero when `j ∉ Post(i)`.
    pub fn strength(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.strength_unchecked(i, j))
    }

    fn strength_unchecked(&self, i: usize, j: usize) -> f64 {
        match &self.couplings {
            Couplings::Dense(m) => m[i * self.n + j],
            Couplings::Sparse(out) => out[i]
                .binary_search_by_key(&j, |&(t, _)| t)
                .map(|k| out[i][k].1)
                .unwrap_or(0.0),
        }
    }

    /// Calls `f(target, ε_source,target)` for every target with nonzero strength,
    /// in increasing target order.
    #[inline]
    pub fn for_each_target(&self, source: usize, mut f: impl FnMut(usize, f64)) {
        match &self.couplings {
            Couplings::Dense(m) => {
                let row = &m[source * self.n..(source + 1) * self.n];
                for (j, &w) in row.iter().enumerate() {
                    if w > 0.0 {
                        f(j, w);
                    }
                }
            }
            Couplings::Sparse(out) => {
                for &(j, w) in &out[source] {
                    f(j, w);
                }
            }
        }
    }

    /// `Σ_{j ∈ Pre(i)} ε_ji`.
    pub fn in_strength(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok((0..self.n).map(|j| self.strength_unchecked(j, i)).sum())
    }

    /// Whether `i` and `j` see the rest of the network identically:
    /// `ε_ij = ε_ji` and `ε_ki = ε_kj` for every other `k`.
    pub fn symmetric_pair(&self, i: usize, j: usize) -> Result<bool> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::Parameter(format!(
                "symmetric pair needs two distinct oscillators, got ({i}, {i})"
            )));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= STRENGTH_TOL;
        if !close(self.strength_unchecked(i, j), self.strength_unchecked(j, i)) {
            return Ok(false);
        }
        Ok((0..self.n).filter(|&k| k != i && k != j).all(|k| {
            close(self.strength_unchecked(k, i), self.strength_unchecked(k, j))
        }))
    }

    /// All unordered symmetric pairs `(i, j)`, `i < j`.
    pub fn symmetric_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.symmetric_pair(i, j).unwrap_or(false) {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.strength_unchecked(i, j)).collect())
            .collect()
    }

    /// The strength matrix as headerless CSV, one source per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.to_matrix() {
            let cells: Vec<String> = row.iter().map(|w| format!("{w:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index < self.n {
            Ok(())
        } else {
            Err(Error::Index { index, n: self.n })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_to_all_strengths() {
        let t = NetworkTopology::all_to_all(4, 0.9, 0.6).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let w = t.strength(i, j).unwrap();
                if i == j {
                    assert_eq!(w, 0.0);
                } else {
                    assert!((w - 0.2).abs() < 1e-15);
                }
            }
        }
        let t = NetworkTopology::all_to_all(2, 0.5, 0.4).unwrap();
        assert_eq!(t.strength(0, 1).unwrap(), 0.4);
        assert_eq!(t.strength(1, 0).unwrap(), 0.4);
    }

    #[test]
    fn all_to_all_hundred_normalized() {
        let t = NetworkTopology::all_to_all(100, 0.5, 0.3).unwrap();
        for i in 0..100 {
            assert!((t.in_strength(i).unwrap() - 0.3).abs() < 1e-12);
            let out: f64 = (0..100).map(|j| t.strength(i, j).unwrap()).sum();
            assert!((out - 0.3).abs() < 1e-12);
        }
        assert_eq!(t.strength(3, 7).unwrap(), 0.3 / 99.0);
    }

    #[test]
    fn all_to_all_rejects_bad_parameters() {
        assert!(NetworkTopology::all_to_all(1, 0.5, 0.3).is_err());
        assert!(NetworkTopology::all_to_all(3, 1.0, 0.3).is_err());
        assert!(NetworkTopology::all_to_all(3, 0.5, 0.0).is_err());
    }

    #[test]
    fn single_oscillator_is_valid() {
        let t = NetworkTopology::custom(vec![vec![0.0]], 0.5, 0.3).unwrap();
        assert_eq!(t.n(), 1);
    }

    #[test]
    fn self_coupling_rejected() {
        let m = vec![vec![0.1, 0.3], vec![0.3, 0.0]];
        assert!(matches!(
            NetworkTopology::custom(m, 0.5, 0.3),
            Err(Error::SelfCoupling { oscillator: 0, .. })
        ));
    }

    #[test]
    fn ring_normalization_error_names_node() {
        // Ring 0 -> 1 -> 2 -> 0 with in-sums {0.3, 0.3, 0.2999}.
        let m = vec![
            vec![0.0, 0.3, 0.0],
            vec![0.0, 0.0, 0.2999],
            vec![0.3, 0.0, 0.0],
        ];
        match NetworkTopology::custom(m, 0.5, 0.3) {
            Err(Error::Normalization { oscillator, sum, .. }) => {
                assert_eq!(oscillator, 2);
                assert_eq!(sum, 0.2999);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn isolated_node_rejected() {
        let m = vec![
            vec![0.0, 0.3, 0.0],
            vec![0.3, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ];
        assert!(matches!(
            NetworkTopology::custom(m, 0.5, 0.3),
            Err(Error::IsolatedOscillator { oscillator: 2 })
        ));
    }

    #[test]
    fn non_square_rejected() {
        let m = vec![vec![0.0, 0.3], vec![0.3]];
        assert!(matches!(
            NetworkTopology::custom(m, 0.5, 0.3),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn symmetric_pairs() {
        let t = NetworkTopology::all_to_all(5, 0.5, 0.3).unwrap();
        assert_eq!(t.symmetric_pairs().len(), 10);

        // Node 2 feeds only node 0.
        let m = vec![
            vec![0.0, 0.3, 0.15],
            vec![0.1, 0.0, 0.15],
            vec![0.2, 0.0, 0.0],
        ];
        let t = NetworkTopology::custom(m, 0.5, 0.3).unwrap();
        assert!(!t.symmetric_pair(0, 1).unwrap());

        let m = vec![vec![0.0, 0.4], vec![0.4, 0.0]];
        let t = NetworkTopology::custom(m, 0.5, 0.4).unwrap();
        assert!(t.symmetric_pair(0, 1).unwrap());

        assert!(matches!(t.symmetric_pair(0, 2), Err(Error::Index { .. })));
        assert!(t.symmetric_pair(1, 1).is_err());
    }

    #[test]
    fn sparse_storage_above_limit() {
        let t = NetworkTopology::all_to_all(DENSE_LIMIT + 1, 0.5, 0.3).unwrap();
        assert!(!t.is_dense());
        assert_eq!(t.strength(0, 0).unwrap(), 0.0);
        assert_eq!(t.strength(0, 5).unwrap(), 0.3 / DENSE_LIMIT as f64);
        let mut count = 0;
        t.for_each_target(7, |j, _| {
            assert_ne!(j, 7);
            count += 1;
        });
        assert_eq!(count, DENSE_LIMIT);
    }

    #[test]
    fn csv_export() {
        let t = NetworkTopology::all_to_all(2, 0.5, 0.4).unwrap();
        assert_eq!(t.to_csv(), "0.0,0.4\n0.4,0.0\n");
    }

    #[test]
    fn uncoupled_serializes() {
        let t = NetworkTopology::uncoupled(3, 0.5).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: NetworkTopology = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
