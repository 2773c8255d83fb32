//! Splitting of an `n`-qubit register across quantum nodes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the dense simulator accepts (d = 2^10).
pub const MAX_QUBITS: usize = 10;

/// Ordered per-node qubit counts `(n_1, …, n_M)`.
///
/// Node 0 is the most significant tensor factor: a computational basis index
/// `i` of the full register decomposes as `i = ((x_0·d_1 + x_1)·d_2 + …)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct NodePartition {
    qubit_counts: Vec<usize>,
}

impl NodePartition {
    pub fn new(qubit_counts: Vec<usize>) -> Result<Self> {
        if qubit_counts.is_empty() {
            return Err(Error::InvalidPartition("no nodes".into()));
        }
        if let Some(pos) = qubit_counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidPartition(format!(
                "node {pos} has zero qubits"
            )));
        }
        let total: usize = qubit_counts.iter().sum();
        if total > MAX_QUBITS {
            return Err(Error::InvalidPartition(format!(
                "{total} qubits exceeds the limit of {MAX_QUBITS}"
            )));
        }
        Ok(Self { qubit_counts })
    }

    /// One node per qubit.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    /// A single node holding all `n` qubits.
    pub fn global(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    /// Every ordered composition of `n` into positive parts, coarsest first.
    pub fn compositions(n: usize) -> Vec<Self> {
        fn rec(rest: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if rest == 0 {
                out.push(prefix.clone());
                return;
            }
            for first in (1..=rest).rev() {
                prefix.push(first);
                rec(rest - first, prefix, out);
                prefix.pop();
            }
        }
        if n == 0 || n > MAX_QUBITS {
            return Vec::new();
        }
        let mut raw = Vec::new();
        rec(n, &mut Vec::new(), &mut raw);
        raw.sort_by_key(|c| c.len());
        raw.into_iter()
            .map(|qubit_counts| Self { qubit_counts })
            .collect()
    }

    pub fn qubit_counts(&self) -> &[usize] {
        &self.qubit_counts
    }

    /// Number of nodes `M`.
    pub fn num_nodes(&self) -> usize {
        self.qubit_counts.len()
    }

    /// Total qubit count `n`.
    pub fn num_qubits(&self) -> usize {
        self.qubit_counts.iter().sum()
    }

    /// Per-node dimensions `d_j = 2^{n_j}`.
    pub fn dims(&self) -> Vec<usize> {
        self.qubit_counts.iter().map(|&n| 1usize << n).collect()
    }

    pub fn node_dim(&self, node: usize) -> usize {
        1usize << self.qubit_counts[node]
    }

    /// Total dimension `d = ∏ d_j`.
    pub fn dim(&self) -> usize {
        1usize << self.num_qubits()
    }

    /// First qubit (0-based, global numbering) owned by `node`.
    pub fn first_qubit(&self, node: usize) -> usize {
        self.qubit_counts[..node].iter().sum()
    }

    /// Compact label such as `2+1`, used in CSV output.
    pub fn label(&self) -> String {
        self.qubit_counts
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl fmt::Display for NodePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.qubit_counts.iter().map(ToString::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for NodePartition {
    type Err = Error;

    /// Accepts `2,1`, `(2,1)` and `2+1`.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let counts = trimmed
            .split([',', '+'])
            .map(|tok| {
                tok.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidPartition(format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(counts)
    }
}

impl TryFrom<Vec<usize>> for NodePartition {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<NodePartition> for Vec<usize> {
    fn from(p: NodePartition) -> Self {
        p.qubit_counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let p = NodePartition::new(vec![2, 1, 3]).unwrap();
        assert_eq!(p.num_nodes(), 3);
        assert_eq!(p.num_qubits(), 6);
        assert_eq!(p.dims(), vec![4, 2, 8]);
        assert_eq!(p.dim(), 64);
        assert_eq!(p.first_qubit(2), 3);
        assert_eq!(p.label(), "2+1+3");
        assert_eq!(p.to_string(), "(2,1,3)");
    }

    #[test]
    fn rejects_bad_partitions() {
        assert!(NodePartition::new(vec![]).is_err());
        assert!(NodePartition::new(vec![1, 0]).is_err());
        assert!(NodePartition::new(vec![6, 5]).is_err());
    }

    #[test]
    fn parses_all_spellings() {
        for s in ["2,1", "(2,1)", "2+1", " ( 2 , 1 ) "] {
            assert_eq!(s.parse::<NodePartition>().unwrap().qubit_counts(), &[2, 1]);
        }
        assert!("2,x".parse::<NodePartition>().is_err());
    }

    #[test]
    fn compositions_are_complete() {
        assert_eq!(NodePartition::compositions(1).len(), 1);
        assert_eq!(NodePartition::compositions(3).len(), 4);
        let four = NodePartition::compositions(4);
        assert_eq!(four.len(), 8);
        assert_eq!(four[0].qubit_counts(), &[4]);
        assert!(four.iter().all(|p| p.num_qubits() == 4));
    }
}
