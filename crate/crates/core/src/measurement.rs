//! Shot sampling of node POVMs and the resulting frequency tables.
//!
//! Sampling is two-stage: shots are first spread over the joint basis
//! settings (multinomially with uniform weights, which is exactly the POVM
//! weight `d/m`, or deterministically in equal allocation mode), then the
//! outcomes of each setting are drawn from the diagonal of the rotated state.
//! Each basis setting draws from its own RNG stream, so the result does not
//! depend on how the settings are scheduled across threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::designs::{unflatten, NodePovm};
use crate::error::{Error, Result};
use crate::matcore::DensityMatrix;
use crate::partition::NodePartition;
use crate::states::{depolarize_pair, NoiseModel, RngSeed};

/// Joint basis setting and joint outcome, one entry per node.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutcomeKey {
    pub bases: Vec<usize>,
    pub outcomes: Vec<usize>,
}

/// How a table was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableMode {
    /// Shots spread multinomially over basis settings.
    Multinomial,
    /// `⌊N/T⌋` shots per setting, remainder round-robin from setting 0.
    EqualAllocation,
    /// Exact probabilities (infinitely many shots).
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
enum Entries {
    Counts(BTreeMap<OutcomeKey, u64>),
    Probabilities(BTreeMap<OutcomeKey, f64>),
}

/// Empirical (or exact) outcome frequencies of a node POVM.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTable {
    partition: NodePartition,
    total_shots: u64,
    mode: TableMode,
    entries: Entries,
}

impl FrequencyTable {
    /// Table of raw counts; `total_shots` is their sum.
    pub fn from_counts(
        partition: NodePartition,
        mode: TableMode,
        counts: BTreeMap<OutcomeKey, u64>,
    ) -> Result<Self> {
        if mode == TableMode::Exact {
            return Err(Error::Parse {
                column: 0,
                reason: "exact tables hold probabilities, not counts".into(),
            });
        }
        for key in counts.keys() {
            check_key(&partition, key)?;
        }
        let counts: BTreeMap<_, _> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        let total_shots = counts.values().sum();
        Ok(Self {
            partition,
            total_shots,
            mode,
            entries: Entries::Counts(counts),
        })
    }

    pub fn from_probabilities(
        partition: NodePartition,
        probabilities: BTreeMap<OutcomeKey, f64>,
    ) -> Result<Self> {
        for key in probabilities.keys() {
            check_key(&partition, key)?;
        }
        let sum: f64 = probabilities.values().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::OutOfRange {
                what: "total probability",
                value: sum,
                range: "1 ± 1e-12",
            });
        }
        Ok(Self {
            partition,
            total_shots: 0,
            mode: TableMode::Exact,
            entries: Entries::Probabilities(probabilities),
        })
    }

    pub fn partition(&self) -> &NodePartition {
        &self.partition
    }

    /// `N`; zero for exact tables.
    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn mode(&self) -> TableMode {
        self.mode
    }

    /// Number of stored (nonzero) keys.
    pub fn len(&self) -> usize {
        match &self.entries {
            Entries::Counts(c) => c.len(),
            Entries::Probabilities(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, key: &OutcomeKey) -> u64 {
        match &self.entries {
            Entries::Counts(c) => c.get(key).copied().unwrap_or(0),
            Entries::Probabilities(_) => 0,
        }
    }

    /// Raw counts (empty for exact tables).
    pub fn counts(&self) -> impl Iterator<Item = (&OutcomeKey, u64)> {
        let map = match &self.entries {
            Entries::Counts(c) => Some(c),
            Entries::Probabilities(_) => None,
        };
        map.into_iter().flat_map(|m| m.iter().map(|(k, &v)| (k, v)))
    }

    /// Shots per basis setting.
    pub fn basis_counts(&self) -> BTreeMap<Vec<usize>, u64> {
        let mut out = BTreeMap::new();
        for (key, c) in self.counts() {
            *out.entry(key.bases.clone()).or_insert(0) += c;
        }
        out
    }

    /// Frequencies `f_k` for every stored key; they sum to one.
    ///
    /// In equal allocation mode each setting is normalised by its own shot
    /// count: `f = count / (T · N_b)`.
    pub fn frequencies(&self) -> Vec<(OutcomeKey, f64)> {
        match (&self.entries, self.mode) {
            (Entries::Probabilities(p), _) => p.iter().map(|(k, &v)| (k.clone(), v)).collect(),
            (Entries::Counts(c), TableMode::EqualAllocation) => {
                let per_basis = self.basis_counts();
                let settings = num_basis_settings(&self.partition) as f64;
                c.iter()
                    .map(|(k, &v)| {
                        (
                            k.clone(),
                            v as f64 / (settings * per_basis[&k.bases] as f64),
                        )
                    })
                    .collect()
            }
            (Entries::Counts(c), _) => {
                let n = self.total_shots as f64;
                c.iter().map(|(k, &v)| (k.clone(), v as f64 / n)).collect()
            }
        }
    }

    /// Line-oriented text form:
    /// `N=<count> partition=<n1,...,nM>` (plus ` mode=equal` or
    /// ` mode=exact` for non-default modes), then `b1,..|x1,..|value` records.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "N={} partition={}",
            self.total_shots,
            join(self.partition.qubit_counts())
        );
        match self.mode {
            TableMode::Multinomial => {}
            TableMode::EqualAllocation => out.push_str(" mode=equal"),
            TableMode::Exact => out.push_str(" mode=exact"),
        }
        out.push('\n');
        match &self.entries {
            Entries::Counts(c) => {
                for (k, v) in c {
                    let _ = writeln!(out, "{}|{}|{}", join(&k.bases), join(&k.outcomes), v);
                }
            }
            Entries::Probabilities(p) => {
                for (k, v) in p {
                    let _ = writeln!(out, "{}|{}|{}", join(&k.bases), join(&k.outcomes), v);
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Empty("frequency table"))?;
        let mut shots = None;
        let mut partition = None;
        let mut mode = TableMode::Multinomial;
        for token in header.split_whitespace() {
            let (name, value) = token.split_once('=').ok_or_else(|| Error::Parse {
                column: 0,
                reason: format!("header token {token:?} is not name=value"),
            })?;
            match name {
                "N" => {
                    shots = Some(value.parse::<u64>().map_err(|e| Error::Parse {
                        column: 0,
                        reason: format!("bad shot count: {e}"),
                    })?)
                }
                "partition" => partition = Some(value.parse::<NodePartition>()?),
                "mode" => {
                    mode = match value {
                        "multinomial" => TableMode::Multinomial,
                        "equal" => TableMode::EqualAllocation,
                        "exact" => TableMode::Exact,
                        other => {
                            return Err(Error::Parse {
                                column: 0,
                                reason: format!("unknown mode {other:?}"),
                            })
                        }
                    }
                }
                other => {
                    return Err(Error::Parse {
                        column: 0,
                        reason: format!("unknown header field {other:?}"),
                    })
                }
            }
        }
        let shots = shots.ok_or(Error::Parse {
            column: 0,
            reason: "header lacks N=".into(),
        })?;
        let partition = partition.ok_or(Error::Parse {
            column: 0,
            reason: "header lacks partition=".into(),
        })?;

        let mut counts = BTreeMap::new();
        let mut probabilities = BTreeMap::new();
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.trim().split('|').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    column: 0,
                    reason: format!("line {}: expected 3 '|'-separated fields", lineno + 1),
                });
            }
            let key = OutcomeKey {
                bases: parse_list(fields[0], 0, lineno)?,
                outcomes: parse_list(fields[1], 1, lineno)?,
            };
            if mode == TableMode::Exact {
                let v = fields[2].parse::<f64>().map_err(|e| Error::Parse {
                    column: 2,
                    reason: format!("line {}: {e}", lineno + 1),
                })?;
                probabilities.insert(key, v);
            } else {
                let v = fields[2].parse::<u64>().map_err(|e| Error::Parse {
                    column: 2,
                    reason: format!("line {}: {e}", lineno + 1),
                })?;
                counts.insert(key, v);
            }
        }
        let table = if mode == TableMode::Exact {
            Self::from_probabilities(partition, probabilities)?
        } else {
            Self::from_counts(partition, mode, counts)?
        };
        if table.total_shots != shots {
            return Err(Error::Parse {
                column: 2,
                reason: format!("counts sum to {}, header says {shots}", table.total_shots),
            });
        }
        Ok(table)
    }
}

fn join(xs: &[usize]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_list(field: &str, column: usize, lineno: usize) -> Result<Vec<usize>> {
    field
        .split(',')
        .map(|t| {
            t.trim().parse::<usize>().map_err(|e| Error::Parse {
                column,
                reason: format!("line {}: {e}", lineno + 1),
            })
        })
        .collect()
}

/// `∏ (d_j + 1)`, the number of joint settings of a complete MUB POVM.
pub(crate) fn num_basis_settings(partition: &NodePartition) -> usize {
    partition.dims().iter().map(|d| d + 1).product()
}

fn check_key(partition: &NodePartition, key: &OutcomeKey) -> Result<()> {
    let m = partition.num_nodes();
    if key.bases.len() != m || key.outcomes.len() != m {
        return Err(Error::Parse {
            column: 0,
            reason: format!("key {key:?} does not have {m} entries"),
        });
    }
    for (j, d) in partition.dims().into_iter().enumerate() {
        if key.bases[j] > d || key.outcomes[j] >= d {
            return Err(Error::Parse {
                column: 1,
                reason: format!("key {key:?} out of range for node {j} of dimension {d}"),
            });
        }
    }
    Ok(())
}

/// Draws a multinomial sample by sequential conditional binomials.
pub(crate) fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining_n = n;
    let mut remaining_p: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = remaining_n;
            break;
        }
        let q = if remaining_p > 0.0 {
            (p / remaining_p).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = if q >= 1.0 {
            remaining_n
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining_n, q)
                .expect("valid binomial")
                .sample(rng)
        };
        out[i] = c;
        remaining_n -= c;
        remaining_p -= p;
    }
    out
}

/// Per-setting outcome distribution with tiny negative values clamped and
/// the vector renormalised.
fn conditional_distribution(povm: &NodePovm, rho: &DensityMatrix, tuple: &[usize]) -> Vec<f64> {
    let mut p = povm.rotated_diagonal(rho.matrix(), tuple);
    p.iter_mut().for_each(|v| *v = v.max(0.0));
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

fn check_povm(rho: &DensityMatrix, povm: &NodePovm) -> Result<()> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            actual: rho.dim(),
        });
    }
    Ok(())
}

/// Shots per basis setting for a sampling run.
pub fn allocate_shots(settings: usize, shots: u64, mode: TableMode, seed: RngSeed) -> Vec<u64> {
    match mode {
        TableMode::EqualAllocation => {
            let t = settings as u64;
            (0..t)
                .map(|i| shots / t + u64::from(i < shots % t))
                .collect()
        }
        _ => {
            let uniform = vec![1.0 / settings as f64; settings];
            multinomial(shots, &uniform, &mut seed.derive(&[0]).rng())
        }
    }
}

/// Samples `shots` outcomes of `povm` on `rho`.
pub fn sample_frequencies_with(
    rho: &DensityMatrix,
    povm: &NodePovm,
    shots: u64,
    seed: RngSeed,
    mode: TableMode,
) -> Result<FrequencyTable> {
    check_povm(rho, povm)?;
    if shots == 0 {
        return Err(Error::OutOfRange {
            what: "shot count",
            value: 0.0,
            range: ">= 1",
        });
    }
    if mode == TableMode::Exact {
        return exact_frequencies(rho, povm);
    }
    let settings = povm.num_basis_tuples();
    let allocation = allocate_shots(settings, shots, mode, seed);
    let dims = povm.partition().dims();
    let per_setting: Vec<Vec<(OutcomeKey, u64)>> = allocation
        .par_iter()
        .enumerate()
        .map(|(t, &n_t)| {
            if n_t == 0 {
                return Vec::new();
            }
            let tuple = povm.basis_tuple(t);
            let probs = conditional_distribution(povm, rho, &tuple);
            let mut rng = seed.derive(&[1, t as u64]).rng();
            multinomial(n_t, &probs, &mut rng)
                .into_iter()
                .enumerate()
                .filter(|&(_, c)| c > 0)
                .map(|(x, c)| {
                    (
                        OutcomeKey {
                            bases: tuple.clone(),
                            outcomes: unflatten(x, &dims),
                        },
                        c,
                    )
                })
                .collect()
        })
        .collect();
    let counts = per_setting.into_iter().flatten().collect();
    FrequencyTable::from_counts(povm.partition().clone(), mode, counts)
}

/// Multinomial-allocation sampling; the default protocol.
pub fn sample_frequencies(
    rho: &DensityMatrix,
    povm: &NodePovm,
    shots: u64,
    seed: RngSeed,
) -> Result<FrequencyTable> {
    sample_frequencies_with(rho, povm, shots, seed, TableMode::Multinomial)
}

/// Exact outcome probabilities as a table (the `N → ∞` limit).
pub fn exact_frequencies(rho: &DensityMatrix, povm: &NodePovm) -> Result<FrequencyTable> {
    check_povm(rho, povm)?;
    let weight = povm.weight();
    let dims = povm.partition().dims();
    let mut probabilities = BTreeMap::new();
    for t in 0..povm.num_basis_tuples() {
        let tuple = povm.basis_tuple(t);
        for (x, p) in conditional_distribution(povm, rho, &tuple)
            .into_iter()
            .enumerate()
        {
            if p > 0.0 {
                probabilities.insert(
                    OutcomeKey {
                        bases: tuple.clone(),
                        outcomes: unflatten(x, &dims),
                    },
                    weight * p,
                );
            }
        }
    }
    // Renormalise away the summation error of the conditional distributions.
    let sum: f64 = probabilities.values().sum();
    probabilities.values_mut().for_each(|v| *v /= sum);
    FrequencyTable::from_probabilities(povm.partition().clone(), probabilities)
}

/// Global-design measurement preceded by one use of the noisy link channel.
/// `povm` must be a single-node POVM on the full register.
pub fn sample_frequencies_noisy_global(
    rho: &DensityMatrix,
    povm: &NodePovm,
    shots: u64,
    noise: &NoiseModel,
    seed: RngSeed,
) -> Result<FrequencyTable> {
    if povm.partition().num_nodes() != 1 {
        return Err(Error::InvalidPartition(format!(
            "noisy global sampling needs a single-node design, got {}",
            povm.partition()
        )));
    }
    let measured = depolarize_pair(rho, noise)?;
    sample_frequencies(&measured, povm, shots, seed)
}
