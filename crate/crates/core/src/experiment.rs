//! Batch tomography experiments: state ensembles × partitions × shot counts.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{error_bound, negativity, proposition4_bound, BoundParams};
use crate::designs::{node_povm, NodePovm};
use crate::error::{Error, Result};
use crate::estimator::{ls_estimator, pls_estimate, LsEstimate, PlsEstimate, RANK_TOL};
use crate::matcore::{trace_norm, DensityMatrix};
use crate::measurement::{sample_frequencies, sample_frequencies_noisy_global};
use crate::partition::NodePartition;
use crate::states::{haar_state, locally_random_ghz, noisy_ghz, NoiseModel, RngSeed};

/// Stream label for state preparation.
const STATE_STREAM: u64 = 0;
/// Stream label for shot sampling.
const SAMPLE_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Haar,
    NoisyGhz,
    LocallyRandomGhz,
}

impl Ensemble {
    pub fn is_ghz(self) -> bool {
        !matches!(self, Ensemble::Haar)
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ensemble::Haar => "haar",
            Ensemble::NoisyGhz => "noisy_ghz",
            Ensemble::LocallyRandomGhz => "locally_random_ghz",
        })
    }
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(Ensemble::Haar),
            "noisy_ghz" => Ok(Ensemble::NoisyGhz),
            "locally_random_ghz" => Ok(Ensemble::LocallyRandomGhz),
            other => Err(Error::Construction(format!("unknown ensemble {other:?}"))),
        }
    }
}

/// The two-node cut across which negativity is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct NegativityCut {
    pub partition: NodePartition,
    pub transposed: Vec<usize>,
}

impl NegativityCut {
    /// Cut between the two nodes of a two-node partition.
    pub fn between_nodes(partition: &NodePartition) -> Option<Self> {
        (partition.num_nodes() == 2).then(|| Self {
            partition: partition.clone(),
            transposed: vec![1],
        })
    }

    pub fn negativity(&self, rho: &DensityMatrix) -> Result<f64> {
        negativity(rho, &self.partition, &self.transposed)
    }
}

/// One tomography run on a known state.
#[derive(Clone, Debug)]
pub struct Trial<'a> {
    pub state: &'a DensityMatrix,
    pub povm: &'a NodePovm,
    pub shots: u64,
    pub seed: RngSeed,
    /// Link noise applied before a single-node (global) measurement.
    pub noise: Option<NoiseModel>,
    pub cut: Option<&'a NegativityCut>,
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub ls: LsEstimate,
    pub pls: PlsEstimate,
    /// `‖ρ − ρ̂‖₁`.
    pub trace_error: f64,
    /// `|𝒩(ρ) − 𝒩(ρ̂)|` when a cut is given.
    pub negativity_error: Option<f64>,
}

impl Trial<'_> {
    pub fn run(&self) -> Result<TrialResult> {
        let table = match self.noise {
            Some(noise) if self.povm.partition().num_nodes() == 1 => {
                sample_frequencies_noisy_global(
                    self.state, self.povm, self.shots, &noise, self.seed,
                )?
            }
            _ => sample_frequencies(self.state, self.povm, self.shots, self.seed)?,
        };
        let ls = ls_estimator(&table, self.povm)?;
        let pls = pls_estimate(&ls)?;
        let trace_error = trace_norm(&(self.state.matrix() - pls.state.matrix()))?;
        let negativity_error = match self.cut {
            Some(cut) => Some((cut.negativity(self.state)? - cut.negativity(&pls.state)?).abs()),
            None => None,
        };
        Ok(TrialResult {
            ls,
            pls,
            trace_error,
            negativity_error,
        })
    }
}

/// Default two-node split `(⌈n/2⌉, ⌊n/2⌋)`.
pub fn default_node_split(n_qubits: usize) -> Result<NodePartition> {
    NodePartition::new(vec![n_qubits.div_ceil(2), n_qubits / 2])
}

/// Batch experiment description; field names double as the JSON keys of
/// configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_qubits: usize,
    /// Empty means every ordered composition of `n_qubits`.
    #[serde(default)]
    pub partitions: Vec<NodePartition>,
    pub ensemble: Ensemble,
    pub num_states: usize,
    pub shots: Vec<u64>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    /// Two-node split that prepares GHZ ensembles and carries the noisy
    /// link; defaults to [`default_node_split`].
    #[serde(default)]
    pub node_split: Option<NodePartition>,
}

fn default_delta() -> f64 {
    0.01
}

impl ExperimentConfig {
    pub fn new(n_qubits: usize, ensemble: Ensemble, num_states: usize, shots: Vec<u64>) -> Self {
        Self {
            n_qubits,
            partitions: Vec::new(),
            ensemble,
            num_states,
            shots,
            lambda: 0.0,
            delta: default_delta(),
            seed: 0,
            output: None,
            node_split: None,
        }
    }

    pub fn resolved_partitions(&self) -> Vec<NodePartition> {
        if self.partitions.is_empty() {
            NodePartition::compositions(self.n_qubits)
        } else {
            self.partitions.clone()
        }
    }

    pub fn resolved_node_split(&self) -> Result<NodePartition> {
        match &self.node_split {
            Some(p) => Ok(p.clone()),
            None => default_node_split(self.n_qubits),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::OutOfRange {
                what: "qubit count",
                value: 0.0,
                range: ">= 1",
            });
        }
        if self.num_states == 0 {
            return Err(Error::OutOfRange {
                what: "number of states",
                value: 0.0,
                range: ">= 1",
            });
        }
        if self.shots.is_empty() || self.shots.contains(&0) {
            return Err(Error::OutOfRange {
                what: "shot count",
                value: 0.0,
                range: "non-empty list of values >= 1",
            });
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::OutOfRange {
                what: "failure probability δ",
                value: self.delta,
                range: "(0, 1)",
            });
        }
        for p in self.resolved_partitions() {
            if p.num_qubits() != self.n_qubits {
                return Err(Error::InvalidPartition(format!(
                    "{p} does not hold {} qubits",
                    self.n_qubits
                )));
            }
        }
        if self.resolved_partitions().is_empty() {
            return Err(Error::InvalidPartition("no partitions".into()));
        }
        if self.ensemble.is_ghz() {
            let split = self.resolved_node_split()?;
            if split.num_nodes() != 2 || split.num_qubits() != self.n_qubits {
                return Err(Error::InvalidPartition(format!(
                    "node split {split} must be two nodes holding {} qubits",
                    self.n_qubits
                )));
            }
            if !(0.0..=1.0).contains(&self.lambda) {
                return Err(Error::OutOfRange {
                    what: "depolarising strength",
                    value: self.lambda,
                    range: "[0, 1]",
                });
            }
        }
        Ok(())
    }

    /// State `index` of the ensemble.
    pub fn state(&self, index: usize) -> Result<DensityMatrix> {
        let seed = RngSeed::new(self.seed).derive(&[STATE_STREAM, index as u64]);
        match self.ensemble {
            Ensemble::Haar => Ok(DensityMatrix::from_pure(&haar_state(
                1 << self.n_qubits,
                seed,
            )?)),
            Ensemble::NoisyGhz => {
                noisy_ghz(self.n_qubits, &self.resolved_node_split()?, self.lambda)
            }
            Ensemble::LocallyRandomGhz => locally_random_ghz(
                self.n_qubits,
                &self.resolved_node_split()?,
                self.lambda,
                seed,
            ),
        }
    }

    fn cut_for(&self, partition: &NodePartition) -> Result<Option<NegativityCut>> {
        if self.ensemble.is_ghz() {
            Ok(NegativityCut::between_nodes(&self.resolved_node_split()?))
        } else {
            Ok(NegativityCut::between_nodes(partition))
        }
    }

    fn noise_for(&self, partition: &NodePartition) -> Result<Option<NoiseModel>> {
        if self.ensemble.is_ghz() && self.lambda > 0.0 && partition.num_nodes() == 1 {
            Ok(Some(NoiseModel::across(
                &self.resolved_node_split()?,
                self.lambda,
            )?))
        } else {
            Ok(None)
        }
    }
}

/// One output row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub partition: NodePartition,
    pub shots: u64,
    pub state_index: usize,
    pub trace_error: f64,
    pub negativity_error: Option<f64>,
    /// Trace-norm error bound `ε` at the configured `δ`.
    pub bound_value: f64,
    /// `4r‖ρ − L̂‖∞ + 2 min Λ_r` with `r` the rank of the true state.
    pub operator_bound: f64,
    /// Rank used in the bounds: `min(rank ρ, rank ρ̂)`.
    pub rank: usize,
}

/// Runs every (state, partition, N) cell. Cells are independent work items
/// with their own RNG streams, so the rows do not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    config.validate()?;
    let partitions = config.resolved_partitions();
    let povms: Vec<NodePovm> = partitions.iter().map(node_povm).collect::<Result<_>>()?;
    let cuts: Vec<Option<NegativityCut>> = partitions
        .iter()
        .map(|p| config.cut_for(p))
        .collect::<Result<_>>()?;
    let noises: Vec<Option<NoiseModel>> = partitions
        .iter()
        .map(|p| config.noise_for(p))
        .collect::<Result<_>>()?;
    let states: Vec<(DensityMatrix, usize)> = (0..config.num_states)
        .into_par_iter()
        .map(|i| {
            let rho = config.state(i)?;
            let rank = rho.rank(RANK_TOL);
            Ok((rho, rank))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize, usize)> = (0..config.num_states)
        .flat_map(|i| {
            (0..partitions.len()).flat_map(move |p| (0..config.shots.len()).map(move |n| (i, p, n)))
        })
        .collect();

    cells
        .par_iter()
        .map(|&(i, p, n)| {
            let (rho, true_rank) = &states[i];
            let shots = config.shots[n];
            let seed =
                RngSeed::new(config.seed).derive(&[SAMPLE_STREAM, i as u64, p as u64, n as u64]);
            let result = Trial {
                state: rho,
                povm: &povms[p],
                shots,
                seed,
                noise: noises[p],
                cut: cuts[p].as_ref(),
            }
            .run()?;
            let rank = (*true_rank).min(result.pls.rank_estimate).max(1);
            let params = BoundParams::new(shots, partitions[p].clone(), rank)?;
            let bound_value = error_bound(&params, config.delta)?.sqrt();
            let operator_bound = proposition4_bound(rho, &result.ls, *true_rank)?;
            Ok(ExperimentRow {
                partition: partitions[p].clone(),
                shots,
                state_index: i,
                trace_error: result.trace_error,
                negativity_error: result.negativity_error,
                bound_value,
                operator_bound,
                rank,
            })
        })
        .collect()
}
