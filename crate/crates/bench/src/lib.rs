//! Shared fixtures for the benchmarks.

use disttomo_core::designs::{node_povm, NodePovm};
use disttomo_core::measurement::{sample_frequencies, FrequencyTable};
use disttomo_core::states::haar_state;
use disttomo_core::{DensityMatrix, NodePartition, RngSeed};

/// A Haar state, the node POVM of `partition` and one sampled table.
pub struct Fixture {
    pub state: DensityMatrix,
    pub povm: NodePovm,
    pub table: FrequencyTable,
}

pub fn fixture(qubit_counts: &[usize], shots: u64) -> Fixture {
    let partition = NodePartition::new(qubit_counts.to_vec()).expect("valid partition");
    let state = DensityMatrix::from_pure(
        &haar_state(partition.dim(), RngSeed::new(1)).expect("haar state"),
    );
    let povm = node_povm(&partition).expect("node povm");
    let table = sample_frequencies(&state, &povm, shots, RngSeed::new(2)).expect("sampling");
    Fixture { state, povm, table }
}
