use disttomo_core::analysis::{error_bound, negativity};
use disttomo_core::designs::node_povm;
use disttomo_core::estimator::{ls_estimator, pls_estimate, RANK_TOL};
use disttomo_core::matcore::{eigh, trace_norm};
use disttomo_core::measurement::{exact_frequencies, sample_frequencies};
use disttomo_core::netharness::{run_distributed_session, Fault};
use disttomo_core::states::{ghz_state, haar_state};
use disttomo_core::{
    BoundParams, DensityMatrix, FrequencyTable, NodePartition, RngSeed, SessionConfig, Transport,
};
use proptest::prelude::*;

fn partition(counts: &[usize]) -> NodePartition {
    NodePartition::new(counts.to_vec()).unwrap()
}

fn haar(p: &NodePartition, seed: u64) -> DensityMatrix {
    DensityMatrix::from_pure(&haar_state(p.dim(), RngSeed::new(seed)).unwrap())
}

#[test]
fn exact_data_reconstructs_the_state_for_every_partition() {
    for n in 1..=3 {
        for p in NodePartition::compositions(n) {
            let rho = haar(&p, n as u64);
            let povm = node_povm(&p).unwrap();
            let ls = ls_estimator(&exact_frequencies(&rho, &povm).unwrap(), &povm).unwrap();
            let err = trace_norm(&(&ls.matrix - rho.matrix())).unwrap();
            assert!(err < 1e-10, "{p}: {err}");
            let pls = pls_estimate(&ls).unwrap();
            assert_eq!(pls.rank_estimate, 1);
        }
    }
}

#[test]
fn sampled_ghz_error_stays_below_the_bound() {
    let p = partition(&[2, 1]);
    let rho = DensityMatrix::from_pure(&ghz_state(3).unwrap());
    let povm = node_povm(&p).unwrap();
    let shots = 20_000;
    let bound = error_bound(&BoundParams::new(shots, p.clone(), 1).unwrap(), 0.01)
        .unwrap()
        .sqrt();
    for seed in 0..5 {
        let table = sample_frequencies(&rho, &povm, shots, RngSeed::new(seed)).unwrap();
        let pls = pls_estimate(&ls_estimator(&table, &povm).unwrap()).unwrap();
        let err = trace_norm(&(pls.state.matrix() - rho.matrix())).unwrap();
        assert!(err < bound, "seed {seed}: {err} vs {bound}");
    }
}

#[test]
fn distributed_session_round_trips_through_text() {
    let p = partition(&[1, 2]);
    let rho = haar(&p, 11);
    for transport in [Transport::InProcess, Transport::Stream] {
        let config = SessionConfig::new(p.clone(), 2500, RngSeed::new(4), transport);
        let table = run_distributed_session(&rho, &config).unwrap();
        let central =
            sample_frequencies(&rho, &node_povm(&p).unwrap(), 2500, RngSeed::new(4)).unwrap();
        assert_eq!(table, central);
        assert_eq!(FrequencyTable::from_text(&table.to_text()).unwrap(), table);
    }
}

#[test]
fn session_faults_are_reported() {
    let p = partition(&[1, 1]);
    let rho = haar(&p, 2);
    let base = SessionConfig::new(p.clone(), 100, RngSeed::new(1), Transport::InProcess);
    let dropped = base.clone().with_fault(Fault::Drop {
        shot_id: 17,
        node_id: 2,
    });
    let err = run_distributed_session(&rho, &dropped)
        .unwrap_err()
        .to_string();
    assert!(err.contains("17"), "{err}");
    let duplicated = base.with_fault(Fault::Duplicate {
        shot_id: 3,
        node_id: 1,
    });
    assert!(run_distributed_session(&rho, &duplicated).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimates_are_valid_states(seed in any::<u64>(), shots in 10u64..2000, layout in 0usize..4) {
        let p = partition([&[1][..], &[2], &[1, 1], &[2, 1]][layout]);
        let rho = haar(&p, seed);
        let povm = node_povm(&p).unwrap();
        let table = sample_frequencies(&rho, &povm, shots, RngSeed::new(seed ^ 0x5a5a)).unwrap();
        prop_assert_eq!(table.total_shots(), shots);
        let ls = ls_estimator(&table, &povm).unwrap();
        prop_assert!(ls.matrix.hermiticity_defect() < 1e-12);
        prop_assert!((ls.matrix.trace().re - 1.0).abs() < 1e-10);
        let pls = pls_estimate(&ls).unwrap();
        let values = eigh(pls.state.matrix()).unwrap().values;
        prop_assert!(values.iter().all(|&v| v > -RANK_TOL));
        prop_assert!((values.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert_eq!(pls.rank_estimate, pls.state.rank(RANK_TOL));
    }

    #[test]
    fn negativity_is_bounded_for_two_node_states(seed in any::<u64>(), layout in 0usize..3) {
        let p = partition([&[1, 1][..], &[1, 2], &[2, 2]][layout]);
        let rho = haar(&p, seed);
        let n = negativity(&rho, &p, &[1]).unwrap();
        let d_min = p.dims().into_iter().min().unwrap() as f64;
        prop_assert!(n >= -1e-12);
        prop_assert!(n <= (d_min - 1.0) / 2.0 + 1e-12);
        prop_assert!((n - negativity(&rho, &p, &[0]).unwrap()).abs() < 1e-10);
    }
}
