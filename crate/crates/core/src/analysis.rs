//! Error bounds, sample complexity, negativity and the empirical scaling fit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{pls_estimate, LsEstimate};
use crate::matcore::{
    eigh, operator_norm, partial_transpose, trace_norm, ComplexMatrix, DensityMatrix,
};
use crate::partition::NodePartition;

/// Shot count, node layout and rank entering the concentration bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub shots: u64,
    pub partition: NodePartition,
    pub rank: usize,
}

impl BoundParams {
    pub fn new(shots: u64, partition: NodePartition, rank: usize) -> Result<Self> {
        if shots == 0 {
            return Err(Error::OutOfRange {
                what: "shot count",
                value: 0.0,
                range: ">= 1",
            });
        }
        if rank == 0 || rank > partition.dim() {
            return Err(Error::OutOfRange {
                what: "rank",
                value: rank as f64,
                range: "1..=d",
            });
        }
        Ok(Self {
            shots,
            partition,
            rank,
        })
    }

    /// `2^M r² d̃ / N`, the common scale of every bound.
    fn scale(&self) -> f64 {
        self.complexity() / self.shots as f64
    }

    /// `2^M r² d̃`.
    fn complexity(&self) -> f64 {
        complexity(&self.partition, self.rank)
    }
}

fn complexity(partition: &NodePartition, rank: usize) -> f64 {
    let m = partition.num_nodes() as i32;
    2f64.powi(m) * (rank * rank) as f64 * effective_dimension(partition)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "failure probability δ",
            value: delta,
            range: "(0, 1)",
        })
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "accuracy ε",
            value: epsilon,
            range: "(0, 1]",
        })
    }
}

/// `d̃ = ∏_j (d_j − 1/2)`.
pub fn effective_dimension(partition: &NodePartition) -> f64 {
    partition.dims().iter().map(|&d| d as f64 - 0.5).product()
}

/// `d · exp(−(3/128) ε² N / (2^M r² d̃))`, clamped to `[0, 1]`.
pub fn failure_probability(params: &BoundParams, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let d = params.partition.dim() as f64;
    let raw = d * (-(3.0 / 128.0) * epsilon * epsilon / params.scale()).exp();
    Ok(raw.clamp(0.0, 1.0))
}

/// Squared trace-norm error `ε²` reached with probability at least `1 − δ`:
/// `(128/3) (2^M r² d̃ / N) ln(d/δ)`.
pub fn error_bound(params: &BoundParams, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let d = params.partition.dim() as f64;
    Ok(128.0 / 3.0 * params.scale() * (d / delta).ln())
}

/// Smallest `N` with `error_bound ≤ ε²`.
pub fn sample_complexity(
    partition: &NodePartition,
    rank: usize,
    epsilon: f64,
    delta: f64,
) -> Result<u64> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    BoundParams::new(1, partition.clone(), rank)?;
    let d = partition.dim() as f64;
    let n = 128.0 / 3.0 * complexity(partition, rank) / (epsilon * epsilon) * (d / delta).ln();
    Ok(n.ceil() as u64)
}

/// Matrix Bernstein parameters `(R, σ²) = (d/N, 2^M d̃ / N)`.
pub fn bernstein_params(partition: &NodePartition, shots: u64) -> Result<(f64, f64)> {
    if shots == 0 {
        return Err(Error::OutOfRange {
            what: "shot count",
            value: 0.0,
            range: ">= 1",
        });
    }
    let n = shots as f64;
    let m = partition.num_nodes() as i32;
    Ok((
        partition.dim() as f64 / n,
        2f64.powi(m) * effective_dimension(partition) / n,
    ))
}

/// `Λ_r(X) = min_{rank Z ≤ r} ‖X − Z‖₁`: the sum of all but the `r` largest
/// eigenvalue magnitudes.
pub fn truncation_residual(x: &ComplexMatrix, rank: usize) -> Result<f64> {
    if rank == 0 || rank > x.rows() {
        return Err(Error::OutOfRange {
            what: "truncation rank",
            value: rank as f64,
            range: "1..=d",
        });
    }
    let mut magnitudes: Vec<f64> = eigh(x)?.values.iter().map(|v| v.abs()).collect();
    magnitudes.sort_by(|a, b| b.total_cmp(a));
    Ok(magnitudes[rank..].iter().sum())
}

/// Negativity `(‖ρ^Γ‖₁ − 1)/2` across the cut separating the nodes in
/// `transposed` from the rest.
pub fn negativity(
    rho: &DensityMatrix,
    partition: &NodePartition,
    transposed: &[usize],
) -> Result<f64> {
    if rho.dim() != partition.dim() {
        return Err(Error::DimensionMismatch {
            expected: partition.dim(),
            actual: rho.dim(),
        });
    }
    let mut nodes = transposed.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.is_empty() || nodes.len() >= partition.num_nodes() {
        return Err(Error::InvalidPartition(format!(
            "nodes {transposed:?} do not form a bipartition of {partition}"
        )));
    }
    let value = (trace_norm(&partial_transpose(rho.matrix(), partition, &nodes)?)? - 1.0) / 2.0;
    Ok(if value < 0.0 && value > -1e-10 {
        0.0
    } else {
        value
    })
}

/// `|𝒩(ρ) − 𝒩(ρ̂)| ≤ ε/2`.
pub fn negativity_error_bound(epsilon: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::OutOfRange {
            what: "trace-norm error",
            value: epsilon,
            range: ">= 0",
        });
    }
    Ok(epsilon / 2.0)
}

/// Squared negativity error reached with probability at least `1 − δ`:
/// `(32/3) (2^M r² d̃ / N) ln(d/δ)`.
pub fn negativity_error_bound_squared(params: &BoundParams, delta: f64) -> Result<f64> {
    Ok(error_bound(params, delta)? / 4.0)
}

/// `4r ‖ρ − L̂‖∞ + 2 min(Λ_r(ρ), Λ_r(ρ̂))` with `ρ̂` the PLS projection of `L̂`.
pub fn proposition4_bound(rho: &DensityMatrix, ls: &LsEstimate, rank: usize) -> Result<f64> {
    if rho.dim() != ls.matrix.rows() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: ls.matrix.rows(),
        });
    }
    let pls = pls_estimate(ls)?;
    let spread = operator_norm(&(rho.matrix() - &ls.matrix).hermitian_part())?;
    let lambda = truncation_residual(rho.matrix(), rank)?
        .min(truncation_residual(pls.state.matrix(), rank)?);
    Ok(4.0 * rank as f64 * spread + 2.0 * lambda)
}

/// One averaged data point of the scaling study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub num_nodes: usize,
    pub effective_dimension: f64,
    pub dimension: usize,
    pub shots: u64,
    pub mean_error_squared: f64,
}

impl ScalingRecord {
    pub fn new(partition: &NodePartition, shots: u64, mean_error_squared: f64) -> Self {
        Self {
            num_nodes: partition.num_nodes(),
            effective_dimension: effective_dimension(partition),
            dimension: partition.dim(),
            shots,
            mean_error_squared,
        }
    }
}

/// Coefficients of `ε̄² = α (2^M)^β d̃^γ ln(d) / N^δ` with standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: f64,
    pub alpha_se: f64,
    pub beta: f64,
    pub beta_se: f64,
    pub gamma: f64,
    pub gamma_se: f64,
    pub delta_exp: f64,
    pub delta_exp_se: f64,
}

/// Ordinary least squares on
/// `ln ε̄² − ln ln d = ln α + β ln 2^M + γ ln d̃ − δ ln N`.
pub fn fit_scaling(records: &[ScalingRecord]) -> Result<FitResult> {
    if records.len() < 5 {
        return Err(Error::RankDeficient(format!(
            "{} records; at least 5 are needed",
            records.len()
        )));
    }
    for r in records {
        if r.mean_error_squared.is_nan()
            || r.mean_error_squared <= 0.0
            || r.dimension < 2
            || r.shots == 0
        {
            return Err(Error::OutOfRange {
                what: "scaling record",
                value: r.mean_error_squared,
                range: "positive error, d >= 2, N >= 1",
            });
        }
    }
    let n = records.len();
    let x = DMatrix::from_fn(n, 4, |i, j| {
        let r = &records[i];
        match j {
            0 => 1.0,
            1 => r.num_nodes as f64 * std::f64::consts::LN_2,
            2 => r.effective_dimension.ln(),
            _ => -(r.shots as f64).ln(),
        }
    });
    for j in 1..4 {
        let col = x.column(j);
        if col.iter().all(|v| (v - col[0]).abs() < 1e-12) {
            return Err(Error::RankDeficient(format!(
                "regressor {j} takes a single value"
            )));
        }
    }
    let y = DVector::from_fn(n, |i, _| {
        let r = &records[i];
        r.mean_error_squared.ln() - (r.dimension as f64).ln().ln()
    });
    let svd = x.clone().svd(false, false);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if smin <= 1e-10 * smax {
        return Err(Error::RankDeficient("regressors are collinear".into()));
    }
    let xtx_inv = (x.transpose() * &x)
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("normal matrix is singular".into()))?;
    let coeffs = &xtx_inv * x.transpose() * &y;
    let residual = &y - &x * &coeffs;
    let dof = n.saturating_sub(4);
    let sigma2 = if dof > 0 {
        residual.norm_squared() / dof as f64
    } else {
        0.0
    };
    let se = |j: usize| (sigma2 * xtx_inv[(j, j)]).max(0.0).sqrt();
    let alpha = coeffs[0].exp();
    Ok(FitResult {
        alpha,
        alpha_se: alpha * se(0),
        beta: coeffs[1],
        beta_se: se(1),
        gamma: coeffs[2],
        gamma_se: se(2),
        delta_exp: coeffs[3],
        delta_exp_se: se(3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::node_povm;
    use crate::estimator::ls_estimator;
    use crate::matcore::{kron_list, PureState};
    use crate::measurement::sample_frequencies;
    use crate::states::{ghz_state, haar_state, RngSeed};
    use approx::assert_relative_eq;

    fn two_by_two(shots: u64) -> BoundParams {
        BoundParams::new(shots, NodePartition::new(vec![1, 1]).unwrap(), 1).unwrap()
    }

    fn haar_rho(dim: usize, seed: RngSeed) -> DensityMatrix {
        DensityMatrix::from_pure(&haar_state(dim, seed).unwrap())
    }

    #[test]
    fn effective_dimensions() {
        let eff = |v: Vec<usize>| effective_dimension(&NodePartition::new(v).unwrap());
        assert_eq!(eff(vec![1, 1, 1]), 3.375);
        assert_eq!(eff(vec![3]), 7.5);
        assert_eq!(eff(vec![2, 2]), 12.25);
        for n in 1..=7 {
            for p in NodePartition::compositions(n) {
                assert!(effective_dimension(&p) <= p.dim() as f64);
            }
        }
    }

    #[test]
    fn error_bound_example() {
        // (128/3) · 2² · 1.5² · ln(4/0.01) / 10⁶
        let expected = 128.0 / 3.0 * 4.0 * 2.25 * 400f64.ln() / 1e6;
        let eps2 = error_bound(&two_by_two(1_000_000), 0.01).unwrap();
        assert_relative_eq!(eps2, expected, max_relative = 1e-14);
        assert_relative_eq!(eps2, 2.3007e-3, max_relative = 1e-4);
        assert!((eps2.sqrt() - 0.0480).abs() < 1e-3);
    }

    #[test]
    fn error_bound_scaling() {
        let a = error_bound(&two_by_two(1000), 0.05).unwrap();
        let b = error_bound(&two_by_two(2000), 0.05).unwrap();
        assert_relative_eq!(a, 2.0 * b, max_relative = 1e-14);
        let r2 = BoundParams::new(1000, NodePartition::new(vec![1, 1]).unwrap(), 2).unwrap();
        assert_relative_eq!(
            error_bound(&r2, 0.05).unwrap(),
            4.0 * a,
            max_relative = 1e-14
        );
        assert!(error_bound(&two_by_two(10), 0.0).is_err());
        assert!(error_bound(&two_by_two(10), 1.0).is_err());
        assert!(BoundParams::new(0, NodePartition::qubits(2).unwrap(), 1).is_err());
        assert!(BoundParams::new(10, NodePartition::qubits(2).unwrap(), 5).is_err());
    }

    #[test]
    fn error_bound_monotonicity() {
        let deltas = [0.001, 0.01, 0.1, 0.5];
        for n in 2..=5 {
            let parts = NodePartition::compositions(n);
            for rank in 1..=2 {
                for &delta in &deltas {
                    let mut prev_n = f64::INFINITY;
                    for shots in [100, 1000, 10_000] {
                        let e = error_bound(
                            &BoundParams::new(shots, parts[0].clone(), rank).unwrap(),
                            delta,
                        )
                        .unwrap();
                        assert!(e < prev_n);
                        prev_n = e;
                    }
                    // More nodes at fixed n never lowers the bound.
                    let mut by_m: Vec<(usize, f64)> = parts
                        .iter()
                        .map(|p| {
                            (
                                p.num_nodes(),
                                error_bound(
                                    &BoundParams::new(1000, p.clone(), rank).unwrap(),
                                    delta,
                                )
                                .unwrap(),
                            )
                        })
                        .collect();
                    by_m.sort_by_key(|a| a.0);
                    for w in by_m.windows(2) {
                        if w[0].0 < w[1].0 {
                            let lo_max = by_m
                                .iter()
                                .filter(|x| x.0 == w[0].0)
                                .map(|x| x.1)
                                .fold(0.0, f64::max);
                            let hi_min = by_m
                                .iter()
                                .filter(|x| x.0 == w[1].0)
                                .map(|x| x.1)
                                .fold(f64::INFINITY, f64::min);
                            assert!(lo_max < hi_min);
                        }
                    }
                }
                for w in deltas.windows(2) {
                    let p = BoundParams::new(1000, parts[0].clone(), rank).unwrap();
                    assert!(error_bound(&p, w[0]).unwrap() > error_bound(&p, w[1]).unwrap());
                }
            }
        }
    }

    #[test]
    fn failure_probability_inverts_error_bound() {
        for shots in [10_000, 1_000_000] {
            let p = two_by_two(shots);
            for delta in [0.001, 0.01, 0.2] {
                let eps = error_bound(&p, delta).unwrap().sqrt();
                if eps <= 1.0 {
                    assert_relative_eq!(
                        failure_probability(&p, eps).unwrap(),
                        delta,
                        max_relative = 1e-12
                    );
                }
            }
        }
        let p = failure_probability(&two_by_two(1_000_000), 0.048).unwrap();
        // 4 · exp(−(3/128) · 0.048² · 10⁶ / 9)
        let expected = 4.0 * (-(3.0 / 128.0) * 0.048f64.powi(2) * 1e6 / 9.0).exp();
        assert_relative_eq!(p, expected, max_relative = 1e-14);
        assert!((p - 0.0099).abs() < 1e-4);
        assert_eq!(
            failure_probability(&two_by_two(u64::MAX), 0.5).unwrap(),
            0.0
        );
        assert_eq!(failure_probability(&two_by_two(1), 0.5).unwrap(), 1.0);
        assert!(failure_probability(&two_by_two(1), 1.5).is_err());
    }

    #[test]
    fn sample_complexity_example() {
        let p = NodePartition::new(vec![1, 1]).unwrap();
        let raw = 384.0 * 400f64.ln() / 0.0025;
        let n = sample_complexity(&p, 1, 0.05, 0.01).unwrap();
        assert_eq!(n, raw.ceil() as u64);
        assert_eq!(n, 920_289);
        let eps2 = error_bound(&BoundParams::new(n, p.clone(), 1).unwrap(), 0.01).unwrap();
        assert!(eps2 <= 0.0025);
        let eps2_before =
            error_bound(&BoundParams::new(n - 1, p.clone(), 1).unwrap(), 0.01).unwrap();
        assert!(eps2_before > 0.0025);
        let quarter = sample_complexity(&p, 1, 0.025, 0.01).unwrap();
        assert!(quarter.abs_diff(4 * n) <= 4);
    }

    #[test]
    fn bernstein_examples() {
        let (_, s) = bernstein_params(&NodePartition::qubits(3).unwrap(), 1).unwrap();
        assert_relative_eq!(s, 27.0, max_relative = 1e-14);
        let (r, s) = bernstein_params(&NodePartition::global(3).unwrap(), 100).unwrap();
        assert_relative_eq!(r, 0.08, max_relative = 1e-14);
        assert_relative_eq!(s, 0.15, max_relative = 1e-14);
        for n in 1..=7 {
            for p in NodePartition::compositions(n) {
                let (_, s) = bernstein_params(&p, 10).unwrap();
                assert!(s <= 2f64.powi(p.num_nodes() as i32) * p.dim() as f64 / 10.0);
            }
        }
    }

    #[test]
    fn truncation_examples() {
        let pure = haar_rho(4, RngSeed::new(1));
        assert!(truncation_residual(pure.matrix(), 1).unwrap() < 1e-12);
        let diag = ComplexMatrix::from_real_diagonal(&[0.5, 0.3, 0.2]);
        assert_relative_eq!(
            truncation_residual(&diag, 2).unwrap(),
            0.2,
            max_relative = 1e-12
        );
        assert!(truncation_residual(&diag, 3).unwrap().abs() < 1e-15);
        assert!(truncation_residual(&diag, 0).is_err());
        assert!(truncation_residual(&diag, 4).is_err());
        let signed = ComplexMatrix::from_real_diagonal(&[0.7, -0.4, 0.1]);
        assert_relative_eq!(
            truncation_residual(&signed, 1).unwrap(),
            0.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn negativity_examples() {
        let bell = DensityMatrix::from_pure(&ghz_state(2).unwrap());
        let qubits = NodePartition::qubits(2).unwrap();
        assert_relative_eq!(
            negativity(&bell, &qubits, &[1]).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            negativity(&bell, &qubits, &[0]).unwrap(),
            0.5,
            max_relative = 1e-12
        );

        for n in [3, 4] {
            let ghz = DensityMatrix::from_pure(&ghz_state(n).unwrap());
            let p = NodePartition::qubits(n).unwrap();
            for mask in 1..(1usize << n) - 1 {
                let side: Vec<usize> = (0..n).filter(|q| mask >> q & 1 == 1).collect();
                assert_relative_eq!(
                    negativity(&ghz, &p, &side).unwrap(),
                    0.5,
                    max_relative = 1e-12
                );
            }
        }

        let a = haar_rho(2, RngSeed::new(3));
        let b = haar_rho(4, RngSeed::new(4));
        let product =
            DensityMatrix::new(kron_list(&[a.matrix().clone(), b.matrix().clone()]).unwrap())
                .unwrap();
        let p = NodePartition::new(vec![1, 2]).unwrap();
        assert!(negativity(&product, &p, &[1]).unwrap().abs() < 1e-10);

        assert!(negativity(&bell, &qubits, &[]).is_err());
        assert!(negativity(&bell, &qubits, &[0, 1]).is_err());
    }

    #[test]
    fn negativity_is_lipschitz_on_random_pairs() {
        for (dims, tag) in [(vec![1, 1], 1), (vec![2, 1], 2), (vec![2, 2], 3)] {
            let p = NodePartition::new(dims).unwrap();
            for i in 0..100 {
                let a = haar_rho(p.dim(), RngSeed::new(tag).derive(&[i, 0]));
                let b = haar_rho(p.dim(), RngSeed::new(tag).derive(&[i, 1]));
                let lhs =
                    (negativity(&a, &p, &[1]).unwrap() - negativity(&b, &p, &[1]).unwrap()).abs();
                let rhs = trace_norm(&(a.matrix() - b.matrix())).unwrap() / 2.0;
                assert!(lhs <= rhs + 1e-12, "{p} pair {i}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn negativity_error_bounds() {
        assert_eq!(negativity_error_bound(0.0).unwrap(), 0.0);
        assert_eq!(negativity_error_bound(0.1).unwrap(), 0.05);
        assert!(negativity_error_bound(-0.1).is_err());
        let b = negativity_error_bound_squared(&two_by_two(1_000_000), 0.01).unwrap();
        let expected = 32.0 * 4.0 * 2.25 / 3e6 * 400f64.ln();
        assert_relative_eq!(b, expected, max_relative = 1e-14);
        assert!((b - 5.75e-4).abs() < 1e-6);
    }

    #[test]
    fn operator_bound_trivial_cases() {
        let p = NodePartition::new(vec![1, 1]).unwrap();
        let rho = haar_rho(4, RngSeed::new(6));
        let ls = LsEstimate {
            matrix: rho.matrix().clone(),
            partition: p.clone(),
            shots: 0,
        };
        assert!(proposition4_bound(&rho, &ls, 1).unwrap() < 1e-10);
        let mixed = DensityMatrix::maximally_mixed(4);
        let ls = LsEstimate {
            matrix: PureState::basis(4, 0).projector(),
            partition: p,
            shots: 0,
        };
        let full = proposition4_bound(&mixed, &ls, 4).unwrap();
        assert_relative_eq!(full, 16.0 * 0.75, max_relative = 1e-12);
    }

    #[test]
    fn operator_bound_dominates_observed_error() {
        let partition = NodePartition::new(vec![2, 1]).unwrap();
        let povm = node_povm(&partition).unwrap();
        for i in 0..50 {
            let rho = haar_rho(8, RngSeed::new(40).derive(&[i]));
            let t =
                sample_frequencies(&rho, &povm, 100_000, RngSeed::new(41).derive(&[i])).unwrap();
            let ls = ls_estimator(&t, &povm).unwrap();
            let pls = pls_estimate(&ls).unwrap();
            let err = trace_norm(&(rho.matrix() - pls.state.matrix())).unwrap();
            assert!(err <= proposition4_bound(&rho, &ls, 1).unwrap());
        }
    }

    fn synthetic(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Vec<ScalingRecord> {
        let mut out = Vec::new();
        for n in 2..=4 {
            for p in NodePartition::compositions(n) {
                for shots in [10_000u64, 100_000, 1_000_000] {
                    let mut r = ScalingRecord::new(&p, shots, 0.0);
                    r.mean_error_squared = alpha
                        * 2f64.powi(r.num_nodes as i32).powf(beta)
                        * r.effective_dimension.powf(gamma)
                        * (r.dimension as f64).ln()
                        / (shots as f64).powf(delta);
                    out.push(r);
                }
            }
        }
        out
    }

    #[test]
    fn fit_recovers_noiseless_coefficients() {
        let fit = fit_scaling(&synthetic(4.0, 0.8, 0.95, 1.0)).unwrap();
        assert!((fit.alpha - 4.0).abs() < 1e-8);
        assert!((fit.beta - 0.8).abs() < 1e-8);
        assert!((fit.gamma - 0.95).abs() < 1e-8);
        assert!((fit.delta_exp - 1.0).abs() < 1e-8);
        assert!(fit.beta_se >= 0.0 && fit.beta_se < 1e-6);
    }

    #[test]
    fn fit_rejects_degenerate_designs() {
        let single_n: Vec<_> = synthetic(4.0, 0.8, 0.95, 1.0)
            .into_iter()
            .filter(|r| r.shots == 10_000)
            .collect();
        assert!(matches!(
            fit_scaling(&single_n),
            Err(Error::RankDeficient(_))
        ));
        assert!(fit_scaling(&synthetic(4.0, 0.8, 0.95, 1.0)[..3]).is_err());
    }
}
