//! Least-squares reconstruction from node-design frequencies and its
//! projection onto the density matrices.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::designs::NodePovm;
use crate::error::{Error, Result};
use crate::matcore::{
    conjugate_by_product, eigh, ComplexMatrix, DensityMatrix, C64, HERMITIAN_TOL,
};
use crate::measurement::FrequencyTable;
use crate::partition::NodePartition;

/// Eigenvalues above this count toward the PLS rank estimate.
pub const RANK_TOL: f64 = 1e-10;

/// Largest dimension accepted by [`ls_via_normal_equations`].
pub const ORACLE_MAX_DIM: usize = 16;

/// Basis settings summed sequentially per parallel work item.
const CHUNK: usize = 8;

/// Unconstrained least-squares estimate `L̂`: Hermitian, unit trace, possibly
/// indefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct LsEstimate {
    pub matrix: ComplexMatrix,
    pub partition: NodePartition,
    /// Shot count of the source table (zero for exact tables).
    pub shots: u64,
}

/// Density matrix nearest to `L̂` in Hilbert–Schmidt norm.
#[derive(Clone, Debug, PartialEq)]
pub struct PlsEstimate {
    pub state: DensityMatrix,
    pub rank_estimate: usize,
}

fn check_partition(freqs: &FrequencyTable, povm: &NodePovm) -> Result<()> {
    if freqs.partition() != povm.partition() {
        return Err(Error::PartitionMismatch {
            table: freqs.partition().to_string(),
            povm: povm.partition().to_string(),
        });
    }
    Ok(())
}

/// Applies `v ↦ (d_k + 1) v − (Σ_axis v) ⊗ 1` along tensor axis `k` of a
/// vector indexed by mixed-radix outcomes.
fn dual_along_axis(v: &mut [f64], dims: &[usize], k: usize) {
    let dk = dims[k];
    let inner: usize = dims[k + 1..].iter().product();
    let outer = v.len() / (dk * inner);
    let scale = (dk + 1) as f64;
    for hi in 0..outer {
        for lo in 0..inner {
            let base = hi * dk * inner + lo;
            let sum: f64 = (0..dk).map(|s| v[base + s * inner]).sum();
            for s in 0..dk {
                let x = &mut v[base + s * inner];
                *x = scale * *x - sum;
            }
        }
    }
}

/// Closed-form least-squares estimate
/// `L̂ = Σ_k f_k ⊗_j [(d_j + 1)|v_{k_j}⟩⟨v_{k_j}| − I_j]`.
///
/// Terms sharing a basis setting are diagonal in that setting's product
/// basis, so each setting contributes `U diag(g) U†` with `g` the per-node
/// dual transform of its frequency vector.
pub fn ls_estimator(freqs: &FrequencyTable, povm: &NodePovm) -> Result<LsEstimate> {
    check_partition(freqs, povm)?;
    let dims = povm.partition().dims();
    let d = povm.dim();

    let mut by_setting: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    for (key, f) in freqs.frequencies() {
        let slot = by_setting.entry(key.bases).or_insert_with(|| vec![0.0; d]);
        slot[povm.outcome_index(&key.outcomes)] += f;
    }
    let settings: Vec<(Vec<usize>, Vec<f64>)> = by_setting.into_iter().collect();

    let adjoints: Vec<Vec<ComplexMatrix>> = povm
        .designs()
        .iter()
        .map(|design| design.bases().iter().map(ComplexMatrix::adjoint).collect())
        .collect();

    let term = |(tuple, f): &(Vec<usize>, Vec<f64>)| -> ComplexMatrix {
        let mut g = f.clone();
        for k in 0..dims.len() {
            dual_along_axis(&mut g, &dims, k);
        }
        let local: Vec<&ComplexMatrix> = tuple
            .iter()
            .enumerate()
            .map(|(j, &b)| &adjoints[j][b])
            .collect();
        // V† D V with V = U† gives U D U†.
        conjugate_by_product(&ComplexMatrix::from_real_diagonal(&g), &dims, &local)
    };

    let partials: Vec<ComplexMatrix> = settings
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(term)
                .fold(ComplexMatrix::zeros(d, d), |acc, t| &acc + &t)
        })
        .collect();
    let sum = partials
        .iter()
        .fold(ComplexMatrix::zeros(d, d), |acc, t| &acc + t);

    Ok(LsEstimate {
        matrix: sum.hermitian_part(),
        partition: povm.partition().clone(),
        shots: freqs.total_shots(),
    })
}

/// `(ℳ†ℳ)⁻¹ X = (m/d) ⊗_j [X_j ↦ (d_j + 1) X_j − Tr(X_j) I_j]`, extended
/// linearly.
pub fn inverse_frame_map(x: &ComplexMatrix, partition: &NodePartition) -> Result<ComplexMatrix> {
    let d = partition.dim();
    if !x.is_square() || x.rows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: x.rows(),
        });
    }
    let defect = x.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    let dims = partition.dims();
    let mut cur = x.as_dmatrix().clone();
    for k in 0..dims.len() {
        let dk = dims[k];
        let inner: usize = dims[k + 1..].iter().product();
        let scale = C64::new((dk + 1) as f64, 0.0);
        let digit = |i: usize| (i / inner) % dk;
        let strip = |i: usize| i - digit(i) * inner;
        let mut next = cur.map(|v| v * scale);
        for i in 0..d {
            for j in 0..d {
                if digit(i) == digit(j) {
                    let (bi, bj) = (strip(i), strip(j));
                    let traced: C64 = (0..dk).map(|s| cur[(bi + s * inner, bj + s * inner)]).sum();
                    next[(i, j)] -= traced;
                }
            }
        }
        cur = next;
    }
    let m: f64 = dims.iter().map(|&dj| (dj * (dj + 1)) as f64).product();
    Ok(ComplexMatrix::from_dmatrix(cur)?.scale(m / d as f64))
}

/// Orthonormal basis of the Hermitian `d × d` matrices under the
/// Hilbert–Schmidt inner product.
fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut m = DMatrix::zeros(d, d);
        m[(i, i)] = C64::new(1.0, 0.0);
        out.push(ComplexMatrix::from_dmatrix(m).expect("finite"));
        for j in i + 1..d {
            let mut re = DMatrix::zeros(d, d);
            re[(i, j)] = C64::new(s, 0.0);
            re[(j, i)] = C64::new(s, 0.0);
            out.push(ComplexMatrix::from_dmatrix(re).expect("finite"));
            let mut im = DMatrix::zeros(d, d);
            im[(i, j)] = C64::new(0.0, -s);
            im[(j, i)] = C64::new(0.0, s);
            out.push(ComplexMatrix::from_dmatrix(im).expect("finite"));
        }
    }
    out
}

/// Least squares solved explicitly: the `m × d²` design matrix
/// `A_{ka} = Tr(E_k B_a)` over a Hermitian basis `B_a`, then
/// `AᵀA c = Aᵀ f`. Dense and slow; meant for small `d`.
pub fn ls_via_normal_equations(freqs: &FrequencyTable, povm: &NodePovm) -> Result<LsEstimate> {
    check_partition(freqs, povm)?;
    let d = povm.dim();
    if d > ORACLE_MAX_DIM {
        return Err(Error::OutOfRange {
            what: "oracle dimension",
            value: d as f64,
            range: "<= 16",
        });
    }
    let basis = hermitian_basis(d);
    let m = povm.num_outcomes();
    let elements: Vec<ComplexMatrix> = (0..m).map(|k| povm.element(k)).collect();
    let design = DMatrix::from_fn(m, basis.len(), |k, a| (&elements[k] * &basis[a]).trace().re);
    let mut f = DVector::zeros(m);
    for (key, v) in freqs.frequencies() {
        f[povm.flat_index(&key.bases, &key.outcomes)] += v;
    }
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * f;
    let coeffs = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("frame operator is singular".into()))?
        .solve(&rhs);
    let matrix = basis
        .iter()
        .zip(coeffs.iter())
        .fold(ComplexMatrix::zeros(d, d), |acc, (b, &c)| {
            &acc + &b.scale(c)
        });
    Ok(LsEstimate {
        matrix,
        partition: povm.partition().clone(),
        shots: freqs.total_shots(),
    })
}

/// Euclidean projection onto the probability simplex (sort and shift).
pub fn project_simplex(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("simplex projection input"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }
    Ok(values.iter().map(|v| (v - shift).max(0.0)).collect())
}

/// Projects `L̂` onto the unit-trace PSD matrices by projecting its spectrum
/// onto the simplex.
pub fn pls_estimate(ls: &LsEstimate) -> Result<PlsEstimate> {
    let dec = eigh(&ls.matrix)?;
    let projected = project_simplex(&dec.values)?;
    let rank_estimate = projected.iter().filter(|&&v| v > RANK_TOL).count().max(1);
    let matrix = dec.reconstruct_with(&projected).hermitian_part();
    Ok(PlsEstimate {
        state: DensityMatrix::new(matrix)?,
        rank_estimate,
    })
}
