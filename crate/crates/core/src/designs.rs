//! Mutually unbiased bases on `k` qubits and the separable node POVM built
//! from them.
//!
//! The `2^k + 1` bases come from the finite-field construction: the nontrivial
//! Pauli operators `X(α)Z(β)` with `α, β ∈ GF(2^k)` split into the commuting
//! classes `{(α, λα)}` (one per `λ`) and `{(0, β)}`. `Z` exponents are written
//! in the trace-dual basis so the symplectic form becomes `Tr(αβ' + α'β)`,
//! which vanishes inside each class. Each class is then diagonalised
//! numerically through a generic weighted sum of its `k` generators.
//!
//! Index layout used throughout the crate: node `j` outcome
//! `k_j = basis_j · d_j + outcome_j`, and the flat POVM index is the mixed
//! radix number `((k_0·m_1 + k_1)·m_2 + …)` with node 0 most significant.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{conjugate_by_product, eigh, ComplexMatrix, DensityMatrix, PureState, C64};
use crate::partition::NodePartition;

/// Largest node size with a hard-coded field polynomial.
pub const MAX_NODE_QUBITS: usize = 7;

/// Irreducible polynomials over GF(2), bit `i` is the coefficient of `x^i`.
const FIELD_POLYNOMIALS: [u32; MAX_NODE_QUBITS] = [
    0b11,       // x + 1
    0b111,      // x^2 + x + 1
    0b1011,     // x^3 + x + 1
    0b10011,    // x^4 + x + 1
    0b100101,   // x^5 + x^2 + 1
    0b1000011,  // x^6 + x + 1
    0b10000011, // x^7 + x + 1
];

#[derive(Clone, Copy, Debug)]
struct Gf2k {
    degree: usize,
    poly: u32,
}

impl Gf2k {
    fn new(degree: usize) -> Self {
        Self {
            degree,
            poly: FIELD_POLYNOMIALS[degree - 1],
        }
    }

    fn size(self) -> u32 {
        1 << self.degree
    }

    fn mul(self, a: u32, b: u32) -> u32 {
        let mut acc = 0u32;
        let mut a = a;
        let mut b = b;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & (1 << self.degree) != 0 {
                a ^= self.poly;
            }
        }
        acc
    }

    /// Absolute trace `Σ γ^{2^i}`, either 0 or 1.
    fn trace(self, g: u32) -> u32 {
        let mut acc = 0;
        let mut power = g;
        for _ in 0..self.degree {
            acc ^= power;
            power = self.mul(power, power);
        }
        debug_assert!(acc <= 1);
        acc
    }

    /// Coordinates of `β` in the trace-dual basis: bit `j` is `Tr(β·x^j)`.
    fn dual_coordinates(self, beta: u32) -> u32 {
        (0..self.degree).fold(0, |bits, j| {
            bits | (self.trace(self.mul(beta, 1 << j)) << j)
        })
    }
}

/// Hermitian Pauli `i^{a·b} X^a Z^b` on `k` qubits; bit `i` of a mask acts on
/// bit `i` of the computational basis index.
fn pauli_matrix(k: usize, x_mask: u32, z_mask: u32) -> ComplexMatrix {
    let d = 1usize << k;
    let phase = match (x_mask & z_mask).count_ones() % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    let mut m = DMatrix::zeros(d, d);
    for col in 0..d as u32 {
        let sign = if (z_mask & col).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        m[((col ^ x_mask) as usize, col as usize)] = phase * sign;
    }
    ComplexMatrix::wrap(m)
}

/// Rotates each column so its first largest-magnitude entry is real positive.
fn fix_phases(vectors: &ComplexMatrix) -> ComplexMatrix {
    let d = vectors.rows();
    let mut m = vectors.as_dmatrix().clone();
    for c in 0..m.ncols() {
        let max = (0..d).map(|r| m[(r, c)].norm()).fold(0.0, f64::max);
        let pivot = (0..d)
            .find(|&r| m[(r, c)].norm() >= max - 1e-9)
            .unwrap_or(0);
        let z = m[(pivot, c)];
        let rot = z.conj() / z.norm();
        m.column_mut(c).iter_mut().for_each(|v| *v *= rot);
    }
    ComplexMatrix::wrap(m)
}

/// A family of orthonormal bases on one node whose union is a projective
/// 2-design. Basis `b` is stored as a unitary whose columns are its vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectiveDesign {
    dim: usize,
    bases: Vec<ComplexMatrix>,
}

impl ProjectiveDesign {
    /// Wraps arbitrary orthonormal bases (they need not form a design).
    pub fn from_bases(bases: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = bases.first().ok_or(Error::Empty("basis list"))?.rows();
        for (i, b) in bases.iter().enumerate() {
            if b.rows() != dim || b.cols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: b.rows().max(b.cols()),
                });
            }
            let gram = &b.adjoint() * b;
            let defect = (&gram - &ComplexMatrix::identity(dim)).max_abs_entry();
            if defect > 1e-10 {
                return Err(Error::Construction(format!(
                    "basis {i} is not orthonormal (defect {defect:.2e})"
                )));
            }
        }
        Ok(Self { dim, bases })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    /// `m_j`, the number of rank-one elements.
    pub fn num_elements(&self) -> usize {
        self.bases.len() * self.dim
    }

    pub fn basis(&self, b: usize) -> &ComplexMatrix {
        &self.bases[b]
    }

    pub fn bases(&self) -> &[ComplexMatrix] {
        &self.bases
    }

    pub fn vector(&self, b: usize, x: usize) -> PureState {
        let col: Vec<C64> = self.bases[b]
            .as_dmatrix()
            .column(x)
            .iter()
            .copied()
            .collect();
        PureState::normalized(col).expect("basis columns are unit vectors")
    }

    pub fn projector(&self, b: usize, x: usize) -> ComplexMatrix {
        self.vector(b, x).projector()
    }

    /// Largest deviation of `|⟨v|w⟩|²` from `1/d` over vectors in different
    /// bases, together with the largest intra-basis Gram defect.
    pub fn unbiasedness_defect(&self) -> (f64, f64) {
        let target = 1.0 / self.dim as f64;
        let mut cross = 0.0f64;
        let mut intra = 0.0f64;
        for (a, ua) in self.bases.iter().enumerate() {
            let gram = &ua.adjoint() * ua;
            intra = intra.max((&gram - &ComplexMatrix::identity(self.dim)).max_abs_entry());
            for ub in &self.bases[a + 1..] {
                let overlap = &ua.adjoint() * ub;
                for z in overlap.as_dmatrix().iter() {
                    cross = cross.max((z.norm_sqr() - target).abs());
                }
            }
        }
        (cross, intra)
    }

    /// JSON export: `{"dim": d, "bases": [[[re, im], …] per vector …] per basis}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Export {
            dim: usize,
            bases: Vec<Vec<Vec<[f64; 2]>>>,
        }
        let bases = (0..self.num_bases())
            .map(|b| {
                (0..self.dim)
                    .map(|x| {
                        self.vector(b, x)
                            .amplitudes()
                            .iter()
                            .map(|z| [z.re, z.im])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        serde_json::to_string(&Export {
            dim: self.dim,
            bases,
        })
        .expect("plain data serialises")
    }
}

fn check_node_size(k: usize) -> Result<()> {
    if (1..=MAX_NODE_QUBITS).contains(&k) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "node qubit count",
            value: k as f64,
            range: "1..=7",
        })
    }
}

/// The `2^k + 1` mutually unbiased bases on `k` qubits.
///
/// Basis 0 is the `Z`-type class (a relabelling of the computational basis);
/// basis `1 + λ` belongs to the class `{X(α)Z(λα)}`. For `k = 1` this is the
/// `Z`, `X`, `Y` eigenbasis order.
pub fn build_mubs(k: usize) -> Result<ProjectiveDesign> {
    check_node_size(k)?;
    let field = Gf2k::new(k);
    let d = 1usize << k;

    let mut classes: Vec<Vec<(u32, u32)>> = Vec::with_capacity(d + 1);
    classes.push(
        (0..k)
            .map(|i| (0, field.dual_coordinates(1 << i)))
            .collect(),
    );
    for lambda in 0..field.size() {
        classes.push(
            (0..k)
                .map(|i| {
                    let alpha = 1u32 << i;
                    (alpha, field.dual_coordinates(field.mul(lambda, alpha)))
                })
                .collect(),
        );
    }

    let mut bases = Vec::with_capacity(d + 1);
    for generators in &classes {
        let mut weighted = ComplexMatrix::zeros(d, d);
        let mut weight = 1.0;
        for &(x, z) in generators {
            weighted = &weighted + &pauli_matrix(k, x, z).scale(weight);
            weight *= 3.0;
        }
        let dec = eigh(&weighted)?;
        // Joint eigenvalues Σ ±3^i are pairwise separated by at least 2.
        if dec.values.windows(2).any(|w| w[0] - w[1] < 1.0) {
            return Err(Error::Construction(format!(
                "degenerate class spectrum for k = {k}"
            )));
        }
        bases.push(fix_phases(&dec.vectors));
    }

    let design = ProjectiveDesign::from_bases(bases)?;
    let (cross, intra) = design.unbiasedness_defect();
    if cross > 1e-9 || intra > 1e-10 {
        return Err(Error::Construction(format!(
            "bases for k = {k} are not mutually unbiased (cross {cross:.2e}, intra {intra:.2e})"
        )));
    }
    Ok(design)
}

/// Memoised [`build_mubs`]; designs are immutable so they are shared.
pub fn cached_mubs(k: usize) -> Result<Arc<ProjectiveDesign>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ProjectiveDesign>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(d) = cache.lock().expect("cache lock").get(&k) {
        return Ok(Arc::clone(d));
    }
    let built = Arc::new(build_mubs(k)?);
    Ok(Arc::clone(
        cache.lock().expect("cache lock").entry(k).or_insert(built),
    ))
}

/// Frobenius norm of `(1/m) Σ_k P_k ⊗ P_k − (I + SWAP)/(d(d+1))`.
///
/// Evaluated directly for `d ≤ 32`. Larger designs use the frame potential
/// `‖·‖² = (1/m²) Σ_{k,l} |⟨v_k|v_l⟩|⁴ − 2/(d(d+1))`, whose cancellation
/// floor is around `1e-10` at `d = 128`.
pub fn verify_2design(design: &ProjectiveDesign) -> f64 {
    let d = design.dim();
    let m = design.num_elements();
    if d <= 32 {
        let mut w = DMatrix::<C64>::zeros(d * d, m);
        for b in 0..design.num_bases() {
            let u = design.basis(b).as_dmatrix();
            for x in 0..d {
                let col = b * d + x;
                for i in 0..d {
                    for j in 0..d {
                        w[(i * d + j, col)] = u[(i, x)] * u[(j, x)];
                    }
                }
            }
        }
        let mut diff = &w * w.adjoint() * C64::new(1.0 / m as f64, 0.0);
        let norm = 1.0 / (d * (d + 1)) as f64;
        for i in 0..d {
            for j in 0..d {
                diff[(i * d + j, i * d + j)] -= norm;
                diff[(i * d + j, j * d + i)] -= norm;
            }
        }
        diff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    } else {
        let mut potential = 0.0;
        for ua in design.bases() {
            for ub in design.bases() {
                let g = &ua.adjoint() * ub;
                potential += g
                    .as_dmatrix()
                    .iter()
                    .map(|z| z.norm_sqr().powi(2))
                    .sum::<f64>();
            }
        }
        let value = potential / (m * m) as f64 - 2.0 / (d * (d + 1)) as f64;
        value.max(0.0).sqrt()
    }
}

/// Separable POVM with elements `(d/m) ⊗_j |v_{k_j}⟩⟨v_{k_j}|`.
#[derive(Clone, Debug)]
pub struct NodePovm {
    partition: NodePartition,
    designs: Vec<Arc<ProjectiveDesign>>,
}

pub fn node_povm(partition: &NodePartition) -> Result<NodePovm> {
    let designs = partition
        .qubit_counts()
        .iter()
        .map(|&k| cached_mubs(k))
        .collect::<Result<Vec<_>>>()?;
    Ok(NodePovm {
        partition: partition.clone(),
        designs,
    })
}

impl NodePovm {
    /// POVM from explicitly supplied per-node designs.
    pub fn from_designs(partition: NodePartition, designs: Vec<ProjectiveDesign>) -> Result<Self> {
        if designs.len() != partition.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: partition.num_nodes(),
                actual: designs.len(),
            });
        }
        for (design, d) in designs.iter().zip(partition.dims()) {
            if design.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: design.dim(),
                });
            }
        }
        Ok(Self {
            partition,
            designs: designs.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn partition(&self) -> &NodePartition {
        &self.partition
    }

    pub fn designs(&self) -> &[Arc<ProjectiveDesign>] {
        &self.designs
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    /// `m = ∏ m_j`.
    pub fn num_outcomes(&self) -> usize {
        self.designs.iter().map(|d| d.num_elements()).product()
    }

    /// Number of bases per node.
    pub fn bases_per_node(&self) -> Vec<usize> {
        self.designs.iter().map(|d| d.num_bases()).collect()
    }

    /// Number of joint basis settings `∏ (number of bases)_j`.
    pub fn num_basis_tuples(&self) -> usize {
        self.bases_per_node().iter().product()
    }

    /// `d/m`; for complete MUB designs this is `∏ 1/(d_j+1)`.
    pub fn weight(&self) -> f64 {
        self.dim() as f64 / self.num_outcomes() as f64
    }

    /// Basis tuple for a flat basis-tuple index (node 0 most significant).
    pub fn basis_tuple(&self, index: usize) -> Vec<usize> {
        unflatten(index, &self.bases_per_node())
    }

    pub fn basis_tuple_index(&self, tuple: &[usize]) -> usize {
        flatten(tuple, &self.bases_per_node())
    }

    /// Joint outcome index for per-node outcomes.
    pub fn outcome_index(&self, outcomes: &[usize]) -> usize {
        flatten(outcomes, &self.partition.dims())
    }

    pub fn outcome_tuple(&self, index: usize) -> Vec<usize> {
        unflatten(index, &self.partition.dims())
    }

    /// Flat POVM index of a (basis tuple, outcome tuple) pair.
    pub fn flat_index(&self, bases: &[usize], outcomes: &[usize]) -> usize {
        let dims = self.partition.dims();
        let per_node: Vec<usize> = bases
            .iter()
            .zip(outcomes)
            .zip(&dims)
            .map(|((b, x), d)| b * d + x)
            .collect();
        let radices: Vec<usize> = self.designs.iter().map(|d| d.num_elements()).collect();
        flatten(&per_node, &radices)
    }

    /// Inverse of [`Self::flat_index`].
    pub fn split_index(&self, index: usize) -> (Vec<usize>, Vec<usize>) {
        let radices: Vec<usize> = self.designs.iter().map(|d| d.num_elements()).collect();
        let dims = self.partition.dims();
        unflatten(index, &radices)
            .into_iter()
            .zip(dims)
            .map(|(k, d)| (k / d, k % d))
            .unzip()
    }

    /// POVM element for a flat index.
    pub fn element(&self, index: usize) -> ComplexMatrix {
        let (bases, outcomes) = self.split_index(index);
        let mut acc = ComplexMatrix::identity(1);
        for (j, design) in self.designs.iter().enumerate() {
            acc = acc.kron(&design.projector(bases[j], outcomes[j]));
        }
        acc.scale(self.weight())
    }

    /// Per-node unitaries of a basis tuple.
    pub fn basis_unitaries(&self, tuple: &[usize]) -> Vec<&ComplexMatrix> {
        self.designs
            .iter()
            .zip(tuple)
            .map(|(d, &b)| d.basis(b))
            .collect()
    }

    /// `⟨x|U_b† X U_b|x⟩` for every joint outcome `x` of basis tuple `b`.
    pub fn rotated_diagonal(&self, x: &ComplexMatrix, tuple: &[usize]) -> Vec<f64> {
        let unitaries = self.basis_unitaries(tuple);
        conjugate_by_product(x, &self.partition.dims(), &unitaries).diagonal_real()
    }

    fn check_dim(&self, actual: usize) -> Result<()> {
        if actual == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual,
            })
        }
    }
}

pub(crate) fn flatten(digits: &[usize], radices: &[usize]) -> usize {
    digits
        .iter()
        .zip(radices)
        .fold(0, |acc, (&x, &r)| acc * r + x)
}

pub(crate) fn unflatten(mut index: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for k in (0..radices.len()).rev() {
        out[k] = index % radices[k];
        index /= radices[k];
    }
    out
}

/// Outcome distribution `(d/m) Tr(E_k ρ)` over all `m` POVM elements, in flat
/// index order.
pub fn povm_probabilities(povm: &NodePovm, rho: &DensityMatrix) -> Result<Vec<f64>> {
    povm.check_dim(rho.dim())?;
    let weight = povm.weight();
    let dims = povm.partition().dims();
    let mut probs = vec![0.0; povm.num_outcomes()];
    for t in 0..povm.num_basis_tuples() {
        let tuple = povm.basis_tuple(t);
        let diag = povm.rotated_diagonal(rho.matrix(), &tuple);
        for (x, p) in diag.into_iter().enumerate() {
            let outcomes = unflatten(x, &dims);
            probs[povm.flat_index(&tuple, &outcomes)] = weight * p.max(0.0);
        }
    }
    Ok(probs)
}
