//! Benchmark state ensembles: Haar-random pure states, GHZ states with a
//! depolarised remote link, and their locally rotated versions.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    conjugate_by_product, partial_trace_dims, ComplexMatrix, DensityMatrix, PureState, C64,
};
use crate::partition::NodePartition;

/// Seed plus stream id. Every `(seed, stream)` pair names an independent
/// ChaCha8 keystream, so work items can draw in any order or in parallel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// Child stream labelled by `labels`; the seed is kept.
    pub fn derive(&self, labels: &[u64]) -> Self {
        let stream = labels.iter().fold(splitmix64(self.stream), |acc, &l| {
            splitmix64(acc ^ splitmix64(l))
        });
        Self {
            seed: self.seed,
            stream,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Two-qubit depolarising channel on the link pair `(a, a + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    lambda: f64,
    link: (usize, usize),
}

impl NoiseModel {
    pub fn new(lambda: f64, link: (usize, usize)) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::OutOfRange {
                what: "depolarising strength",
                value: lambda,
                range: "[0, 1]",
            });
        }
        if link.1 != link.0 + 1 {
            return Err(Error::InvalidPartition(format!(
                "link qubits {link:?} are not adjacent"
            )));
        }
        Ok(Self { lambda, link })
    }

    /// Noise on the boundary pair: last qubit of node 0, first of node 1.
    pub fn across(partition: &NodePartition, lambda: f64) -> Result<Self> {
        if partition.num_nodes() < 2 {
            return Err(Error::InvalidPartition(
                "a link needs at least two nodes".into(),
            ));
        }
        let boundary = partition.first_qubit(1);
        Self::new(lambda, (boundary - 1, boundary))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn link(&self) -> (usize, usize) {
        self.link
    }
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

fn qubit_count(dim: usize) -> Result<usize> {
    if dim.is_power_of_two() && dim >= 2 {
        Ok(dim.trailing_zeros() as usize)
    } else {
        Err(Error::OutOfRange {
            what: "dimension",
            value: dim as f64,
            range: "powers of two >= 2",
        })
    }
}

/// Haar-random pure state: a normalised complex Gaussian vector.
pub fn haar_state(dim: usize, seed: RngSeed) -> Result<PureState> {
    if dim < 2 {
        return Err(Error::OutOfRange {
            what: "dimension",
            value: dim as f64,
            range: ">= 2",
        });
    }
    let mut rng = seed.rng();
    PureState::normalized((0..dim).map(|_| complex_gaussian(&mut rng)).collect())
}

/// Haar-random unitary: QR of a Ginibre matrix with `R`'s diagonal phases
/// moved into `Q`.
pub fn haar_unitary(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 {
            z / z.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        q.column_mut(j).iter_mut().for_each(|v| *v *= phase);
    }
    ComplexMatrix::wrap(q)
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn ghz_state(n_qubits: usize) -> Result<PureState> {
    if n_qubits < 2 {
        return Err(Error::OutOfRange {
            what: "GHZ qubit count",
            value: n_qubits as f64,
            range: ">= 2",
        });
    }
    let dim = 1usize << n_qubits;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    amps[0] = C64::new(s, 0.0);
    amps[dim - 1] = C64::new(s, 0.0);
    PureState::new(amps)
}

/// Bits of `index` other than the link pair, packed most significant first,
/// and the two link bits.
fn split_link(index: usize, n: usize, link: (usize, usize)) -> (usize, usize) {
    let mut rest = 0;
    let mut pair = 0;
    for q in 0..n {
        let bit = (index >> (n - 1 - q)) & 1;
        if q == link.0 || q == link.1 {
            pair = pair * 2 + bit;
        } else {
            rest = rest * 2 + bit;
        }
    }
    (rest, pair)
}

/// `(1−λ)ρ + (λ/4) I_link ⊗ Tr_link(ρ)`.
pub fn depolarize_pair(rho: &DensityMatrix, noise: &NoiseModel) -> Result<DensityMatrix> {
    let n = qubit_count(rho.dim())?;
    let (a, b) = noise.link;
    if b >= n {
        return Err(Error::SubsystemOutOfRange { index: b, count: n });
    }
    let dims = vec![2; n];
    let keep: Vec<usize> = (0..n).filter(|&q| q != a && q != b).collect();
    let reduced = partial_trace_dims(rho.matrix(), &dims, &keep)?;
    let lambda = noise.lambda;
    let d = rho.dim();
    let src = rho.matrix().as_dmatrix();
    let red = reduced.as_dmatrix();
    let out = DMatrix::from_fn(d, d, |i, j| {
        let (ri, pi) = split_link(i, n, (a, b));
        let (rj, pj) = split_link(j, n, (a, b));
        let mixed = if pi == pj {
            red[(ri, rj)] * 0.25
        } else {
            C64::new(0.0, 0.0)
        };
        src[(i, j)] * (1.0 - lambda) + mixed * lambda
    });
    Ok(DensityMatrix::from_trusted(ComplexMatrix::wrap(out)))
}

fn check_two_node(n_qubits: usize, partition: &NodePartition, lambda: f64) -> Result<()> {
    if partition.num_nodes() != 2 {
        return Err(Error::InvalidPartition(format!(
            "noisy GHZ needs exactly two nodes, got {partition}"
        )));
    }
    if partition.num_qubits() != n_qubits {
        return Err(Error::InvalidPartition(format!(
            "{partition} does not hold {n_qubits} qubits"
        )));
    }
    if n_qubits < 3 {
        return Err(Error::OutOfRange {
            what: "noisy GHZ qubit count",
            value: n_qubits as f64,
            range: ">= 3",
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfRange {
            what: "depolarising strength",
            value: lambda,
            range: "[0, 1]",
        });
    }
    Ok(())
}

/// GHZ state after a depolarised remote CNOT on the node boundary, assembled
/// from its closed form
/// `(1−λ)|GHZ⟩⟨GHZ| + (λ/8) I_link ⊗ (|0…0⟩⟨0…0| + |1…1⟩⟨1…1|)`.
pub fn noisy_ghz(n_qubits: usize, partition: &NodePartition, lambda: f64) -> Result<DensityMatrix> {
    check_two_node(n_qubits, partition, lambda)?;
    let link = NoiseModel::across(partition, lambda)?.link;
    let d = 1usize << n_qubits;
    let rest_ones = (1usize << (n_qubits - 2)) - 1;
    let split: Vec<(usize, usize)> = (0..d).map(|i| split_link(i, n_qubits, link)).collect();
    let mut m = ghz_state(n_qubits)?
        .projector()
        .scale(1.0 - lambda)
        .into_dmatrix();
    for (i, &(rest, pair)) in split.iter().enumerate() {
        if rest == 0 || rest == rest_ones {
            // identity on the link pair, diagonal in the remaining qubits
            for (j, &other) in split.iter().enumerate() {
                if other == (rest, pair) {
                    m[(i, j)] += C64::new(lambda / 8.0, 0.0);
                }
            }
        }
    }
    Ok(DensityMatrix::from_trusted(ComplexMatrix::wrap(m)))
}

/// [`noisy_ghz`] rotated by independent single-qubit Haar unitaries.
pub fn locally_random_ghz(
    n_qubits: usize,
    partition: &NodePartition,
    lambda: f64,
    seed: RngSeed,
) -> Result<DensityMatrix> {
    let base = noisy_ghz(n_qubits, partition, lambda)?;
    let mut rng = seed.rng();
    let adjoints: Vec<ComplexMatrix> = (0..n_qubits)
        .map(|_| haar_unitary(2, &mut rng).adjoint())
        .collect();
    let refs: Vec<&ComplexMatrix> = adjoints.iter().collect();
    // conjugate_by_product computes V† ρ V; with V = U† that is U ρ U†.
    let rotated = conjugate_by_product(base.matrix(), &vec![2; n_qubits], &refs);
    Ok(DensityMatrix::from_trusted(rotated.hermitian_part()))
}
