//! Distributed frequency acquisition: node actors report shot-tagged local
//! outcomes over byte streams and an aggregator joins them into a table.
//!
//! The coordinator holds the joint state and draws the joint outcomes with
//! the centralized sampler, so a fault-free session reproduces
//! [`sample_frequencies`] exactly. Each node actor only sees its own
//! `(basis, outcome)` per shot.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::sync::mpsc;
use std::thread;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::designs::node_povm;
use crate::error::{Error, Result};
use crate::matcore::DensityMatrix;
use crate::measurement::{sample_frequencies, FrequencyTable, OutcomeKey, TableMode};
use crate::partition::NodePartition;
use crate::states::RngSeed;

/// One node's report for one shot. `node_id` is 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub shot_id: u64,
    pub node_id: usize,
    pub basis_id: usize,
    pub outcome: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transport {
    /// Channel-backed byte pipe inside the process.
    InProcess,
    /// Connected Unix socket pairs.
    Stream,
}

/// Deliberate protocol violations for testing the aggregator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    Drop { shot_id: u64, node_id: usize },
    Duplicate { shot_id: u64, node_id: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub partition: NodePartition,
    pub shots: u64,
    pub seed: RngSeed,
    pub transport: Transport,
    #[serde(default)]
    pub faults: Vec<Fault>,
}

impl SessionConfig {
    pub fn new(partition: NodePartition, shots: u64, seed: RngSeed, transport: Transport) -> Self {
        Self {
            partition,
            shots,
            seed,
            transport,
            faults: Vec::new(),
        }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.faults.push(fault);
        self
    }

    /// `SESSION N=<N> M=<M> dims=<d1,..,dM> seed=<seed>`.
    pub fn manifest(&self) -> String {
        let dims: Vec<String> = self
            .partition
            .dims()
            .iter()
            .map(ToString::to_string)
            .collect();
        format!(
            "SESSION N={} M={} dims={} seed={}",
            self.shots,
            self.partition.num_nodes(),
            dims.join(","),
            self.seed.seed
        )
    }
}

/// `shot,node,basis,outcome` terminated by a newline.
pub fn encode_record(rec: &OutcomeRecord) -> String {
    format!(
        "{},{},{},{}\n",
        rec.shot_id, rec.node_id, rec.basis_id, rec.outcome
    )
}

/// Parses one record line and range-checks it against `partition`.
/// Columns in errors are 0-based.
pub fn decode_record(line: &str, partition: &NodePartition) -> Result<OutcomeRecord> {
    const NAMES: [&str; 4] = ["shot_id", "node_id", "basis_id", "outcome"];
    let fields: Vec<&str> = line.trim_end_matches(['\n', '\r']).split(',').collect();
    if fields.len() < 4 {
        return Err(Error::Parse {
            column: fields.len(),
            reason: format!("missing field {}", NAMES[fields.len()]),
        });
    }
    if fields.len() > 4 {
        return Err(Error::Parse {
            column: 4,
            reason: "unexpected extra field".into(),
        });
    }
    let mut values = [0u64; 4];
    for (col, (field, slot)) in fields.iter().zip(values.iter_mut()).enumerate() {
        *slot = field.trim().parse().map_err(|e| Error::Parse {
            column: col,
            reason: format!("{}: {e}", NAMES[col]),
        })?;
    }
    let [shot_id, node_id, basis_id, outcome] = values;
    let m = partition.num_nodes() as u64;
    if node_id == 0 || node_id > m {
        return Err(Error::Parse {
            column: 1,
            reason: format!("node_id {node_id} outside 1..={m}"),
        });
    }
    let d = partition.node_dim(node_id as usize - 1) as u64;
    if basis_id > d {
        return Err(Error::Parse {
            column: 2,
            reason: format!("basis_id {basis_id} outside 0..={d}"),
        });
    }
    if outcome >= d {
        return Err(Error::Parse {
            column: 3,
            reason: format!("outcome {outcome} outside 0..{d}"),
        });
    }
    Ok(OutcomeRecord {
        shot_id,
        node_id: node_id as usize,
        basis_id: basis_id as usize,
        outcome: outcome as usize,
    })
}

struct ChannelWriter(mpsc::Sender<Vec<u8>>);

impl Write for ChannelWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0
            .send(buf.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "aggregator hung up"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

struct ChannelReader {
    rx: mpsc::Receiver<Vec<u8>>,
    chunk: Vec<u8>,
    pos: usize,
}

impl Read for ChannelReader {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        while self.pos == self.chunk.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.chunk = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = buf.len().min(self.chunk.len() - self.pos);
        buf[..n].copy_from_slice(&self.chunk[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

type Sink = Box<dyn Write + Send>;
type Source = Box<dyn Read + Send>;

fn open_link(transport: Transport) -> Result<(Sink, Source)> {
    match transport {
        Transport::InProcess => {
            let (tx, rx) = mpsc::channel();
            Ok((
                Box::new(ChannelWriter(tx)),
                Box::new(ChannelReader {
                    rx,
                    chunk: Vec::new(),
                    pos: 0,
                }),
            ))
        }
        Transport::Stream => open_socket(),
    }
}

#[cfg(unix)]
fn open_socket() -> Result<(Sink, Source)> {
    let (a, b) =
        std::os::unix::net::UnixStream::pair().map_err(|e| Error::Transport(e.to_string()))?;
    Ok((Box::new(a), Box::new(b)))
}

#[cfg(not(unix))]
fn open_socket() -> Result<(Sink, Source)> {
    Err(Error::Transport(
        "socket transport needs a Unix platform".into(),
    ))
}

/// Node actor: forwards the manifest and then one record per local event.
fn node_actor(
    node_id: usize,
    manifest: String,
    events: mpsc::Receiver<(u64, usize, usize)>,
    faults: Vec<Fault>,
    sink: Sink,
) -> Result<()> {
    let mut out = io::BufWriter::new(sink);
    let io_err = |e: io::Error| Error::Transport(format!("node {node_id}: {e}"));
    writeln!(out, "{manifest}").map_err(io_err)?;
    for (shot_id, basis_id, outcome) in events {
        let rec = OutcomeRecord {
            shot_id,
            node_id,
            basis_id,
            outcome,
        };
        let mut copies = 1;
        for f in &faults {
            match *f {
                Fault::Drop {
                    shot_id: s,
                    node_id: n,
                } if s == shot_id && n == node_id => copies = 0,
                Fault::Duplicate {
                    shot_id: s,
                    node_id: n,
                } if s == shot_id && n == node_id => copies = 2,
                _ => {}
            }
        }
        for _ in 0..copies {
            out.write_all(encode_record(&rec).as_bytes())
                .map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

/// Reads one node stream, checks its manifest and forwards decoded records.
fn stream_reader(
    source: Source,
    manifest: String,
    partition: NodePartition,
    tx: mpsc::Sender<Result<OutcomeRecord>>,
) {
    let mut lines = BufReader::new(source).lines();
    let header = match lines.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => {
            let _ = tx.send(Err(Error::Transport(e.to_string())));
            return;
        }
        None => {
            let _ = tx.send(Err(Error::Transport(
                "stream closed before manifest".into(),
            )));
            return;
        }
    };
    if header != manifest {
        let _ = tx.send(Err(Error::Transport(format!(
            "unexpected manifest {header:?}"
        ))));
        return;
    }
    for line in lines {
        let item = line
            .map_err(|e| Error::Transport(e.to_string()))
            .and_then(|l| decode_record(&l, &partition));
        let failed = item.is_err();
        if tx.send(item).is_err() || failed {
            return;
        }
    }
}

/// Joins records by shot id and counts joint keys.
pub fn aggregate<I>(records: I, partition: &NodePartition, shots: u64) -> Result<FrequencyTable>
where
    I: IntoIterator<Item = OutcomeRecord>,
{
    let m = partition.num_nodes();
    let mut shots_seen: HashMap<u64, Vec<Option<(usize, usize)>>> = HashMap::new();
    for rec in records {
        if rec.shot_id >= shots {
            return Err(Error::Parse {
                column: 0,
                reason: format!("shot_id {} outside 0..{shots}", rec.shot_id),
            });
        }
        let slots = shots_seen
            .entry(rec.shot_id)
            .or_insert_with(|| vec![None; m]);
        let slot = &mut slots[rec.node_id - 1];
        if slot.is_some() {
            return Err(Error::DuplicateRecord {
                shot_id: rec.shot_id,
                node_id: rec.node_id,
            });
        }
        *slot = Some((rec.basis_id, rec.outcome));
    }
    let mut counts: BTreeMap<OutcomeKey, u64> = BTreeMap::new();
    for shot_id in 0..shots {
        let slots = shots_seen.get(&shot_id);
        let mut key = OutcomeKey {
            bases: Vec::with_capacity(m),
            outcomes: Vec::with_capacity(m),
        };
        for node in 0..m {
            match slots.and_then(|s| s[node]) {
                Some((b, x)) => {
                    key.bases.push(b);
                    key.outcomes.push(x);
                }
                None => {
                    return Err(Error::MissingRecord {
                        shot_id,
                        node_id: node + 1,
                    })
                }
            }
        }
        *counts.entry(key).or_insert(0) += 1;
    }
    FrequencyTable::from_counts(partition.clone(), TableMode::Multinomial, counts)
}

/// Runs coordinator, node actors and aggregator for one session.
pub fn run_distributed_session(
    rho: &DensityMatrix,
    config: &SessionConfig,
) -> Result<FrequencyTable> {
    let partition = &config.partition;
    if rho.dim() != partition.dim() {
        return Err(Error::DimensionMismatch {
            expected: partition.dim(),
            actual: rho.dim(),
        });
    }
    let povm = node_povm(partition)?;
    let joint = sample_frequencies(rho, &povm, config.shots, config.seed)?;

    // Shot labels are a seeded shuffle of the sampled multiset.
    let mut shots: Vec<&OutcomeKey> = Vec::with_capacity(config.shots as usize);
    for (key, c) in joint.counts() {
        shots.extend(std::iter::repeat_n(key, c as usize));
    }
    shots.shuffle(&mut config.seed.derive(&[2]).rng());

    let m = partition.num_nodes();
    let manifest = config.manifest();
    let (record_tx, record_rx) = mpsc::channel();

    thread::scope(|scope| -> Result<FrequencyTable> {
        let mut event_txs = Vec::with_capacity(m);
        let mut actors = Vec::with_capacity(m);
        for node in 0..m {
            let (sink, source) = open_link(config.transport)?;
            let (event_tx, event_rx) = mpsc::channel();
            event_txs.push(event_tx);
            let faults = config.faults.clone();
            let node_manifest = manifest.clone();
            actors.push(
                scope.spawn(move || node_actor(node + 1, node_manifest, event_rx, faults, sink)),
            );
            let tx = record_tx.clone();
            let reader_manifest = manifest.clone();
            let reader_partition = partition.clone();
            scope.spawn(move || stream_reader(source, reader_manifest, reader_partition, tx));
        }
        drop(record_tx);

        for (shot_id, key) in shots.iter().enumerate() {
            for (node, tx) in event_txs.iter().enumerate() {
                tx.send((shot_id as u64, key.bases[node], key.outcomes[node]))
                    .map_err(|_| Error::Transport(format!("node {} stopped early", node + 1)))?;
            }
        }
        drop(event_txs);

        let mut records = Vec::with_capacity(shots.len() * m);
        let mut first_error = None;
        for item in record_rx {
            match item {
                Ok(rec) => records.push(rec),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        for actor in actors {
            actor
                .join()
                .map_err(|_| Error::Transport("node actor panicked".into()))??;
        }
        if let Some(e) = first_error {
            return Err(e);
        }
        aggregate(records, partition, config.shots)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::haar_state;

    fn haar_rho(dim: usize, seed: u64) -> DensityMatrix {
        DensityMatrix::from_pure(&haar_state(dim, RngSeed::new(seed)).unwrap())
    }

    #[test]
    fn record_round_trip() {
        let p = NodePartition::new(vec![2, 1]).unwrap();
        let rec = OutcomeRecord {
            shot_id: 7,
            node_id: 1,
            basis_id: 2,
            outcome: 0,
        };
        let line = encode_record(&rec);
        assert_eq!(line, "7,1,2,0\n");
        assert_eq!(decode_record(&line, &p).unwrap(), rec);
    }

    #[test]
    fn decode_errors_name_the_column() {
        let p = NodePartition::new(vec![1, 1]).unwrap();
        let column = |line: &str| match decode_record(line, &p) {
            Err(Error::Parse { column, .. }) => column,
            other => panic!("{line:?}: {other:?}"),
        };
        assert_eq!(column("7,1,2"), 3);
        assert_eq!(column("7,9,2,0"), 1);
        assert_eq!(column("7,0,2,0"), 1);
        assert_eq!(column("7,1,3,0"), 2);
        assert_eq!(column("7,1,2,2"), 3);
        assert_eq!(column("x,1,2,0"), 0);
        assert_eq!(column("7,1,2,0,5"), 4);
    }

    #[test]
    fn manifest_line() {
        let c = SessionConfig::new(
            NodePartition::new(vec![2, 1]).unwrap(),
            1000,
            RngSeed::new(9),
            Transport::InProcess,
        );
        assert_eq!(c.manifest(), "SESSION N=1000 M=2 dims=4,2 seed=9");
    }

    #[test]
    fn session_matches_centralized_sampler() {
        let p = NodePartition::qubits(2).unwrap();
        let rho = haar_rho(4, 1);
        let seed = RngSeed::new(31);
        let central = sample_frequencies(&rho, &node_povm(&p).unwrap(), 1000, seed).unwrap();
        for transport in [Transport::InProcess, Transport::Stream] {
            let config = SessionConfig::new(p.clone(), 1000, seed, transport);
            assert_eq!(run_distributed_session(&rho, &config).unwrap(), central);
        }
    }

    #[test]
    fn injected_faults_are_reported() {
        let p = NodePartition::qubits(2).unwrap();
        let rho = haar_rho(4, 2);
        let base = SessionConfig::new(p, 200, RngSeed::new(3), Transport::InProcess);
        let dup = base.clone().with_fault(Fault::Duplicate {
            shot_id: 17,
            node_id: 2,
        });
        assert_eq!(
            run_distributed_session(&rho, &dup),
            Err(Error::DuplicateRecord {
                shot_id: 17,
                node_id: 2
            })
        );
        let drop = base.with_fault(Fault::Drop {
            shot_id: 5,
            node_id: 1,
        });
        assert_eq!(
            run_distributed_session(&rho, &drop),
            Err(Error::MissingRecord {
                shot_id: 5,
                node_id: 1
            })
        );
    }

    #[test]
    fn aggregation_ignores_arrival_order() {
        let p = NodePartition::new(vec![1, 2]).unwrap();
        let mut records = Vec::new();
        for shot in 0..50u64 {
            records.push(OutcomeRecord {
                shot_id: shot,
                node_id: 1,
                basis_id: (shot % 3) as usize,
                outcome: (shot % 2) as usize,
            });
            records.push(OutcomeRecord {
                shot_id: shot,
                node_id: 2,
                basis_id: (shot % 5) as usize,
                outcome: (shot % 4) as usize,
            });
        }
        let ordered = aggregate(records.clone(), &p, 50).unwrap();
        let mut rng = RngSeed::new(4).rng();
        for _ in 0..5 {
            records.shuffle(&mut rng);
            assert_eq!(aggregate(records.clone(), &p, 50).unwrap(), ordered);
        }
        assert_eq!(ordered.total_shots(), 50);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let config = SessionConfig::new(
            NodePartition::qubits(2).unwrap(),
            10,
            RngSeed::new(0),
            Transport::InProcess,
        );
        assert!(run_distributed_session(&haar_rho(8, 0), &config).is_err());
    }
}
