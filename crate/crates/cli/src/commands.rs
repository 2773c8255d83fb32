use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use disttomo_core::analysis::{
    effective_dimension, error_bound, failure_probability, fit_scaling,
    negativity_error_bound_squared, sample_complexity, BoundParams, FitResult, ScalingRecord,
};
use disttomo_core::designs::{build_mubs, node_povm, verify_2design};
use disttomo_core::experiment::{run_experiment, Ensemble, ExperimentConfig, ExperimentRow};
use disttomo_core::matcore::PureState;
use disttomo_core::measurement::sample_frequencies;
use disttomo_core::netharness::{run_distributed_session, SessionConfig, Transport};
use disttomo_core::states::{ghz_state, haar_state};
use disttomo_core::{DensityMatrix, NodePartition, RngSeed};

use crate::args::{
    BoundsArgs, FitArgs, SessionArgs, SessionState, SimulateArgs, TransportArg, VerifyArgs,
};

/// Column order of `simulate` output.
pub const CSV_HEADER: [&str; 6] = [
    "partition",
    "N",
    "state_index",
    "trace_error",
    "negativity_error",
    "bound_value",
];

pub const DESK_MAX_QUBITS: usize = 5;
pub const DESK_MAX_SHOTS: u64 = 1_000_000;
pub const MAX_QUBITS: usize = 7;

const TOLERANCE: f64 = 1e-9;

/// Checks every design up to `max_k` qubits. Returns `false` on any violation.
pub fn verify_designs(args: &VerifyArgs, out: &mut dyn Write) -> Result<bool> {
    if args.max_k == 0 || args.max_k > MAX_QUBITS {
        bail!("max-k must lie in 1..={MAX_QUBITS}, got {}", args.max_k);
    }
    let mut ok = true;
    writeln!(
        out,
        "k,d,bases,design_residual,overlap_defect,orthonormality_defect,status"
    )?;
    for k in 1..=args.max_k {
        let design = build_mubs(k).with_context(|| format!("building the design for k = {k}"))?;
        let residual = verify_2design(&design);
        let (cross, intra) = design.unbiasedness_defect();
        let pass = residual < TOLERANCE && cross < TOLERANCE && intra < TOLERANCE;
        ok &= pass;
        writeln!(
            out,
            "{k},{},{},{residual:.3e},{cross:.3e},{intra:.3e},{}",
            design.dim(),
            design.num_bases(),
            if pass { "ok" } else { "FAIL" }
        )?;
    }
    Ok(ok)
}

/// Merges the optional JSON file with command-line overrides.
pub fn experiment_config(args: &SimulateArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let n = args
                .n_qubits
                .ok_or_else(|| anyhow!("either --config or --n-qubits is required"))?;
            ExperimentConfig::new(n, Ensemble::Haar, 20, vec![100_000])
        }
    };
    if let Some(n) = args.n_qubits {
        config.n_qubits = n;
    }
    if !args.partitions.is_empty() {
        config.partitions = args.partitions.clone();
    }
    if let Some(e) = args.ensemble {
        config.ensemble = e.into();
    }
    if let Some(s) = args.num_states {
        config.num_states = s;
    }
    if !args.shots.is_empty() {
        config.shots = args.shots.clone();
    }
    if let Some(l) = args.lambda {
        config.lambda = l;
    }
    if let Some(d) = args.delta {
        config.delta = d;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(split) = &args.node_split {
        config.node_split = Some(split.clone());
    }
    if let Some(o) = &args.output {
        config.output = Some(o.display().to_string());
    }
    Ok(config)
}

/// Rejects configurations above desk scale unless `paper_scale` is set;
/// more than seven qubits is always rejected.
pub fn check_scale(config: &ExperimentConfig, paper_scale: bool) -> Result<()> {
    if config.n_qubits > MAX_QUBITS {
        bail!(
            "{} qubits needs too much memory for the dense simulator (limit {MAX_QUBITS})",
            config.n_qubits
        );
    }
    if !paper_scale {
        if config.n_qubits > DESK_MAX_QUBITS {
            bail!(
                "{} qubits exceeds the desk-scale limit of {DESK_MAX_QUBITS}; pass --paper-scale to run it",
                config.n_qubits
            );
        }
        if let Some(&n) = config.shots.iter().find(|&&n| n > DESK_MAX_SHOTS) {
            bail!("N = {n} exceeds the desk-scale limit of {DESK_MAX_SHOTS}; pass --paper-scale to run it");
        }
    }
    Ok(())
}

pub fn write_rows<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.partition.label(),
            r.shots.to_string(),
            r.state_index.to_string(),
            r.trace_error.to_string(),
            r.negativity_error
                .map(|v| v.to_string())
                .unwrap_or_default(),
            r.bound_value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let config = experiment_config(args)?;
    check_scale(&config, args.paper_scale)?;
    let rows = run_experiment(&config)?;
    match &config.output {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {path}"))?;
            write_rows(&rows, std::io::BufWriter::new(file))?;
            writeln!(out, "wrote {} rows to {path}", rows.len())?;
        }
        None => write_rows(&rows, out)?,
    }
    Ok(())
}

/// Reads simulation CSV files and averages the trace error per
/// (partition, N) cell.
pub fn scaling_records(paths: &[impl AsRef<Path>]) -> Result<Vec<ScalingRecord>> {
    let mut cells: BTreeMap<(NodePartition, u64), Vec<f64>> = BTreeMap::new();
    for path in paths {
        let path = path.as_ref();
        let mut reader =
            csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        let headers = reader.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| anyhow!("{} has no column {name:?}", path.display()))
        };
        let (pc, nc, ec) = (col("partition")?, col("N")?, col("trace_error")?);
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let ctx = || format!("{} row {}", path.display(), line + 1);
            let partition: NodePartition = record[pc].parse().with_context(ctx)?;
            let shots: u64 = record[nc].parse().with_context(ctx)?;
            let err: f64 = record[ec].parse().with_context(ctx)?;
            cells.entry((partition, shots)).or_default().push(err);
        }
    }
    if cells.is_empty() {
        bail!("no data rows");
    }
    Ok(cells
        .into_iter()
        .map(|((p, n), errs)| {
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            ScalingRecord::new(&p, n, mean * mean)
        })
        .collect())
}

pub fn fit(args: &FitArgs, out: &mut dyn Write) -> Result<FitResult> {
    let records = scaling_records(&args.inputs)?;
    let fit = fit_scaling(&records)?;
    writeln!(out, "records: {}", records.len())?;
    writeln!(out, "alpha = {:.4} ± {:.4}", fit.alpha, fit.alpha_se)?;
    writeln!(out, "beta  = {:.4} ± {:.4}", fit.beta, fit.beta_se)?;
    writeln!(out, "gamma = {:.4} ± {:.4}", fit.gamma, fit.gamma_se)?;
    writeln!(
        out,
        "delta = {:.4} ± {:.4}",
        fit.delta_exp, fit.delta_exp_se
    )?;
    if let Some(path) = &args.output {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["coefficient", "value", "std_error"])?;
        for (name, v, se) in [
            ("alpha", fit.alpha, fit.alpha_se),
            ("beta", fit.beta, fit.beta_se),
            ("gamma", fit.gamma, fit.gamma_se),
            ("delta", fit.delta_exp, fit.delta_exp_se),
        ] {
            w.write_record([name.to_string(), v.to_string(), se.to_string()])?;
        }
        w.flush()?;
    }
    Ok(fit)
}

pub fn bounds(args: &BoundsArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(eps) = args.epsilon {
        if !(eps > 0.0 && eps <= 1.0) {
            bail!(
                "epsilon = {eps} is outside (0, 1]: the concentration bound only holds for ε ≤ 1"
            );
        }
    }
    if !(args.delta > 0.0 && args.delta < 1.0) {
        bail!("delta = {} is outside (0, 1)", args.delta);
    }
    let p = &args.partition;
    let params = BoundParams::new(args.shots, p.clone(), args.rank)?;
    writeln!(
        out,
        "partition {p}: M = {}, d = {}, d_eff = {}",
        p.num_nodes(),
        p.dim(),
        effective_dimension(p)
    )?;
    let eps2 = error_bound(&params, args.delta)?;
    writeln!(
        out,
        "error bound (N = {}, r = {}, δ = {}): ε² ≤ {eps2:.6e}, ε ≤ {:.6e}",
        args.shots,
        args.rank,
        args.delta,
        eps2.sqrt()
    )?;
    let neg2 = negativity_error_bound_squared(&params, args.delta)?;
    writeln!(
        out,
        "negativity error bound: ΔN² ≤ {neg2:.6e}, |ΔN| ≤ {:.6e}",
        neg2.sqrt()
    )?;
    if let Some(eps) = args.epsilon {
        let n_min = sample_complexity(p, args.rank, eps, args.delta)?;
        writeln!(
            out,
            "sample complexity (ε = {eps}, δ = {}): N ≥ {n_min}",
            args.delta
        )?;
        let prob = failure_probability(&params, eps)?;
        writeln!(
            out,
            "failure probability (ε = {eps}, N = {}): {prob:.6e}",
            args.shots
        )?;
    }
    Ok(())
}

/// Runs a distributed session and checks it against the centralized
/// sampler. Returns whether the two tables agree.
pub fn session(args: &SessionArgs, out: &mut dyn Write) -> Result<bool> {
    let p = &args.partition;
    let n = p.num_qubits();
    if n > MAX_QUBITS {
        bail!("{n} qubits exceeds the limit of {MAX_QUBITS}");
    }
    let seed = RngSeed::new(args.seed);
    let rho = match args.state {
        SessionState::Haar => haar_state(p.dim(), seed.derive(&[0]))?,
        SessionState::Ghz if n >= 2 => ghz_state(n)?,
        SessionState::Ghz => PureState::basis(2, 0),
    };
    let rho = DensityMatrix::from_pure(&rho);
    let transport = match args.transport {
        TransportArg::InProcess => Transport::InProcess,
        TransportArg::Stream => Transport::Stream,
    };
    let config = SessionConfig::new(p.clone(), args.shots, seed, transport);
    let table = run_distributed_session(&rho, &config)?;
    let central = sample_frequencies(&rho, &node_povm(p)?, args.shots, seed)?;
    let same = table == central;
    writeln!(out, "{}", config.manifest())?;
    writeln!(
        out,
        "aggregated {} shots into {} outcomes; centralized sampler {}",
        table.total_shots(),
        table.len(),
        if same { "agrees" } else { "DISAGREES" }
    )?;
    match &args.output {
        Some(path) => {
            fs::write(path, table.to_text())
                .with_context(|| format!("writing {}", path.display()))?;
            writeln!(out, "table written to {}", path.display())?;
        }
        None => write!(out, "{}", table.to_text())?,
    }
    Ok(same)
}
