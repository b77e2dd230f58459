//! Experiment configs, batch runners and the command-line front end.
//!
//! A config is a flat `key = value` file; `#` starts a comment. Paths are
//! resolved against the config file's directory.
//!
//! ```text
//! hamiltonian = h2.ham
//! ansatz = h2.ans
//! methods = vg, qng, hqng
//! eta = 0.05
//! lambda = 0.1
//! seeds = 0-9
//! max_steps = 200
//! init = perturb:h2.center:1.0
//! output_dir = ../out/h2_scaling
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gradients::derivative_state_jacobian;
use crate::metrics::{
    default_rank_tolerance, fubini_study, full_pauli_pullback, hamiltonian_aware, rank_probe,
    InversePolicy, MetricTensor, DEFAULT_LAMBDA,
};
use crate::optimizers::{
    coordinate_maps, format_float, run, run_reparameterized, Method, OptimizerConfig,
    Reparameterization, RunRecord, RunStatus, CHEMICAL_ACCURACY, DEFAULT_ETA,
};
use crate::oracle::ground_state;
use crate::pauli::{Hamiltonian, DENSE_QUBIT_LIMIT};
use crate::sim::Ansatz;

/// Fraction of late energy increases above which a run counts as oscillating.
pub const OSCILLATION_FRACTION: f64 = 0.1;

/// Starting parameters of every run in an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Zeros,
    Explicit(Vec<f64>),
    /// `center + U(-radius, radius)` per coordinate, drawn from the run's seed,
    /// so every method sees the same start for a given seed.
    UniformPerturbation {
        center: PathBuf,
        radius: f64,
    },
}

impl InitSpec {
    /// `zeros`, `explicit:<v0>,<v1>,..` or `perturb:<center file>:<radius>`;
    /// a relative center path is taken relative to `base`.
    pub fn parse(s: &str, base: &Path) -> Result<Self> {
        let s = s.trim();
        if s == "zeros" {
            return Ok(InitSpec::Zeros);
        }
        if let Some(values) = s.strip_prefix("explicit:") {
            return Ok(InitSpec::Explicit(parse_floats(values)?));
        }
        if let Some(rest) = s.strip_prefix("perturb:") {
            let (path, radius) = rest.rsplit_once(':').ok_or_else(|| {
                Error::InvalidArgument(format!("expected perturb:<path>:<radius>, got '{s}'"))
            })?;
            let radius: f64 = parse_value(radius, "radius")?;
            if !(radius >= 0.0) || !radius.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "radius must be >= 0, got {radius}"
                )));
            }
            return Ok(InitSpec::UniformPerturbation {
                center: base.join(path.trim()),
                radius,
            });
        }
        Err(Error::InvalidArgument(format!("unknown init '{s}'")))
    }

    pub fn params(&self, n_params: usize, seed: u64) -> Result<Vec<f64>> {
        let values = match self {
            InitSpec::Zeros => vec![0.0; n_params],
            InitSpec::Explicit(v) => v.clone(),
            InitSpec::UniformPerturbation { center, radius } => {
                let center = read_vector(center)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                center
                    .iter()
                    .map(|c| {
                        if *radius > 0.0 {
                            c + rng.random_range(-radius..*radius)
                        } else {
                            *c
                        }
                    })
                    .collect()
            }
        };
        if values.len() != n_params {
            return Err(Error::DimensionMismatch {
                expected: n_params,
                found: values.len(),
            });
        }
        Ok(values)
    }
}

/// Everything needed to reproduce a batch of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub hamiltonian_path: PathBuf,
    pub ansatz_path: PathBuf,
    pub methods: Vec<Method>,
    pub eta: f64,
    pub policy: InversePolicy,
    pub shots: Option<u64>,
    pub seeds: Vec<u64>,
    pub max_steps: usize,
    pub energy_tolerance: f64,
    pub init: InitSpec,
    pub output_dir: PathBuf,
    /// Names from [`coordinate_maps`]; empty means plain theta-space runs.
    pub reparameterizations: Vec<String>,
    /// Values for `lambda-sweep`.
    pub lambdas: Vec<f64>,
}

impl ExperimentConfig {
    pub fn new(hamiltonian_path: impl Into<PathBuf>, ansatz_path: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            hamiltonian_path: hamiltonian_path.into(),
            ansatz_path: ansatz_path.into(),
            methods: Method::ALL.to_vec(),
            eta: DEFAULT_ETA,
            policy: InversePolicy::default(),
            shots: None,
            seeds: vec![0],
            max_steps: 100,
            energy_tolerance: CHEMICAL_ACCURACY,
            init: InitSpec::Zeros,
            output_dir: PathBuf::from("out"),
            reparameterizations: Vec::new(),
            lambdas: Vec::new(),
        }
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut hamiltonian = None;
        let mut ansatz = None;
        let mut config = ExperimentConfig::new("", "");
        let mut lambda = None;
        let mut policy = None;
        let mut output_dir = None;
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(line_no, format!("expected 'key = value', got '{line}'"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::parse(line_no, format!("duplicate key '{key}'")));
            }
            let at_line = |e: Error| Error::parse(line_no, e.to_string());
            match key {
                "hamiltonian" => hamiltonian = Some(base.join(value)),
                "ansatz" => ansatz = Some(base.join(value)),
                "methods" | "method" => config.methods = parse_methods(value).map_err(at_line)?,
                "eta" => config.eta = parse_value(value, key).map_err(at_line)?,
                "lambda" => lambda = Some(parse_value::<f64>(value, key).map_err(at_line)?),
                "inverse_policy" => policy = Some(value.parse::<InversePolicy>().map_err(at_line)?),
                "shots" => config.shots = parse_shots(value).map_err(at_line)?,
                "seeds" | "seed" => config.seeds = parse_seeds(value).map_err(at_line)?,
                "max_steps" => config.max_steps = parse_value(value, key).map_err(at_line)?,
                "energy_tolerance" => {
                    config.energy_tolerance = parse_value(value, key).map_err(at_line)?
                }
                "init" => config.init = InitSpec::parse(value, base).map_err(at_line)?,
                "output_dir" => output_dir = Some(base.join(value)),
                "reparameterizations" => config.reparameterizations = parse_names(value),
                "lambdas" => config.lambdas = parse_floats(value).map_err(at_line)?,
                _ => return Err(Error::parse(line_no, format!("unknown key '{key}'"))),
            }
        }
        config.hamiltonian_path =
            hamiltonian.ok_or_else(|| Error::parse(0, "missing key 'hamiltonian'"))?;
        config.ansatz_path = ansatz.ok_or_else(|| Error::parse(0, "missing key 'ansatz'"))?;
        config.policy = match (policy, lambda) {
            (Some(p), _) => p,
            (None, Some(l)) => InversePolicy::Regularized { lambda: l },
            (None, None) => InversePolicy::default(),
        };
        config.output_dir = output_dir.unwrap_or_else(|| base.join("out"));
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|e| e.in_file(path.display().to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("seeds must be non-empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("methods must be non-empty".into()));
        }
        let maps = coordinate_maps();
        for name in &self.reparameterizations {
            if !maps.iter().any(|m| m.name() == name) {
                return Err(Error::InvalidArgument(format!(
                    "unknown reparameterization '{name}'"
                )));
            }
        }
        self.optimizer_config(self.methods[0], self.seeds[0])
            .validate()
    }

    pub fn optimizer_config(&self, method: Method, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            method,
            eta: self.eta,
            policy: self.policy,
            max_steps: self.max_steps,
            energy_tolerance: self.energy_tolerance,
            shots: self.shots,
            seed,
        }
    }
}

/// Hamiltonian, ansatz and reference energy of a config.
#[derive(Debug, Clone)]
pub struct Problem {
    pub hamiltonian: Hamiltonian,
    pub ansatz: Ansatz,
    /// Dense ground energy; `None` above the dense size limit.
    pub ground_energy: Option<f64>,
}

impl Problem {
    pub fn load(hamiltonian_path: &Path, ansatz_path: &Path) -> Result<Self> {
        let hamiltonian = load_hamiltonian(hamiltonian_path)?;
        let ansatz = load_ansatz(ansatz_path)?;
        if hamiltonian.n_qubits() != ansatz.n_qubits() {
            return Err(Error::QubitMismatch {
                expected: ansatz.n_qubits(),
                found: hamiltonian.n_qubits(),
            });
        }
        let ground_energy = if hamiltonian.n_qubits() <= DENSE_QUBIT_LIMIT {
            Some(ground_state(&hamiltonian)?.energy)
        } else {
            None
        };
        Ok(Problem {
            hamiltonian,
            ansatz,
            ground_energy,
        })
    }
}

pub fn load_hamiltonian(path: &Path) -> Result<Hamiltonian> {
    Hamiltonian::parse(&read_text(path)?).map_err(|e| e.in_file(path.display().to_string()))
}

pub fn load_ansatz(path: &Path) -> Result<Ansatz> {
    Ansatz::parse(&read_text(path)?).map_err(|e| e.in_file(path.display().to_string()))
}

/// One finished run of an experiment.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub method: Method,
    pub map: Option<String>,
    pub seed: u64,
    pub record: RunRecord,
}

impl RunOutcome {
    /// `method` or `method_map`.
    pub fn series(&self) -> String {
        match &self.map {
            Some(m) => format!("{}_{m}", self.method),
            None => self.method.to_string(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}_seed{}.csv", self.series(), self.seed)
    }
}

/// Runs every (method, reparameterization, seed) combination of `config`
/// in parallel. The result order is fixed: methods, then maps, then seeds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Problem, Vec<RunOutcome>)> {
    config.validate()?;
    let problem = Problem::load(&config.hamiltonian_path, &config.ansatz_path)?;
    let m = problem.ansatz.n_params();
    let maps: Vec<Box<dyn Reparameterization>> = coordinate_maps()
        .into_iter()
        .filter(|t| config.reparameterizations.iter().any(|n| n == t.name()))
        .collect();
    if !maps.is_empty() && m != 2 {
        return Err(Error::InvalidArgument(format!(
            "reparameterizations act on two parameters, the ansatz has {m}"
        )));
    }
    let map_slots: Vec<Option<&dyn Reparameterization>> = if maps.is_empty() {
        vec![None]
    } else {
        config
            .reparameterizations
            .iter()
            .map(|n| maps.iter().find(|t| t.name() == n).map(|t| t.as_ref()))
            .collect()
    };
    let mut jobs = Vec::new();
    for &method in &config.methods {
        for &map in &map_slots {
            for &seed in &config.seeds {
                jobs.push((method, map, seed));
            }
        }
    }
    let outcomes = jobs
        .par_iter()
        .map(|&(method, map, seed)| {
            let initial = config.init.params(m, seed)?;
            let opt = config.optimizer_config(method, seed);
            let record = match map {
                None => run(
                    &problem.ansatz,
                    &problem.hamiltonian,
                    &opt,
                    &initial,
                    problem.ground_energy,
                )?,
                Some(t) => run_reparameterized(
                    &problem.ansatz,
                    &problem.hamiltonian,
                    &opt,
                    t,
                    &initial,
                    problem.ground_energy,
                )?,
            };
            Ok(RunOutcome {
                method,
                map: map.map(|t| t.name().to_string()),
                seed,
                record,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((problem, outcomes))
}

/// Median of step counts where an unreached target counts as infinite;
/// `None` when the median itself is infinite.
pub fn median_steps(steps: &[Option<usize>]) -> Option<f64> {
    if steps.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = steps
        .iter()
        .map(|s| s.map_or(f64::INFINITY, |k| k as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    median.is_finite().then_some(median)
}

fn series_order(outcomes: &[RunOutcome]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for o in outcomes {
        let s = o.series();
        if !names.contains(&s) {
            names.push(s);
        }
    }
    names
}

/// Long-format per-step means across seeds: `series,step,mean_energy,mean_delta_e`.
/// A run that stopped early contributes its last value to later steps.
pub fn summary_csv(outcomes: &[RunOutcome]) -> String {
    let mut out = String::from("series,step,mean_energy,mean_delta_e\n");
    for name in series_order(outcomes) {
        let runs: Vec<&RunRecord> = outcomes
            .iter()
            .filter(|o| o.series() == name)
            .map(|o| &o.record)
            .collect();
        let len = runs.iter().map(|r| r.energies.len()).max().unwrap_or(0);
        let held = |v: &[f64], k: usize| v[k.min(v.len() - 1)];
        for k in 0..len {
            let mean_e = runs.iter().map(|r| held(&r.energies, k)).sum::<f64>() / runs.len() as f64;
            let mean_d: Option<f64> = runs
                .iter()
                .map(|r| r.delta_e.as_ref().map(|d| held(d, k)))
                .sum::<Option<f64>>()
                .map(|s| s / runs.len() as f64);
            let _ = writeln!(
                out,
                "{name},{k},{},{}",
                format_float(mean_e),
                mean_d.map(format_float).unwrap_or_default()
            );
        }
    }
    out
}

/// Per-run chemical-accuracy crossing: step, cumulative estimations, final state.
pub fn crossings_csv(outcomes: &[RunOutcome]) -> String {
    let mut out = String::from(
        "series,seed,steps_to_chemical_accuracy,estimations_at_crossing,final_delta_e,status\n",
    );
    for o in outcomes {
        let r = &o.record;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            o.series(),
            o.seed,
            r.first_step_below(CHEMICAL_ACCURACY)
                .map(|k| k.to_string())
                .unwrap_or_default(),
            r.estimations_at(CHEMICAL_ACCURACY)
                .map(|k| k.to_string())
                .unwrap_or_default(),
            r.delta_e
                .as_ref()
                .and_then(|d| d.last())
                .map(|&d| format_float(d))
                .unwrap_or_default(),
            r.status
        );
    }
    out
}

/// Per-series medians of the crossing step and of the estimations spent by then.
pub fn median_table(outcomes: &[RunOutcome]) -> String {
    let mut out = String::from(
        "series,runs,reached,median_steps_to_chemical_accuracy,median_estimations_at_crossing\n",
    );
    for name in series_order(outcomes) {
        let runs: Vec<&RunRecord> = outcomes
            .iter()
            .filter(|o| o.series() == name)
            .map(|o| &o.record)
            .collect();
        let steps: Vec<Option<usize>> = runs
            .iter()
            .map(|r| r.first_step_below(CHEMICAL_ACCURACY))
            .collect();
        let estimations: Vec<Option<usize>> = runs
            .iter()
            .map(|r| r.estimations_at(CHEMICAL_ACCURACY).map(|e| e as usize))
            .collect();
        let show = |m: Option<f64>| m.map_or_else(|| "inf".to_string(), |x| x.to_string());
        let _ = writeln!(
            out,
            "{name},{},{},{},{}",
            runs.len(),
            steps.iter().flatten().count(),
            show(median_steps(&steps)),
            show(median_steps(&estimations))
        );
    }
    out
}

/// Writes one CSV per run plus `summary.csv`, `crossings.csv` and `medians.csv`.
pub fn write_experiment(dir: &Path, outcomes: &[RunOutcome]) -> Result<()> {
    create_dir(dir)?;
    for o in outcomes {
        write_file(&dir.join(o.file_name()), &o.record.to_csv())?;
    }
    write_file(&dir.join("summary.csv"), &summary_csv(outcomes))?;
    write_file(&dir.join("crossings.csv"), &crossings_csv(outcomes))?;
    write_file(&dir.join("medians.csv"), &median_table(outcomes))
}

/// Behaviour of one H-QNG run in a regularization sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepClass {
    /// Reached the energy tolerance.
    Converged,
    /// Energy rose on more than [`OSCILLATION_FRACTION`] of the late steps.
    Oscillating,
    /// Ran out of budget above tolerance without oscillating.
    Slow,
}

impl SweepClass {
    pub fn name(self) -> &'static str {
        match self {
            SweepClass::Converged => "converged",
            SweepClass::Oscillating => "oscillating",
            SweepClass::Slow => "slow",
        }
    }
}

/// Fraction of steps in the second half of the trace whose energy rose.
pub fn late_increase_fraction(energies: &[f64]) -> f64 {
    let steps = energies.len().saturating_sub(1);
    if steps == 0 {
        return 0.0;
    }
    let start = steps / 2;
    let late = &energies[start..];
    let rises = late
        .windows(2)
        .filter(|w| w[1] > w[0] + 1e-12 * w[0].abs().max(1.0))
        .count();
    rises as f64 / (late.len() - 1).max(1) as f64
}

pub fn classify(record: &RunRecord) -> SweepClass {
    if record.status == RunStatus::Converged && record.delta_e.is_some() {
        SweepClass::Converged
    } else if late_increase_fraction(&record.energies) > OSCILLATION_FRACTION {
        SweepClass::Oscillating
    } else {
        SweepClass::Slow
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub lambda: f64,
    pub record: RunRecord,
    pub class: SweepClass,
}

/// H-QNG once per `lambda` from the config's first seed.
pub fn lambda_sweep(
    config: &ExperimentConfig,
    lambdas: &[f64],
) -> Result<(Problem, Vec<SweepPoint>)> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("no lambda values given".into()));
    }
    config.validate()?;
    let problem = Problem::load(&config.hamiltonian_path, &config.ansatz_path)?;
    let seed = config.seeds[0];
    let initial = config.init.params(problem.ansatz.n_params(), seed)?;
    let points = lambdas
        .par_iter()
        .map(|&lambda| {
            let opt = OptimizerConfig {
                policy: InversePolicy::Regularized { lambda },
                ..config.optimizer_config(Method::Hqng, seed)
            };
            opt.validate()?;
            let record = run(
                &problem.ansatz,
                &problem.hamiltonian,
                &opt,
                &initial,
                problem.ground_energy,
            )?;
            let class = classify(&record);
            Ok(SweepPoint {
                lambda,
                record,
                class,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((problem, points))
}

pub fn sweep_summary_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("lambda,class,steps,final_delta_e,late_increase_fraction\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.lambda,
            p.class.name(),
            p.record.steps(),
            p.record
                .delta_e
                .as_ref()
                .and_then(|d| d.last())
                .map(|&d| format_float(d))
                .unwrap_or_default(),
            format_float(late_increase_fraction(&p.record.energies))
        );
    }
    out
}

pub fn write_sweep(dir: &Path, points: &[SweepPoint]) -> Result<()> {
    create_dir(dir)?;
    for p in points {
        write_file(
            &dir.join(format!("hqng_lambda{}.csv", p.lambda)),
            &p.record.to_csv(),
        )?;
    }
    write_file(&dir.join("lambda_summary.csv"), &sweep_summary_csv(points))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WhichMetric {
    /// Fubini-Study tensor.
    A,
    /// Hamiltonian-aware tensor.
    T,
    /// Pullback through all Pauli expectations (n <= 4).
    G,
}

pub fn compute_metric(
    problem: &Problem,
    params: &[f64],
    which: WhichMetric,
) -> Result<MetricTensor> {
    match which {
        WhichMetric::A => fubini_study(&problem.ansatz, params),
        WhichMetric::T => {
            let tj = derivative_state_jacobian(&problem.ansatz, &problem.hamiltonian, params)?;
            hamiltonian_aware(&problem.hamiltonian, &tj)
        }
        WhichMetric::G => full_pauli_pullback(&problem.ansatz, params),
    }
}

/// Matrix block, eigenvalue block and numerical rank, each with a header row.
pub fn metric_report(t: &MetricTensor, rank_tolerance: f64) -> String {
    let n = t.dim();
    let mut out = String::from("row");
    for j in 0..n {
        let _ = write!(out, ",col_{j}");
    }
    out.push('\n');
    for i in 0..n {
        let _ = write!(out, "{i}");
        for j in 0..n {
            let _ = write!(out, ",{}", format_float(t.entries[(i, j)]));
        }
        out.push('\n');
    }
    out.push_str("\nindex,eigenvalue\n");
    for (k, e) in t.eigenvalues().iter().enumerate() {
        let _ = writeln!(out, "{k},{}", format_float(*e));
    }
    let _ = write!(out, "\nnumerical_rank\n{}\n", rank_probe(t, rank_tolerance));
    out
}

#[derive(Debug, Parser)]
#[command(
    name = "hqng",
    version,
    about = "Natural-gradient VQE experiments on an exact statevector simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured method and seed, writing per-run CSV traces.
    Run(RunArgs),
    /// Run H-QNG once per regularization strength and classify each run.
    LambdaSweep(SweepArgs),
    /// Print a metric tensor, its spectrum and numerical rank.
    Metric(MetricArgs),
    /// Print the ground energy and its degeneracy.
    Gs(GsArgs),
}

/// Flags that override values from the config file.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub hamiltonian: Option<PathBuf>,
    #[arg(long)]
    pub ansatz: Option<PathBuf>,
    /// Comma-separated list of vg, qng, hqng, opvqite.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Regularization strength; selects the regularized inverse.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// exact, pinv[:rcond] or regularized[:lambda].
    #[arg(long)]
    pub policy: Option<String>,
    /// Shots per estimated quantity, or `exact`.
    #[arg(long)]
    pub shots: Option<String>,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Comma-separated seeds and inclusive ranges, e.g. `0-4,9`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub energy_tolerance: Option<f64>,
    /// zeros, explicit:<v0>,<v1>,.. or perturb:<center file>:<radius>.
    #[arg(long)]
    pub init: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config file.
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub config: Option<PathBuf>,
    /// Comma-separated regularization strengths.
    #[arg(long)]
    pub lambdas: Option<String>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    #[arg(long)]
    pub hamiltonian: PathBuf,
    #[arg(long)]
    pub ansatz: PathBuf,
    /// Comma-separated parameters; zeros when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub params: Option<String>,
    #[arg(long, value_enum, ignore_case = true, default_value = "t")]
    pub which: WhichMetric,
    /// Eigenvalues above this fraction of the largest count toward the rank
    /// [default: dimension times machine epsilon].
    #[arg(long)]
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GsArgs {
    #[arg(long)]
    pub hamiltonian: PathBuf,
}

fn resolve_config(config: Option<&Path>, o: &Overrides) -> Result<ExperimentConfig> {
    let mut c = match config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let (Some(h), Some(a)) = (&o.hamiltonian, &o.ansatz) else {
                return Err(Error::InvalidArgument(
                    "give a config file or both --hamiltonian and --ansatz".into(),
                ));
            };
            ExperimentConfig::new(h, a)
        }
    };
    if let Some(h) = &o.hamiltonian {
        c.hamiltonian_path = h.clone();
    }
    if let Some(a) = &o.ansatz {
        c.ansatz_path = a.clone();
    }
    if let Some(m) = &o.method {
        c.methods = parse_methods(m)?;
    }
    if let Some(eta) = o.eta {
        c.eta = eta;
    }
    if let Some(lambda) = o.lambda {
        c.policy = InversePolicy::Regularized { lambda };
    }
    if let Some(p) = &o.policy {
        c.policy = p.parse()?;
    }
    if let Some(s) = &o.shots {
        c.shots = parse_shots(s)?;
    }
    if let Some(seed) = o.seed {
        c.seeds = vec![seed];
    }
    if let Some(s) = &o.seeds {
        c.seeds = parse_seeds(s)?;
    }
    if let Some(k) = o.max_steps {
        c.max_steps = k;
    }
    if let Some(tol) = o.energy_tolerance {
        c.energy_tolerance = tol;
    }
    if let Some(init) = &o.init {
        c.init = InitSpec::parse(init, Path::new(""))?;
    }
    if let Some(out) = &o.out {
        c.output_dir = out.clone();
    }
    c.validate()?;
    Ok(c)
}

/// Executes a parsed command line, writing tables to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: "<stdout>".into(),
        source: e,
    };
    match cli.command {
        Command::Run(args) => {
            let config = resolve_config(args.config.as_deref(), &args.overrides)?;
            let (_, outcomes) = run_experiment(&config)?;
            write_experiment(&config.output_dir, &outcomes)?;
            out.write_all(median_table(&outcomes).as_bytes())
                .map_err(io)?;
        }
        Command::LambdaSweep(args) => {
            let config = resolve_config(args.config.as_deref(), &args.overrides)?;
            let lambdas = match &args.lambdas {
                Some(s) => parse_floats(s)?,
                None if !config.lambdas.is_empty() => config.lambdas.clone(),
                None => vec![0.0, 0.01, DEFAULT_LAMBDA, 1.0, 10.0],
            };
            let (_, points) = lambda_sweep(&config, &lambdas)?;
            write_sweep(&config.output_dir, &points)?;
            out.write_all(sweep_summary_csv(&points).as_bytes())
                .map_err(io)?;
        }
        Command::Metric(args) => {
            let problem = Problem::load(&args.hamiltonian, &args.ansatz)?;
            let params = match &args.params {
                Some(s) => parse_floats(s)?,
                None => vec![0.0; problem.ansatz.n_params()],
            };
            let t = compute_metric(&problem, &params, args.which)?;
            let tol = args
                .rank_tol
                .unwrap_or_else(|| default_rank_tolerance(t.dim()));
            out.write_all(metric_report(&t, tol).as_bytes())
                .map_err(io)?;
        }
        Command::Gs(args) => {
            let g = ground_state(&load_hamiltonian(&args.hamiltonian)?)?;
            let text = format!(
                "ground_energy,degeneracy\n{},{}\n",
                format_float(g.energy),
                g.degeneracy
            );
            out.write_all(text.as_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

/// Reads whitespace- or comma-separated numbers; `#` starts a comment.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
            let v = tok.parse().map_err(|_| {
                Error::parse(idx + 1, format!("bad number '{tok}'"))
                    .in_file(path.display().to_string())
            })?;
            values.push(v);
        }
    }
    Ok(values)
}

fn parse_value<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value for {what}: '{}'", s.trim())))
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_value(t, "number"))
        .collect()
}

fn parse_names(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    parse_names(s).iter().map(|n| n.parse()).collect()
}

fn parse_shots(s: &str) -> Result<Option<u64>> {
    match s.trim() {
        "exact" | "none" => Ok(None),
        t => match parse_value::<u64>(t, "shots")? {
            0 => Err(Error::InvalidArgument("shots must be positive".into())),
            n => Ok(Some(n)),
        },
    }
}

/// `0,3,5-9`; ranges are inclusive.
fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in parse_names(s) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (parse_value(a, "seed")?, parse_value(b, "seed")?);
                if a > b {
                    return Err(Error::InvalidArgument(format!("empty seed range '{part}'")));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(parse_value(&part, "seed")?),
        }
    }
    Ok(seeds)
}
