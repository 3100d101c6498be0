//! Config-driven batch front end.
//!
//! Every subcommand reads a TOML experiment file (except `circuit`, which
//! takes its inputs as flags), claims an empty output directory and writes
//! its artifacts plus a `manifest.json` holding the effective config. A
//! failing run removes what it wrote.

pub mod artifacts;
pub mod config;

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::circuits::{simulate, synthesize, SuperpositionSpec, Variant};
use crate::dmqmc::{element_error, sample_with, write_jsonl, SampleStats};
use crate::dynamics::{reconstruct_detailed, statistical_band_from_plan, truncation_error, Method};
use crate::error::Error;
use crate::exact::{heisenberg_expectation, tde_average, thermal_density_matrix};
use crate::model::{Basis, BasisState, MAX_DENSE_SITES};
use crate::symmetry::{plan_simulations, symmetrize_errors, symmetrize_rho};
use crate::truncation::{sweep_nw, truncate, write_sweep_csv};
use crate::DensityMatrix;

pub use artifacts::ArtifactDir;
pub use config::{ExperimentConfig, RunPoint, SourceKind, StructureConfig};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "THERMOQUENCH_THREADS";

/// An [`Error`] tagged with the pipeline stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: String,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.source.exit_code()
    }
}

trait Stage<T> {
    fn stage(self, name: impl Into<String>) -> Result<T, StageError>;
}

impl<T, E: Into<Error>> Stage<T> for Result<T, E> {
    fn stage(self, name: impl Into<String>) -> Result<T, StageError> {
        self.map_err(|e| StageError { stage: name.into(), source: e.into() })
    }
}

#[derive(Debug, Parser)]
#[command(name = "thermoquench", version, about = "Thermal quench dynamics of the mixed-field Ising chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct ConfigArgs {
    /// Experiment file.
    pub config: PathBuf,
    /// Output directory, overriding the one in the file.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the number of elements needed to reach a Frobenius weight.
    Structure(ConfigArgs),
    /// Reconstruct quench dynamics from the thermal initial state.
    Quench(ConfigArgs),
    /// Sample thermal density matrices with DMQMC.
    DmqmcSample(ConfigArgs),
    /// Build and report symmetry-reduced simulation plans.
    Orbits(ConfigArgs),
    /// Synthesize and verify a superposition-state preparation circuit.
    Circuit {
        /// First basis state, site 1 first (e.g. 0101).
        #[arg(long)]
        n: String,
        /// Second basis state.
        #[arg(long)]
        m: String,
        /// psi_plus, psi_minus, phi_plus or phi_minus.
        #[arg(long, default_value = "psi_plus", value_parser = parse_variant)]
        variant: Variant,
        /// Write the gate list here instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Thermal diagonal-ensemble values.
    Tde(ConfigArgs),
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    match s.replace('-', "_").as_str() {
        "psi_plus" => Ok(Variant::PsiPlus),
        "psi_minus" => Ok(Variant::PsiMinus),
        "phi_plus" => Ok(Variant::PhiPlus),
        "phi_minus" => Ok(Variant::PhiMinus),
        _ => Err(format!("unknown variant '{s}'")),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Applies the thread override from the environment, if set.
pub fn configure_threads() -> Result<(), StageError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={value} is not a positive integer")))
        .stage("threads")?;
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::warn!("thread pool already initialized; {THREADS_ENV} ignored");
    }
    faer::set_global_parallelism(if n == 1 { faer::Par::Seq } else { faer::Par::rayon(n) });
    Ok(())
}

pub fn run(command: &Command) -> Result<(), StageError> {
    configure_threads()?;
    match command {
        Command::Structure(a) => {
            let mut cfg = StructureConfig::from_path(&a.config).stage("config")?;
            if let Some(o) = &a.output {
                cfg.output = o.clone();
            }
            run_structure(&cfg).map(|_| ())
        }
        Command::Quench(a) => run_quench(&load(a)?).map(|_| ()),
        Command::DmqmcSample(a) => run_dmqmc_sample(&load(a)?).map(|_| ()),
        Command::Orbits(a) => run_orbits(&load(a)?).map(|_| ()),
        Command::Tde(a) => run_tde(&load(a)?).map(|_| ()),
        Command::Circuit { n, m, variant, output } => run_circuit(n, m, *variant, output.as_deref()),
    }
}

fn load(a: &ConfigArgs) -> Result<ExperimentConfig, StageError> {
    let mut cfg = ExperimentConfig::from_path(&a.config).stage("config")?;
    if let Some(o) = &a.output {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a C,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    points: Vec<RunPoint>,
    artifacts: Vec<String>,
}

fn finish<C: Serialize>(
    mut dir: ArtifactDir,
    command: &str,
    config: &C,
    points: Vec<RunPoint>,
) -> Result<Vec<PathBuf>, StageError> {
    let artifacts = dir
        .files()
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    let manifest = Manifest { command, version: env!("CARGO_PKG_VERSION"), config, points, artifacts };
    dir.write("manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        Ok(writeln!(w)?)
    })
    .stage("write manifest")?;
    Ok(dir.commit())
}

/// Thermal initial state for one point: exact, or sampled and symmetrized.
fn initial_state(cfg: &ExperimentConfig, p: &RunPoint) -> Result<(DensityMatrix, Option<SampleStats>), StageError> {
    let tag = p.tag();
    match cfg.thermal.source {
        SourceKind::Ed => {
            let rho = thermal_density_matrix(&p.initial, p.beta).stage(format!("{tag}: thermal state"))?;
            Ok((rho, None))
        }
        SourceKind::Dmqmc => {
            let (rho, stats) = sample_with(&p.initial, p.beta, &cfg.dmqmc()).stage(format!("{tag}: dmqmc"))?;
            let rho = if p.basis == Basis::Z {
                symmetrize_rho(&rho, &p.initial).stage(format!("{tag}: symmetrize"))?
            } else {
                rho
            };
            Ok((rho, Some(stats)))
        }
    }
}

/// Runs the quench pipeline and returns the artifact paths.
pub fn run_quench(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, StageError> {
    let points = cfg.points().stage("config")?;
    let obs = cfg.observable();
    let times = cfg.times();
    let mut dir = ArtifactDir::claim(&cfg.output).stage("output directory")?;
    let mut report = Vec::new();
    for p in &points {
        let tag = p.tag();
        let (rho, stats) = initial_state(cfg, p)?;
        let trunc = truncate(&rho, cfg.truncation).stage(format!("{tag}: truncate"))?;
        let plan = plan_simulations(&trunc.index_set, &obs, &p.quench).stage(format!("{tag}: plan"))?;
        let rec = reconstruct_detailed(&trunc, &plan, &obs, &p.quench, &times, Method::for_sites(cfg.model.l))
            .stage(format!("{tag}: reconstruct"))?;
        let mut series = rec.series;
        if let Some(stats) = &stats {
            let mut errors = element_error(stats, &trunc.index_set).stage(format!("{tag}: element errors"))?;
            if p.basis == Basis::Z {
                errors = symmetrize_errors(&errors, &p.initial);
            }
            let band = statistical_band_from_plan(&plan, &rec.representative_series, &errors)
                .stage(format!("{tag}: statistical band"))?;
            series.stat_err = Some(band);
            dir.write(&format!("dmqmc_{tag}.jsonl"), |w| write_jsonl(stats, w)).stage("write")?;
        }
        dir.write(&format!("series_{tag}.csv"), |w| series.write_csv(w)).stage("write")?;
        dir.write(&format!("truncation_{tag}.json"), |w| trunc.write_manifest(w)).stage("write")?;
        dir.write(&format!("plan_{tag}.json"), |w| plan.write_json(w)).stage("write")?;
        let mut delta_w = None;
        if cfg.model.l <= MAX_DENSE_SITES {
            let exact_rho = match stats {
                None => rho,
                Some(_) => thermal_density_matrix(&p.initial, p.beta).stage(format!("{tag}: oracle"))?,
            };
            let exact = heisenberg_expectation(&exact_rho, &obs, &p.quench, &times).stage(format!("{tag}: oracle"))?;
            dir.write(&format!("exact_{tag}.csv"), |w| exact.write_csv(w)).stage("write")?;
            delta_w = match truncation_error(&exact, &series) {
                Ok(d) => Some(d),
                Err(Error::UndefinedNormalization(msg)) => {
                    log::warn!("{tag}: delta_w undefined ({msg})");
                    None
                }
                Err(e) => return Err(e).stage(format!("{tag}: delta_w")),
            };
        }
        println!(
            "{tag}: basis {} N_w {} N_sim {} w {} delta_w {}",
            p.basis,
            trunc.n_w,
            plan.n_sim(),
            trunc.weight,
            delta_w.map_or("-".to_string(), |d| d.to_string())
        );
        report.push((p, trunc.weight, trunc.n_w, plan.n_sim(), delta_w));
    }
    if cfg.model.l <= MAX_DENSE_SITES {
        dir.write("delta_w.csv", |w| {
            writeln!(w, "beta,g0,basis,w,N_w,N_sim,delta_w")?;
            for (p, weight, n_w, n_sim, d) in &report {
                let d = d.map_or(String::new(), |d| d.to_string());
                writeln!(w, "{},{},{},{weight},{n_w},{n_sim},{d}", p.beta, p.g0, p.basis)?;
            }
            Ok(())
        })
        .stage("write")?;
    }
    finish(dir, "quench", cfg, points)
}

pub fn run_dmqmc_sample(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, StageError> {
    let points = cfg.points().stage("config")?;
    let mut dir = ArtifactDir::claim(&cfg.output).stage("output directory")?;
    for p in &points {
        let tag = p.tag();
        let (_, stats) = sample_with(&p.initial, p.beta, &cfg.dmqmc()).stage(format!("{tag}: dmqmc"))?;
        dir.write(&format!("dmqmc_{tag}.jsonl"), |w| write_jsonl(&stats, w)).stage("write")?;
        println!(
            "{tag}: basis {} elements {} chi_diag {} loops used {}",
            p.basis,
            stats.elements.len(),
            stats.chi_diag,
            stats.loops_used
        );
    }
    finish(dir, "dmqmc-sample", cfg, points)
}

pub fn run_orbits(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, StageError> {
    let points = cfg.points().stage("config")?;
    let obs = cfg.observable();
    let mut dir = ArtifactDir::claim(&cfg.output).stage("output directory")?;
    for p in &points {
        let tag = p.tag();
        let (rho, _) = initial_state(cfg, p)?;
        let trunc = truncate(&rho, cfg.truncation).stage(format!("{tag}: truncate"))?;
        let plan = plan_simulations(&trunc.index_set, &obs, &p.quench).stage(format!("{tag}: plan"))?;
        dir.write(&format!("plan_{tag}.json"), |w| plan.write_json(w)).stage("write")?;
        let mut reasons: HashMap<String, usize> = HashMap::new();
        for e in &plan.excluded {
            *reasons.entry(format!("{:?}", e.reason)).or_default() += 1;
        }
        let mut reasons: Vec<_> = reasons.into_iter().collect();
        reasons.sort();
        println!(
            "{tag}: basis {} N_w {} N_sim {} excluded {:?}",
            p.basis,
            trunc.n_w,
            plan.n_sim(),
            reasons
        );
    }
    finish(dir, "orbits", cfg, points)
}

pub fn run_tde(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, StageError> {
    let points = cfg.points().stage("config")?;
    let obs = cfg.observable();
    let mut dir = ArtifactDir::claim(&cfg.output).stage("output directory")?;
    let mut rows = Vec::new();
    for p in &points {
        let v = tde_average(&p.initial, &p.quench, &obs, p.beta).stage(format!("{}: tde", p.tag()))?;
        println!("{}: {} = {v}", p.tag(), obs.kind.name());
        rows.push((p, v));
    }
    dir.write("tde.csv", |w| {
        writeln!(w, "beta,g0,h0,g,h,observable,tde")?;
        for (p, v) in &rows {
            writeln!(w, "{},{},{},{},{},{},{v}", p.beta, p.g0, p.initial.h, p.quench.g, p.quench.h, obs.kind.name())?;
        }
        Ok(())
    })
    .stage("write")?;
    finish(dir, "tde", cfg, points)
}

pub fn run_structure(cfg: &StructureConfig) -> Result<Vec<PathBuf>, StageError> {
    let grid = cfg.points();
    let mut dir = ArtifactDir::claim(&cfg.output).stage("output directory")?;
    let rows = sweep_nw(&grid, cfg.w_target);
    for r in &rows {
        match &r.outcome {
            Ok((n_w, w)) => println!(
                "L {} beta {} g0 {} h0 {} basis {}: N_w {n_w} (w {w})",
                r.point.l, r.point.beta, r.point.g0, r.point.h0, r.point.basis
            ),
            Err(msg) => log::warn!("L {} beta {} g0 {}: {msg}", r.point.l, r.point.beta, r.point.g0),
        }
    }
    dir.write("nw_sweep.csv", |w| write_sweep_csv(&rows, w)).stage("write")?;
    finish(dir, "structure", cfg, Vec::new())
}

pub fn run_circuit(n: &str, m: &str, variant: Variant, output: Option<&Path>) -> Result<(), StageError> {
    let n = BasisState::from_sites(n, Basis::Z).stage("state n")?;
    let m = BasisState::from_sites(m, Basis::Z).stage("state m")?;
    let spec = SuperpositionSpec::new(n, m, variant).stage("circuit")?;
    let circuit = synthesize(&spec).stage("synthesize")?;
    let state = simulate(&circuit, 0).stage("simulate")?;
    let deviation = state
        .iter()
        .zip(spec.target())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max);
    if deviation > 1e-12 {
        return Err(Error::Internal(format!("prepared state deviates from the target by {deviation:e}")))
            .stage("verify");
    }
    let text = circuit.to_text();
    match output {
        Some(path) => std::fs::write(path, &text).stage("write")?,
        None => print!("{text}"),
    }
    eprintln!(
        "{} qubits, {} layers, {} CNOTs in {} layers, max amplitude deviation {deviation:e}",
        circuit.num_qubits(),
        circuit.layers().len(),
        circuit.cnot_count(),
        circuit.cnot_layers()
    );
    Ok(())
}
