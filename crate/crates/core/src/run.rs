//! Batch runs: configuration, orchestration and artifact files.
//!
//! Every CSV starts with a `# config_hash: <sha256>` line. The hash covers
//! the resolved configuration (machine spec inlined, CLI overrides applied)
//! and excludes the output directory and the worker count, so reruns with
//! the same configuration produce byte-identical files.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::analysis::{analyze_period, eccentricity_sweep};
use crate::error::{Error, Result};
use crate::machine::MachineSpec;
use crate::simulation::{PreparedMachine, RunOptions};
use crate::uq::{
    compare_methods, gpc_estimate, mc_estimate, sobol_sensitivity, MachineModel, RandomInputModel,
    Sample, SampleCache, Simulator, UqResult, UqRun, DEFAULT_SIGMA_R0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Nominal,
    Sweep,
    UqMc,
    UqGpc,
    Sensitivity,
    Compare,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Nominal,
        Mode::Sweep,
        Mode::UqMc,
        Mode::UqGpc,
        Mode::Sensitivity,
        Mode::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Nominal => "nominal",
            Mode::Sweep => "sweep",
            Mode::UqMc => "uq-mc",
            Mode::UqGpc => "uq-gpc",
            Mode::Sensitivity => "sensitivity",
            Mode::Compare => "compare",
        }
    }

    /// Modes that draw random samples and need a seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Mode::UqMc | Mode::Sensitivity | Mode::Compare)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("mode", format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Relative eccentricities `R0 / delta_m`.
    pub eccentricities: Vec<f64>,
    /// Displacement direction theta0 (rad).
    pub direction: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eccentricities: vec![0.0, 0.1, 0.25, 0.5],
            direction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UqConfig {
    /// Standard deviation of R0 (m).
    pub sigma_r0: f64,
    /// Samples with `|R0| >= truncation * delta_m` are redrawn.
    pub truncation: f64,
    /// Monte Carlo sample count.
    pub samples: usize,
    /// Collocation nodes per input.
    pub nodes_per_dim: usize,
    /// Rows per base matrix of the sensitivity design.
    pub sobol_base: usize,
    /// `k` in the agreement test `|mu_MC - mu_gPC| <= k eps_MC`.
    pub agreement_factor: f64,
}

impl Default for UqConfig {
    fn default() -> Self {
        UqConfig {
            sigma_r0: DEFAULT_SIGMA_R0,
            truncation: 0.99,
            samples: 200,
            nodes_per_dim: 5,
            sobol_base: 64,
            agreement_factor: 3.0,
        }
    }
}

/// Run configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    /// Machine TOML, relative to the run config. Exclusive with `machine`.
    pub machine_config: Option<PathBuf>,
    /// Inline machine table.
    pub machine: Option<MachineSpec>,
    #[serde(default)]
    pub refinement: u32,
    pub seed: Option<u64>,
    /// Relative to the working directory.
    pub output_dir: Option<PathBuf>,
    /// THD harmonic cutoff `n` (default: every bin below Nyquist).
    pub harmonics: Option<usize>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub uq: UqConfig,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub refinement: Option<u32>,
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved run; its canonical TOML defines the config hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub mode: Mode,
    pub refinement: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<usize>,
    pub machine: MachineSpec,
    pub sweep: SweepConfig,
    pub uq: UqConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: "<run config>".into(),
            message: e.to_string(),
        })
    }

    /// Reads a run config; a relative `machine_config` is resolved against
    /// the config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(m) = &cfg.machine_config {
            if m.is_relative() {
                cfg.machine_config = Some(path.parent().unwrap_or(Path::new("")).join(m));
            }
        }
        Ok(cfg)
    }

    pub fn resolve(&self, overrides: &Overrides) -> Result<(ResolvedConfig, PathBuf)> {
        let machine = match (&self.machine_config, &self.machine) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "machine",
                    "give either machine_config or [machine], not both",
                ))
            }
            (Some(p), None) => MachineSpec::from_file(p)?,
            (None, Some(m)) => {
                m.validate()?;
                m.clone()
            }
            (None, None) => MachineSpec::default(),
        };
        let resolved = ResolvedConfig {
            mode: overrides.mode.unwrap_or(self.mode),
            refinement: overrides.refinement.unwrap_or(self.refinement),
            seed: overrides.seed.or(self.seed),
            harmonics: self.harmonics,
            machine,
            sweep: self.sweep.clone(),
            uq: self.uq.clone(),
        };
        resolved.validate()?;
        let out = overrides
            .output_dir
            .clone()
            .or_else(|| self.output_dir.clone())
            .ok_or_else(|| {
                Error::config(
                    "output_dir",
                    "no output directory (set output_dir or pass --out)",
                )
            })?;
        Ok((resolved, out))
    }
}

impl ResolvedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode.is_stochastic() && self.seed.is_none() {
            return Err(Error::config(
                "seed",
                format!("mode {} needs a seed", self.mode),
            ));
        }
        if self.harmonics == Some(0) {
            return Err(Error::config("harmonics", "must be >= 1"));
        }
        if self.mode == Mode::Sweep {
            if self.sweep.eccentricities.is_empty() {
                return Err(Error::config("sweep.eccentricities", "must not be empty"));
            }
            if let Some(e) = self.sweep.eccentricities.iter().find(|e| !(e.abs() < 1.0)) {
                return Err(Error::config(
                    "sweep.eccentricities",
                    format!("{e} is not in (-1, 1)"),
                ));
            }
        }
        let uq = &self.uq;
        if matches!(self.mode, Mode::UqMc | Mode::Compare) && uq.samples < 2 {
            return Err(Error::config("uq.samples", "must be >= 2"));
        }
        if matches!(self.mode, Mode::UqGpc | Mode::Compare) && uq.nodes_per_dim == 0 {
            return Err(Error::config("uq.nodes_per_dim", "must be >= 1"));
        }
        if self.mode == Mode::Sensitivity && uq.sobol_base < 2 {
            return Err(Error::config("uq.sobol_base", "must be >= 2"));
        }
        if !(uq.agreement_factor > 0.0) {
            return Err(Error::config("uq.agreement_factor", "must be > 0"));
        }
        self.input_model()?;
        Ok(())
    }

    pub fn input_model(&self) -> Result<RandomInputModel> {
        let m = RandomInputModel {
            sigma_r0: self.uq.sigma_r0,
            theta_max: std::f64::consts::PI,
            mean_airgap: self.machine.airgap(),
            truncation: self.uq.truncation,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serializes")
    }

    /// Hex SHA-256 of [`Self::canonical_toml`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }
}

/// Execution settings that do not change results.
#[derive(Debug, Clone, Default)]
pub struct ExecOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    /// Replay cached sample results from an earlier run of the same config.
    pub resume: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config_hash: String,
    /// Files written, relative to the output directory.
    pub files: Vec<PathBuf>,
    /// Results of the UQ modes.
    pub results: Vec<UqResult>,
}

pub const MANIFEST: &str = "manifest.json";
pub const PROGRESS: &str = "progress.jsonl";

/// Line-delimited JSON progress log.
struct Progress {
    file: Mutex<File>,
    path: PathBuf,
    start: Instant,
}

impl Progress {
    fn create(path: PathBuf) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Progress {
            file: Mutex::new(file),
            path,
            start: Instant::now(),
        })
    }

    fn log(&self, mut record: serde_json::Value) -> Result<()> {
        record["elapsed_s"] = json!(self.start.elapsed().as_secs_f64());
        let mut f = self.file.lock().expect("progress lock");
        writeln!(f, "{record}")
            .and_then(|_| f.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// Logs every evaluation of the wrapped model.
struct Logged<'a> {
    model: &'a MachineModel,
    progress: &'a Progress,
}

impl Simulator for Logged<'_> {
    fn quantities(&self) -> Vec<String> {
        self.model.quantities()
    }

    fn evaluate(&self, s: &Sample) -> Result<Vec<f64>> {
        let cached = self.model.cache().get(s).is_some();
        let out = self.model.evaluate(s);
        let record = match &out {
            Ok(v) => {
                json!({"event": "sample", "r0": s.r0, "theta0": s.theta0, "cached": cached, "values": v})
            }
            Err(e) => {
                json!({"event": "failure", "r0": s.r0, "theta0": s.theta0, "error": e.to_string()})
            }
        };
        self.progress.log(record)?;
        out
    }
}

struct Artifacts<'a> {
    dir: &'a Path,
    hash: &'a str,
    files: Vec<PathBuf>,
}

impl Artifacts<'_> {
    /// Writes `name` with the hash line, then whatever `body` emits.
    fn csv(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# config_hash: {}", self.hash)
            .and_then(|_| body(&mut w))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn write_summary(w: &mut dyn Write, results: &[UqResult]) -> std::io::Result<()> {
    writeln!(
        w,
        "quantity,method,mean,std,mc_error,s_r0,s_theta0,st_r0,st_theta0,evaluations"
    )?;
    for r in results {
        let s = r.sensitivity.map(|s| s.clipped(0.05));
        writeln!(
            w,
            "{},{},{:e},{:e},{},{},{},{},{},{}",
            r.quantity,
            r.method,
            r.mean,
            r.std_dev(),
            opt(r.mc_error),
            opt(s.map(|s| s.first_order[0])),
            opt(s.map(|s| s.first_order[1])),
            opt(s.map(|s| s.total[0])),
            opt(s.map(|s| s.total[1])),
            r.evaluations
        )?;
    }
    Ok(())
}

fn write_samples(w: &mut dyn Write, run: &UqRun) -> std::io::Result<()> {
    writeln!(w, "sample_id,r0,theta0,tau0,thd,weight")?;
    for s in &run.samples {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e}",
            s.id, s.sample.r0, s.sample.theta0, s.values[0], s.values[1], s.weight
        )?;
    }
    Ok(())
}

/// Runs `config` into `out` on a pool of `exec.jobs` threads.
pub fn run(config: &ResolvedConfig, out: &Path, exec: &ExecOptions) -> Result<RunReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exec.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    pool.install(|| run_in_pool(config, out, exec))
}

fn run_in_pool(config: &ResolvedConfig, out: &Path, exec: &ExecOptions) -> Result<RunReport> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let hash = config.hash();
    let progress = Progress::create(out.join(PROGRESS))?;
    progress.log(json!({"event": "start", "mode": config.mode.name(), "config_hash": hash, "resume": exec.resume}))?;
    let result = execute(config, out, exec, &hash, &progress);
    match &result {
        Ok(r) => progress.log(json!({"event": "done", "files": r.files}))?,
        Err(e) => progress.log(json!({"event": "error", "error": e.to_string()}))?,
    }
    result
}

fn execute(
    config: &ResolvedConfig,
    out: &Path,
    exec: &ExecOptions,
    hash: &str,
    progress: &Progress,
) -> Result<RunReport> {
    let machine = PreparedMachine::new(&config.machine, config.refinement)?;
    progress.log(json!({
        "event": "prepared",
        "contour_nodes": machine.mesh().interface_count,
        "mesh_nodes": machine.mesh().node_count(),
    }))?;
    let mut art = Artifacts {
        dir: out,
        hash,
        files: Vec::new(),
    };
    let mut results = Vec::new();
    let mut manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "mode": config.mode.name(),
        "config_hash": hash,
        "seed": config.seed,
        "refinement": config.refinement,
        "contour_nodes": machine.mesh().interface_count,
        "mesh_nodes": machine.mesh().node_count(),
        "steps_per_period": machine.steps_per_revolution(),
    });
    match config.mode {
        Mode::Nominal => {
            let options = RunOptions {
                keep_solutions: true,
                ..Default::default()
            };
            let a = analyze_period(&machine, &options, config.harmonics)?;
            let maxwell = a.maxwell_band_torque(&machine)?;
            art.csv("trace.csv", |w| a.trace.write_csv(w))?;
            art.csv("spectrum.csv", |w| a.spectrum.write_csv(w))?;
            art.csv("summary.csv", |w| {
                writeln!(w, "quantity,value")?;
                for (k, v) in [
                    ("mean_torque", a.mean_torque),
                    ("thd", a.thd()),
                    (
                        "mean_instantaneous_torque",
                        a.trace.mean_instantaneous_torque(),
                    ),
                    ("mean_electrical_power", a.trace.mean_electrical_power()),
                    ("mean_energy_rate", a.trace.mean_energy_rate()),
                    ("maxwell_band_torque", maxwell.unwrap_or(f64::NAN)),
                ] {
                    writeln!(w, "{k},{v:e}")?;
                }
                Ok(())
            })?;
            manifest["method"] = json!("energy-balance");
        }
        Mode::Sweep => {
            let points = eccentricity_sweep(
                &machine,
                &config.sweep.eccentricities,
                config.sweep.direction,
                config.harmonics,
            )?;
            art.csv("sweep.csv", |w| {
                writeln!(w, "eccentricity,mean_torque,thd,slot_harmonic")?;
                for p in &points {
                    writeln!(
                        w,
                        "{:e},{:e},{:e},{:e}",
                        p.eccentricity, p.mean_torque, p.thd, p.slot_harmonic
                    )?;
                }
                Ok(())
            })?;
            for p in &points {
                art.csv(&format!("spectrum_eps_{:.4}.csv", p.eccentricity), |w| {
                    p.spectrum.write_csv(w)
                })?;
            }
            manifest["method"] = json!("energy-balance");
            manifest["eccentricities"] = json!(config.sweep.eccentricities);
        }
        mode => {
            let inputs = config.input_model()?;
            let cache_dir = out.join("cache");
            std::fs::create_dir_all(&cache_dir).map_err(|e| Error::io(&cache_dir, e))?;
            let cache_path = cache_dir.join(format!("{hash}.jsonl"));
            if !exec.resume && cache_path.exists() {
                std::fs::remove_file(&cache_path).map_err(|e| Error::io(&cache_path, e))?;
            }
            let cache = SampleCache::open(&cache_path)?;
            progress.log(json!({"event": "cache", "path": cache_path, "entries": cache.len()}))?;
            let model = MachineModel::new(machine, inputs, config.harmonics).with_cache(cache);
            let sim = Logged {
                model: &model,
                progress,
            };
            let seed = config.seed.unwrap_or(0);
            manifest["sigma_r0"] = json!(inputs.sigma_r0);
            match mode {
                Mode::UqMc => {
                    let r = mc_estimate(&inputs, &sim, config.uq.samples, seed)?;
                    log_failures(progress, &r)?;
                    art.csv("samples.csv", |w| write_samples(w, &r))?;
                    art.csv("summary.csv", |w| write_summary(w, &r.results))?;
                    manifest["method"] = json!("mc");
                    manifest["samples"] = json!(config.uq.samples);
                    results = r.results;
                }
                Mode::UqGpc => {
                    let r = gpc_estimate(&inputs, &sim, config.uq.nodes_per_dim)?;
                    art.csv("samples.csv", |w| write_samples(w, &r))?;
                    art.csv("summary.csv", |w| write_summary(w, &r.results))?;
                    manifest["method"] = json!("gpc");
                    manifest["nodes_per_dim"] = json!(config.uq.nodes_per_dim);
                    results = r.results;
                }
                Mode::Sensitivity => {
                    let r = sobol_sensitivity(&inputs, &sim, config.uq.sobol_base, seed)?;
                    let n = config.uq.sobol_base;
                    let points = r.design.points();
                    art.csv("design.csv", |w| {
                        writeln!(w, "point_id,matrix,row,r0,theta0,tau0,thd")?;
                        for (k, (s, v)) in points.iter().zip(&r.values).enumerate() {
                            let matrix = ["A", "B", "AB_r0", "AB_theta0"][k / n];
                            writeln!(
                                w,
                                "{k},{matrix},{},{:e},{:e},{:e},{:e}",
                                k % n,
                                s.r0,
                                s.theta0,
                                v[0],
                                v[1]
                            )?;
                        }
                        Ok(())
                    })?;
                    art.csv("indices.csv", |w| {
                        writeln!(w, "quantity,input,first_order,total,saltelli_first_order,complement_first_order")?;
                        for res in &r.results {
                            let s = res.sensitivity.expect("sensitivity results carry indices");
                            for (i, input) in crate::uq::sobol::INPUTS.iter().enumerate() {
                                writeln!(
                                    w,
                                    "{},{input},{:e},{:e},{:e},{:e}",
                                    res.quantity,
                                    s.first_order[i],
                                    s.total[i],
                                    s.saltelli_first_order[i],
                                    s.complement_first_order[i]
                                )?;
                            }
                        }
                        Ok(())
                    })?;
                    art.csv("summary.csv", |w| write_summary(w, &r.results))?;
                    manifest["method"] = json!("saltelli");
                    manifest["sobol_base"] = json!(n);
                    results = r.results;
                }
                Mode::Compare => {
                    let mc = mc_estimate(&inputs, &sim, config.uq.samples, seed)?;
                    log_failures(progress, &mc)?;
                    let gpc = gpc_estimate(&inputs, &sim, config.uq.nodes_per_dim)?;
                    art.csv("mc_samples.csv", |w| write_samples(w, &mc))?;
                    art.csv("gpc_samples.csv", |w| write_samples(w, &gpc))?;
                    let comparisons = mc
                        .results
                        .iter()
                        .zip(&gpc.results)
                        .map(|(a, b)| compare_methods(a, b, config.uq.agreement_factor))
                        .collect::<Result<Vec<_>>>()?;
                    art.csv("comparison.csv", |w| {
                        writeln!(
                            w,
                            "quantity,mean_mc,mean_gpc,difference,mc_error,k,agree,variance_ratio"
                        )?;
                        for ((c, a), b) in comparisons.iter().zip(&mc.results).zip(&gpc.results) {
                            writeln!(
                                w,
                                "{},{:e},{:e},{:e},{:e},{:e},{},{:e}",
                                c.quantity,
                                a.mean,
                                b.mean,
                                c.mean_difference,
                                c.mc_error,
                                c.k,
                                c.means_agree,
                                c.variance_ratio
                            )?;
                        }
                        Ok(())
                    })?;
                    results = mc.results.into_iter().chain(gpc.results).collect();
                    art.csv("summary.csv", |w| write_summary(w, &results))?;
                    manifest["method"] = json!("mc+gpc");
                    manifest["samples"] = json!(config.uq.samples);
                    manifest["nodes_per_dim"] = json!(config.uq.nodes_per_dim);
                }
                Mode::Nominal | Mode::Sweep => unreachable!("handled above"),
            }
        }
    }
    let outputs: Vec<serde_json::Value> = art
        .files
        .iter()
        .map(|f| {
            let path = out.join(f);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            Ok(json!({"file": f, "sha256": hex::encode(Sha256::digest(&bytes))}))
        })
        .collect::<Result<_>>()?;
    manifest["outputs"] = json!(outputs);
    let path = out.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    let mut files = art.files;
    files.push(PathBuf::from(MANIFEST));
    Ok(RunReport {
        config_hash: hash.to_string(),
        files,
        results,
    })
}

fn log_failures(progress: &Progress, run: &UqRun) -> Result<()> {
    for f in &run.failures {
        progress.log(json!({
            "event": "redrawn",
            "sample_id": f.id,
            "r0": f.sample.r0,
            "theta0": f.sample.theta0,
            "error": f.message,
        }))?;
    }
    Ok(())
}
