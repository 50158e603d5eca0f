//! The machine as a UQ simulator: `(R0, theta0) -> (tau_0, THD)`.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::estimate::Simulator;
use super::input::{RandomInputModel, Sample};
use crate::analysis::analyze_period;
use crate::eccentricity::EccentricityState;
use crate::error::{Error, Result};
use crate::simulation::{PreparedMachine, RunOptions};

pub const MEAN_TORQUE: &str = "tau0";
pub const THD: &str = "thd";

/// Mean torque and THD of one steady-state period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueSummary {
    pub mean_torque: f64,
    pub thd: f64,
}

/// Mean torque and THD of a prepared (possibly eccentric) machine.
pub fn evaluate_machine(
    machine: &PreparedMachine,
    harmonic_count: Option<usize>,
) -> Result<TorqueSummary> {
    let a = analyze_period(machine, &RunOptions::default(), harmonic_count)?;
    Ok(TorqueSummary {
        mean_torque: a.mean_torque,
        thd: a.thd(),
    })
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    r0: f64,
    theta0: f64,
    values: Vec<f64>,
}

/// Sample results keyed by the exact input bits, optionally mirrored to a
/// JSON-lines file that can be replayed.
#[derive(Debug, Default)]
pub struct SampleCache {
    entries: Mutex<HashMap<(u64, u64), Vec<f64>>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

fn key(s: &Sample) -> (u64, u64) {
    (s.r0.to_bits(), s.theta0.to_bits())
}

impl SampleCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens `path` for appending, first loading any records it holds.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("line {}: {e}", i + 1),
                })?;
                entries.insert(
                    key(&Sample {
                        r0: rec.r0,
                        theta0: rec.theta0,
                    }),
                    rec.values,
                );
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(SampleCache {
            entries: Mutex::new(entries),
            file: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, s: &Sample) -> Option<Vec<f64>> {
        self.entries
            .lock()
            .expect("cache lock")
            .get(&key(s))
            .cloned()
    }

    pub fn insert(&self, s: &Sample, values: &[f64]) -> Result<()> {
        if let (Some(file), Some(path)) = (&self.file, &self.path) {
            let line = serde_json::to_string(&CacheRecord {
                r0: s.r0,
                theta0: s.theta0,
                values: values.to_vec(),
            })
            .expect("plain record serializes");
            let mut f = file.lock().expect("cache file lock");
            writeln!(f, "{line}")
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        self.entries
            .lock()
            .expect("cache lock")
            .insert(key(s), values.to_vec());
        Ok(())
    }
}

/// Nominal machine plus the eccentricity model; every evaluation meshes
/// the displaced rotor and reuses the condensed stator.
pub struct MachineModel {
    nominal: PreparedMachine,
    inputs: RandomInputModel,
    harmonic_count: Option<usize>,
    cache: SampleCache,
}

impl MachineModel {
    pub fn new(
        nominal: PreparedMachine,
        inputs: RandomInputModel,
        harmonic_count: Option<usize>,
    ) -> Self {
        MachineModel {
            nominal,
            inputs,
            harmonic_count,
            cache: SampleCache::in_memory(),
        }
    }

    pub fn with_cache(mut self, cache: SampleCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn machine(&self) -> &PreparedMachine {
        &self.nominal
    }

    pub fn inputs(&self) -> &RandomInputModel {
        &self.inputs
    }

    pub fn cache(&self) -> &SampleCache {
        &self.cache
    }

    pub fn summary(&self, sample: &Sample) -> Result<TorqueSummary> {
        let v = self.evaluate(sample)?;
        Ok(TorqueSummary {
            mean_torque: v[0],
            thd: v[1],
        })
    }

    fn compute(&self, sample: &Sample) -> Result<TorqueSummary> {
        if sample.r0 == 0.0 {
            return evaluate_machine(&self.nominal, self.harmonic_count);
        }
        let ecc = EccentricityState::new(sample.r0, sample.theta0, self.inputs.mean_airgap)?;
        evaluate_machine(&self.nominal.with_eccentricity(&ecc)?, self.harmonic_count)
    }
}

impl Simulator for MachineModel {
    fn quantities(&self) -> Vec<String> {
        vec![MEAN_TORQUE.into(), THD.into()]
    }

    fn evaluate(&self, sample: &Sample) -> Result<Vec<f64>> {
        if let Some(v) = self.cache.get(sample) {
            return Ok(v);
        }
        let s = self.compute(sample)?;
        let v = vec![s.mean_torque, s.thd];
        self.cache.insert(sample, &v)?;
        Ok(v)
    }
}
