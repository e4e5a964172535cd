//! Monte Carlo estimation of the synchronized-basin fraction `P_N(τ, ε)`.
//!
//! Every sample draws its initial phases from its own ChaCha stream, keyed by
//! the master seed, the cell parameters and the sample index, so results do
//! not depend on execution order or on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{OnlineClassifier, RunClassification, Tolerances};
use crate::engine::{Engine, EngineSettings, StopCriteria};
use crate::error::{Error, Result};
use crate::network::NetworkTopology;
use crate::phase_model::{PhaseMap, PhaseMapSpec, RegionClass};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Per-run stop budget: `firings_per_oscillator · N` firings or `t_max`,
/// whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    pub firings_per_oscillator: u64,
    pub t_max: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            firings_per_oscillator: 500,
            t_max: 200.0,
        }
    }
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        if self.firings_per_oscillator == 0 || !self.t_max.is_finite() || self.t_max <= 0.0 {
            return Err(Error::Parameter(format!(
                "budget must be finite and positive, got {} firings per oscillator and t_max = {}",
                self.firings_per_oscillator, self.t_max
            )));
        }
        Ok(())
    }

    pub fn stop(&self, n: usize) -> StopCriteria {
        StopCriteria {
            max_firings: Some(self.firings_per_oscillator * n as u64),
            t_max: Some(self.t_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SampleOutcome {
    Synced,
    NotSynced { period: u32 },
    Undecided,
}

/// I.i.d. uniform phases on `(0, 1]`.
pub fn sample_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| 1.0 - rng.random::<f64>()).collect()
}

/// Phases for a single seeded run, independent of any sweep cell.
pub fn seeded_phases(n: usize, seed: u64) -> Vec<f64> {
    sample_phases(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Runs one trajectory until it synchronizes, recurs, or exhausts the budget.
pub fn classify_sample(
    map: &PhaseMap,
    topology: &NetworkTopology,
    phases: &[f64],
    budget: &Budget,
    tolerances: &Tolerances,
    settings: EngineSettings,
) -> Result<SampleOutcome> {
    let engine = Engine::with_settings(map, topology, settings);
    let mut classifier = OnlineClassifier::new(topology, *tolerances);
    engine.run(engine.init(phases)?, budget.stop(topology.n()), &mut classifier)?;
    Ok(match classifier.into_outcome() {
        RunClassification::CompletelySynchronized { .. } => SampleOutcome::Synced,
        RunClassification::Periodic(p) => SampleOutcome::NotSynced { period: p.d },
        RunClassification::Undecided { .. } => SampleOutcome::Undecided,
    })
}

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k_f, n_f) = (k as f64, n as f64);
    let p = k_f / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let low = if k == 0 { 0.0 } else { (centre - half).max(0.0).min(p) };
    let high = if k == n { 1.0 } else { (centre + half).min(1.0).max(p) };
    (low, high)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCell {
    pub tau: f64,
    pub eps: f64,
    pub n: usize,
    pub samples: u64,
    pub sync_count: u64,
    pub not_sync_count: u64,
    pub undecided_count: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl EstimateCell {
    /// Undecided samples stay in the denominator, so `p_hat` is conservative.
    pub fn from_outcomes(tau: f64, eps: f64, n: usize, outcomes: &[SampleOutcome]) -> Self {
        let mut cell = EstimateCell {
            tau,
            eps,
            n,
            samples: outcomes.len() as u64,
            sync_count: 0,
            not_sync_count: 0,
            undecided_count: 0,
            p_hat: 0.0,
            ci_low: 0.0,
            ci_high: 1.0,
        };
        for o in outcomes {
            match o {
                SampleOutcome::Synced => cell.sync_count += 1,
                SampleOutcome::NotSynced { .. } => cell.not_sync_count += 1,
                SampleOutcome::Undecided => cell.undecided_count += 1,
            }
        }
        if cell.samples > 0 {
            cell.p_hat = cell.sync_count as f64 / cell.samples as f64;
            (cell.ci_low, cell.ci_high) = wilson_interval(cell.sync_count, cell.samples);
        }
        cell
    }

    pub fn undecided_fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.undecided_count as f64 / self.samples as f64
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for sample `k` of the cell `(τ, ε, N)`.
pub fn sample_rng(seed: u64, tau: f64, eps: f64, n: usize, k: u64) -> ChaCha8Rng {
    let mut key = splitmix64(seed);
    for word in [tau.to_bits(), eps.to_bits(), n as u64] {
        key = splitmix64(key ^ word);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(k);
    rng
}

/// One `(τ, ε, N)` estimation job on an all-to-all network.
#[derive(Debug, Clone, PartialEq)]
pub struct CellJob {
    pub tau: f64,
    pub eps: f64,
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    pub budget: Budget,
    pub tolerances: Tolerances,
    pub settings: EngineSettings,
}

impl CellJob {
    fn sample(&self, map: &PhaseMap, topology: &NetworkTopology, k: u64) -> Result<SampleOutcome> {
        let mut rng = sample_rng(self.seed, self.tau, self.eps, self.n, k);
        let phases = sample_phases(self.n, &mut rng);
        classify_sample(map, topology, &phases, &self.budget, &self.tolerances, self.settings)
    }
}

/// Estimates `P_N(τ, ε)` for one cell, running samples on the current rayon pool.
pub fn estimate(map: &PhaseMap, job: &CellJob) -> Result<EstimateCell> {
    estimate_on(map, &NetworkTopology::all_to_all(job.n, job.tau, job.eps)?, job)
}

/// Like [`estimate`] on an arbitrary topology matching the job's `N`, `τ`, `ε`.
pub fn estimate_on(map: &PhaseMap, topology: &NetworkTopology, job: &CellJob) -> Result<EstimateCell> {
    if job.samples == 0 {
        return Err(Error::Parameter("samples must be at least 1".into()));
    }
    if topology.n() != job.n || topology.tau() != job.tau || topology.eps() != job.eps {
        return Err(Error::Parameter("topology does not match the estimation job".into()));
    }
    job.budget.validate()?;
    let outcomes = (0..job.samples)
        .into_par_iter()
        .map(|k| job.sample(map, topology, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateCell::from_outcomes(job.tau, job.eps, job.n, &outcomes))
}

/// Grid axis: explicit values or `count` evenly spaced points from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl Default for Axis {
    fn default() -> Self {
        Axis::Values(Vec::new())
    }
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Axis::Values(ref v) => v.clone(),
            Axis::Linspace { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..count)
                    .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sizes {
    One(usize),
    Many(Vec<usize>),
}

impl Sizes {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Sizes::One(n) => vec![*n],
            Sizes::Many(v) => v.clone(),
        }
    }
}

/// Parameter sweep description. Either a `tau × eps` grid or an explicit
/// list of `[tau, eps]` points, evaluated for every network size in `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub tau: Axis,
    #[serde(default)]
    pub eps: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    pub n: Sizes,
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub phase_map: PhaseMapSpec,
    #[serde(default)]
    pub engine: EngineSettings,
}

impl SweepSpec {
    /// `(τ, ε)` points in output order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        match &self.points {
            Some(p) => p.iter().map(|&[t, e]| (t, e)).collect(),
            None => {
                let eps = self.eps.values();
                self.tau
                    .values()
                    .into_iter()
                    .flat_map(|t| eps.iter().map(move |&e| (t, e)))
                    .collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let points = self.points();
        if points.is_empty() {
            return Err(Error::Parameter("sweep grid is empty".into()));
        }
        for &(t, e) in &points {
            if !(t > 0.0 && t < 1.0 && e > 0.0 && e < 1.0) {
                return Err(Error::Parameter(format!(
                    "grid point (tau = {t}, eps = {e}) outside (0,1)^2"
                )));
            }
        }
        let sizes = self.n.values();
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Parameter("network sizes must be non-empty and at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::Parameter("samples must be at least 1".into()));
        }
        self.budget.validate()?;
        self.phase_map.build()?;
        Ok(())
    }

    pub fn jobs(&self) -> Vec<CellJob> {
        let points = self.points();
        self.n
            .values()
            .into_iter()
            .flat_map(|n| {
                points.iter().map(move |&(tau, eps)| CellJob {
                    tau,
                    eps,
                    n,
                    samples: self.samples,
                    seed: self.seed,
                    budget: self.budget,
                    tolerances: self.tolerances,
                    settings: self.engine,
                })
            })
            .collect()
    }
}

/// One sweep row; a failing cell carries its error instead of an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub eps: f64,
    pub n: usize,
    pub region: Option<RegionClass>,
    pub cell: std::result::Result<EstimateCell, String>,
}

/// Runs every cell of the sweep. `workers` sets the thread count; `None`
/// uses the global rayon pool.
pub fn sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let map = spec.phase_map.build()?;
    let jobs = spec.jobs();
    let run = || {
        let topologies: Vec<_> = jobs
            .iter()
            .map(|j| NetworkTopology::all_to_all(j.n, j.tau, j.eps))
            .collect();
        // Flatten (cell, sample) pairs so small and large cells share the pool.
        let tasks: Vec<(usize, u64)> = jobs
            .iter()
            .enumerate()
            .filter(|(c, _)| topologies[*c].is_ok())
            .flat_map(|(c, j)| (0..j.samples).map(move |k| (c, k)))
            .collect();
        let outcomes: Vec<Result<SampleOutcome>> = tasks
            .par_iter()
            .map(|&(c, k)| match &topologies[c] {
                Ok(topo) => jobs[c].sample(&map, topo, k),
                Err(_) => unreachable!("failed topologies are filtered out"),
            })
            .collect();
        let mut per_cell: Vec<Vec<Result<SampleOutcome>>> = jobs.iter().map(|_| Vec::new()).collect();
        for (&(c, _), o) in tasks.iter().zip(outcomes) {
            per_cell[c].push(o);
        }
        jobs.iter()
            .zip(topologies)
            .zip(per_cell)
            .map(|((j, topo), outcomes)| {
                let cell = topo
                    .and_then(|_| outcomes.into_iter().collect::<Result<Vec<_>>>())
                    .map(|o| EstimateCell::from_outcomes(j.tau, j.eps, j.n, &o))
                    .map_err(|e| e.to_string());
                SweepRow {
                    tau: j.tau,
                    eps: j.eps,
                    n: j.n,
                    region: map.classify_region(j.tau, j.eps, j.tolerances.boundary_tol).ok(),
                    cell,
                }
            })
            .collect()
    };
    match workers {
        None => Ok(run()),
        Some(w) => Ok(WorkerPool::new(w)?.install(run)),
    }
}

/// Dedicated thread pool for estimation work.
pub struct WorkerPool(rayon::ThreadPool);

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map(WorkerPool)
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))
    }

    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        self.0.install(f)
    }
}
