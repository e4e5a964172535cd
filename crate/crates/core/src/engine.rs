//! Exact event-driven integration of delay-coupled pulse oscillators.
//!
//! Between events every phase grows at unit rate. An oscillator reaching
//! phase 1 fires, resets to 0 and emits a spike that reaches each of its
//! targets exactly `τ` later, where it moves the target's phase to
//! `f⁻¹(min[1, f(φ⁻) + Σε])`. A jump that reaches threshold fires the target
//! at the same instant.
//!
//! Because every edge shares the same delay, spikes arrive in emission
//! order and the in-flight set is a FIFO queue ordered by
//! `(arrival time, source id)`. Threshold crossings are found by scanning
//! phases, so no per-oscillator timers are kept.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkTopology;
use crate::phase_model::{PhaseMap, DEFAULT_BOUNDARY_TOL};

/// Default tie tolerance `η`: events closer than this are simultaneous.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

/// Processing order when a spike arrival and a free-running threshold
/// crossing fall on the same instant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Fire and reset first; the arrival then acts on phase 0.
    #[default]
    FiringFirst,
    /// Apply the arrival to the left-limit phase first; the capped jump is
    /// absorbed by the firing.
    ArrivalFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSettings {
    pub tie_tolerance: f64,
    pub tie_rule: TieRule,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
            tie_rule: TieRule::FiringFirst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub source: usize,
    pub emitted_at: f64,
    pub arrival_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiringRecord {
    pub time: f64,
    pub oscillator: usize,
    /// 1-based firing count of this oscillator.
    pub index: u64,
}

/// All firings of a run, sorted by time with ties broken by oscillator id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FiringLog {
    n: usize,
    records: Vec<FiringRecord>,
}

impl FiringLog {
    pub fn new(n: usize) -> Self {
        FiringLog {
            n,
            records: Vec::new(),
        }
    }

    /// Builds a log from arbitrary records, checking the ordering invariants.
    pub fn from_records(n: usize, records: Vec<FiringRecord>) -> Result<Self> {
        let mut next = vec![1u64; n];
        let mut last: Option<&FiringRecord> = None;
        for r in &records {
            if r.oscillator >= n {
                return Err(Error::Index {
                    index: r.oscillator,
                    n,
                });
            }
            if let Some(p) = last {
                let ordered =
                    r.time > p.time || (r.time == p.time && r.oscillator > p.oscillator);
                if !ordered {
                    return Err(Error::Parameter(format!(
                        "firing records out of order at t = {}",
                        r.time
                    )));
                }
            }
            if r.index != next[r.oscillator] {
                return Err(Error::Parameter(format!(
                    "oscillator {} has firing index {} where {} was expected",
                    r.oscillator, r.index, next[r.oscillator]
                )));
            }
            next[r.oscillator] += 1;
            last = Some(r);
        }
        Ok(FiringLog { n, records })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn records(&self) -> &[FiringRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Firing times `t^i_1, t^i_2, …` of one oscillator.
    pub fn times(&self, oscillator: usize) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.oscillator == oscillator)
            .map(|r| r.time)
            .collect()
    }

    /// Firing times of every oscillator, indexed by oscillator.
    pub fn times_by_oscillator(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.n];
        for r in &self.records {
            out[r.oscillator].push(r.time);
        }
        out
    }

    /// `t^i_m` with 1-based `m`.
    pub fn firing_time(&self, oscillator: usize, m: u64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.oscillator == oscillator && r.index == m)
            .map(|r| r.time)
    }

    pub fn last_time(&self) -> Option<f64> {
        self.records.last().map(|r| r.time)
    }

    fn push_batch(&mut self, batch: &mut [FiringRecord]) {
        batch.sort_by_key(|r| r.oscillator);
        self.records.extend_from_slice(batch);
    }
}

/// Complete dynamical state: time, phases and the spikes still in flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t_now: f64,
    pub phases: Vec<f64>,
    pub inflight: VecDeque<Spike>,
    /// Number of firings so far per oscillator; the next one gets this plus one.
    pub firing_counts: Vec<u64>,
    pub last_firing: Vec<Option<f64>>,
}

impl SimState {
    pub fn n(&self) -> usize {
        self.phases.len()
    }

    pub fn total_firings(&self) -> u64 {
        self.firing_counts.iter().sum()
    }
}

/// Events sharing one instant (up to the tie tolerance).
#[derive(Debug, Clone, PartialEq)]
pub struct EventBatch {
    pub time: f64,
    /// Oscillators whose free-running phase reaches 1 at this instant.
    pub threshold_crossings: Vec<usize>,
    /// Number of spikes at the head of the in-flight queue arriving now.
    pub arrivals: usize,
}

impl EventBatch {
    pub fn is_empty(&self) -> bool {
        self.threshold_crossings.is_empty() && self.arrivals == 0
    }
}

/// A spike in flight, expressed relative to the snapshot time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendingSpike {
    pub source: usize,
    /// Time until arrival.
    pub offset: f64,
}

/// Full system state captured right after a batch containing firings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    /// Cumulative number of firings including this batch.
    pub total_firings: u64,
    /// Oscillators that fired in this batch, ascending.
    pub fired: Vec<usize>,
    pub phases: Vec<f64>,
    /// In-flight spikes ordered by `(arrival, source)`.
    pub pending: Vec<PendingSpike>,
}

impl Snapshot {
    pub fn capture(state: &SimState, fired: &[FiringRecord]) -> Self {
        Snapshot {
            time: state.t_now,
            total_firings: state.total_firings(),
            fired: fired.iter().map(|r| r.oscillator).collect(),
            phases: state.phases.clone(),
            pending: state
                .inflight
                .iter()
                .map(|s| PendingSpike {
                    source: s.source,
                    offset: s.arrival_time - state.t_now,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub max_firings: Option<u64>,
    pub t_max: Option<f64>,
}

impl StopCriteria {
    pub fn firings(max_firings: u64) -> Self {
        StopCriteria {
            max_firings: Some(max_firings),
            t_max: None,
        }
    }

    pub fn until(t_max: f64) -> Self {
        StopCriteria {
            max_firings: None,
            t_max: Some(t_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// The observer asked to stop.
    Stopped,
    MaxFirings,
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Hook invoked after every batch that contains at least one firing.
pub trait Observer {
    fn on_firing_batch(&mut self, state: &SimState, fired: &[FiringRecord], log: &FiringLog)
        -> Control;
}

/// Observer that never stops the run.
pub struct NoObserver;

impl Observer for NoObserver {
    fn on_firing_batch(&mut self, _: &SimState, _: &[FiringRecord], _: &FiringLog) -> Control {
        Control::Continue
    }
}

/// Records a snapshot after every firing batch.
#[derive(Debug, Default)]
pub struct SnapshotRecorder {
    pub snapshots: Vec<Snapshot>,
}

impl Observer for SnapshotRecorder {
    fn on_firing_batch(&mut self, state: &SimState, fired: &[FiringRecord], _: &FiringLog) -> Control {
        self.snapshots.push(Snapshot::capture(state, fired));
        Control::Continue
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: FiringLog,
    pub state: SimState,
    pub status: RunStatus,
}

/// Simulator bound to one phase map and topology.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    map: &'a PhaseMap,
    topology: &'a NetworkTopology,
    settings: EngineSettings,
    has_targets: Vec<bool>,
    in_a1: bool,
}

/// Slack on interspike-interval comparisons against the delay.
pub const ISI_SLACK: f64 = 1e-9;

impl<'a> Engine<'a> {
    pub fn new(map: &'a PhaseMap, topology: &'a NetworkTopology) -> Self {
        Self::with_settings(map, topology, EngineSettings::default())
    }

    pub fn with_settings(
        map: &'a PhaseMap,
        topology: &'a NetworkTopology,
        settings: EngineSettings,
    ) -> Self {
        let has_targets = (0..topology.n())
            .map(|i| {
                let mut any = false;
                topology.for_each_target(i, |_, _| any = true);
                any
            })
            .collect();
        let in_a1 = topology.eps() > 0.0
            && map
                .classify_region(topology.tau(), topology.eps(), DEFAULT_BOUNDARY_TOL)
                .map(|r| r.is_a1())
                .unwrap_or(false);
        Engine {
            map,
            topology,
            settings,
            has_targets,
            in_a1,
        }
    }

    pub fn map(&self) -> &PhaseMap {
        self.map
    }

    pub fn topology(&self) -> &NetworkTopology {
        self.topology
    }

    pub fn settings(&self) -> EngineSettings {
        self.settings
    }

    /// State at `t = 0` from initial phases in `(0, 1]`.
    pub fn init(&self, phases: &[f64]) -> Result<SimState> {
        let n = self.topology.n();
        if phases.len() != n {
            return Err(Error::Parameter(format!(
                "expected {n} initial phases, got {}",
                phases.len()
            )));
        }
        for &phi in phases {
            if !(phi > 0.0 && phi <= 1.0) {
                return Err(Error::Domain {
                    what: "initial phase",
                    value: phi,
                    domain: "(0, 1]",
                });
            }
        }
        Ok(SimState {
            t_now: 0.0,
            phases: phases.to_vec(),
            inflight: VecDeque::new(),
            firing_counts: vec![0; n],
            last_firing: vec![None; n],
        })
    }

    /// The earliest pending instant and everything that happens at it.
    pub fn next_event(&self, state: &SimState) -> EventBatch {
        let eta = self.settings.tie_tolerance;
        let max_phase = state.phases.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut time = state.t_now + (1.0 - max_phase).max(0.0);
        if let Some(s) = state.inflight.front() {
            time = time.min(s.arrival_time);
        }
        let threshold_crossings = state
            .phases
            .iter()
            .enumerate()
            .filter(|&(_, &phi)| state.t_now + (1.0 - phi) <= time + eta)
            .map(|(i, _)| i)
            .collect();
        let arrivals = state
            .inflight
            .iter()
            .take_while(|s| s.arrival_time <= time + eta)
            .count();
        EventBatch {
            time,
            threshold_crossings,
            arrivals,
        }
    }

    /// Advances the state to `batch.time` and resolves every event of that
    /// instant, including same-instant cascades. Returns the new firings.
    pub fn apply_batch(&self, state: &mut SimState, batch: &EventBatch) -> Result<Vec<FiringRecord>> {
        if batch.time < state.t_now {
            return Err(Error::Internal(format!(
                "batch at {} precedes current time {}",
                batch.time, state.t_now
            )));
        }
        let n = state.n();
        let eta = self.settings.tie_tolerance;
        let dt = batch.time - state.t_now;
        if dt > 0.0 {
            for phi in &mut state.phases {
                *phi += dt;
            }
        }
        state.t_now = batch.time;

        let mut fired = Vec::new();
        let mut fired_now = vec![false; n];

        // Summed strength per target over every spike of this instant.
        let mut input = vec![0.0; n];
        let mut touched = vec![false; n];
        for spike in state.inflight.drain(..batch.arrivals) {
            self.topology.for_each_target(spike.source, |j, w| {
                input[j] += w;
                touched[j] = true;
            });
        }

        match self.settings.tie_rule {
            TieRule::FiringFirst => {
                for &i in &batch.threshold_crossings {
                    self.fire(state, i, &mut fired, &mut fired_now)?;
                }
                self.apply_input(state, &input, &touched, &mut fired, &mut fired_now)?;
            }
            TieRule::ArrivalFirst => {
                self.apply_input(state, &input, &touched, &mut fired, &mut fired_now)?;
                for &i in &batch.threshold_crossings {
                    if !fired_now[i] {
                        self.fire(state, i, &mut fired, &mut fired_now)?;
                    }
                }
            }
        }
        // Phases nudged to within η of threshold by rounding belong to this instant.
        for i in 0..n {
            if !fired_now[i] && state.phases[i] >= 1.0 - eta {
                self.fire(state, i, &mut fired, &mut fired_now)?;
            }
        }

        fired.sort_by_key(|r| r.oscillator);
        let tau = self.topology.tau();
        for r in &fired {
            if self.has_targets[r.oscillator] {
                state.inflight.push_back(Spike {
                    source: r.oscillator,
                    emitted_at: r.time,
                    arrival_time: r.time + tau,
                });
            }
        }
        Ok(fired)
    }

    fn apply_input(
        &self,
        state: &mut SimState,
        input: &[f64],
        touched: &[bool],
        fired: &mut Vec<FiringRecord>,
        fired_now: &mut [bool],
    ) -> Result<()> {
        let eta = self.settings.tie_tolerance;
        for j in 0..state.n() {
            if !touched[j] {
                continue;
            }
            let phi = self.map.jump(state.phases[j], input[j]);
            state.phases[j] = phi;
            if phi >= 1.0 - eta {
                if fired_now[j] {
                    // Only reachable when a reset phase is jumped back to threshold.
                    return Err(Error::Internal(format!(
                        "oscillator {j} driven to threshold twice at t = {}",
                        state.t_now
                    )));
                }
                self.fire(state, j, fired, fired_now)?;
            }
        }
        Ok(())
    }

    fn fire(
        &self,
        state: &mut SimState,
        i: usize,
        fired: &mut Vec<FiringRecord>,
        fired_now: &mut [bool],
    ) -> Result<()> {
        if fired_now[i] {
            return Err(Error::Internal(format!(
                "oscillator {i} fired twice at t = {}",
                state.t_now
            )));
        }
        let t = state.t_now;
        if let Some(prev) = state.last_firing[i] {
            debug_assert!(
                !self.in_a1 || t - prev > self.topology.tau() + ISI_SLACK,
                "interspike interval {} of oscillator {i} does not exceed the delay {} in region A1",
                t - prev,
                self.topology.tau()
            );
        }
        fired_now[i] = true;
        state.phases[i] = 0.0;
        state.firing_counts[i] += 1;
        state.last_firing[i] = Some(t);
        fired.push(FiringRecord {
            time: t,
            oscillator: i,
            index: state.firing_counts[i],
        });
        Ok(())
    }

    /// Runs until a budget is exhausted or the observer stops the run.
    pub fn run(
        &self,
        mut state: SimState,
        stop: StopCriteria,
        observer: &mut dyn Observer,
    ) -> Result<RunOutput> {
        if stop.max_firings.is_none() && stop.t_max.is_none() {
            return Err(Error::Parameter(
                "a run needs max_firings or t_max".into(),
            ));
        }
        if let Some(t) = stop.t_max {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Parameter(format!("t_max must be finite, got {t}")));
            }
        }
        let mut log = FiringLog::new(state.n());
        loop {
            if let Some(max) = stop.max_firings {
                if log.len() as u64 >= max {
                    return Ok(RunOutput {
                        log,
                        state,
                        status: RunStatus::MaxFirings,
                    });
                }
            }
            let batch = self.next_event(&state);
            if let Some(t_max) = stop.t_max {
                if batch.time > t_max {
                    return Ok(RunOutput {
                        log,
                        state,
                        status: RunStatus::TimeLimit,
                    });
                }
            }
            let mut fired = self.apply_batch(&mut state, &batch)?;
            if fired.is_empty() {
                continue;
            }
            log.push_batch(&mut fired);
            if observer.on_firing_batch(&state, &fired, &log) == Control::Stop {
                return Ok(RunOutput {
                    log,
                    state,
                    status: RunStatus::Stopped,
                });
            }
        }
    }

    /// Convenience: run and keep a snapshot after every firing batch.
    pub fn run_recorded(
        &self,
        state: SimState,
        stop: StopCriteria,
    ) -> Result<(RunOutput, Vec<Snapshot>)> {
        let mut rec = SnapshotRecorder::default();
        let out = self.run(state, stop, &mut rec)?;
        Ok((out, rec.snapshots))
    }
}
