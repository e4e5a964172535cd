//! Post-hoc analysis of firing logs and state snapshots.
//!
//! Periodicity is decided by recurrence of the full system state (phases
//! plus in-flight spikes) at successive firings of a reference oscillator.
//! With a delay, equal phase vectors can still diverge if different spikes
//! are pending, so phases alone are not enough.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{Control, FiringLog, FiringRecord, Observer, SimState, Snapshot, ISI_SLACK};
use crate::error::{Error, Result};
use crate::network::NetworkTopology;
use crate::phase_model::{PhaseMap, RegionClass, DEFAULT_BOUNDARY_TOL};

/// Oscillator whose firings define the snapshot sequence for period detection.
pub const REFERENCE_OSCILLATOR: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Per-component absolute tolerance when matching snapshots and periods.
    pub snapshot_tol: f64,
    /// Slack on interspike-interval comparisons.
    pub isi_slack: f64,
    /// Firing times closer than this count as simultaneous.
    pub tie_tolerance: f64,
    pub d_max: u32,
    /// Transient skip, in firings per oscillator.
    pub transient_firings_per_oscillator: u64,
    pub boundary_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            snapshot_tol: 1e-7,
            isi_slack: ISI_SLACK,
            tie_tolerance: crate::engine::DEFAULT_TIE_TOLERANCE,
            d_max: 64,
            transient_firings_per_oscillator: 20,
            boundary_tol: DEFAULT_BOUNDARY_TOL,
        }
    }
}

impl Tolerances {
    pub fn transient_skip(&self, n: usize) -> u64 {
        self.transient_firings_per_oscillator * n as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub d: u32,
    pub delta_t0: f64,
    /// Firing index `M` of the reference oscillator where the recurrence starts.
    pub onset_index: u64,
    pub onset_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RunClassification {
    Periodic(Period),
    CompletelySynchronized {
        onset_time: f64,
        period: Option<Period>,
    },
    Undecided {
        note: String,
    },
}

impl RunClassification {
    pub fn period(&self) -> Option<Period> {
        match self {
            RunClassification::Periodic(p) => Some(*p),
            RunClassification::CompletelySynchronized { period, .. } => *period,
            RunClassification::Undecided { .. } => None,
        }
    }

    pub fn is_synchronized(&self) -> bool {
        matches!(self, RunClassification::CompletelySynchronized { .. })
    }

    pub fn is_undecided(&self) -> bool {
        matches!(self, RunClassification::Undecided { .. })
    }
}

impl fmt::Display for RunClassification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunClassification::Periodic(p) => {
                write!(f, "period-{} solution, Δt0 = {:.9}", p.d, p.delta_t0)
            }
            RunClassification::CompletelySynchronized { onset_time, period } => {
                write!(f, "completely synchronized from t = {onset_time:.9}")?;
                if let Some(p) = period {
                    write!(f, ", period-{}, Δt0 = {:.9}", p.d, p.delta_t0)?;
                }
                Ok(())
            }
            RunClassification::Undecided { note } => write!(f, "undecided ({note})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PropertyId {
    #[serde(rename = "theorem1")]
    Theorem1,
    #[serde(rename = "p1")]
    P1,
    #[serde(rename = "p2")]
    P2,
    #[serde(rename = "p3")]
    P3,
}

impl PropertyId {
    pub fn name(self) -> &'static str {
        match self {
            PropertyId::Theorem1 => "theorem1",
            PropertyId::P1 => "p1",
            PropertyId::P2 => "p2",
            PropertyId::P3 => "p3",
        }
    }
}

/// Firing `t^i_m`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessEvent {
    pub oscillator: usize,
    pub index: u64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub description: String,
    pub events: Vec<WitnessEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub id: PropertyId,
    pub holds: bool,
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PropertyReport {
    fn holds(id: PropertyId) -> Self {
        PropertyReport {
            id,
            holds: true,
            witness: None,
            note: None,
        }
    }

    fn violated(id: PropertyId, description: String, events: Vec<WitnessEvent>) -> Self {
        PropertyReport {
            id,
            holds: false,
            witness: Some(Witness {
                description,
                events,
            }),
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

fn event(oscillator: usize, m: usize, time: f64) -> WitnessEvent {
    WitnessEvent {
        oscillator,
        index: m as u64 + 1,
        time,
    }
}

/// `t^i_{m+1} − t^i_m` for every consecutive pair in the log.
pub fn interspike_intervals(log: &FiringLog, oscillator: usize) -> Result<Vec<f64>> {
    if oscillator >= log.n() {
        return Err(Error::Index {
            index: oscillator,
            n: log.n(),
        });
    }
    let t = log.times(oscillator);
    if t.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "oscillator {oscillator} fired {} time(s)",
            t.len()
        )));
    }
    Ok(t.windows(2).map(|w| w[1] - w[0]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsiSummary {
    pub oscillator: usize,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn isi_summary(log: &FiringLog) -> Vec<IsiSummary> {
    (0..log.n())
        .filter_map(|i| {
            let isi = interspike_intervals(log, i).ok()?;
            let min = isi.iter().copied().fold(f64::INFINITY, f64::min);
            let max = isi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = isi.iter().sum::<f64>() / isi.len() as f64;
            Some(IsiSummary {
                oscillator: i,
                count: isi.len(),
                min,
                max,
                mean,
            })
        })
        .collect()
}

/// Every interspike interval must exceed `τ` (by more than `slack`).
///
/// The hypothesis is `(τ, ε) ∈ A1`; pass `override_region` to evaluate the
/// bound anyway.
pub fn check_theorem1(
    log: &FiringLog,
    tau: f64,
    region: RegionClass,
    override_region: bool,
    slack: f64,
) -> Result<PropertyReport> {
    if region.is_a2() && !override_region {
        return Err(Error::Hypothesis(format!(
            "interspike bound requires (tau, eps) in A1, got {region}"
        )));
    }
    let mut first: Option<(f64, usize, usize, f64, f64)> = None;
    for (i, times) in log.times_by_oscillator().iter().enumerate() {
        for (m, w) in times.windows(2).enumerate() {
            let isi = w[1] - w[0];
            if isi <= tau + slack && first.is_none_or(|f| w[1] < f.0) {
                first = Some((w[1], i, m, w[0], isi));
            }
        }
    }
    Ok(match first {
        None => PropertyReport::holds(PropertyId::Theorem1),
        Some((t1, i, m, t0, isi)) => PropertyReport::violated(
            PropertyId::Theorem1,
            format!("interspike interval {isi:.12} of oscillator {i} does not exceed tau = {tau}"),
            vec![event(i, m, t0), event(i, m + 1, t1)],
        ),
    })
}

fn require_symmetric(topology: &NetworkTopology, i: usize, j: usize) -> Result<()> {
    if !topology.symmetric_pair(i, j)? {
        return Err(Error::Hypothesis(format!(
            "oscillators {i} and {j} are not a symmetric pair"
        )));
    }
    Ok(())
}

/// Firing-order preservation for a symmetric pair: whenever
/// `t^i_{m_i} ≤ t^j_{m_j}`, also `t^i_{m_i+1} ≤ t^j_{m_j+1}` (both orders,
/// non-strict, up to `tie`).
///
/// For each `m_i` only the smallest qualifying `m_j` needs checking, since
/// larger ones make the conclusion weaker.
pub fn check_firing_order(
    log: &FiringLog,
    topology: &NetworkTopology,
    i: usize,
    j: usize,
    tie: f64,
) -> Result<PropertyReport> {
    require_symmetric(topology, i, j)?;
    let by = log.times_by_oscillator();
    let (ti, tj) = (&by[i], &by[j]);
    if ti.len() < 2 || tj.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "oscillators {i} and {j} fired {} and {} times",
            ti.len(),
            tj.len()
        )));
    }
    let mut worst: Option<(f64, Witness)> = None;
    for (a, b, ta, tb) in [(i, j, ti, tj), (j, i, tj, ti)] {
        let mut mb = 0;
        for ma in 0..ta.len() - 1 {
            while mb < tb.len() && tb[mb] < ta[ma] - tie {
                mb += 1;
            }
            if mb + 1 >= tb.len() {
                break;
            }
            if ta[ma + 1] > tb[mb + 1] + tie {
                let at = tb[mb + 1];
                if worst.as_ref().is_none_or(|w| at < w.0) {
                    worst = Some((
                        at,
                        Witness {
                            description: format!(
                                "t^{a}_{} <= t^{b}_{} but t^{a}_{} > t^{b}_{}",
                                ma + 1,
                                mb + 1,
                                ma + 2,
                                mb + 2
                            ),
                            events: vec![
                                event(a, ma, ta[ma]),
                                event(b, mb, tb[mb]),
                                event(a, ma + 1, ta[ma + 1]),
                                event(b, mb + 1, tb[mb + 1]),
                            ],
                        },
                    ));
                }
                break;
            }
        }
    }
    Ok(match worst {
        None => PropertyReport::holds(PropertyId::P1),
        Some((_, w)) => PropertyReport {
            id: PropertyId::P1,
            holds: false,
            witness: Some(w),
            note: None,
        },
    })
}

/// Synchronization persistence for a symmetric pair: after their first
/// simultaneous firing, `i` and `j` keep firing together and their phases
/// agree at every later snapshot.
pub fn check_sync_persistence(
    log: &FiringLog,
    snapshots: &[Snapshot],
    topology: &NetworkTopology,
    i: usize,
    j: usize,
    tolerances: &Tolerances,
) -> Result<PropertyReport> {
    require_symmetric(topology, i, j)?;
    let tie = tolerances.tie_tolerance;
    let by = log.times_by_oscillator();
    let (ti, tj) = (&by[i], &by[j]);

    let mut start = None;
    let mut b = 0;
    for (a, &t) in ti.iter().enumerate() {
        while b < tj.len() && tj[b] < t - tie {
            b += 1;
        }
        if b < tj.len() && (tj[b] - t).abs() <= tie {
            start = Some((a, b));
            break;
        }
    }
    let Some((a0, b0)) = start else {
        return Ok(PropertyReport::holds(PropertyId::P2)
            .with_note("hypothesis never triggered: no simultaneous firing"));
    };
    let t_sync = ti[a0];
    let trigger = [event(i, a0, ti[a0]), event(j, b0, tj[b0])];

    let (ri, rj) = (&ti[a0..], &tj[b0..]);
    for k in 0..ri.len().min(rj.len()) {
        if (ri[k] - rj[k]).abs() > tie {
            return Ok(PropertyReport::violated(
                PropertyId::P2,
                format!(
                    "t^{i}_{} = t^{j}_{} but t^{i}_{} != t^{j}_{}",
                    a0 + 1,
                    b0 + 1,
                    a0 + k + 1,
                    b0 + k + 1
                ),
                vec![
                    trigger[0],
                    trigger[1],
                    event(i, a0 + k, ri[k]),
                    event(j, b0 + k, rj[k]),
                ],
            ));
        }
    }
    // A trailing unmatched firing inside the other's observed span is a split.
    let (longer, lo, shorter_last, other) = if ri.len() > rj.len() {
        (ri, i, rj.last(), j)
    } else {
        (rj, j, ri.last(), i)
    };
    let k = ri.len().min(rj.len());
    if k < longer.len() {
        if let (Some(&last), Some(end)) = (shorter_last, log.last_time()) {
            if longer[k] < end - tie && longer[k] > last {
                let base = if lo == i { a0 } else { b0 };
                return Ok(PropertyReport::violated(
                    PropertyId::P2,
                    format!("oscillator {lo} fired at {} without oscillator {other}", longer[k]),
                    vec![trigger[0], trigger[1], event(lo, base + k, longer[k])],
                ));
            }
        }
    }
    for s in snapshots.iter().filter(|s| s.time >= t_sync - tie) {
        if (s.phases[i] - s.phases[j]).abs() > tolerances.snapshot_tol {
            return Ok(PropertyReport::violated(
                PropertyId::P2,
                format!(
                    "phases of {i} and {j} differ at t = {}: {} vs {}",
                    s.time, s.phases[i], s.phases[j]
                ),
                trigger.to_vec(),
            ));
        }
    }
    Ok(PropertyReport::holds(PropertyId::P2))
}

/// Whether two snapshots describe the same state up to `tol`: equal phases and
/// the same in-flight spikes per source with matching arrival offsets.
pub fn snapshots_match(a: &Snapshot, b: &Snapshot, tol: f64) -> bool {
    if a.phases.len() != b.phases.len() || a.pending.len() != b.pending.len() {
        return false;
    }
    if a
        .phases
        .iter()
        .zip(&b.phases)
        .any(|(x, y)| (x - y).abs() > tol)
    {
        return false;
    }
    let key = |s: &Snapshot| {
        let mut v: Vec<(usize, f64)> = s.pending.iter().map(|p| (p.source, p.offset)).collect();
        v.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        v
    };
    key(a)
        .iter()
        .zip(key(b).iter())
        .all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= tol)
}

/// Checks `t^i_{m+d} − t^i_m = Δt0` for every firing in `[t_start, t_start + Δt0)`,
/// requiring exactly `d` such firings per oscillator.
fn verify_period(
    by_osc: &[Vec<f64>],
    t_start: f64,
    d: usize,
    delta_t0: f64,
    tol: &Tolerances,
) -> std::result::Result<(), String> {
    let tie = tol.tie_tolerance;
    for (i, times) in by_osc.iter().enumerate() {
        let first = times.partition_point(|&t| t < t_start - tie);
        let end = times.partition_point(|&t| t < t_start + delta_t0 - tie);
        if end - first != d {
            return Err(format!(
                "oscillator {i} fires {} times per recurrence, reference fires {d}",
                end - first
            ));
        }
        for m in first..end {
            let Some(&later) = times.get(m + d) else {
                return Err(format!("log ends before firing {} of oscillator {i}", m + d + 1));
            };
            if ((later - times[m]) - delta_t0).abs() > tol.snapshot_tol {
                return Err(format!(
                    "oscillator {i}: t_(m+d) - t_m = {} != {delta_t0}",
                    later - times[m]
                ));
            }
        }
    }
    Ok(())
}

fn reference_snapshots(snapshots: &[Snapshot]) -> Vec<&Snapshot> {
    snapshots
        .iter()
        .filter(|s| s.fired.binary_search(&REFERENCE_OSCILLATOR).is_ok())
        .collect()
}

/// Smallest `d ≤ d_max` for which the state at a reference firing recurs
/// `d` reference firings later, verified against the log.
pub fn detect_period(log: &FiringLog, snapshots: &[Snapshot], tol: &Tolerances) -> RunClassification {
    let refs = reference_snapshots(snapshots);
    let skip = tol.transient_skip(log.n());
    let start = refs.partition_point(|s| s.total_firings <= skip);
    let by_osc = log.times_by_oscillator();
    let ref_times = &by_osc[REFERENCE_OSCILLATOR];
    let d_max = tol.d_max as usize;
    let mut last_reason = None;
    for k in start..refs.len() {
        for d in 1..=d_max {
            let Some(later) = refs.get(k + d) else { break };
            if !snapshots_match(refs[k], later, tol.snapshot_tol) {
                continue;
            }
            let delta_t0 = later.time - refs[k].time;
            match verify_period(&by_osc, refs[k].time, d, delta_t0, tol) {
                Ok(()) => {
                    // Walk back into the transient while the recurrence still holds.
                    let mut onset = k;
                    while onset > 0 && snapshots_match(refs[onset - 1], refs[onset - 1 + d], tol.snapshot_tol) {
                        onset -= 1;
                    }
                    let onset_time = refs[onset].time;
                    let onset_index = ref_times.partition_point(|&t| t < onset_time - tol.tie_tolerance) as u64 + 1;
                    return RunClassification::Periodic(Period {
                        d: d as u32,
                        delta_t0,
                        onset_index,
                        onset_time,
                    });
                }
                Err(reason) => last_reason = Some(reason),
            }
        }
    }
    RunClassification::Undecided {
        note: match last_reason {
            Some(r) => format!("state recurred but failed verification: {r}"),
            None => format!(
                "no state recurrence with d <= {} among {} reference firings after the transient",
                tol.d_max,
                refs.len().saturating_sub(start)
            ),
        },
    }
}

/// Whether every oscillator is driven by the same pending input: for each
/// distinct arrival instant, the summed strength reaching each target.
fn pending_input_symmetric(s: &Snapshot, topology: &NetworkTopology, tol: f64) -> bool {
    let n = s.phases.len();
    let mut input = vec![0.0; n];
    let mut k = 0;
    while k < s.pending.len() {
        let t = s.pending[k].offset;
        input.iter_mut().for_each(|x| *x = 0.0);
        while k < s.pending.len() && (s.pending[k].offset - t).abs() <= tol {
            topology.for_each_target(s.pending[k].source, |j, w| input[j] += w);
            k += 1;
        }
        let first = input[0];
        if input.iter().any(|x| (x - first).abs() > tol) {
            return false;
        }
    }
    true
}

/// Whether the snapshot is a synchronized state that persists forever:
/// all phases equal and identical pending input at every oscillator.
pub fn is_synchronized_state(s: &Snapshot, topology: &NetworkTopology, tol: f64) -> bool {
    let Some(&first) = s.phases.first() else {
        return false;
    };
    s.phases.iter().all(|p| (p - first).abs() <= tol) && pending_input_symmetric(s, topology, tol)
}

/// First snapshot from which the run is completely synchronized.
pub fn detect_complete_sync(
    snapshots: &[Snapshot],
    topology: &NetworkTopology,
    tol: f64,
) -> RunClassification {
    match snapshots
        .iter()
        .find(|s| is_synchronized_state(s, topology, tol))
    {
        Some(s) => RunClassification::CompletelySynchronized {
            onset_time: s.time,
            period: None,
        },
        None => RunClassification::Undecided {
            note: format!("no synchronized state among {} snapshots", snapshots.len()),
        },
    }
}

/// Combined classification: synchronization first, then periodicity.
pub fn classify_run(
    log: &FiringLog,
    snapshots: &[Snapshot],
    topology: &NetworkTopology,
    tol: &Tolerances,
) -> RunClassification {
    let periodic = detect_period(log, snapshots, tol);
    match detect_complete_sync(snapshots, topology, tol.snapshot_tol) {
        RunClassification::CompletelySynchronized { onset_time, .. } => {
            RunClassification::CompletelySynchronized {
                onset_time,
                period: periodic.period(),
            }
        }
        _ => periodic,
    }
}

/// A completely synchronized A1 solution has period one with interspike
/// interval `1 − [f⁻¹(f(τ) + ε) − τ]`.
pub fn check_period_one_if_synced(
    classification: &RunClassification,
    tau: f64,
    eps: f64,
    map: &PhaseMap,
    tol: f64,
) -> Result<PropertyReport> {
    let RunClassification::CompletelySynchronized { period, .. } = classification else {
        return Err(Error::Hypothesis(
            "run is not completely synchronized".into(),
        ));
    };
    let expected = if eps == 0.0 {
        1.0
    } else {
        let region = map.classify_region(tau, eps, DEFAULT_BOUNDARY_TOL)?;
        if region.is_a2() {
            return Err(Error::Hypothesis(format!(
                "period-one synchronization requires (tau, eps) in A1, got {region}"
            )));
        }
        map.sync_isi(tau, eps)?
    };
    let Some(p) = period else {
        return Ok(PropertyReport::violated(
            PropertyId::P3,
            "synchronized run has no detected period".into(),
            Vec::new(),
        ));
    };
    if p.d == 1 && (p.delta_t0 - expected).abs() <= tol {
        Ok(PropertyReport::holds(PropertyId::P3))
    } else {
        Ok(PropertyReport::violated(
            PropertyId::P3,
            format!(
                "synchronized period d = {}, Δt0 = {:.12}; expected d = 1, Δt0 = {expected:.12}",
                p.d, p.delta_t0
            ),
            vec![WitnessEvent {
                oscillator: REFERENCE_OSCILLATOR,
                index: p.onset_index,
                time: p.onset_time,
            }],
        ))
    }
}

/// JSON analysis report for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub classification: RunClassification,
    pub properties: Vec<PropertyReport>,
    pub isi_summary: Vec<IsiSummary>,
}

/// Classifies a run while it executes and stops it once decided.
///
/// Synchronization is checked at every firing batch; periodicity by
/// comparing each reference snapshot after the transient with the previous
/// `d_max`, then confirming one further period against the log.
pub struct OnlineClassifier<'a> {
    topology: &'a NetworkTopology,
    tol: Tolerances,
    skip: u64,
    recent: VecDeque<Snapshot>,
    candidate: Option<Candidate>,
    reference_firings: u64,
    pub outcome: Option<RunClassification>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    t_start: f64,
    d: usize,
    delta_t0: f64,
    onset_index: u64,
    due: u64,
}

impl<'a> OnlineClassifier<'a> {
    pub fn new(topology: &'a NetworkTopology, tol: Tolerances) -> Self {
        OnlineClassifier {
            topology,
            skip: tol.transient_skip(topology.n()),
            tol,
            recent: VecDeque::with_capacity(tol.d_max as usize + 1),
            candidate: None,
            reference_firings: 0,
            outcome: None,
        }
    }

    pub fn into_outcome(self) -> RunClassification {
        self.outcome.unwrap_or_else(|| RunClassification::Undecided {
            note: "budget exhausted before synchronization or state recurrence".into(),
        })
    }
}

impl Observer for OnlineClassifier<'_> {
    fn on_firing_batch(&mut self, state: &SimState, fired: &[FiringRecord], log: &FiringLog) -> Control {
        let snap = Snapshot::capture(state, fired);
        if is_synchronized_state(&snap, self.topology, self.tol.snapshot_tol) {
            self.outcome = Some(RunClassification::CompletelySynchronized {
                onset_time: snap.time,
                period: None,
            });
            return Control::Stop;
        }
        if snap.fired.binary_search(&REFERENCE_OSCILLATOR).is_err() {
            return Control::Continue;
        }
        self.reference_firings += 1;
        if snap.total_firings <= self.skip {
            return Control::Continue;
        }

        if let Some(c) = self.candidate {
            if self.reference_firings >= c.due {
                self.candidate = None;
                let by_osc = log.times_by_oscillator();
                if verify_period(&by_osc, c.t_start, c.d, c.delta_t0, &self.tol).is_ok() {
                    self.outcome = Some(RunClassification::Periodic(Period {
                        d: c.d as u32,
                        delta_t0: c.delta_t0,
                        onset_index: c.onset_index,
                        onset_time: c.t_start,
                    }));
                    return Control::Stop;
                }
            }
        }

        if self.candidate.is_none() {
            let len = self.recent.len();
            for d in 1..=len {
                let older = &self.recent[len - d];
                if snapshots_match(older, &snap, self.tol.snapshot_tol) {
                    self.candidate = Some(Candidate {
                        t_start: older.time,
                        d,
                        delta_t0: snap.time - older.time,
                        onset_index: self.reference_firings - d as u64,
                        due: self.reference_firings + d as u64 + 1,
                    });
                    break;
                }
            }
        }
        if self.recent.len() == self.tol.d_max as usize {
            self.recent.pop_front();
        }
        self.recent.push_back(snap);
        Control::Continue
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Engine, StopCriteria};

    fn lif() -> PhaseMap {
        PhaseMap::lif(1.05).unwrap()
    }

    fn log_from(n: usize, events: &[(f64, usize)]) -> FiringLog {
        let mut counts = vec![0u64; n];
        let records = events
            .iter()
            .map(|&(time, oscillator)| {
                counts[oscillator] += 1;
                FiringRecord {
                    time,
                    oscillator,
                    index: counts[oscillator],
                }
            })
            .collect();
        FiringLog::from_records(n, records).unwrap()
    }

    #[test]
    fn isi_of_free_oscillator() {
        let map = lif();
        let topo = NetworkTopology::uncoupled(1, 0.5).unwrap();
        let engine = Engine::new(&map, &topo);
        let out = engine
            .run(engine.init(&[0.4]).unwrap(), StopCriteria::firings(6), &mut crate::engine::NoObserver)
            .unwrap();
        let isi = interspike_intervals(&out.log, 0).unwrap();
        assert_eq!(isi.len(), 5);
        assert!(isi.iter().all(|x| (x - 1.0).abs() < 1e-12));
        let r = check_theorem1(&out.log, 0.5, RegionClass::A1, false, ISI_SLACK).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn isi_insufficient_data() {
        let log = log_from(2, &[(0.5, 0)]);
        assert!(matches!(
            interspike_intervals(&log, 0),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(interspike_intervals(&log, 3), Err(Error::Index { .. })));
    }

    #[test]
    fn theorem1_hypothesis_gate() {
        let log = log_from(1, &[(0.1, 0), (0.5, 0)]);
        assert!(matches!(
            check_theorem1(&log, 0.9, RegionClass::A2Interior, false, ISI_SLACK),
            Err(Error::Hypothesis(_))
        ));
        let r = check_theorem1(&log, 0.9, RegionClass::A2Interior, true, ISI_SLACK).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert_eq!(w.events[1].index, 2);
    }

    #[test]
    fn isi_equal_to_delay_violates() {
        let log = log_from(1, &[(0.3, 0), (0.8, 0)]);
        let r = check_theorem1(&log, 0.5, RegionClass::A1, false, ISI_SLACK).unwrap();
        assert!(!r.holds);
    }

    #[test]
    fn firing_order_violation_found() {
        let topo = NetworkTopology::all_to_all(2, 0.5, 0.3).unwrap();
        // 0 before 1, then 1 before 0.
        let log = log_from(2, &[(0.1, 0), (0.2, 1), (0.9, 1), (1.0, 0)]);
        let r = check_firing_order(&log, &topo, 0, 1, 1e-9).unwrap();
        assert!(!r.holds);
        let ev = r.witness.unwrap().events;
        assert_eq!((ev[0].oscillator, ev[0].index), (0, 1));
        assert_eq!((ev[3].oscillator, ev[3].index), (1, 2));
    }

    #[test]
    fn firing_order_ties_allowed() {
        let topo = NetworkTopology::all_to_all(2, 0.5, 0.3).unwrap();
        let log = log_from(2, &[(0.1, 0), (0.2, 1), (0.9, 0), (0.9, 1), (1.5, 0), (1.5, 1)]);
        assert!(check_firing_order(&log, &topo, 0, 1, 1e-9).unwrap().holds);
    }

    #[test]
    fn firing_order_needs_symmetric_pair() {
        let m = vec![
            vec![0.0, 0.3, 0.15],
            vec![0.1, 0.0, 0.15],
            vec![0.2, 0.0, 0.0],
        ];
        let topo = NetworkTopology::custom(m, 0.5, 0.3).unwrap();
        let log = log_from(3, &[(0.1, 0), (0.2, 1), (0.9, 1), (1.0, 0)]);
        assert!(matches!(
            check_firing_order(&log, &topo, 0, 1, 1e-9),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn sync_persistence_split_detected() {
        let topo = NetworkTopology::all_to_all(2, 0.5, 0.3).unwrap();
        let log = log_from(2, &[(0.5, 0), (0.5, 1), (1.2, 0), (1.3, 1)]);
        let r = check_sync_persistence(&log, &[], &topo, 0, 1, &Tolerances::default()).unwrap();
        assert!(!r.holds);
        let log = log_from(2, &[(0.1, 0), (0.3, 1)]);
        let r = check_sync_persistence(&log, &[], &topo, 0, 1, &Tolerances::default()).unwrap();
        assert!(r.holds);
        assert!(r.note.is_some());
    }

    #[test]
    fn identical_phases_a1_period_one() {
        let map = lif();
        let (tau, eps) = (0.1, 0.3);
        let topo = NetworkTopology::all_to_all(3, tau, eps).unwrap();
        let engine = Engine::new(&map, &topo);
        let (out, snaps) = engine
            .run_recorded(engine.init(&[0.4; 3]).unwrap(), StopCriteria::firings(300))
            .unwrap();
        let tol = Tolerances::default();
        let c = classify_run(&out.log, &snaps, &topo, &tol);
        match &c {
            RunClassification::CompletelySynchronized { onset_time, period } => {
                assert!((onset_time - 0.6).abs() < 1e-12);
                let p = period.unwrap();
                assert_eq!(p.d, 1);
                assert!((p.delta_t0 - 0.839_043_807_601_072).abs() < 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(check_period_one_if_synced(&c, tau, eps, &map, 1e-7).unwrap().holds);
        for (i, j) in topo.symmetric_pairs() {
            assert!(check_sync_persistence(&out.log, &snaps, &topo, i, j, &tol).unwrap().holds);
        }
    }

    #[test]
    fn uncoupled_single_oscillator_period_one() {
        let map = lif();
        let topo = NetworkTopology::uncoupled(1, 0.5).unwrap();
        let engine = Engine::new(&map, &topo);
        let (out, snaps) = engine
            .run_recorded(engine.init(&[0.3]).unwrap(), StopCriteria::firings(60))
            .unwrap();
        let c = classify_run(&out.log, &snaps, &topo, &Tolerances::default());
        let p = c.period().unwrap();
        assert!(c.is_synchronized());
        assert_eq!(p.d, 1);
        assert!((p.delta_t0 - 1.0).abs() < 1e-9);
        assert!(check_period_one_if_synced(&c, 0.5, 0.0, &map, 1e-7).unwrap().holds);
    }

    #[test]
    fn period_one_rejects_a2_and_unsynced() {
        let map = lif();
        let c = RunClassification::CompletelySynchronized {
            onset_time: 0.0,
            period: None,
        };
        assert!(matches!(
            check_period_one_if_synced(&c, 0.9, 0.6, &map, 1e-7),
            Err(Error::Hypothesis(_))
        ));
        let c = RunClassification::Undecided { note: String::new() };
        assert!(check_period_one_if_synced(&c, 0.1, 0.3, &map, 1e-7).is_err());
    }

    #[test]
    fn short_run_is_undecided() {
        let map = lif();
        let topo = NetworkTopology::all_to_all(4, 0.9, 0.6).unwrap();
        let engine = Engine::new(&map, &topo);
        let (out, snaps) = engine
            .run_recorded(
                engine.init(&[0.1766, 0.4298, 0.4079, 0.7061]).unwrap(),
                StopCriteria::firings(20),
            )
            .unwrap();
        assert!(detect_period(&out.log, &snaps, &Tolerances::default()).is_undecided());
    }

    #[test]
    fn online_matches_offline() {
        let map = lif();
        let topo = NetworkTopology::all_to_all(4, 0.9, 0.6).unwrap();
        let engine = Engine::new(&map, &topo);
        let phases = [0.1766, 0.4298, 0.4079, 0.7061];
        let tol = Tolerances::default();
        let (out, snaps) = engine
            .run_recorded(engine.init(&phases).unwrap(), StopCriteria::firings(2000))
            .unwrap();
        let offline = classify_run(&out.log, &snaps, &topo, &tol);
        let mut online = OnlineClassifier::new(&topo, tol);
        engine
            .run(engine.init(&phases).unwrap(), StopCriteria::firings(2000), &mut online)
            .unwrap();
        let online = online.into_outcome();
        let (a, b) = (offline.period().unwrap(), online.period().unwrap());
        assert_eq!(a.d, b.d);
        assert!((a.delta_t0 - b.delta_t0).abs() < 1e-9);
    }
}
