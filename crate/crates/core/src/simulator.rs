//! Deterministic discrete-event simulation of phase-based task execution.
//!
//! Each phase (timestep) holds one rank-slot per rank, and each rank-slot
//! is split into `k` subtasks with log-normal durations. A rank-slot
//! becomes ready once every slot of its dependency neighborhood in the
//! previous phase has finished, plus its own rank's previous slot (the data
//! it updates lives there). Ranks move through phases asynchronously; there
//! is no barrier beyond what the dependencies impose.
//!
//! Two execution modes share the same duration draws:
//!
//! * `Static`: every subtask runs on its home rank, in order.
//! * `Dynamic`: an idle rank first drains its own ready queue and then
//!   steals the most recently queued subtask of the rank with the latest
//!   projected finish, but only if it would complete that subtask before
//!   the victim would have. No rank then finishes later than it would
//!   statically, so under a global (barrier-like) neighborhood the dynamic
//!   kernel never exceeds the static one for the same draws. On top of the work timeline a scheduler timeline charges
//!   `tau_s` per dispatched subtask (concurrently per worker) and `tau_e`
//!   per dependency edge resolved (serialized). A fraction `rho` of that
//!   time is hidden behind execution; the rest is recorded as the phase's
//!   exposed overhead and extends the makespan.
//!
//! Per-phase kernel time is the advance of the phase's completion front,
//! `end(t) - end(t - 1)`, so pipeline stalls count as kernel time.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::ScalingSample;
use crate::error::{Error, Result};
use crate::model::PhaseTiming;
use crate::topology::{TaskGraph, DEFAULT_EDGE_BUDGET};
use crate::workloads::{kernel_time, WorkloadSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Dynamic,
    Static,
}

impl ScheduleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleMode::Dynamic => "dynamic",
            ScheduleMode::Static => "static",
        }
    }
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dynamic" => Ok(ScheduleMode::Dynamic),
            "static" => Ok(ScheduleMode::Static),
            other => Err(Error::Argument(format!(
                "unknown mode `{other}` (dynamic|static)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub workload: WorkloadSpec,
    pub ranks: u32,
    pub phases: u32,
    pub seed: u64,
    pub mode: ScheduleMode,
    pub edge_budget: u64,
}

impl SimConfig {
    pub fn new(
        workload: WorkloadSpec,
        ranks: u32,
        phases: u32,
        seed: u64,
        mode: ScheduleMode,
    ) -> Self {
        SimConfig {
            workload,
            ranks,
            phases,
            seed,
            mode,
            edge_budget: DEFAULT_EDGE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub mode: ScheduleMode,
    pub per_phase: Vec<PhaseTiming>,
    /// Dependency edges resolved entering each phase.
    pub measured_edges: Vec<u64>,
    pub makespan: f64,
}

impl ExecutionTrace {
    pub fn kernel_makespan(&self) -> f64 {
        self.per_phase.iter().map(|p| p.t_kernel).sum()
    }

    pub fn total_overhead(&self) -> f64 {
        self.per_phase.iter().map(|p| p.t_overhead).sum()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream seed of one subtask, a pure function of its coordinates.
fn subtask_seed(seed: u64, phase: u32, rank: u32, sub: u32) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ u64::from(phase));
    h = splitmix64(h ^ u64::from(rank));
    splitmix64(h ^ u64::from(sub))
}

fn draw_durations(cfg: &SimConfig, mean: f64) -> Result<Vec<f64>> {
    let spec = &cfg.workload;
    let count = cfg.phases as usize * cfg.ranks as usize * spec.k as usize;
    if spec.imbalance == 0.0 {
        return Ok(vec![mean; count]);
    }
    let dist = LogNormal::from_mean_cv(mean, spec.imbalance)
        .map_err(|e| Error::Config(format!("duration distribution: {e}")))?;
    let mut out = Vec::with_capacity(count);
    for t in 0..cfg.phases {
        for i in 0..cfg.ranks {
            for j in 0..spec.k {
                let mut rng = ChaCha8Rng::seed_from_u64(subtask_seed(cfg.seed, t, i, j));
                out.push(dist.sample(&mut rng));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, PartialEq)]
struct Finish {
    time: f64,
    rank: u32,
    subtask: u32,
}

impl Eq for Finish {}

impl Ord for Finish {
    // min-heap on (time, rank)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.rank.cmp(&self.rank))
    }
}

impl PartialOrd for Finish {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Start and finish time of every subtask plus per-phase completion fronts.
struct Timeline {
    phase_end: Vec<f64>,
    start: Vec<f64>,
    finish: Vec<f64>,
}

/// Work timeline only. Static mode runs every subtask on its home rank.
/// Dynamic mode first computes the static timeline and only allows steals
/// that keep the stolen subtask, and the thief's own next subtask, within
/// their static finish and start times.
fn run_work_timeline(graph: &TaskGraph, durations: &[f64], mode: ScheduleMode) -> Vec<f64> {
    let stat = timeline(graph, durations, None);
    match mode {
        ScheduleMode::Static => stat.phase_end,
        ScheduleMode::Dynamic => timeline(graph, durations, Some(&stat)).phase_end,
    }
}

fn timeline(graph: &TaskGraph, durations: &[f64], bound: Option<&Timeline>) -> Timeline {
    let p = graph.ranks() as usize;
    let k = graph.tasks_per_rank_slot() as usize;
    let phases = graph.timesteps() as usize;
    let slots = p * phases;

    // reverse adjacency with the implicit own-rank predecessor
    let mut dependents: Vec<Vec<u32>> = vec![Vec::new(); p];
    let mut pending_init = vec![0u32; p];
    for i in 0..p {
        let deps = graph.neighbors_of(i as u32);
        for &j in deps {
            dependents[j as usize].push(i as u32);
        }
        if !deps.contains(&(i as u32)) {
            dependents[i].push(i as u32);
            pending_init[i] = deps.len() as u32 + 1;
        } else {
            pending_init[i] = deps.len() as u32;
        }
    }

    let mut pending: Vec<u32> = (0..slots).map(|s| pending_init[s % p]).collect();
    let mut remaining = vec![k as u32; slots];
    let mut queues: Vec<VecDeque<u32>> = vec![VecDeque::new(); p];
    let mut queued = 0usize;
    let mut idle = vec![true; p];
    let mut busy_until = vec![0.0f64; p];
    let mut phase_end = vec![0.0f64; phases];
    let mut start = vec![0.0f64; durations.len()];
    let mut finish = vec![0.0f64; durations.len()];
    // slots enqueued so far per rank, i.e. the phase of its next own slot
    let mut next_slot = vec![0usize; p];
    let mut heap = BinaryHeap::new();

    // queued work per rank, for projected finish times
    let mut queue_work = vec![0.0f64; p];
    let enqueue = |slot: usize,
                   queues: &mut Vec<VecDeque<u32>>,
                   queue_work: &mut Vec<f64>,
                   queued: &mut usize,
                   next_slot: &mut Vec<usize>| {
        let home = slot % p;
        next_slot[home] += 1;
        for j in 0..k {
            let task = slot * k + j;
            queues[home].push_back(task as u32);
            queue_work[home] += durations[task];
        }
        *queued += k;
    };

    for i in 0..p {
        enqueue(i, &mut queues, &mut queue_work, &mut queued, &mut next_slot);
    }

    let mut now = 0.0f64;
    loop {
        // dispatch idle ranks in index order
        if queued > 0 {
            // steal candidate: (victim, its projected finish); stale after any queue change
            let mut candidate: Option<Option<(usize, f64)>> = None;
            for r in 0..p {
                if !idle[r] {
                    continue;
                }
                let mut from = None;
                let task = match queues[r].pop_front() {
                    Some(t) => {
                        from = Some(r);
                        Some(t)
                    }
                    None => match bound {
                        Some(stat) => {
                            let victim = *candidate.get_or_insert_with(|| {
                                (0..p)
                                    .filter(|&v| !queues[v].is_empty())
                                    .map(|v| (v, busy_until[v].max(now) + queue_work[v]))
                                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                            });
                            victim.and_then(|(v, end)| {
                                let back = *queues[v].back().expect("non-empty");
                                let done = now + durations[back as usize];
                                // the thief must be free again when its next own slot starts statically
                                let free_by = if next_slot[r] < phases {
                                    stat.start[(next_slot[r] * p + r) * k]
                                } else {
                                    f64::INFINITY
                                };
                                // the thief finishes before the victim would, and within static timings
                                if done < end
                                    && done <= stat.finish[back as usize]
                                    && done <= free_by
                                {
                                    from = Some(v);
                                    queues[v].pop_back()
                                } else {
                                    None
                                }
                            })
                        }
                        None => None,
                    },
                };
                if let (Some(task), Some(v)) = (task, from) {
                    candidate = None;
                    queue_work[v] = if queues[v].is_empty() {
                        0.0
                    } else {
                        queue_work[v] - durations[task as usize]
                    };
                    queued -= 1;
                    idle[r] = false;
                    busy_until[r] = now + durations[task as usize];
                    start[task as usize] = now;
                    finish[task as usize] = busy_until[r];
                    heap.push(Finish {
                        time: busy_until[r],
                        rank: r as u32,
                        subtask: task,
                    });
                }
                if queued == 0 {
                    break;
                }
            }
        }

        let Some(first) = heap.pop() else { break };
        now = first.time;
        let mut batch = vec![first];
        while heap.peek().is_some_and(|f| f.time == now) {
            batch.push(heap.pop().expect("peeked"));
        }
        for f in batch {
            idle[f.rank as usize] = true;
            let slot = f.subtask as usize / k;
            let t = slot / p;
            if now > phase_end[t] {
                phase_end[t] = now;
            }
            remaining[slot] -= 1;
            if remaining[slot] == 0 && t + 1 < phases {
                for &i in &dependents[slot % p] {
                    let next = (t + 1) * p + i as usize;
                    pending[next] -= 1;
                    if pending[next] == 0 {
                        enqueue(
                            next,
                            &mut queues,
                            &mut queue_work,
                            &mut queued,
                            &mut next_slot,
                        );
                    }
                }
            }
        }
    }
    Timeline {
        phase_end,
        start,
        finish,
    }
}

/// Scheduler busy time for one phase: per-worker dispatch (concurrent)
/// followed by serialized edge resolution. Returns `(busy_ms, edges)`.
fn scheduler_timeline(graph: &TaskGraph, phase: u32, tau_s: f64, tau_e: f64) -> (f64, u64) {
    let k = graph.tasks_per_rank_slot();
    let mut dispatch_span = 0.0f64;
    let mut resolver = 0.0f64;
    let mut edges = 0u64;
    for i in 0..graph.ranks() {
        let mut clock = 0.0f64;
        for _ in 0..k {
            clock += tau_s;
        }
        dispatch_span = dispatch_span.max(clock);
        let deps = graph.dependencies(crate::topology::TaskId {
            timestep: phase,
            rank_index: i,
        });
        edges += deps.len() as u64;
    }
    if edges > 0 {
        resolver = tau_e * edges as f64;
    }
    (dispatch_span + resolver, edges)
}

/// Run one simulated execution.
pub fn simulate(config: &SimConfig) -> Result<ExecutionTrace> {
    let spec = &config.workload;
    spec.validate()?;
    if config.phases == 0 {
        return Err(Error::Config("phases must be positive".into()));
    }
    let graph = TaskGraph::build(
        spec.topology,
        config.ranks,
        config.phases,
        spec.k,
        spec.boundary,
        config.edge_budget,
    )?;
    let per_rank = kernel_time(spec, config.ranks);
    let mean = per_rank / f64::from(spec.k);
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::Config(format!(
            "workload `{}` yields a zero-duration phase at P={}",
            spec.name, config.ranks
        )));
    }
    let durations = draw_durations(config, mean)?;
    let fronts = run_work_timeline(&graph, &durations, config.mode);

    let mut per_phase = Vec::with_capacity(fronts.len());
    let mut measured_edges = Vec::with_capacity(fronts.len());
    let mut previous = 0.0;
    let mut makespan = 0.0;
    for (t, &end) in fronts.iter().enumerate() {
        let (busy, edges) = scheduler_timeline(&graph, t as u32, spec.tau_s, spec.tau_e);
        let t_overhead = match config.mode {
            ScheduleMode::Dynamic => (1.0 - spec.rho) * busy,
            ScheduleMode::Static => 0.0,
        };
        let timing = PhaseTiming {
            t_kernel: end - previous,
            t_overhead,
        };
        makespan += timing.phase_time();
        previous = end;
        per_phase.push(timing);
        measured_edges.push(edges);
    }
    Ok(ExecutionTrace {
        mode: config.mode,
        per_phase,
        measured_edges,
        makespan,
    })
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Reduce a trace to one sample using per-phase medians.
pub fn aggregate(ranks: u32, trace: &ExecutionTrace) -> Result<ScalingSample> {
    let kernels: Vec<f64> = trace.per_phase.iter().map(|p| p.t_kernel).collect();
    let overheads: Vec<f64> = trace.per_phase.iter().map(|p| p.t_overhead).collect();
    ScalingSample::new(ranks, median(&kernels), median(&overheads))
}

pub fn validate_ranks(ranks: &[u32]) -> Result<()> {
    if ranks.is_empty() {
        return Err(Error::Argument("rank list is empty".into()));
    }
    if ranks[0] == 0 || ranks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(format!(
            "rank list must be positive and strictly ascending: {ranks:?}"
        )));
    }
    Ok(())
}

/// Simulate every rank count and return the traces in input order.
/// Points run in parallel; results do not depend on thread scheduling.
pub fn sweep_traces(
    workload: &WorkloadSpec,
    ranks: &[u32],
    phases: u32,
    seed: u64,
    mode: ScheduleMode,
) -> Result<Vec<ExecutionTrace>> {
    sweep_traces_with_budget(workload, ranks, phases, seed, mode, DEFAULT_EDGE_BUDGET)
}

pub fn sweep_traces_with_budget(
    workload: &WorkloadSpec,
    ranks: &[u32],
    phases: u32,
    seed: u64,
    mode: ScheduleMode,
    edge_budget: u64,
) -> Result<Vec<ExecutionTrace>> {
    validate_ranks(ranks)?;
    ranks
        .par_iter()
        .map(|&p| {
            let mut cfg = SimConfig::new(workload.clone(), p, phases, seed, mode);
            cfg.edge_budget = edge_budget;
            simulate(&cfg)
        })
        .collect()
}

pub fn run_sweep(
    workload: &WorkloadSpec,
    ranks: &[u32],
    phases: u32,
    seed: u64,
    mode: ScheduleMode,
) -> Result<Vec<ScalingSample>> {
    let traces = sweep_traces(workload, ranks, phases, seed, mode)?;
    ranks
        .iter()
        .zip(&traces)
        .map(|(&p, t)| aggregate(p, t))
        .collect()
}
