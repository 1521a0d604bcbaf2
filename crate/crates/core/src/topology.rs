//! Dependency neighborhoods and phase-by-rank task graphs.
//!
//! A task `(t, i)` at timestep `t` on rank `i` depends on the tasks
//! `(t - 1, j)` for every `j` in its neighborhood. Four classes cover the
//! dependency structures of interest: all-to-all, three-point stencil,
//! one-directional sweep, and fully independent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the total number of stored dependency edges of a graph.
pub const DEFAULT_EDGE_BUDGET: u64 = 1 << 26;

/// Dependency structure of a phase-based computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyClass {
    /// Every task depends on every task of the previous phase.
    Global,
    /// Nearest-neighbor halo: `{i - 1, i, i + 1}`.
    LocalStencil,
    /// Left-to-right sweep: `{i - 1, i}`.
    LocalSweep,
    /// No runtime dependencies.
    Independent,
}

/// Functional form of the overhead model a topology dictates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OverheadForm {
    /// `alpha * P^2 + beta`
    #[serde(alias = "quadratic")]
    Quadratic,
    /// `alpha * P + beta`
    #[serde(alias = "linear")]
    Linear,
    /// `beta`
    #[serde(alias = "constant")]
    Constant,
}

impl TopologyClass {
    pub const ALL: [TopologyClass; 4] = [
        TopologyClass::Global,
        TopologyClass::LocalStencil,
        TopologyClass::LocalSweep,
        TopologyClass::Independent,
    ];

    pub fn overhead_form(self) -> OverheadForm {
        match self {
            TopologyClass::Global => OverheadForm::Quadratic,
            TopologyClass::LocalStencil | TopologyClass::LocalSweep => OverheadForm::Linear,
            TopologyClass::Independent => OverheadForm::Constant,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyClass::Global => "global",
            TopologyClass::LocalStencil => "local_stencil",
            TopologyClass::LocalSweep => "local_sweep",
            TopologyClass::Independent => "independent",
        }
    }
}

impl fmt::Display for TopologyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "global" => Ok(TopologyClass::Global),
            "local_stencil" | "stencil" | "local" => Ok(TopologyClass::LocalStencil),
            "local_sweep" | "sweep" => Ok(TopologyClass::LocalSweep),
            "independent" | "none" => Ok(TopologyClass::Independent),
            other => Err(Error::Argument(format!(
                "unknown topology `{other}` (expected global, local_stencil, local_sweep, independent)"
            ))),
        }
    }
}

/// Treatment of the first and last rank in local topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Out-of-range neighbors are dropped.
    #[default]
    Clamp,
    /// Rank indices wrap modulo `P`.
    Periodic,
}

/// A task of the grid: timestep and owning rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId {
    pub timestep: u32,
    pub rank_index: u32,
}

/// Neighborhood of rank `i` with clamped boundaries.
pub fn neighborhood(topology: TopologyClass, ranks: u32, i: i64) -> Result<Vec<u32>> {
    neighborhood_with(topology, ranks, i, Boundary::Clamp)
}

/// Neighborhood of rank `i`, sorted ascending and free of duplicates.
pub fn neighborhood_with(
    topology: TopologyClass,
    ranks: u32,
    i: i64,
    boundary: Boundary,
) -> Result<Vec<u32>> {
    if ranks == 0 {
        return Err(Error::Domain("rank count must be positive".into()));
    }
    if i < 0 || i >= i64::from(ranks) {
        return Err(Error::Domain(format!(
            "rank index {i} outside [0, {ranks})"
        )));
    }
    let offsets: &[i64] = match topology {
        TopologyClass::Global => return Ok((0..ranks).collect()),
        TopologyClass::Independent => return Ok(Vec::new()),
        TopologyClass::LocalStencil => &[-1, 0, 1],
        TopologyClass::LocalSweep => &[-1, 0],
    };
    let p = i64::from(ranks);
    let mut out: Vec<u32> = offsets
        .iter()
        .filter_map(|&d| {
            let j = i + d;
            match boundary {
                Boundary::Clamp => (0..p).contains(&j).then_some(j as u32),
                Boundary::Periodic => Some(j.rem_euclid(p) as u32),
            }
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Dependency edges per timestep transition, clamped boundaries.
///
/// Closed forms: `P^2`, `3P - 2`, `2P - 1` and `0`.
pub fn edge_count(topology: TopologyClass, ranks: u32) -> u64 {
    let p = u64::from(ranks);
    if p == 0 {
        return 0;
    }
    match topology {
        TopologyClass::Global => p * p,
        TopologyClass::LocalStencil => 3 * p - 2,
        TopologyClass::LocalSweep => 2 * p - 1,
        TopologyClass::Independent => 0,
    }
}

/// Edges per transition under the given boundary rule.
pub fn edge_count_with(topology: TopologyClass, ranks: u32, boundary: Boundary) -> u64 {
    let p = u64::from(ranks);
    match (boundary, topology) {
        (Boundary::Clamp, _) | (_, TopologyClass::Global) | (_, TopologyClass::Independent) => {
            edge_count(topology, ranks)
        }
        // wrap-around duplicates collapse for tiny P
        (Boundary::Periodic, TopologyClass::LocalStencil) => p * p.min(3),
        (Boundary::Periodic, TopologyClass::LocalSweep) => p * p.min(2),
    }
}

/// Phase-by-rank task grid.
///
/// Neighborhoods depend only on the rank index, so they are stored once per
/// rank and shared by every timestep after the first.
#[derive(Debug, Clone)]
pub struct TaskGraph {
    topology: TopologyClass,
    boundary: Boundary,
    ranks: u32,
    timesteps: u32,
    tasks_per_rank_slot: u32,
    neighbors: Vec<Vec<u32>>,
}

/// Build a graph with clamped boundaries and the default edge budget.
pub fn build_task_graph(
    topology: TopologyClass,
    ranks: u32,
    timesteps: u32,
    k: u32,
) -> Result<TaskGraph> {
    TaskGraph::build(
        topology,
        ranks,
        timesteps,
        k,
        Boundary::Clamp,
        DEFAULT_EDGE_BUDGET,
    )
}

impl TaskGraph {
    pub fn build(
        topology: TopologyClass,
        ranks: u32,
        timesteps: u32,
        k: u32,
        boundary: Boundary,
        edge_budget: u64,
    ) -> Result<TaskGraph> {
        if ranks == 0 || timesteps == 0 || k == 0 {
            return Err(Error::Argument(format!(
                "ranks, timesteps and k must be positive (got {ranks}, {timesteps}, {k})"
            )));
        }
        let per_step = edge_count_with(topology, ranks, boundary);
        let total = u64::from(timesteps - 1).saturating_mul(per_step);
        // stored adjacency is one transition's worth
        if total > edge_budget || per_step > edge_budget {
            return Err(Error::EdgeBudget {
                requested: total.max(per_step),
                budget: edge_budget,
            });
        }
        let neighbors = (0..ranks)
            .map(|i| neighborhood_with(topology, ranks, i64::from(i), boundary))
            .collect::<Result<Vec<_>>>()?;
        Ok(TaskGraph {
            topology,
            boundary,
            ranks,
            timesteps,
            tasks_per_rank_slot: k,
            neighbors,
        })
    }

    pub fn topology(&self) -> TopologyClass {
        self.topology
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn ranks(&self) -> u32 {
        self.ranks
    }

    pub fn timesteps(&self) -> u32 {
        self.timesteps
    }

    pub fn tasks_per_rank_slot(&self) -> u32 {
        self.tasks_per_rank_slot
    }

    /// Number of rank-slot tasks, `P * T`.
    pub fn task_count(&self) -> u64 {
        u64::from(self.ranks) * u64::from(self.timesteps)
    }

    /// Dependencies of `task` in the previous timestep, as rank indices.
    pub fn dependencies(&self, task: TaskId) -> &[u32] {
        if task.timestep == 0 || task.timestep >= self.timesteps {
            return &[];
        }
        &self.neighbors[task.rank_index as usize]
    }

    /// Neighborhood of rank `i`, regardless of timestep.
    pub fn neighbors_of(&self, i: u32) -> &[u32] {
        &self.neighbors[i as usize]
    }

    /// Edges entering timestep `t`.
    pub fn edges_into(&self, timestep: u32) -> u64 {
        if timestep == 0 || timestep >= self.timesteps {
            0
        } else {
            self.neighbors.iter().map(|n| n.len() as u64).sum()
        }
    }

    pub fn total_edges(&self) -> u64 {
        (0..self.timesteps).map(|t| self.edges_into(t)).sum()
    }

    /// Iterate over every `(dependent, dependency)` edge.
    pub fn edges(&self) -> impl Iterator<Item = (TaskId, TaskId)> + '_ {
        (1..self.timesteps).flat_map(move |t| {
            self.neighbors
                .iter()
                .enumerate()
                .flat_map(move |(i, deps)| {
                    deps.iter().map(move |&j| {
                        (
                            TaskId {
                                timestep: t,
                                rank_index: i as u32,
                            },
                            TaskId {
                                timestep: t - 1,
                                rank_index: j,
                            },
                        )
                    })
                })
        })
    }

    /// Kahn's algorithm over the full grid; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<TaskId>> {
        let p = self.ranks as usize;
        let n = p * self.timesteps as usize;
        let index = |id: TaskId| id.timestep as usize * p + id.rank_index as usize;
        let mut indegree = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (to, from) in self.edges() {
            indegree[index(to)] += 1;
            out[index(from)].push(index(to));
        }
        let mut queue: std::collections::VecDeque<usize> =
            (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(TaskId {
                timestep: (v / p) as u32,
                rank_index: (v % p) as u32,
            });
            for &w in &out[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    queue.push_back(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}
