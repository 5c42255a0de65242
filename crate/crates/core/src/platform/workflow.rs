use std::collections::{HashMap, HashSet};
use std::str::FromStr;

use super::{mb_to_pages, state_slot, Hold, Platform, PlatformError, SeedKind, SeedRecord, STATE_SLOTS};
use crate::descriptor::{DescriptorId, Vpn};
use crate::fabric::{NodeId, Traffic};
use crate::memspace::{AccessKind, PagingStats};
use crate::orchestrator::ContainerId;
use crate::time::{Nanos, SimTime};

/// How a DAG node wants its upstream state delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeMode {
    Fork,
    Message,
    /// A join whose upstreams run fused in one container.
    Fused,
}

impl FromStr for NodeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "" | "fork" => Ok(NodeMode::Fork),
            "message" => Ok(NodeMode::Message),
            "fused" => Ok(NodeMode::Fused),
            _ => Err(format!("unknown node mode {s:?}")),
        }
    }
}

/// Workflow-wide state transfer mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateMode {
    Fork,
    Message,
}

impl FromStr for StateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fork" => Ok(StateMode::Fork),
            "message" => Ok(StateMode::Message),
            _ => Err(format!("unknown state mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DagNode {
    pub id: String,
    pub function: String,
    pub upstreams: Vec<String>,
    pub mode: NodeMode,
    /// State handed downstream; defaults to the function's working set.
    pub state_mb: Option<f64>,
}

impl DagNode {
    pub fn new(id: &str, function: &str, upstreams: &[&str], mode: NodeMode) -> Self {
        DagNode {
            id: id.to_string(),
            function: function.to_string(),
            upstreams: upstreams.iter().map(|s| s.to_string()).collect(),
            mode,
            state_mb: None,
        }
    }

    pub fn with_state_mb(mut self, mb: f64) -> Self {
        self.state_mb = Some(mb);
        self
    }
}

/// A validated workflow in topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    nodes: Vec<DagNode>,
    ups: Vec<Vec<usize>>,
    downs: Vec<Vec<usize>>,
}

impl Dag {
    pub fn new(nodes: Vec<DagNode>) -> Result<Dag, String> {
        if nodes.is_empty() {
            return Err("empty workflow".into());
        }
        if nodes.len() as u64 > STATE_SLOTS {
            return Err(format!("workflow larger than {STATE_SLOTS} nodes"));
        }
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.as_str(), i).is_some() {
                return Err(format!("duplicate node {:?}", n.id));
            }
            if n.state_mb.is_some_and(|m| !(m >= 0.0 && m.is_finite())) {
                return Err(format!("{}: bad state size", n.id));
            }
        }
        let mut ups = vec![Vec::new(); nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            for u in &n.upstreams {
                let &j = index
                    .get(u.as_str())
                    .ok_or_else(|| format!("{}: unknown upstream {u:?}", n.id))?;
                if ups[i].contains(&j) {
                    return Err(format!("{}: upstream {u:?} listed twice", n.id));
                }
                ups[i].push(j);
            }
        }

        // Kahn's algorithm, preferring file order among ready nodes.
        let mut indeg: Vec<usize> = ups.iter().map(|u| u.len()).collect();
        let mut order = Vec::with_capacity(nodes.len());
        let mut done = vec![false; nodes.len()];
        while order.len() < nodes.len() {
            let next = (0..nodes.len())
                .find(|&i| !done[i] && indeg[i] == 0)
                .ok_or("workflow has a cycle")?;
            done[next] = true;
            order.push(next);
            for (i, u) in ups.iter().enumerate() {
                if u.contains(&next) {
                    indeg[i] -= 1;
                }
            }
        }
        let pos: Vec<usize> = {
            let mut p = vec![0; nodes.len()];
            for (k, &i) in order.iter().enumerate() {
                p[i] = k;
            }
            p
        };
        let ups: Vec<Vec<usize>> = order
            .iter()
            .map(|&i| ups[i].iter().map(|&j| pos[j]).collect())
            .collect();
        let mut nodes_sorted: Vec<Option<DagNode>> = nodes.into_iter().map(Some).collect();
        let nodes: Vec<DagNode> = order.iter().map(|&i| nodes_sorted[i].take().unwrap()).collect();
        let mut downs = vec![Vec::new(); nodes.len()];
        for (i, u) in ups.iter().enumerate() {
            for &j in u {
                downs[j].push(i);
            }
        }

        let dag = Dag { nodes, ups, downs };
        for (i, n) in dag.nodes.iter().enumerate() {
            if n.mode == NodeMode::Fused && dag.ups[i].len() >= 2 {
                let first = &dag.ups[dag.ups[i][0]];
                for &u in &dag.ups[i] {
                    if dag.downs[u] != [i] || &dag.ups[u] != first {
                        return Err(format!(
                            "{}: fused upstreams must be siblings feeding only this node",
                            n.id
                        ));
                    }
                }
            }
        }
        Ok(dag)
    }

    /// A linear chain over `functions`, each step carrying `state_mb`.
    pub fn chain(functions: &[&str], state_mb: f64) -> Dag {
        let nodes = functions
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let id = format!("s{i}");
                let up = if i == 0 { vec![] } else { vec![format!("s{}", i - 1)] };
                DagNode {
                    id,
                    function: f.to_string(),
                    upstreams: up,
                    mode: NodeMode::Fork,
                    state_mb: Some(state_mb),
                }
            })
            .collect();
        Dag::new(nodes).expect("a chain is always valid")
    }

    pub fn nodes(&self) -> &[DagNode] {
        &self.nodes
    }

    pub fn upstreams(&self, i: usize) -> &[usize] {
        &self.ups[i]
    }

    pub fn downstreams(&self, i: usize) -> &[usize] {
        &self.downs[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// How a node actually received its state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transfer {
    /// Entry node: started like any invocation.
    Start,
    Fork,
    Message,
    /// Ran inside a sibling's container.
    FusedInto(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeOutcome {
    pub id: String,
    pub transfer: Transfer,
    pub node: NodeId,
    pub start: SimTime,
    pub end: SimTime,
    pub startup: Nanos,
    pub stats: PagingStats,
    /// Upstream state pages this node read through paging.
    pub state_pages_read: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub dag_index: Option<usize>,
    pub container: ContainerId,
    pub node: NodeId,
    pub id: DescriptorId,
    pub parent: Option<usize>,
    pub long_lived: bool,
}

/// The seeds a workflow created, parents before children.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForkTree {
    pub workflow_id: u64,
    pub nodes: Vec<TreeNode>,
}

impl ForkTree {
    fn position(&self, id: &DescriptorId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == *id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WorkflowOptions {
    /// The coordinator dies after this many nodes complete; nothing is
    /// torn down.
    pub coordinator_crash_after: Option<usize>,
    /// An invoker dies after this many nodes complete.
    pub invoker_crash: Option<(usize, NodeId)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowResult {
    pub latency: Nanos,
    pub serialization: Nanos,
    pub store_io: Nanos,
    pub completed: bool,
    pub error: Option<String>,
    pub outcomes: Vec<NodeOutcome>,
    pub tree: ForkTree,
    /// When the last step (or teardown) finished.
    pub end: SimTime,
}

struct Step {
    cid: Option<ContainerId>,
    node: NodeId,
    end: SimTime,
    seed: Option<DescriptorId>,
    state_pages: u64,
}

impl Platform {
    /// Runs `dag` starting at `t0`, moving state between steps by fork or by
    /// messages through a store.
    pub fn run_workflow(
        &mut self,
        t0: SimTime,
        dag: &Dag,
        mode: StateMode,
        options: WorkflowOptions,
    ) -> Result<WorkflowResult, PlatformError> {
        for n in dag.nodes() {
            self.model(&n.function)?;
        }
        self.next_workflow += 1;
        let mut run = Run {
            dag,
            mode,
            steps: Vec::with_capacity(dag.len()),
            outcomes: Vec::with_capacity(dag.len()),
            tree: ForkTree {
                workflow_id: self.next_workflow,
                nodes: Vec::new(),
            },
            serialization: Nanos::ZERO,
            store_io: Nanos::ZERO,
            host: vec![None; dag.len()],
        };
        for (i, n) in dag.nodes().iter().enumerate() {
            if mode == StateMode::Fork && n.mode == NodeMode::Fused && dag.upstreams(i).len() >= 2 {
                let ups = dag.upstreams(i);
                let host = *ups.iter().min().unwrap();
                for &g in ups.iter().filter(|&&g| g != host) {
                    run.host[g] = Some(host);
                }
            }
        }

        let mut error = None;
        let mut coordinator_alive = true;
        for i in 0..dag.len() {
            if let Err(e) = self.run_step(t0, &mut run, i) {
                error = Some(e);
                break;
            }
            let done = i + 1;
            if let Some((k, node)) = options.invoker_crash {
                if k == done && self.cluster.is_node_up(node, run.steps[i].end) {
                    self.crash_node(node, run.steps[i].end)?;
                }
            }
            if options.coordinator_crash_after == Some(done) {
                coordinator_alive = false;
                break;
            }
        }
        let completed = error.is_none() && coordinator_alive && run.steps.len() == dag.len();
        let mut end = run.steps.iter().map(|s| s.end).max().unwrap_or(t0);
        if coordinator_alive {
            end = self.teardown(end, &run);
        }
        Ok(WorkflowResult {
            latency: end.since(t0),
            serialization: run.serialization,
            store_io: run.store_io,
            completed,
            error,
            outcomes: run.outcomes,
            tree: run.tree,
            end,
        })
    }

    fn transfer_of(&self, run: &Run<'_>, i: usize) -> Transfer {
        let dag = run.dag;
        let n = &dag.nodes()[i];
        let ups = dag.upstreams(i);
        if let Some(h) = run.host[i] {
            return Transfer::FusedInto(h);
        }
        if ups.is_empty() {
            Transfer::Start
        } else if run.mode == StateMode::Message
            || n.mode == NodeMode::Message
            || (ups.len() >= 2 && n.mode != NodeMode::Fused)
        {
            Transfer::Message
        } else {
            Transfer::Fork
        }
    }

    fn state_pages(&self, n: &DagNode) -> u64 {
        let mb = n
            .state_mb
            .unwrap_or_else(|| self.registry[&n.function].working_set_mb);
        mb_to_pages(mb).min(super::STATE_SLOT_PAGES)
    }

    fn store_time(&self, pages: u64) -> Nanos {
        let chunks = pages.div_ceil(super::PAGES_PER_MB);
        self.cluster.fabric().cost().dfs_read_per_page * (2 * chunks)
    }

    fn run_step(&mut self, t0: SimTime, run: &mut Run<'_>, i: usize) -> Result<(), String> {
        let dag = run.dag;
        let n = &dag.nodes()[i];
        let transfer = self.transfer_of(run, i);
        let state_pages = self.state_pages(n);
        if let Transfer::FusedInto(h) = transfer {
            // Executed by the host step already.
            let (node, end, seed) = (run.steps[h].node, run.steps[h].end, run.steps[h].seed);
            run.steps.push(Step {
                cid: None,
                node,
                end,
                seed,
                state_pages,
            });
            run.outcomes.push(NodeOutcome {
                id: n.id.clone(),
                transfer,
                node,
                start: run.outcomes[h].start,
                end,
                startup: Nanos::ZERO,
                stats: PagingStats::default(),
                state_pages_read: 0,
            });
            return Ok(());
        }
        let ups = dag.upstreams(i);
        let start = ups.iter().map(|&u| run.steps[u].end).max().unwrap_or(t0);
        let mut t = start;
        let node = self
            .pick_node(t)
            .or_else(|| {
                (0..self.node_count())
                    .map(|k| NodeId(k as u32))
                    .find(|&k| self.cluster.is_node_up(k, t))
            })
            .ok_or("no live invoker")?;
        let model = self.registry[&n.function].clone();
        let cost = self.cluster.fabric().cost().clone();

        // Start the container.
        let (cid, planting, read_from) = match transfer {
            Transfer::Fork => {
                let src = fork_source(run, i);
                let id = run.steps[src].seed.ok_or("upstream left no seed")?;
                let cid = self
                    .cluster
                    .fork_resume(&mut t, node, &id)
                    .map_err(|e| e.to_string())?;
                let bound = self.seeds.get(&(id.node, id.handle_id)).map(|r| r.deadline);
                let bound = bound.unwrap_or(SimTime(u64::MAX));
                self.bounds.insert(cid, bound);
                self.running
                    .insert(cid, (start + self.config.max_function_lifetime).min(bound));
                (cid, false, vec![src])
            }
            _ => {
                let image_local = self.images.contains(&(node, model.name.clone()));
                let (_, hold, _) = self.mitosis_start(&mut t, &model, node, image_local);
                self.images.insert((node, model.name.clone()));
                let (cid, planting) = match hold {
                    Hold::Container(c) => (c, false),
                    Hold::Planting(c) => (c, true),
                    _ => {
                        let c = self.build_container(node, &model);
                        self.running
                            .insert(c, start + self.config.max_function_lifetime);
                        (c, false)
                    }
                };
                if transfer == Transfer::Message {
                    for &u in ups {
                        let pages = run.steps[u].state_pages;
                        let io = self.store_time(pages);
                        let bytes = pages * crate::fabric::PAGE_SIZE as u64;
                        self.cluster
                            .fabric_mut()
                            .storage_io(&mut t, Traffic::State, io, bytes);
                        let de = cost.serialize(bytes);
                        t += de;
                        run.store_io += io;
                        run.serialization += de;
                    }
                }
                (cid, planting, Vec::new())
            }
        };
        let ready = t;
        let fail = |p: &mut Platform, e: String| {
            p.running.remove(&cid);
            p.bounds.remove(&cid);
            let _ = p.cluster.destroy(ready, cid);
            e
        };

        // Page in upstream state, including fused siblings hosted upstream.
        let mut state_read = 0;
        for &u in &read_from {
            let mut vpns: Vec<Vpn> = Vec::new();
            let group: Vec<usize> = std::iter::once(u)
                .chain((0..dag.len()).filter(|&g| run.host[g] == Some(u)))
                .collect();
            for g in group {
                let base = state_slot(g);
                vpns.extend((0..run.steps[g].state_pages).map(|k| Vpn(base.0 + k)));
            }
            state_read += vpns.len() as u64;
            if let Err(e) = self.touch(&mut t, cid, &vpns, AccessKind::Read) {
                return Err(fail(self, e));
            }
        }

        // Own work, then any fused siblings in the same container.
        let mut members = vec![i];
        members.extend((0..dag.len()).filter(|&g| run.host[g] == Some(i)));
        for &m in &members {
            let mm = &self.registry[&dag.nodes()[m].function].clone();
            t += mm.exec();
            let picks: Vec<Vpn> = mm
                .pick_pages(&mut self.rng)
                .into_iter()
                .filter(|&v| {
                    self.cluster
                        .container(cid)
                        .and_then(|c| c.space.vma_of(v))
                        .is_some_and(|vma| vma.vma_id == 1)
                })
                .collect();
            let base = state_slot(m);
            let pages = self.state_pages(&dag.nodes()[m]);
            let writes: Vec<Vpn> = (0..pages).map(|k| Vpn(base.0 + k)).collect();
            if let Err(e) = self
                .touch(&mut t, cid, &picks, AccessKind::Read)
                .and_then(|_| self.touch(&mut t, cid, &writes, AccessKind::Write))
            {
                return Err(fail(self, e));
            }
        }
        let stats = self
            .cluster
            .container(cid)
            .map(|c| c.space.stats())
            .unwrap_or_default();

        // Hand state downstream.
        let downs: Vec<Transfer> = dag
            .downstreams(i)
            .iter()
            .map(|&d| self.transfer_of(run, d))
            .collect();
        let fork_down = dag
            .downstreams(i)
            .iter()
            .zip(&downs)
            .any(|(&d, tr)| *tr == Transfer::Fork && fork_source(run, d) == i);
        let msg_down = downs.contains(&Transfer::Message);
        if msg_down {
            let pages: u64 = members.iter().map(|&m| self.state_pages(&dag.nodes()[m])).sum();
            let bytes = pages * crate::fabric::PAGE_SIZE as u64;
            let ser = cost.serialize(bytes);
            t += ser;
            run.serialization += ser;
            let io = self.store_time(pages);
            self.cluster
                .fabric_mut()
                .storage_io(&mut t, Traffic::State, io, bytes);
            run.store_io += io;
        }
        if planting {
            // The function's first container also becomes its long-lived seed.
            self.planting.remove(&model.name);
            let mut tp = t;
            if let Ok(id) = self.plant(&mut tp, &model.name, cid) {
                let parent = self
                    .cluster
                    .container(cid)
                    .and_then(|c| c.lineage)
                    .and_then(|l| run.tree.position(&l));
                run.tree.nodes.push(TreeNode {
                    dag_index: None,
                    container: cid,
                    node,
                    id,
                    parent,
                    long_lived: true,
                });
            }
        }
        let mut seed = None;
        if fork_down {
            let id = self
                .cluster
                .fork_prepare(&mut t, cid)
                .map_err(|e| fail(self, e.to_string()))?;
            let bound = self.bounds.get(&cid).copied().unwrap_or(SimTime(u64::MAX));
            let rec = SeedRecord {
                function: model.name.clone(),
                id,
                container: cid,
                deployed_at: t,
                kind: SeedKind::ShortLived,
                deadline: (t + self.config.max_function_lifetime).min(bound),
                retired: true,
            };
            self.seeds.insert(rec.key(), rec);
            self.running.remove(&cid);
            let lineage = self.cluster.container(cid).and_then(|c| c.lineage);
            let mut parent = lineage.and_then(|l| run.tree.position(&l));
            if parent.is_none() {
                if let Some(l) = lineage.filter(|l| {
                    self.seeds
                        .get(&(l.node, l.handle_id))
                        .is_some_and(|r| r.kind == SeedKind::LongLived)
                }) {
                    let r = &self.seeds[&(l.node, l.handle_id)];
                    run.tree.nodes.push(TreeNode {
                        dag_index: None,
                        container: r.container,
                        node: l.node,
                        id: l,
                        parent: None,
                        long_lived: true,
                    });
                    parent = Some(run.tree.nodes.len() - 1);
                }
            }
            run.tree.nodes.push(TreeNode {
                dag_index: Some(i),
                container: cid,
                node,
                id,
                parent,
                long_lived: false,
            });
            seed = Some(id);
        } else if self.running.remove(&cid).is_some() {
            self.bounds.remove(&cid);
            let _ = self.cluster.finish(t, cid);
        }

        run.steps.push(Step {
            cid: Some(cid),
            node,
            end: t,
            seed,
            state_pages,
        });
        run.outcomes.push(NodeOutcome {
            id: n.id.clone(),
            transfer,
            node,
            start,
            end: t,
            startup: ready.since(start),
            stats,
            state_pages_read: state_read,
        });
        Ok(())
    }

    fn touch(&mut self, t: &mut SimTime, cid: ContainerId, vpns: &[Vpn], kind: AccessKind) -> Result<(), String> {
        match self.cluster.touch_all(t, cid, vpns, kind) {
            Ok(Ok(())) => Ok(()),
            Ok(Err(e)) => Err(e.to_string()),
            Err(e) => Err(e.to_string()),
        }
    }

    /// Reclaims the workflow's short-lived seeds, children first; a
    /// long-lived root survives.
    fn teardown(&mut self, at: SimTime, run: &Run<'_>) -> SimTime {
        for n in run.tree.nodes.iter().rev().filter(|n| !n.long_lived) {
            self.drop_seed(at, (n.id.node, n.id.handle_id));
        }
        let stray: HashSet<ContainerId> = run
            .steps
            .iter()
            .filter_map(|s| s.cid)
            .filter(|c| self.running.contains_key(c))
            .collect();
        for cid in stray {
            self.running.remove(&cid);
            self.bounds.remove(&cid);
            let _ = self.cluster.destroy(at, cid);
        }
        at
    }
}

/// The upstream whose container a fork-mode step starts from.
fn fork_source(run: &Run<'_>, i: usize) -> usize {
    let ups = run.dag.upstreams(i);
    if run.dag.nodes()[i].mode == NodeMode::Fused {
        *ups.iter().min().unwrap()
    } else {
        ups[0]
    }
}

struct Run<'a> {
    dag: &'a Dag,
    mode: StateMode,
    steps: Vec<Step>,
    outcomes: Vec<NodeOutcome>,
    tree: ForkTree,
    serialization: Nanos,
    store_io: Nanos,
    /// Fused siblings point at the step whose container runs them.
    host: Vec<Option<usize>>,
}
