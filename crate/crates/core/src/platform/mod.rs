//! Serverless control plane on top of the fork orchestrator: seed store,
//! seed lifetimes, timeout GC, and the startup strategies compared in the
//! benchmarks.

mod function;
mod seed;
mod workflow;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use function::{
    build_root, image_content, mb_to_pages, state_slot, FunctionModel, IMAGE_BASE, PAGES_PER_MB,
    STATE_BASE, STATE_SLOTS, STATE_SLOT_PAGES,
};
pub use seed::{SeedKind, SeedRecord};
pub use workflow::{
    Dag, DagNode, ForkTree, NodeMode, NodeOutcome, StateMode, Transfer, TreeNode, WorkflowOptions,
    WorkflowResult,
};

use crate::descriptor::DescriptorId;
use crate::fabric::{NodeId, Page, Traffic, PAGE_SIZE};
use crate::memspace::{AccessKind, PagingStats};
use crate::orchestrator::{Cluster, ClusterConfig, ContainerId, ContainerMeta, ForkError};
use crate::time::{Nanos, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Coldstart,
    Caching,
    CriuLocal,
    CriuRemote,
    Mitosis,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Coldstart,
        Strategy::Caching,
        Strategy::CriuLocal,
        Strategy::CriuRemote,
        Strategy::Mitosis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Coldstart => "coldstart",
            Strategy::Caching => "caching",
            Strategy::CriuLocal => "criu_local",
            Strategy::CriuRemote => "criu_remote",
            Strategy::Mitosis => "mitosis",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformConfig {
    pub strategy: Strategy,
    pub seed_keepalive: Nanos,
    /// Seeds this close to expiry are renewed before use.
    pub renewal_margin: Nanos,
    pub max_function_lifetime: Nanos,
    pub gc_period: Nanos,
    /// Concurrent invocations per node before arrivals queue.
    pub slots_per_node: usize,
    /// Cap on cached instances per function; `None` is unbounded.
    pub caching_max_instances: Option<usize>,
    /// Seeds the page-selection RNG.
    pub seed: u64,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        PlatformConfig {
            strategy: Strategy::Mitosis,
            seed_keepalive: Nanos::from_secs(600),
            renewal_margin: Nanos::from_secs(30),
            max_function_lifetime: Nanos::from_secs(900),
            gc_period: Nanos::from_secs(30),
            slots_per_node: 32,
            caching_max_instances: None,
            seed: 1,
        }
    }
}

/// How an invocation's container came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StartKind {
    ColdLocal,
    ColdRemote,
    Unpause,
    RestoreLocal,
    RestoreRemote,
    ForkLocal,
    ForkRemote,
}

impl StartKind {
    pub fn name(self) -> &'static str {
        match self {
            StartKind::ColdLocal => "cold_local",
            StartKind::ColdRemote => "cold_remote",
            StartKind::Unpause => "unpause",
            StartKind::RestoreLocal => "restore_local",
            StartKind::RestoreRemote => "restore_remote",
            StartKind::ForkLocal => "fork_local",
            StartKind::ForkRemote => "fork_remote",
        }
    }

    pub fn is_cold(self) -> bool {
        matches!(self, StartKind::ColdLocal | StartKind::ColdRemote)
    }
}

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("invalid function model: {0}")]
    BadModel(String),
    #[error("invalid workflow: {0}")]
    BadWorkflow(String),
    #[error(transparent)]
    Fork(#[from] ForkError),
}

/// What an invocation occupies until it completes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hold {
    Nothing,
    CachedInstance,
    Container(ContainerId),
    /// The first coldstart of a function; becomes its seed on completion.
    Planting(ContainerId),
}

/// A started invocation. Its end time is fixed at start; `complete` must be
/// called once the clock reaches it.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub id: u64,
    pub function: String,
    pub node: NodeId,
    pub start: SimTime,
    pub startup: Nanos,
    pub exec: Nanos,
    pub kind: StartKind,
    pub stats: PagingStats,
    /// Bytes this invocation put on the cost ledger.
    pub net_bytes: u64,
    pub error: Option<String>,
    hold: Hold,
}

impl Invocation {
    pub fn end(&self) -> SimTime {
        self.start + self.startup + self.exec
    }
}

pub struct Platform {
    cluster: Cluster,
    config: PlatformConfig,
    registry: BTreeMap<String, FunctionModel>,
    content: HashMap<String, Arc<[Arc<Page>]>>,
    rng: ChaCha8Rng,
    next_invocation: u64,
    load: Vec<usize>,
    rr: usize,
    /// Nodes holding a function's image, for coldstart locality.
    images: HashSet<(NodeId, String)>,
    /// Image bytes of invocations that run without a simulated container.
    modeled_bytes: Vec<u64>,
    /// Caching: idle-since times and total instances per node and function.
    idle: HashMap<(NodeId, String), Vec<SimTime>>,
    instances: HashMap<(NodeId, String), usize>,
    cached_bytes: Vec<u64>,
    peak_provisioned: usize,
    /// Fork: every descriptor the platform published, and the current
    /// long-lived seed per function.
    seeds: BTreeMap<(NodeId, u64), SeedRecord>,
    current: HashMap<String, (NodeId, u64)>,
    planting: HashSet<String>,
    /// Running forked or planted containers and their kill deadlines.
    running: BTreeMap<ContainerId, SimTime>,
    /// Lineage bound of containers started from a platform descriptor.
    bounds: HashMap<ContainerId, SimTime>,
    /// Resident bytes of seed containers, which are frozen once prepared.
    seed_footprint: HashMap<ContainerId, u64>,
    seeds_planted: u64,
    renewals: u64,
    next_workflow: u64,
}

impl Platform {
    pub fn new(cluster: ClusterConfig, config: PlatformConfig) -> Self {
        let cluster = Cluster::new(cluster);
        let n = cluster.node_ids().len();
        Platform {
            cluster,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            registry: BTreeMap::new(),
            content: HashMap::new(),
            next_invocation: 0,
            load: vec![0; n],
            rr: 0,
            images: HashSet::new(),
            modeled_bytes: vec![0; n],
            idle: HashMap::new(),
            instances: HashMap::new(),
            cached_bytes: vec![0; n],
            peak_provisioned: 0,
            seeds: BTreeMap::new(),
            current: HashMap::new(),
            planting: HashSet::new(),
            running: BTreeMap::new(),
            bounds: HashMap::new(),
            seed_footprint: HashMap::new(),
            seeds_planted: 0,
            renewals: 0,
            next_workflow: 0,
        }
    }

    pub fn register(&mut self, model: FunctionModel) -> Result<(), PlatformError> {
        model.validate().map_err(PlatformError::BadModel)?;
        self.content
            .insert(model.name.clone(), image_content(&model.name));
        self.registry.insert(model.name.clone(), model);
        self.note_provisioned();
        Ok(())
    }

    pub fn function(&self, name: &str) -> Option<&FunctionModel> {
        self.registry.get(name)
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionModel> {
        self.registry.values()
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn cluster_mut(&mut self) -> &mut Cluster {
        &mut self.cluster
    }

    pub fn node_count(&self) -> usize {
        self.load.len()
    }

    pub fn load(&self, node: NodeId) -> usize {
        self.load[node.0 as usize]
    }

    /// Round-robin among the least-loaded live nodes; `None` when every
    /// live node is full.
    pub fn pick_node(&mut self, now: SimTime) -> Option<NodeId> {
        let n = self.load.len();
        let up = |i: usize| self.cluster.is_node_up(NodeId(i as u32), now);
        let min = (0..n).filter(|&i| up(i)).map(|i| self.load[i]).min()?;
        if min >= self.config.slots_per_node {
            return None;
        }
        let i = (0..n)
            .map(|k| (self.rr + k) % n)
            .find(|&i| up(i) && self.load[i] == min)?;
        self.rr = (i + 1) % n;
        Some(NodeId(i as u32))
    }

    /// Places a preplanted seed of `name` on `node`, as if a coldstart had
    /// already happened there.
    pub fn prewarm(&mut self, t: SimTime, name: &str, node: NodeId) -> Result<DescriptorId, PlatformError> {
        let model = self.model(name)?;
        let cid = self.build_container(node, &model);
        self.images.insert((node, name.to_string()));
        let mut t = t;
        self.plant(&mut t, name, cid)
    }

    fn model(&self, name: &str) -> Result<FunctionModel, PlatformError> {
        self.registry
            .get(name)
            .cloned()
            .ok_or_else(|| PlatformError::UnknownFunction(name.to_string()))
    }

    fn build_container(&mut self, node: NodeId, model: &FunctionModel) -> ContainerId {
        let content = self.content[&model.name].clone();
        let paging = self.cluster.config().paging.clone();
        let space = build_root(self.cluster.fabric_mut(), node, model, &content, paging);
        self.cluster.adopt(space, ContainerMeta::default())
    }

    /// Publishes `cid` as the long-lived seed of `name`.
    fn plant(&mut self, t: &mut SimTime, name: &str, cid: ContainerId) -> Result<DescriptorId, PlatformError> {
        let id = self.cluster.fork_prepare(t, cid)?;
        let bound = self.bounds.get(&cid).copied().unwrap_or(SimTime(u64::MAX));
        let rec = SeedRecord {
            function: name.to_string(),
            id,
            container: cid,
            deployed_at: *t,
            kind: SeedKind::LongLived,
            deadline: (*t + self.config.max_function_lifetime).min(bound),
            retired: false,
        };
        self.running.remove(&cid);
        if let Some(c) = self.cluster.container(cid) {
            let bytes = c.space.present_pages() as u64 * PAGE_SIZE as u64;
            self.seed_footprint.insert(cid, bytes);
        }
        self.seeds.insert(rec.key(), rec);
        if let Some(old) = self.current.insert(name.to_string(), (id.node, id.handle_id)) {
            self.retire(old);
        }
        self.seeds_planted += 1;
        self.note_provisioned();
        Ok(id)
    }

    fn retire(&mut self, key: (NodeId, u64)) {
        if let Some(r) = self.seeds.get_mut(&key) {
            r.retired = true;
            if self.current.get(&r.function) == Some(&key) {
                self.current.remove(&r.function);
            }
        }
    }

    /// The live long-lived seed of `name`, renewed first if it is about to
    /// expire. Renewal is charged to `t`.
    fn usable_seed(&mut self, t: &mut SimTime, name: &str) -> Option<DescriptorId> {
        let key = *self.current.get(name)?;
        let rec = &self.seeds[&key];
        let expires = rec.deployed_at + self.config.seed_keepalive;
        if *t >= expires {
            self.retire(key);
            return None;
        }
        if *t + self.config.renewal_margin < expires {
            return Some(rec.id);
        }
        let cid = rec.container;
        match self.plant(t, name, cid) {
            Ok(id) => {
                self.renewals += 1;
                Some(id)
            }
            Err(_) => {
                self.retire(key);
                None
            }
        }
    }

    /// Starts `name` on `node` at `at` under the configured strategy.
    pub fn start(&mut self, at: SimTime, name: &str, node: NodeId) -> Result<Invocation, PlatformError> {
        let model = self.model(name)?;
        let bytes0 = self.cluster.fabric().ledger().total_bytes();
        let cost = self.cluster.fabric().cost().clone();
        let n = node.0 as usize;
        let mut t = at;
        let mut error = None;
        let mut stats = PagingStats::default();
        let image_local = self.images.contains(&(node, model.name.clone()));

        let (kind, hold, ready) = match self.config.strategy {
            Strategy::Coldstart => {
                t += cost.coldstart(image_local);
                (cold_kind(image_local), Hold::Nothing, t)
            }
            Strategy::Caching => {
                let key = (node, model.name.clone());
                self.evict_idle(&key, t);
                if self.idle.get_mut(&key).and_then(|v| v.pop()).is_some() {
                    t += cost.unpause;
                    (StartKind::Unpause, Hold::CachedInstance, t)
                } else {
                    t += cost.coldstart(image_local);
                    let fits = self
                        .config
                        .caching_max_instances
                        .is_none_or(|m| self.function_instances(&model.name) < m);
                    if fits {
                        *self.instances.entry(key).or_default() += 1;
                        self.cached_bytes[n] += model.image_bytes();
                        self.note_provisioned();
                        (cold_kind(image_local), Hold::CachedInstance, t)
                    } else {
                        (cold_kind(image_local), Hold::Nothing, t)
                    }
                }
            }
            Strategy::CriuLocal => {
                t += cost.cr_restore_local;
                (StartKind::RestoreLocal, Hold::Nothing, t)
            }
            Strategy::CriuRemote => {
                t += cost.cr_restore_remote;
                (StartKind::RestoreRemote, Hold::Nothing, t)
            }
            Strategy::Mitosis => self.mitosis_start(&mut t, &model, node, image_local),
        };
        self.images.insert((node, model.name.clone()));

        t += model.exec();
        let pages = model.pick_pages(&mut self.rng);
        match hold {
            Hold::Container(cid) | Hold::Planting(cid) => {
                match self.cluster.touch_all(&mut t, cid, &pages, AccessKind::Read) {
                    Ok(Ok(())) => {}
                    Ok(Err(e)) => error = Some(e.to_string()),
                    Err(e) => error = Some(e.to_string()),
                }
                if let Some(c) = self.cluster.container(cid) {
                    stats = c.space.stats();
                }
            }
            _ => {
                if self.config.strategy == Strategy::CriuRemote {
                    let n_pages = pages.len() as u64;
                    self.cluster.fabric_mut().storage_io(
                        &mut t,
                        Traffic::Paging,
                        cost.dfs_read_per_page * n_pages,
                        n_pages * PAGE_SIZE as u64,
                    );
                }
                if hold != Hold::CachedInstance {
                    self.modeled_bytes[n] += model.image_bytes();
                }
            }
        }

        self.load[n] += 1;
        self.next_invocation += 1;
        Ok(Invocation {
            id: self.next_invocation,
            function: model.name.clone(),
            node,
            start: at,
            startup: ready.since(at),
            exec: t.since(ready),
            kind,
            stats,
            net_bytes: self.cluster.fabric().ledger().total_bytes() - bytes0,
            error,
            hold,
        })
    }

    fn mitosis_start(
        &mut self,
        t: &mut SimTime,
        model: &FunctionModel,
        node: NodeId,
        image_local: bool,
    ) -> (StartKind, Hold, SimTime) {
        let start = *t;
        if let Some(id) = self.usable_seed(t, &model.name) {
            match self.cluster.fork_resume(t, node, &id) {
                Ok(cid) => {
                    let bound = self.seeds[&(id.node, id.handle_id)].deadline;
                    self.bounds.insert(cid, bound);
                    self.running
                        .insert(cid, (start + self.config.max_function_lifetime).min(bound));
                    let kind = if id.node == node {
                        StartKind::ForkLocal
                    } else {
                        StartKind::ForkRemote
                    };
                    return (kind, Hold::Container(cid), *t);
                }
                Err(_) => self.retire((id.node, id.handle_id)),
            }
        }
        *t += self.cluster.fabric().cost().coldstart(image_local);
        if !self.planting.contains(&model.name) && !self.current.contains_key(&model.name) {
            self.planting.insert(model.name.clone());
            let cid = self.build_container(node, model);
            self.running
                .insert(cid, start + self.config.max_function_lifetime);
            return (cold_kind(image_local), Hold::Planting(cid), *t);
        }
        (cold_kind(image_local), Hold::Nothing, *t)
    }

    /// Releases what `inv` held. Call at `inv.end()`.
    pub fn complete(&mut self, inv: &Invocation) {
        let end = inv.end();
        let n = inv.node.0 as usize;
        self.load[n] -= 1;
        let image_bytes = self.registry[&inv.function].image_bytes();
        match inv.hold {
            Hold::Nothing => self.modeled_bytes[n] -= image_bytes,
            Hold::CachedInstance => {
                let key = (inv.node, inv.function.clone());
                if self.cluster.is_node_up(inv.node, end) {
                    self.idle.entry(key).or_default().push(end);
                } else {
                    *self.instances.get_mut(&key).unwrap() -= 1;
                    self.cached_bytes[n] -= image_bytes;
                }
            }
            Hold::Container(cid) => {
                if self.running.remove(&cid).is_some() {
                    let _ = self.cluster.finish(end, cid);
                }
                self.bounds.remove(&cid);
            }
            Hold::Planting(cid) => {
                self.planting.remove(&inv.function);
                if self.running.contains_key(&cid) {
                    let mut t = end;
                    if self.plant(&mut t, &inv.function.clone(), cid).is_err() {
                        self.running.remove(&cid);
                        let _ = self.cluster.destroy(end, cid);
                    }
                }
            }
        }
    }

    fn cached_count(&self) -> usize {
        self.instances.values().sum()
    }

    fn function_instances(&self, name: &str) -> usize {
        self.instances
            .iter()
            .filter(|((_, f), _)| f == name)
            .map(|(_, n)| n)
            .sum()
    }

    fn evict_idle(&mut self, key: &(NodeId, String), now: SimTime) {
        let keepalive = self.cluster.fabric().cost().cache_keepalive;
        let Some(list) = self.idle.get_mut(key) else {
            return;
        };
        let before = list.len();
        list.retain(|&since| since + keepalive > now);
        let gone = before - list.len();
        if gone > 0 {
            *self.instances.get_mut(key).unwrap() -= gone;
            let bytes = self.registry[&key.1].image_bytes();
            self.cached_bytes[key.0 .0 as usize] -= gone as u64 * bytes;
        }
    }

    /// Instances held ready ahead of invocations under the active strategy.
    pub fn provisioned_instances(&self) -> usize {
        let functions = self.registry.len();
        match self.config.strategy {
            Strategy::Coldstart => 0,
            Strategy::Caching => self.cached_count(),
            Strategy::CriuLocal => functions * self.node_count(),
            Strategy::CriuRemote => functions,
            Strategy::Mitosis => self.current.len(),
        }
    }

    pub fn peak_provisioned(&self) -> usize {
        self.peak_provisioned
    }

    fn note_provisioned(&mut self) {
        self.peak_provisioned = self.peak_provisioned.max(self.provisioned_instances());
    }

    /// Bytes reserved on `node` ahead of invocations.
    pub fn provisioned_bytes(&self, node: NodeId) -> u64 {
        match self.config.strategy {
            Strategy::Coldstart | Strategy::CriuRemote => 0,
            Strategy::Caching => self.cached_bytes[node.0 as usize],
            Strategy::CriuLocal => self.registry.values().map(|m| m.image_bytes()).sum(),
            Strategy::Mitosis => self.seed_bytes(node),
        }
    }

    fn seed_bytes(&self, node: NodeId) -> u64 {
        self.current
            .values()
            .filter(|k| k.0 == node)
            .filter_map(|k| self.seed_footprint.get(&self.seeds[k].container))
            .sum()
    }

    /// Bytes in use on `node` beyond what is provisioned.
    pub fn runtime_bytes(&self, node: NodeId) -> u64 {
        let n = node.0 as usize;
        let fabric = self
            .cluster
            .fabric()
            .memory_bytes(node)
            .saturating_sub(self.seed_bytes(node));
        self.modeled_bytes[n] + fabric
    }

    pub fn seed(&self, name: &str) -> Option<&SeedRecord> {
        self.current.get(name).map(|k| &self.seeds[k])
    }

    pub fn seed_records(&self) -> impl Iterator<Item = &SeedRecord> {
        self.seeds.values()
    }

    pub fn seeds_planted(&self) -> u64 {
        self.seeds_planted
    }

    pub fn renewals(&self) -> u64 {
        self.renewals
    }

    /// Non-request housekeeping: pools and caches.
    pub fn background(&mut self, now: SimTime) {
        self.cluster.background(now);
        if self.config.strategy == Strategy::Caching {
            let keys: Vec<_> = self.idle.keys().cloned().collect();
            for k in keys {
                self.evict_idle(&k, now);
            }
        }
    }

    /// Timeout-driven collection. Kills containers past their deadline,
    /// retires expired long-lived seeds, then reclaims every descriptor that
    /// is due, youngest first, destroying publishers left with nothing to
    /// serve.
    pub fn gc_tick(&mut self, now: SimTime) -> Vec<DescriptorId> {
        let overdue: Vec<_> = self
            .running
            .iter()
            .filter(|(_, &d)| d <= now)
            .map(|(&c, _)| c)
            .collect();
        for cid in overdue {
            self.running.remove(&cid);
            self.bounds.remove(&cid);
            let _ = self.cluster.destroy(now, cid);
        }

        let keepalive = self.config.seed_keepalive;
        let expired: Vec<_> = self
            .current
            .values()
            .filter(|k| self.seeds[k].deployed_at + keepalive <= now)
            .copied()
            .collect();
        for k in expired {
            self.retire(k);
        }

        let lifetime = self.config.max_function_lifetime;
        let mut due: Vec<_> = self
            .seeds
            .values()
            .filter(|r| {
                now >= r.deadline
                    || match r.kind {
                        SeedKind::ShortLived => now >= r.deployed_at + lifetime,
                        // Grandchildren count: an intermediate hop may be
                        // gone while its descendants still map our pages.
                        SeedKind::LongLived => r.retired && !self.cluster.is_referenced(&r.id),
                    }
            })
            .map(|r| (r.deployed_at, r.key()))
            .collect();
        due.sort_by(|a, b| b.cmp(a));
        let mut reclaimed = Vec::new();
        for (_, key) in due {
            if let Some(id) = self.drop_seed(now, key) {
                reclaimed.push(id);
            }
        }
        reclaimed
    }

    /// Reclaims one platform descriptor and destroys its publisher if it no
    /// longer backs any seed.
    fn drop_seed(&mut self, now: SimTime, key: (NodeId, u64)) -> Option<DescriptorId> {
        let rec = self.seeds.remove(&key)?;
        if self.current.get(&rec.function) == Some(&key) {
            self.current.remove(&rec.function);
        }
        let done = self.cluster.fork_reclaim(now, &rec.id).is_ok();
        let still_used = self.seeds.values().any(|r| r.container == rec.container);
        if !still_used && self.cluster.container(rec.container).is_some() {
            self.seed_footprint.remove(&rec.container);
            let _ = self.cluster.destroy(now, rec.container);
            self.bounds.remove(&rec.container);
        }
        done.then_some(rec.id)
    }

    /// Fails `node` at `at`. Everything it hosted is lost; its in-flight
    /// invocations still complete through `complete`.
    pub fn crash_node(&mut self, node: NodeId, at: SimTime) -> Result<(), PlatformError> {
        self.cluster.crash_node(node, at)?;
        let lost: Vec<_> = self
            .seeds
            .iter()
            .filter(|(k, _)| k.0 == node)
            .map(|(k, _)| *k)
            .collect();
        for k in lost {
            let r = self.seeds.remove(&k).unwrap();
            if self.current.get(&r.function) == Some(&k) {
                self.current.remove(&r.function);
            }
        }
        self.running
            .retain(|c, _| self.cluster.container(*c).is_some());
        self.seed_footprint
            .retain(|c, _| self.cluster.container(*c).is_some());
        self.bounds
            .retain(|c, _| self.cluster.container(*c).is_some());
        let keys: Vec<_> = self.idle.keys().filter(|k| k.0 == node).cloned().collect();
        for k in keys {
            let idle = self.idle.remove(&k).unwrap_or_default().len();
            *self.instances.get_mut(&k).unwrap() -= idle;
            self.cached_bytes[node.0 as usize] -= idle as u64 * self.registry[&k.1].image_bytes();
        }
        self.images.retain(|(n, _)| *n != node);
        Ok(())
    }

    /// Descriptors the platform has published and not yet reclaimed.
    pub fn live_seed_count(&self) -> usize {
        self.seeds.len()
    }
}

fn cold_kind(image_local: bool) -> StartKind {
    if image_local {
        StartKind::ColdLocal
    } else {
        StartKind::ColdRemote
    }
}
