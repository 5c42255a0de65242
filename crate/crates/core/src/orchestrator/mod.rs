//! The fork API: prepare, resume and reclaim, plus the per-node resources
//! (target pools, lean sandboxes, page-table caches) they draw on.

mod demo;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

pub use demo::{fork_demo, DemoConfig, HopReport};

use crate::access::{self, AccessControlError, PoolConfig, TargetPool};
use crate::descriptor::{
    build_descriptor, fetch_descriptor, AncestorEntry, DescriptorError, DescriptorId,
    DescriptorStore, FileEntry, ParentImage, Registers, Vpn, MAX_OWNER,
};
use crate::fabric::{DcKey, Fabric, FabricConfig, NodeId, Traffic};
use crate::memspace::{
    AccessError, AccessKind, AddressSpace, MapError, OwnerDirectory, PageOrigin, PagingConfig,
    PagingStats, PtCache,
};
use crate::time::{Nanos, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContainerId(pub u64);

impl fmt::Display for ContainerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerState {
    Running,
    /// Frozen, typically because it was prepared as a fork parent.
    Paused,
    Finished,
}

#[derive(Debug)]
pub struct Container {
    pub id: ContainerId,
    pub node: NodeId,
    pub space: AddressSpace,
    pub state: ContainerState,
    pub isolation: Vec<u8>,
    pub registers: Registers,
    pub files: Vec<FileEntry>,
    /// The descriptor this container was resumed from.
    pub lineage: Option<DescriptorId>,
    /// Descriptors this container has published and not yet reclaimed.
    pub published: Vec<DescriptorId>,
}

/// Everything but the address space needed to start a root container.
#[derive(Debug, Clone, Default)]
pub struct ContainerMeta {
    pub isolation: Vec<u8>,
    pub registers: Registers,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForkError {
    #[error("container already has {0} ancestors")]
    MaxHopsExceeded(usize),
    #[error("no container {0}")]
    NoSuchContainer(ContainerId),
    #[error("container {0} is {1:?}")]
    BadState(ContainerId, ContainerState),
    #[error("node {0} is down")]
    NodeDown(NodeId),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Access(#[from] AccessControlError),
}

/// Idle empty sandboxes on one node.
#[derive(Debug, Clone)]
pub struct LeanPool {
    pub idle: usize,
    pub capacity: usize,
}

impl LeanPool {
    /// Takes a sandbox; false if the caller must build one itself.
    pub fn acquire(&mut self) -> bool {
        if self.idle > 0 {
            self.idle -= 1;
            true
        } else {
            false
        }
    }

    pub fn refill(&mut self) -> usize {
        let n = self.capacity - self.idle;
        self.idle = self.capacity;
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub fabric: FabricConfig,
    pub paging: PagingConfig,
    pub pool: PoolConfig,
    pub lean_pool: usize,
    pub nodes: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            fabric: FabricConfig::default(),
            paging: PagingConfig::default(),
            pool: PoolConfig::default(),
            lean_pool: 8,
            nodes: 2,
        }
    }
}

#[derive(Debug)]
struct NodeState {
    store: DescriptorStore,
    pool: TargetPool,
    lean: LeanPool,
    cache: PtCache,
}

/// How the last resume was served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ResumeInfo {
    pub lean_hit: bool,
    pub cache_hit: bool,
}

/// A simulated cluster of fork-capable machines.
#[derive(Debug)]
pub struct Cluster {
    fabric: Fabric,
    config: ClusterConfig,
    nodes: Vec<NodeState>,
    containers: BTreeMap<ContainerId, Container>,
    /// Published handle -> the container that published it, kept after
    /// reclaim for as long as the container itself is retained.
    handles: HashMap<(NodeId, u64), ContainerId>,
    next_container: u64,
    last_resume: ResumeInfo,
    /// Live containers resumed from each descriptor.
    children: HashMap<DescriptorId, usize>,
    audit: bool,
    violations: Vec<ReclaimViolation>,
}

/// A reclaim that happened while live containers still referenced the
/// publisher's memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReclaimViolation {
    pub id: DescriptorId,
    pub at: SimTime,
    pub holders: Vec<ContainerId>,
}

struct Owners<'a> {
    nodes: &'a [NodeState],
    containers: &'a BTreeMap<ContainerId, Container>,
    handles: &'a HashMap<(NodeId, u64), ContainerId>,
}

impl OwnerDirectory for Owners<'_> {
    fn resolve(&self, owner: &AncestorEntry, vpn: Vpn) -> Option<PageOrigin> {
        let cid = self.handles.get(&(owner.node, owner.handle_id))?;
        self.containers.get(cid)?.space.serve_fallback(vpn)
    }

    fn vma_key(&self, owner: &AncestorEntry, vma_id: u32) -> Option<DcKey> {
        self.nodes
            .get(owner.node.0 as usize)?
            .store
            .vma_key(owner.handle_id, vma_id)
    }
}

impl Cluster {
    pub fn new(config: ClusterConfig) -> Self {
        let mut cluster = Cluster {
            fabric: Fabric::new(config.fabric.clone()),
            config,
            nodes: Vec::new(),
            containers: BTreeMap::new(),
            handles: HashMap::new(),
            next_container: 1,
            last_resume: ResumeInfo::default(),
            children: HashMap::new(),
            audit: false,
            violations: Vec::new(),
        };
        for _ in 0..cluster.config.nodes {
            cluster.add_node();
        }
        cluster
    }

    /// Registers a machine with warm target and sandbox pools.
    pub fn add_node(&mut self) -> NodeId {
        let node = self.fabric.register_node();
        let mut pool = TargetPool::new(node, self.config.pool.clone());
        pool.refill(&mut self.fabric);
        self.nodes.push(NodeState {
            store: DescriptorStore::new(node),
            pool,
            lean: LeanPool {
                idle: self.config.lean_pool,
                capacity: self.config.lean_pool,
            },
            cache: PtCache::new(node),
        });
        node
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn fabric_mut(&mut self) -> &mut Fabric {
        &mut self.fabric
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        (0..self.nodes.len() as u32).map(NodeId).collect()
    }

    pub fn container(&self, cid: ContainerId) -> Option<&Container> {
        self.containers.get(&cid)
    }

    pub fn containers(&self) -> impl Iterator<Item = &Container> {
        self.containers.values()
    }

    pub fn store(&self, node: NodeId) -> &DescriptorStore {
        &self.nodes[node.0 as usize].store
    }

    pub fn target_pool(&self, node: NodeId) -> &TargetPool {
        &self.nodes[node.0 as usize].pool
    }

    pub fn lean_pool(&self, node: NodeId) -> &LeanPool {
        &self.nodes[node.0 as usize].lean
    }

    pub fn pt_cache(&self, node: NodeId) -> &PtCache {
        &self.nodes[node.0 as usize].cache
    }

    pub fn last_resume(&self) -> ResumeInfo {
        self.last_resume
    }

    /// Live containers resumed directly from `id`.
    pub fn live_children(&self, id: &DescriptorId) -> usize {
        self.children.get(id).copied().unwrap_or(0)
    }

    /// When on, every reclaim checks that no live container still holds a
    /// remote entry owned by the publisher, and records offenders.
    pub fn set_audit(&mut self, on: bool) {
        self.audit = on;
    }

    pub fn reclaim_violations(&self) -> &[ReclaimViolation] {
        &self.violations
    }

    /// Every published, unreclaimed descriptor on live nodes.
    pub fn live_descriptors(&self) -> Vec<DescriptorId> {
        let mut out: Vec<_> = self.nodes.iter().flat_map(|n| n.store.ids()).collect();
        out.sort_by_key(|d| (d.node, d.handle_id));
        out
    }

    fn alloc_id(&mut self) -> ContainerId {
        let id = ContainerId(self.next_container);
        self.next_container += 1;
        id
    }

    fn node_state(&self, node: NodeId) -> Result<&NodeState, ForkError> {
        self.nodes
            .get(node.0 as usize)
            .ok_or(ForkError::NodeDown(node))
    }

    /// Takes ownership of a root address space built on `node`.
    pub fn adopt(&mut self, space: AddressSpace, meta: ContainerMeta) -> ContainerId {
        let id = self.alloc_id();
        let node = space.node();
        self.containers.insert(
            id,
            Container {
                id,
                node,
                space,
                state: ContainerState::Running,
                isolation: meta.isolation,
                registers: meta.registers,
                files: meta.files,
                lineage: None,
                published: Vec::new(),
            },
        );
        id
    }

    /// Pauses `cid` and publishes a descriptor of it.
    pub fn fork_prepare(&mut self, t: &mut SimTime, cid: ContainerId) -> Result<DescriptorId, ForkError> {
        let c = self
            .containers
            .get(&cid)
            .ok_or(ForkError::NoSuchContainer(cid))?;
        if c.state == ContainerState::Finished {
            return Err(ForkError::BadState(cid, c.state));
        }
        if self.fabric.is_crashed(c.node, *t) {
            return Err(ForkError::NodeDown(c.node));
        }
        let hops = c.space.ancestors().len();
        if hops >= MAX_OWNER as usize {
            return Err(ForkError::MaxHopsExceeded(hops));
        }
        let node = c.node;
        let ns = &mut self.nodes[node.0 as usize];
        let keys = ns.pool.assign_targets(&mut self.fabric, t, &c.space);
        let handle = ns.store.reserve_handle();
        let desc = build_descriptor(
            handle,
            ParentImage {
                space: &c.space,
                isolation: &c.isolation,
                registers: &c.registers,
                files: &c.files,
            },
            &keys,
        )?;
        *t += self.fabric.cost().descriptor_build_per_pte * desc.pte_count() as u64;
        let desc_key = ns.pool.take(&mut self.fabric, t);
        let id = ns.store.publish(&mut self.fabric, t, &desc, desc_key, keys);
        self.handles.insert((node, handle), cid);
        let c = self.containers.get_mut(&cid).unwrap();
        c.state = ContainerState::Paused;
        c.published.push(id);
        Ok(id)
    }

    /// Starts a child of descriptor `id` on `node`.
    pub fn fork_resume(
        &mut self,
        t: &mut SimTime,
        node: NodeId,
        id: &DescriptorId,
    ) -> Result<ContainerId, ForkError> {
        self.node_state(node)?;
        self.node_state(id.node)?;
        if self.fabric.is_crashed(node, *t) {
            return Err(ForkError::NodeDown(node));
        }
        let cost = self.fabric.cost().clone();
        let paging = self.config.paging.clone();
        *t += cost.local_fork;
        let ns = &mut self.nodes[node.0 as usize];
        let lean_hit = ns.lean.acquire();
        if !lean_hit {
            *t += cost.lean_container_setup;
        }

        let cached = ns.cache.get(&mut self.fabric, *id, *t).is_some();
        let parent_meta = self
            .handles
            .get(&(id.node, id.handle_id))
            .and_then(|c| self.containers.get(c))
            .map(|c| (c.isolation.clone(), c.registers.clone(), c.files.clone()));

        let (space, meta, cache_hit) = match (cached, parent_meta) {
            (true, Some(meta)) => {
                // The snapshot is only usable if the parent still vouches for it.
                self.fabric
                    .rpc_exchange(t, node, id.node, Nanos::ZERO, 0, Traffic::Control)
                    .map_err(|_| DescriptorError::Timeout(id.node))?;
                if let Err(e) = self.nodes[id.node.0 as usize].store.authenticate(id) {
                    self.nodes[node.0 as usize]
                        .cache
                        .invalidate(&mut self.fabric, &id.ancestor());
                    return Err(e.into());
                }
                let space = self.nodes[node.0 as usize]
                    .cache
                    .instantiate(&mut self.fabric, *id, *t, paging)
                    .expect("entry checked live above");
                (space, meta, true)
            }
            _ => {
                let desc = fetch_descriptor(
                    &mut self.fabric,
                    &self.nodes[id.node.0 as usize].store,
                    t,
                    node,
                    id,
                )?;
                *t += cost.map_per_pte * desc.pte_count() as u64;
                let space =
                    AddressSpace::map_from_descriptor(&mut self.fabric, node, id.ancestor(), &desc, paging)?;
                (space, (desc.isolation, desc.registers, desc.files), false)
            }
        };
        self.last_resume = ResumeInfo {
            lean_hit,
            cache_hit,
        };
        *self.children.entry(*id).or_default() += 1;
        let cid = self.alloc_id();
        self.containers.insert(
            cid,
            Container {
                id: cid,
                node,
                space,
                state: ContainerState::Running,
                isolation: meta.0,
                registers: meta.1,
                files: meta.2,
                lineage: Some(*id),
                published: Vec::new(),
            },
        );
        Ok(cid)
    }

    /// Withdraws descriptor `id`. The publishing container stays retained
    /// (and keeps serving fallback requests) until destroyed.
    pub fn fork_reclaim(&mut self, t: SimTime, id: &DescriptorId) -> Result<(), ForkError> {
        self.node_state(id.node)?;
        self.nodes[id.node.0 as usize].store.authenticate(id)?;
        if self.audit {
            let holders = self.referencing_containers(id);
            if !holders.is_empty() {
                self.violations.push(ReclaimViolation {
                    id: *id,
                    at: t,
                    holders,
                });
            }
        }
        self.nodes[id.node.0 as usize]
            .store
            .reclaim(&mut self.fabric, id, t)?;
        if let Some(cid) = self.handles.get(&(id.node, id.handle_id)) {
            if let Some(c) = self.containers.get_mut(cid) {
                c.published.retain(|d| d != id);
            }
        }
        Ok(())
    }

    pub fn revoke_vma(&mut self, t: SimTime, id: &DescriptorId, vma_id: u32) -> Result<(), ForkError> {
        self.node_state(id.node)?;
        let store = &mut self.nodes[id.node.0 as usize].store;
        access::revoke_vma(&mut self.fabric, store, id, vma_id, t)?;
        Ok(())
    }

    /// Ends a running container. Its clean page table goes to the node's
    /// cache when it was forked; every frame is released.
    pub fn finish(&mut self, t: SimTime, cid: ContainerId) -> Result<PagingStats, ForkError> {
        let c = self
            .containers
            .get(&cid)
            .ok_or(ForkError::NoSuchContainer(cid))?;
        if c.state != ContainerState::Running {
            return Err(ForkError::BadState(cid, c.state));
        }
        let mut c = self.containers.remove(&cid).unwrap();
        let stats = c.space.stats();
        if let Some(parent) = c.lineage {
            if !self.fabric.is_crashed(c.node, t) {
                self.nodes[c.node.0 as usize]
                    .cache
                    .put(&mut self.fabric, parent, &c.space, t);
            }
        }
        c.space.release(&mut self.fabric);
        self.forget(&c);
        Ok(stats)
    }

    /// Tears down a container in any state, reclaiming what it published.
    pub fn destroy(&mut self, t: SimTime, cid: ContainerId) -> Result<(), ForkError> {
        let mut c = self
            .containers
            .remove(&cid)
            .ok_or(ForkError::NoSuchContainer(cid))?;
        let published = std::mem::take(&mut c.published);
        for id in &published {
            self.containers.insert(cid, c);
            let r = self.fork_reclaim(t, id);
            c = self.containers.remove(&cid).unwrap();
            r?;
        }
        c.space.release(&mut self.fabric);
        self.forget(&c);
        Ok(())
    }

    fn forget(&mut self, c: &Container) {
        self.handles.retain(|_, h| *h != c.id);
        if let Some(parent) = c.lineage {
            if let Some(n) = self.children.get_mut(&parent) {
                *n -= 1;
                if *n == 0 {
                    self.children.remove(&parent);
                }
            }
        }
    }

    /// Marks `node` failed at `at`: its containers, descriptors and caches
    /// are gone.
    pub fn crash_node(&mut self, node: NodeId, at: SimTime) -> Result<(), ForkError> {
        self.node_state(node)?;
        self.fabric.crash(node, at).map_err(|_| ForkError::NodeDown(node))?;
        let dead: Vec<_> = self
            .containers
            .values()
            .filter(|c| c.node == node)
            .map(|c| c.id)
            .collect();
        for cid in dead {
            let mut c = self.containers.remove(&cid).unwrap();
            c.space.release(&mut self.fabric);
            self.forget(&c);
        }
        let ns = &mut self.nodes[node.0 as usize];
        let ids: Vec<_> = ns.store.ids().collect();
        for id in ids {
            let _ = ns.store.reclaim(&mut self.fabric, &id, at);
        }
        ns.cache.clear(&mut self.fabric);
        Ok(())
    }

    pub fn is_node_up(&self, node: NodeId, at: SimTime) -> bool {
        (node.0 as usize) < self.nodes.len() && !self.fabric.is_crashed(node, at)
    }

    /// Background maintenance: refill target and sandbox pools, evict
    /// expired page-table snapshots. Charges nothing to any request.
    pub fn background(&mut self, now: SimTime) {
        for (i, ns) in self.nodes.iter_mut().enumerate() {
            if self.fabric.is_crashed(NodeId(i as u32), now) {
                continue;
            }
            if ns.pool.needs_refill() {
                ns.pool.refill(&mut self.fabric);
            }
            ns.lean.refill();
            ns.cache.evict_expired(&mut self.fabric, now);
        }
    }

    /// Live containers (in any state) still holding a remote entry owned by
    /// the publisher of `id`.
    pub fn referencing_containers(&self, id: &DescriptorId) -> Vec<ContainerId> {
        let target = id.ancestor();
        self.containers
            .values()
            .filter(|c| references(c, target))
            .map(|c| c.id)
            .collect()
    }

    /// Whether any live descendant, direct or not, still depends on `id`.
    pub fn is_referenced(&self, id: &DescriptorId) -> bool {
        let target = id.ancestor();
        self.containers.values().any(|c| references(c, target))
    }

    /// Prepared parents are frozen: their frames back published snapshots.
    fn writable(&self, cid: ContainerId) -> Result<(), ForkError> {
        match self.containers.get(&cid) {
            None => Err(ForkError::NoSuchContainer(cid)),
            Some(c) if c.state == ContainerState::Paused => Err(ForkError::BadState(cid, c.state)),
            Some(_) => Ok(()),
        }
    }

    fn with_container<R>(
        &mut self,
        cid: ContainerId,
        f: impl FnOnce(&mut Container, &mut Fabric, &Owners<'_>) -> R,
    ) -> Result<R, ForkError> {
        let mut c = self
            .containers
            .remove(&cid)
            .ok_or(ForkError::NoSuchContainer(cid))?;
        let owners = Owners {
            nodes: &self.nodes,
            containers: &self.containers,
            handles: &self.handles,
        };
        let r = f(&mut c, &mut self.fabric, &owners);
        self.containers.insert(cid, c);
        Ok(r)
    }

    pub fn read(
        &mut self,
        t: &mut SimTime,
        cid: ContainerId,
        va: u64,
        len: usize,
    ) -> Result<Result<Vec<u8>, AccessError>, ForkError> {
        self.with_container(cid, |c, f, o| c.space.read(f, o, t, va, len))
    }

    pub fn write(
        &mut self,
        t: &mut SimTime,
        cid: ContainerId,
        va: u64,
        data: &[u8],
    ) -> Result<Result<(), AccessError>, ForkError> {
        self.writable(cid)?;
        self.with_container(cid, |c, f, o| c.space.write(f, o, t, va, data))
    }

    pub fn touch(
        &mut self,
        t: &mut SimTime,
        cid: ContainerId,
        vpn: Vpn,
        kind: AccessKind,
    ) -> Result<Result<(), AccessError>, ForkError> {
        if kind == AccessKind::Write {
            self.writable(cid)?;
        }
        self.with_container(cid, |c, f, o| c.space.touch(f, o, t, vpn, kind))
    }

    /// Touches many pages in order, stopping at the first error.
    pub fn touch_all(
        &mut self,
        t: &mut SimTime,
        cid: ContainerId,
        vpns: &[Vpn],
        kind: AccessKind,
    ) -> Result<Result<(), AccessError>, ForkError> {
        if kind == AccessKind::Write {
            self.writable(cid)?;
        }
        self.with_container(cid, |c, f, o| {
            vpns.iter().try_for_each(|&v| c.space.touch(f, o, t, v, kind))
        })
    }
}

fn references(c: &Container, target: AncestorEntry) -> bool {
    let Some(pos) = c.space.ancestors().iter().position(|a| *a == target) else {
        return false;
    };
    let owner = pos as u8 + 1;
    c.space
        .entries()
        .iter()
        .any(|(_, p)| p.is_remote() && p.owner() == owner)
}
