//! Simulated RDMA fabric.
//!
//! Every node owns a physical memory (page frames plus pinned buffers), a set
//! of DC targets and a small pool of RPC handler servers. One-sided reads
//! bypass the handlers entirely and only consult the target's key and the
//! page ranges it guards. All durations come from [`CostModel`] and are
//! recorded in the [`CostLedger`].

mod clock;
mod cost;
mod ledger;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use clock::SimClock;
pub use cost::{transfer_time, CostModel};
pub use ledger::{ChargeKind, CostLedger, LedgerLine, Traffic};

use crate::time::{Nanos, SimTime};

pub const PAGE_SIZE: usize = 4096;

/// Accounting size of one live DC target at its node.
pub const DC_TARGET_BYTES: u64 = 144;

/// Encoded size of a [`DcKey`]; also what a child stores per connection.
pub const DC_KEY_BYTES: usize = 12;

pub type Page = [u8; PAGE_SIZE];

pub fn zero_page() -> Arc<Page> {
    Arc::new([0u8; PAGE_SIZE])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node{}", self.0)
    }
}

/// Physical page number on one node. Zero is never allocated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pfn(pub u64);

impl Pfn {
    pub const NONE: Pfn = Pfn(0);

    pub fn is_none(self) -> bool {
        self.0 == 0
    }
}

/// Connectionless access handle: a fabric-generated NIC number plus the
/// caller's key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct DcKey {
    pub nic_num: u32,
    pub user_key: u64,
}

impl DcKey {
    pub fn to_bytes(self) -> [u8; DC_KEY_BYTES] {
        let mut out = [0u8; DC_KEY_BYTES];
        out[..4].copy_from_slice(&self.nic_num.to_le_bytes());
        out[4..].copy_from_slice(&self.user_key.to_le_bytes());
        out
    }

    pub fn from_bytes(b: [u8; DC_KEY_BYTES]) -> Self {
        DcKey {
            nic_num: u32::from_le_bytes(b[..4].try_into().unwrap()),
            user_key: u64::from_le_bytes(b[4..].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetState {
    Live,
    Destroyed { at: SimTime },
}

/// A contiguous run of physical pages `[start, start + count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PageRange {
    pub start: Pfn,
    pub count: u64,
}

impl PageRange {
    pub fn new(start: Pfn, count: u64) -> Self {
        PageRange { start, count }
    }

    pub fn contains(&self, pfn: Pfn) -> bool {
        pfn.0 >= self.start.0 && pfn.0 < self.start.0 + self.count
    }
}

#[derive(Debug, Clone)]
pub struct DcTarget {
    pub node: NodeId,
    pub key: DcKey,
    pub state: TargetState,
    pub guarded: Vec<PageRange>,
}

impl DcTarget {
    fn covers(&self, pfn: Pfn) -> bool {
        self.guarded.iter().any(|r| r.contains(pfn))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReadOutcome<T> {
    Data(T),
    Rejected,
}

impl<T> ReadOutcome<T> {
    pub fn data(self) -> Option<T> {
        match self {
            ReadOutcome::Data(d) => Some(d),
            ReadOutcome::Rejected => None,
        }
    }

    pub fn is_rejected(&self) -> bool {
        matches!(self, ReadOutcome::Rejected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FabricError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no such DC target {key:?} on {node}")]
    NoSuchTarget { node: NodeId, key: DcKey },
    #[error("read length {0} is not a multiple of the page size")]
    UnalignedRead(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RpcError {
    #[error("rpc to {0} timed out")]
    Timeout(NodeId),
    #[error("no handler on port {port} at {node}")]
    NoHandler { node: NodeId, port: u16 },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// A handler's answer plus how long it occupied its server.
pub struct HandlerReply {
    pub reply: Vec<u8>,
    pub service: Nanos,
}

pub trait RpcHandler: Send {
    fn serve(&mut self, src: NodeId, payload: &[u8]) -> HandlerReply;
}

impl<F> RpcHandler for F
where
    F: FnMut(NodeId, &[u8]) -> HandlerReply + Send,
{
    fn serve(&mut self, src: NodeId, payload: &[u8]) -> HandlerReply {
        self(src, payload)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FabricConfig {
    pub cost: CostModel,
    pub seed: u64,
    /// Logical RPC servers per node.
    pub handler_count: usize,
    pub rpc_timeout: Nanos,
}

impl Default for FabricConfig {
    fn default() -> Self {
        FabricConfig {
            cost: CostModel::default(),
            seed: 0,
            handler_count: 2,
            rpc_timeout: Nanos::from_ms(10),
        }
    }
}

struct Frame {
    data: Arc<Page>,
    refs: u32,
}

struct Node {
    frames: HashMap<Pfn, Frame>,
    pinned: BTreeMap<Pfn, Arc<[u8]>>,
    pinned_bytes: u64,
    next_pfn: u64,
    targets: HashMap<u32, DcTarget>,
    live_targets: u64,
    next_nic: u32,
    aux_bytes: u64,
    crashed_at: Option<SimTime>,
    servers: Vec<SimTime>,
    handlers: HashMap<u16, Box<dyn RpcHandler>>,
}

impl Node {
    fn new(handler_count: usize) -> Self {
        Node {
            frames: HashMap::new(),
            pinned: BTreeMap::new(),
            pinned_bytes: 0,
            next_pfn: 1,
            targets: HashMap::new(),
            live_targets: 0,
            next_nic: 1,
            aux_bytes: 0,
            crashed_at: None,
            servers: vec![SimTime::ZERO; handler_count.max(1)],
            handlers: HashMap::new(),
        }
    }

    fn crashed_by(&self, t: SimTime) -> bool {
        self.crashed_at.is_some_and(|c| c <= t)
    }

    /// Bytes of the physical page at `pfn`, from a frame or a pinned buffer.
    fn page_bytes(&self, pfn: Pfn) -> Option<&[u8]> {
        if let Some(f) = self.frames.get(&pfn) {
            return Some(&f.data[..]);
        }
        let (start, buf) = self.pinned.range(..=pfn).next_back()?;
        let off = ((pfn.0 - start.0) as usize) * PAGE_SIZE;
        if off >= buf.len() {
            return None;
        }
        Some(&buf[off..(off + PAGE_SIZE).min(buf.len())])
    }
}

/// The deterministic network of simulated machines.
pub struct Fabric {
    config: FabricConfig,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
    ledger: CostLedger,
}

impl fmt::Debug for Fabric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fabric")
            .field("nodes", &self.nodes.len())
            .field("ledger", &self.ledger)
            .finish()
    }
}

impl Fabric {
    pub fn new(config: FabricConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Fabric {
            config,
            nodes: Vec::new(),
            rng,
            ledger: CostLedger::default(),
        }
    }

    pub fn cost(&self) -> &CostModel {
        &self.config.cost
    }

    pub fn config(&self) -> &FabricConfig {
        &self.config
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn next_random(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Adds a machine. Nodes may join at any time.
    pub fn register_node(&mut self) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node::new(self.config.handler_count));
        id
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    fn node(&self, id: NodeId) -> Result<&Node, FabricError> {
        self.nodes
            .get(id.0 as usize)
            .ok_or(FabricError::UnknownNode(id))
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut Node, FabricError> {
        self.nodes
            .get_mut(id.0 as usize)
            .ok_or(FabricError::UnknownNode(id))
    }

    // ---- crash model ----

    /// Marks `node` dead from `at` onwards. Memory stays inspectable.
    pub fn crash(&mut self, node: NodeId, at: SimTime) -> Result<(), FabricError> {
        let n = self.node_mut(node)?;
        n.crashed_at = Some(n.crashed_at.map_or(at, |c| c.min(at)));
        Ok(())
    }

    pub fn is_crashed(&self, node: NodeId, at: SimTime) -> bool {
        self.node(node).map(|n| n.crashed_by(at)).unwrap_or(true)
    }

    // ---- physical memory ----

    pub fn alloc_frame(&mut self, node: NodeId, data: Arc<Page>) -> Result<Pfn, FabricError> {
        let n = self.node_mut(node)?;
        let pfn = Pfn(n.next_pfn);
        n.next_pfn += 1;
        n.frames.insert(pfn, Frame { data, refs: 1 });
        Ok(pfn)
    }

    pub fn frame(&self, node: NodeId, pfn: Pfn) -> Option<&Arc<Page>> {
        self.node(node).ok()?.frames.get(&pfn).map(|f| &f.data)
    }

    pub fn frame_refs(&self, node: NodeId, pfn: Pfn) -> u32 {
        self.node(node)
            .ok()
            .and_then(|n| n.frames.get(&pfn))
            .map_or(0, |f| f.refs)
    }

    /// Adds a mapping reference to an existing frame.
    pub fn share_frame(&mut self, node: NodeId, pfn: Pfn) {
        if let Ok(n) = self.node_mut(node) {
            if let Some(f) = n.frames.get_mut(&pfn) {
                f.refs += 1;
            }
        }
    }

    /// Drops one mapping reference; the frame is freed at zero.
    pub fn release_frame(&mut self, node: NodeId, pfn: Pfn) {
        if let Ok(n) = self.node_mut(node) {
            if let Some(f) = n.frames.get_mut(&pfn) {
                f.refs -= 1;
                if f.refs == 0 {
                    n.frames.remove(&pfn);
                }
            }
        }
    }

    /// A new private frame holding the same bytes as `pfn`.
    pub fn copy_frame(&mut self, node: NodeId, pfn: Pfn) -> Result<Pfn, FabricError> {
        let data = self
            .node(node)?
            .frames
            .get(&pfn)
            .map(|f| f.data.clone())
            .expect("copy of unallocated frame");
        self.alloc_frame(node, data)
    }

    /// Writes into a frame. A frame shared by several mappings is copied
    /// first; the returned pfn is the one the caller should map from now on.
    pub fn write_frame(
        &mut self,
        node: NodeId,
        pfn: Pfn,
        offset: usize,
        bytes: &[u8],
    ) -> Result<Pfn, FabricError> {
        let n = self.node_mut(node)?;
        let shared = n.frames.get(&pfn).map(|f| f.refs > 1).unwrap_or(false);
        let target = if shared {
            let data = n.frames[&pfn].data.clone();
            n.frames.get_mut(&pfn).unwrap().refs -= 1;
            let fresh = Pfn(n.next_pfn);
            n.next_pfn += 1;
            n.frames.insert(fresh, Frame { data, refs: 1 });
            fresh
        } else {
            pfn
        };
        let frame = n
            .frames
            .get_mut(&target)
            .expect("write to unallocated frame");
        Arc::make_mut(&mut frame.data)[offset..offset + bytes.len()].copy_from_slice(bytes);
        Ok(target)
    }

    /// Pins `bytes` at a fresh contiguous physical range and returns its first pfn.
    pub fn pin_buffer(&mut self, node: NodeId, bytes: Vec<u8>) -> Result<Pfn, FabricError> {
        let n = self.node_mut(node)?;
        let pages = bytes.len().div_ceil(PAGE_SIZE).max(1) as u64;
        let start = Pfn(n.next_pfn);
        n.next_pfn += pages;
        n.pinned_bytes += bytes.len() as u64;
        n.pinned.insert(start, Arc::from(bytes));
        Ok(start)
    }

    pub fn unpin_buffer(&mut self, node: NodeId, start: Pfn) {
        if let Ok(n) = self.node_mut(node) {
            if let Some(buf) = n.pinned.remove(&start) {
                n.pinned_bytes -= buf.len() as u64;
            }
        }
    }

    /// Extra per-node bookkeeping bytes (e.g. child-held keys).
    pub fn add_aux_bytes(&mut self, node: NodeId, bytes: u64) {
        if let Ok(n) = self.node_mut(node) {
            n.aux_bytes += bytes;
        }
    }

    pub fn sub_aux_bytes(&mut self, node: NodeId, bytes: u64) {
        if let Ok(n) = self.node_mut(node) {
            n.aux_bytes = n.aux_bytes.saturating_sub(bytes);
        }
    }

    /// Frames, pinned buffers, live targets and auxiliary bytes on `node`.
    pub fn memory_bytes(&self, node: NodeId) -> u64 {
        self.node(node).map_or(0, |n| {
            n.frames.len() as u64 * PAGE_SIZE as u64
                + n.pinned_bytes
                + n.live_targets * DC_TARGET_BYTES
                + n.aux_bytes
        })
    }

    pub fn frame_count(&self, node: NodeId) -> usize {
        self.node(node).map_or(0, |n| n.frames.len())
    }

    // ---- DC targets ----

    /// Creates a live target and charges `dc_connect` to `t`.
    pub fn create_dc_target(
        &mut self,
        t: &mut SimTime,
        node: NodeId,
        user_key: u64,
        guarded: Vec<PageRange>,
    ) -> Result<DcKey, FabricError> {
        let cost = self.config.cost.dc_connect;
        let n = self.node_mut(node)?;
        let key = DcKey {
            nic_num: n.next_nic,
            user_key,
        };
        n.next_nic += 1;
        n.targets.insert(
            key.nic_num,
            DcTarget {
                node,
                key,
                state: TargetState::Live,
                guarded,
            },
        );
        n.live_targets += 1;
        *t += cost;
        self.ledger
            .record(ChargeKind::DcConnect, Traffic::Control, cost, 0);
        Ok(key)
    }

    pub fn set_guarded_ranges(
        &mut self,
        node: NodeId,
        key: DcKey,
        guarded: Vec<PageRange>,
    ) -> Result<(), FabricError> {
        let target = self.live_target_mut(node, key)?;
        target.guarded = guarded;
        Ok(())
    }

    fn live_target_mut(&mut self, node: NodeId, key: DcKey) -> Result<&mut DcTarget, FabricError> {
        let n = self.node_mut(node)?;
        match n.targets.get_mut(&key.nic_num) {
            Some(tg) if tg.key == key && tg.state == TargetState::Live => Ok(tg),
            _ => Err(FabricError::NoSuchTarget { node, key }),
        }
    }

    /// Revokes `key` as of `at`. Reads delivered before `at` still succeed.
    pub fn destroy_dc_target(
        &mut self,
        node: NodeId,
        key: DcKey,
        at: SimTime,
    ) -> Result<(), FabricError> {
        let target = self.live_target_mut(node, key)?;
        target.state = TargetState::Destroyed { at };
        self.node_mut(node)?.live_targets -= 1;
        Ok(())
    }

    pub fn target(&self, node: NodeId, key: DcKey) -> Option<&DcTarget> {
        self.node(node)
            .ok()?
            .targets
            .get(&key.nic_num)
            .filter(|t| t.key == key)
    }

    pub fn is_target_live(&self, node: NodeId, key: DcKey) -> bool {
        self.target(node, key)
            .is_some_and(|t| t.state == TargetState::Live)
    }

    pub fn live_target_count(&self, node: NodeId) -> u64 {
        self.node(node).map_or(0, |n| n.live_targets)
    }

    /// Can `key` on `node` be used for a read arriving at `delivery`?
    fn admits(&self, node: NodeId, key: DcKey, pfns: impl Iterator<Item = Pfn>, delivery: SimTime) -> bool {
        let Ok(n) = self.node(node) else { return false };
        if n.crashed_by(delivery) {
            return false;
        }
        let Some(target) = n.targets.get(&key.nic_num).filter(|t| t.key == key) else {
            return false;
        };
        if let TargetState::Destroyed { at } = target.state {
            if delivery >= at {
                return false;
            }
        }
        let mut pfns = pfns.peekable();
        pfns.peek().is_some() && pfns.all(|p| target.covers(p))
    }

    // ---- one-sided reads ----

    fn charge_read(&mut self, t: &mut SimTime, bytes: u64, ok: bool, traffic: Traffic) {
        let cost = &self.config.cost;
        let (kind, time, counted) = if ok {
            (ChargeKind::RdmaRead, cost.rdma_read(bytes), bytes)
        } else {
            (ChargeKind::RdmaRejected, cost.rdma_rtt, 0)
        };
        *t += time;
        self.ledger.record(kind, traffic, time, counted);
    }

    fn delivery(&self, t: SimTime) -> SimTime {
        t + Nanos(self.config.cost.rdma_rtt.0 / 2)
    }

    /// Reads `byte_len` bytes of whole pages starting at `pfn` on `dest.0`.
    pub fn rdma_read(
        &mut self,
        t: &mut SimTime,
        reader: NodeId,
        dest: (NodeId, DcKey),
        pfn: Pfn,
        byte_len: usize,
    ) -> Result<ReadOutcome<Vec<u8>>, FabricError> {
        if !byte_len.is_multiple_of(PAGE_SIZE) {
            return Err(FabricError::UnalignedRead(byte_len));
        }
        match self.rdma_read_pages(t, reader, dest, pfn, byte_len / PAGE_SIZE, Traffic::Paging)? {
            ReadOutcome::Data(pages) => {
                let mut out = Vec::with_capacity(byte_len);
                for p in pages {
                    out.extend_from_slice(&p[..]);
                }
                Ok(ReadOutcome::Data(out))
            }
            ReadOutcome::Rejected => Ok(ReadOutcome::Rejected),
        }
    }

    /// Page-granular read returning frame snapshots. Used by the pager.
    pub fn rdma_read_pages(
        &mut self,
        t: &mut SimTime,
        reader: NodeId,
        dest: (NodeId, DcKey),
        pfn: Pfn,
        pages: usize,
        traffic: Traffic,
    ) -> Result<ReadOutcome<Vec<Arc<Page>>>, FabricError> {
        self.node(reader)?;
        let (node, key) = dest;
        let delivery = self.delivery(*t);
        let range = (pfn.0..pfn.0 + pages as u64).map(Pfn);
        let mut admitted = self.admits(node, key, range.clone(), delivery);
        let mut out = Vec::with_capacity(pages);
        if admitted {
            let n = self.node(node)?;
            for p in range {
                match n.frames.get(&p) {
                    Some(f) => out.push(f.data.clone()),
                    None => {
                        admitted = false;
                        break;
                    }
                }
            }
        }
        let bytes = (pages * PAGE_SIZE) as u64;
        self.charge_read(t, bytes, admitted, traffic);
        Ok(if admitted {
            ReadOutcome::Data(out)
        } else {
            ReadOutcome::Rejected
        })
    }

    /// Byte-granular read of physical address `[addr, addr + len)`.
    pub fn rdma_read_bytes(
        &mut self,
        t: &mut SimTime,
        reader: NodeId,
        dest: (NodeId, DcKey),
        addr: u64,
        len: usize,
        traffic: Traffic,
    ) -> Result<ReadOutcome<Vec<u8>>, FabricError> {
        self.node(reader)?;
        let (node, key) = dest;
        let delivery = self.delivery(*t);
        let first = addr / PAGE_SIZE as u64;
        let last = (addr + len.max(1) as u64 - 1) / PAGE_SIZE as u64;
        let pfns = (first..=last).map(Pfn);
        let mut data = None;
        if self.admits(node, key, pfns.clone(), delivery) {
            let n = self.node(node)?;
            let mut buf = Vec::with_capacity(len);
            let mut ok = true;
            for p in pfns {
                match n.page_bytes(p) {
                    Some(b) => {
                        let page_base = p.0 * PAGE_SIZE as u64;
                        let lo = addr.max(page_base) - page_base;
                        let hi = (addr + len as u64).min(page_base + PAGE_SIZE as u64) - page_base;
                        if (hi as usize) > b.len() {
                            ok = false;
                            break;
                        }
                        buf.extend_from_slice(&b[lo as usize..hi as usize]);
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                data = Some(buf);
            }
        }
        self.charge_read(t, len as u64, data.is_some(), traffic);
        Ok(match data {
            Some(d) => ReadOutcome::Data(d),
            None => ReadOutcome::Rejected,
        })
    }

    /// A transfer against the storage tier: `time` on the caller's clock and
    /// `bytes` on the ledger.
    pub fn storage_io(&mut self, t: &mut SimTime, traffic: Traffic, time: Nanos, bytes: u64) {
        *t += time;
        self.ledger.record(ChargeKind::Storage, traffic, time, bytes);
    }

    // ---- RPC ----

    pub fn register_handler(
        &mut self,
        node: NodeId,
        port: u16,
        handler: Box<dyn RpcHandler>,
    ) -> Result<(), FabricError> {
        self.node_mut(node)?.handlers.insert(port, handler);
        Ok(())
    }

    /// Transport of one request/reply pair: a round trip on the wire plus
    /// `service` on the earliest free handler server at `dst`.
    pub fn rpc_exchange(
        &mut self,
        t: &mut SimTime,
        src: NodeId,
        dst: NodeId,
        service: Nanos,
        reply_bytes: u64,
        traffic: Traffic,
    ) -> Result<(), RpcError> {
        let rtt = self.config.cost.rdma_rtt;
        let timeout = self.config.rpc_timeout;
        if self.node(src).is_err() {
            return Err(RpcError::UnknownNode(src));
        }
        let start = *t;
        let arrival = start + rtt;
        let n = self
            .nodes
            .get_mut(dst.0 as usize)
            .ok_or(RpcError::UnknownNode(dst))?;
        if n.crashed_by(arrival) {
            *t = start + timeout;
            self.ledger
                .record(ChargeKind::RpcTimeout, traffic, timeout, 0);
            return Err(RpcError::Timeout(dst));
        }
        let server = n
            .servers
            .iter_mut()
            .min_by_key(|busy| **busy)
            .expect("at least one server");
        let begin = arrival.max(*server);
        let done = begin + service;
        *server = done;
        *t = done + rtt;
        self.ledger
            .record(ChargeKind::Rpc, traffic, t.since(start), reply_bytes);
        Ok(())
    }

    /// Full RPC through a registered handler.
    pub fn rpc_call(
        &mut self,
        t: &mut SimTime,
        src: NodeId,
        dst: NodeId,
        port: u16,
        payload: &[u8],
    ) -> Result<Vec<u8>, RpcError> {
        let n = self
            .nodes
            .get_mut(dst.0 as usize)
            .ok_or(RpcError::UnknownNode(dst))?;
        let crashed = n.crashed_by(*t + self.config.cost.rdma_rtt);
        let reply = match n.handlers.get_mut(&port) {
            Some(_) if crashed => None,
            Some(h) => Some(h.serve(src, payload)),
            None => return Err(RpcError::NoHandler { node: dst, port }),
        };
        let (service, bytes, reply) = match reply {
            Some(r) => (r.service, r.reply.len() as u64, Some(r.reply)),
            None => (Nanos::ZERO, 0, None),
        };
        self.rpc_exchange(t, src, dst, service, bytes, Traffic::Control)?;
        Ok(reply.unwrap_or_default())
    }
}
