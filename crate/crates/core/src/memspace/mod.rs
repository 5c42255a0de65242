//! A container's address space and its copy-on-access pager.
//!
//! Children start with every parent-mapped page installed as a remote entry
//! and materialize pages on first touch:
//!
//! | page state                          | resolution |
//! |-------------------------------------|------------|
//! | no entry in a mapped VMA            | Local      |
//! | remote entry with a parent frame    | Rdma       |
//! | remote entry without a parent frame | Rpc        |
//!
//! A rejected one-sided read (revoked target) falls back to RPC unless
//! `strict_revocation` is set.

mod cache;

use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

pub use cache::{PtCache, PtCacheEntry};

use crate::descriptor::{AncestorEntry, ContainerDescriptor, Pte, Vma, Vpn, MAX_OWNER};
use crate::fabric::{
    zero_page, DcKey, Fabric, NodeId, Page, Pfn, ReadOutcome, RpcError, Traffic, DC_KEY_BYTES,
    PAGE_SIZE,
};
use crate::time::{Nanos, SimTime};

#[derive(Debug, Clone, PartialEq)]
pub struct PagingConfig {
    /// Adjacent pages fetched along with an RDMA fault.
    pub prefetch: usize,
    /// Treat a rejected read as fatal instead of falling back to RPC.
    pub strict_revocation: bool,
    pub pt_cache_ttl: Nanos,
}

impl Default for PagingConfig {
    fn default() -> Self {
        PagingConfig {
            prefetch: 1,
            strict_revocation: false,
            pt_cache_ttl: Nanos::from_secs(5),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PagingStats {
    pub faults_local: u64,
    pub faults_rdma: u64,
    pub faults_rpc: u64,
    pub pages_prefetched: u64,
    pub bytes_over_network: u64,
}

impl PagingStats {
    pub fn pages_transferred(&self) -> u64 {
        self.faults_rdma + self.faults_rpc + self.pages_prefetched
    }

    pub fn add(&mut self, other: &PagingStats) {
        self.faults_local += other.faults_local;
        self.faults_rdma += other.faults_rdma;
        self.faults_rpc += other.faults_rpc;
        self.pages_prefetched += other.pages_prefetched;
        self.bytes_over_network += other.bytes_over_network;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultResolution {
    Local,
    Rdma { pages: usize },
    Rpc,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultError {
    #[error("owner of page {vpn:?} unreachable: {source}")]
    OwnerUnreachable { vpn: Vpn, source: RpcError },
    #[error("owner cannot serve page {vpn:?}")]
    Unserviceable { vpn: Vpn },
    #[error("read of page {vpn:?} rejected under strict revocation")]
    Revoked { vpn: Vpn },
    #[error("owner index {owner} of page {vpn:?} not in ancestor table")]
    BadOwner { vpn: Vpn, owner: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AccessError {
    #[error("segmentation fault at {0:#x}")]
    SegFault(u64),
    #[error("protection fault at {0:#x}")]
    ProtFault(u64),
    #[error(transparent)]
    Fault(#[from] FaultError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("corrupt descriptor: {0}")]
    CorruptDescriptor(&'static str),
}

/// Where the owner finds the bytes for a fallback request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PageOrigin {
    Frame(Pfn),
    File { path: String, index: u64 },
    Zero,
}

/// Owner-side lookups the pager needs; the network leg is charged by the
/// pager itself.
pub trait OwnerDirectory {
    /// Fallback handler logic at `owner.node` for page `vpn`.
    fn resolve(&self, owner: &AncestorEntry, vpn: Vpn) -> Option<PageOrigin>;
    /// Key of the live target guarding `vma_id` at `owner`.
    fn vma_key(&self, owner: &AncestorEntry, vma_id: u32) -> Option<DcKey>;
}

/// A directory that knows nothing; every fallback fails.
pub struct NoOwners;

impl OwnerDirectory for NoOwners {
    fn resolve(&self, _: &AncestorEntry, _: Vpn) -> Option<PageOrigin> {
        None
    }
    fn vma_key(&self, _: &AncestorEntry, _: u32) -> Option<DcKey> {
        None
    }
}

/// Deterministic content of page `index` of file `path`.
pub fn file_page_content(path: &str, index: u64) -> Arc<Page> {
    let mut page = [0u8; PAGE_SIZE];
    let mut h = std::collections::hash_map::DefaultHasher::new();
    path.hash(&mut h);
    index.hash(&mut h);
    let mut x = h.finish() | 1;
    for chunk in page.chunks_mut(8) {
        // xorshift64
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        chunk.copy_from_slice(&x.to_le_bytes()[..chunk.len()]);
    }
    Arc::new(page)
}

/// Control-plane service time of a key lookup at an ancestor.
const KEY_LOOKUP_SERVICE: Nanos = Nanos(1_000);

#[derive(Debug)]
pub struct AddressSpace {
    node: NodeId,
    /// Owner index `i + 1` refers to `ancestors[i]`.
    ancestors: Vec<AncestorEntry>,
    vmas: Vec<Vma>,
    /// Shared, sorted entries from a descriptor or a cached snapshot. The
    /// table as a whole holds one reference on each present frame; whoever
    /// drops the last handle releases them.
    base: Arc<Vec<(Vpn, Pte)>>,
    /// Private entries; shadow `base`.
    overlay: BTreeMap<Vpn, Pte>,
    /// Keys for ancestors beyond the immediate parent, keyed by (owner, vma).
    keys: HashMap<(u8, u32), DcKey>,
    /// Root-only: VMA id -> backing file.
    file_maps: BTreeMap<u32, String>,
    config: PagingConfig,
    stats: PagingStats,
    aux_bytes: u64,
}

impl AddressSpace {
    /// An address space with no lineage, e.g. a freshly started container.
    pub fn new_root(node: NodeId, mut vmas: Vec<Vma>, config: PagingConfig) -> AddressSpace {
        vmas.sort_by_key(|v| v.start_va);
        assert!(vmas.iter().all(Vma::is_valid), "invalid VMA");
        assert!(
            vmas.windows(2).all(|w| w[0].end_va <= w[1].start_va),
            "VMAs overlap"
        );
        AddressSpace {
            node,
            ancestors: Vec::new(),
            vmas,
            base: Arc::new(Vec::new()),
            overlay: BTreeMap::new(),
            keys: HashMap::new(),
            file_maps: BTreeMap::new(),
            config,
            stats: PagingStats::default(),
            aux_bytes: 0,
        }
    }

    /// Installs every entry of `desc` as remote, with owner indices shifted
    /// by one so that index 1 names the publisher.
    pub fn map_from_descriptor(
        fabric: &mut Fabric,
        node: NodeId,
        publisher: AncestorEntry,
        desc: &ContainerDescriptor,
        config: PagingConfig,
    ) -> Result<AddressSpace, MapError> {
        if desc.ancestors.len() >= MAX_OWNER as usize {
            return Err(MapError::CorruptDescriptor("ancestor table full"));
        }
        let mut base = Vec::with_capacity(desc.pte_count());
        let mut vmas = Vec::with_capacity(desc.vmas.len());
        for dv in &desc.vmas {
            if vmas.last().is_some_and(|p: &Vma| p.end_va > dv.vma.start_va) {
                return Err(MapError::CorruptDescriptor("VMAs overlap or are unsorted"));
            }
            vmas.push(dv.vma);
            for &(vpn, pte) in &dv.ptes {
                if !pte.is_remote() || pte.present() {
                    return Err(MapError::CorruptDescriptor("entry not remote"));
                }
                if pte.owner() as usize > desc.ancestors.len() {
                    return Err(MapError::CorruptDescriptor("owner index out of range"));
                }
                if base.last().is_some_and(|&(prev, _)| prev >= vpn) {
                    return Err(MapError::CorruptDescriptor("entries unsorted"));
                }
                base.push((vpn, pte.with_owner(pte.owner() + 1)));
            }
        }
        let mut ancestors = Vec::with_capacity(desc.ancestors.len() + 1);
        ancestors.push(publisher);
        ancestors.extend_from_slice(&desc.ancestors);
        let mut space = AddressSpace {
            node,
            ancestors,
            vmas,
            base: Arc::new(base),
            overlay: BTreeMap::new(),
            keys: HashMap::new(),
            file_maps: BTreeMap::new(),
            config,
            stats: PagingStats::default(),
            aux_bytes: 0,
        };
        space.charge_keys(fabric, space.vmas.len() as u64);
        Ok(space)
    }

    fn charge_keys(&mut self, fabric: &mut Fabric, n: u64) {
        let bytes = n * DC_KEY_BYTES as u64;
        self.aux_bytes += bytes;
        fabric.add_aux_bytes(self.node, bytes);
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn ancestors(&self) -> &[AncestorEntry] {
        &self.ancestors
    }

    pub fn vmas(&self) -> &[Vma] {
        &self.vmas
    }

    pub fn stats(&self) -> PagingStats {
        self.stats
    }

    pub fn config(&self) -> &PagingConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: PagingConfig) {
        self.config = config;
    }

    pub fn file_maps(&self) -> &BTreeMap<u32, String> {
        &self.file_maps
    }

    /// Backs VMA `vma_id` with `path` (root containers only).
    pub fn map_file(&mut self, vma_id: u32, path: impl Into<String>) {
        self.file_maps.insert(vma_id, path.into());
    }

    pub fn vma_of(&self, vpn: Vpn) -> Option<&Vma> {
        let va = vpn.va();
        let i = self.vmas.partition_point(|v| v.end_va <= va);
        self.vmas.get(i).filter(|v| v.contains_va(va))
    }

    fn vma_index(&self, vpn: Vpn) -> Option<usize> {
        let va = vpn.va();
        let i = self.vmas.partition_point(|v| v.end_va <= va);
        self.vmas.get(i).filter(|v| v.contains_va(va)).map(|_| i)
    }

    pub fn pte(&self, vpn: Vpn) -> Option<Pte> {
        if let Some(&p) = self.overlay.get(&vpn) {
            return Some(p);
        }
        self.base
            .binary_search_by_key(&vpn, |&(v, _)| v)
            .ok()
            .map(|i| self.base[i].1)
    }

    fn base_pte(&self, vpn: Vpn) -> Option<Pte> {
        self.base
            .binary_search_by_key(&vpn, |&(v, _)| v)
            .ok()
            .map(|i| self.base[i].1)
    }

    /// Every effective entry, sorted by vpn.
    pub fn entries(&self) -> Vec<(Vpn, Pte)> {
        let mut out = Vec::with_capacity(self.base.len() + self.overlay.len());
        let mut over = self.overlay.iter().peekable();
        for &(vpn, pte) in self.base.iter() {
            while let Some((&ov, &op)) = over.peek() {
                if ov < vpn {
                    out.push((ov, op));
                    over.next();
                } else {
                    break;
                }
            }
            match over.peek() {
                Some((&ov, &op)) if ov == vpn => {
                    out.push((ov, op));
                    over.next();
                }
                _ => out.push((vpn, pte)),
            }
        }
        out.extend(over.map(|(&v, &p)| (v, p)));
        out
    }

    pub fn present_pages(&self) -> usize {
        self.entries().iter().filter(|(_, p)| p.present()).count()
    }

    pub fn remote_pages(&self) -> usize {
        self.entries().iter().filter(|(_, p)| p.is_remote()).count()
    }

    /// Installs a local frame holding `data` at `vpn` (used to build roots).
    pub fn populate(&mut self, fabric: &mut Fabric, vpn: Vpn, data: Arc<Page>) {
        assert!(self.vma_of(vpn).is_some(), "populate outside any VMA");
        if let Some(old) = self.pte(vpn).filter(|p| p.present()) {
            fabric.release_frame(self.node, old.pfn());
        }
        let pfn = fabric.alloc_frame(self.node, data).expect("node registered");
        self.overlay.insert(vpn, Pte::local(pfn));
    }

    /// Marks `vpn` mapped but not resident (a file page never loaded).
    pub fn map_unloaded(&mut self, vpn: Vpn) {
        assert!(self.vma_of(vpn).is_some(), "mapping outside any VMA");
        self.overlay.insert(vpn, Pte::unloaded());
    }

    /// Bytes of a present page, without faulting.
    pub fn peek_page<'f>(&self, fabric: &'f Fabric, vpn: Vpn) -> Option<&'f Arc<Page>> {
        let p = self.pte(vpn).filter(|p| p.present())?;
        fabric.frame(self.node, p.pfn())
    }

    fn check(&self, va: u64, len: usize, kind: AccessKind) -> Result<(), AccessError> {
        let last = va + len.max(1) as u64 - 1;
        let mut cur = va;
        while cur <= last {
            let vma = self.vma_of(Vpn::of(cur)).ok_or(AccessError::SegFault(cur))?;
            let ok = match kind {
                AccessKind::Read => vma.readable(),
                AccessKind::Write => vma.writable(),
            };
            if !ok {
                return Err(AccessError::ProtFault(cur));
            }
            cur = vma.end_va;
        }
        Ok(())
    }

    fn ensure_present(
        &mut self,
        fabric: &mut Fabric,
        owners: &dyn OwnerDirectory,
        t: &mut SimTime,
        vpn: Vpn,
        kind: AccessKind,
    ) -> Result<Pte, FaultError> {
        if let Some(p) = self.pte(vpn).filter(|p| p.present()) {
            return Ok(p);
        }
        self.handle_fault(fabric, owners, t, vpn, kind)?;
        Ok(self.pte(vpn).expect("fault installed an entry"))
    }

    pub fn read(
        &mut self,
        fabric: &mut Fabric,
        owners: &dyn OwnerDirectory,
        t: &mut SimTime,
        va: u64,
        len: usize,
    ) -> Result<Vec<u8>, AccessError> {
        self.check(va, len, AccessKind::Read)?;
        let mut out = Vec::with_capacity(len);
        let mut cur = va;
        let end = va + len as u64;
        while cur < end {
            let vpn = Vpn::of(cur);
            let pte = self.ensure_present(fabric, owners, t, vpn, AccessKind::Read)?;
            let off = (cur - vpn.va()) as usize;
            let n = ((end - cur) as usize).min(PAGE_SIZE - off);
            let frame = fabric.frame(self.node, pte.pfn()).expect("present frame");
            out.extend_from_slice(&frame[off..off + n]);
            cur += n as u64;
        }
        Ok(out)
    }

    pub fn write(
        &mut self,
        fabric: &mut Fabric,
        owners: &dyn OwnerDirectory,
        t: &mut SimTime,
        va: u64,
        data: &[u8],
    ) -> Result<(), AccessError> {
        self.check(va, data.len(), AccessKind::Write)?;
        let mut cur = va;
        let mut rest = data;
        while !rest.is_empty() {
            let vpn = Vpn::of(cur);
            let pte = self.ensure_present(fabric, owners, t, vpn, AccessKind::Write)?;
            let off = (cur - vpn.va()) as usize;
            let n = rest.len().min(PAGE_SIZE - off);
            let own = self.private_frame(fabric, vpn, pte);
            let pfn = fabric
                .write_frame(self.node, own, off, &rest[..n])
                .expect("node registered");
            self.overlay.insert(vpn, Pte::local(pfn).with_dirty());
            rest = &rest[n..];
            cur += n as u64;
        }
        Ok(())
    }

    /// Touches one byte of `vpn` without copying anything out.
    pub fn touch(
        &mut self,
        fabric: &mut Fabric,
        owners: &dyn OwnerDirectory,
        t: &mut SimTime,
        vpn: Vpn,
        kind: AccessKind,
    ) -> Result<(), AccessError> {
        self.check(vpn.va(), 1, kind)?;
        let pte = self.ensure_present(fabric, owners, t, vpn, kind)?;
        if kind == AccessKind::Write && !pte.dirty() {
            let own = self.private_frame(fabric, vpn, pte);
            let pfn = fabric
                .write_frame(self.node, own, 0, &[])
                .expect("node registered");
            self.overlay.insert(vpn, Pte::local(pfn).with_dirty());
        }
        Ok(())
    }

    /// A frame this space may write through: frames owned by the shared
    /// table are copied first.
    fn private_frame(&mut self, fabric: &mut Fabric, vpn: Vpn, pte: Pte) -> Pfn {
        if self.overlay.contains_key(&vpn) {
            pte.pfn()
        } else {
            fabric.copy_frame(self.node, pte.pfn()).expect("node registered")
        }
    }

    fn install(&mut self, fabric: &mut Fabric, vpn: Vpn, data: Arc<Page>) {
        let pfn = fabric.alloc_frame(self.node, data).expect("node registered");
        self.overlay.insert(vpn, Pte::local(pfn));
    }

    fn owner_entry(&self, vpn: Vpn, owner: u8) -> Result<AncestorEntry, FaultError> {
        if owner == 0 {
            return Err(FaultError::BadOwner { vpn, owner });
        }
        self.ancestors
            .get(owner as usize - 1)
            .copied()
            .ok_or(FaultError::BadOwner { vpn, owner })
    }

    /// Key for reading `vma`'s pages at ancestor `owner`, fetched from the
    /// ancestor on first use when it is not the immediate parent.
    fn key_for(
        &mut self,
        fabric: &mut Fabric,
        owners: &dyn OwnerDirectory,
        t: &mut SimTime,
        owner: u8,
        vma_idx: usize,
    ) -> Option<DcKey> {
        let vma = self.vmas[vma_idx];
        if owner == 1 {
            return Some(vma.dc_key);
        }
        if let Some(&k) = self.keys.get(&(owner, vma.vma_id)) {
            return Some(k);
        }
        let entry = *self.ancestors.get(owner as usize - 1)?;
        fabric
            .rpc_exchange(
                t,
                self.node,
                entry.node,
                KEY_LOOKUP_SERVICE,
                DC_KEY_BYTES as u64,
                Traffic::Control,
            )
            .ok()?;
        let key = owners.vma_key(&entry, vma.vma_id)?;
        self.keys.insert((owner, vma.vma_id), key);
        self.charge_keys(fabric, 1);
        Some(key)
    }

    /// Up to `prefetch` pages after `vpn` in the same VMA that are still
    /// remote with a frame at the same owner.
    pub fn prefetch_window(&self, vpn: Vpn) -> Vec<Vpn> {
        let Some(vma) = self.vma_of(vpn) else {
            return Vec::new();
        };
        let Some(pte) = self.pte(vpn).filter(|p| p.is_remote()) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut next = Vpn(vpn.0 + 1);
        while out.len() < self.config.prefetch && next < vma.end_vpn() {
            match self.pte(next) {
                Some(p) if p.is_remote() && p.owner() == pte.owner() && !p.pfn().is_none() => {
                    out.push(next)
                }
                _ => break,
            }
            next = Vpn(next.0 + 1);
        }
        out
    }

    /// Resolves a fault on a non-present page.
    pub fn handle_fault(
        &mut self,
        fabric: &mut Fabric,
        owners: &dyn OwnerDirectory,
        t: &mut SimTime,
        vpn: Vpn,
        _kind: AccessKind,
    ) -> Result<FaultResolution, FaultError> {
        let vma_idx = self
            .vma_index(vpn)
            .expect("fault outside VMA is a segfault, checked by caller");
        let pte = self.pte(vpn);
        debug_assert!(!pte.is_some_and(|p| p.present()), "fault on present page");

        let pte = match pte {
            Some(p) if p.is_remote() => p,
            _ => {
                // Not mapped at any ancestor: zero page, or the root's own
                // file page.
                let vma_id = self.vmas[vma_idx].vma_id;
                let data = match (pte, self.file_maps.get(&vma_id)) {
                    (Some(_), Some(path)) | (None, Some(path)) => {
                        let index = vpn.0 - self.vmas[vma_idx].first_vpn().0;
                        file_page_content(path, index)
                    }
                    _ => zero_page(),
                };
                self.install(fabric, vpn, data);
                self.stats.faults_local += 1;
                return Ok(FaultResolution::Local);
            }
        };

        let owner = pte.owner();
        let entry = self.owner_entry(vpn, owner)?;
        if !pte.pfn().is_none() {
            if let Some(key) = self.key_for(fabric, owners, t, owner, vma_idx) {
                if let Some(pages) = self.rdma_fault(fabric, t, vpn, pte, entry, key) {
                    return Ok(FaultResolution::Rdma { pages });
                }
            }
            if self.config.strict_revocation {
                return Err(FaultError::Revoked { vpn });
            }
        }
        self.rpc_fault(fabric, owners, t, vpn, entry)?;
        Ok(FaultResolution::Rpc)
    }

    /// Returns the number of pages read, or `None` if the read was rejected.
    fn rdma_fault(
        &mut self,
        fabric: &mut Fabric,
        t: &mut SimTime,
        vpn: Vpn,
        pte: Pte,
        entry: AncestorEntry,
        key: DcKey,
    ) -> Option<usize> {
        let window = self.prefetch_window(vpn);
        let pfn = pte.pfn();
        let contiguous = window
            .iter()
            .enumerate()
            .all(|(i, v)| self.pte(*v).map(|p| p.pfn()) == Some(Pfn(pfn.0 + 1 + i as u64)));

        if contiguous && !window.is_empty() {
            let n = 1 + window.len();
            let got = fabric
                .rdma_read_pages(t, self.node, (entry.node, key), pfn, n, Traffic::Paging)
                .expect("reader registered");
            if let ReadOutcome::Data(pages) = got {
                let mut pages = pages.into_iter();
                self.install(fabric, vpn, pages.next().unwrap());
                for (v, data) in window.iter().zip(pages) {
                    self.install(fabric, *v, data);
                }
                self.stats.faults_rdma += 1;
                self.stats.pages_prefetched += window.len() as u64;
                self.stats.bytes_over_network += (n * PAGE_SIZE) as u64;
                return Some(n);
            }
            // Guarded ranges are frozen at prepare, so a rejected batch means
            // the faulting page would be rejected too.
            return None;
        }

        let got = fabric
            .rdma_read_pages(t, self.node, (entry.node, key), pfn, 1, Traffic::Paging)
            .expect("reader registered");
        let ReadOutcome::Data(mut pages) = got else {
            return None;
        };
        self.install(fabric, vpn, pages.pop().unwrap());
        self.stats.faults_rdma += 1;
        self.stats.bytes_over_network += PAGE_SIZE as u64;
        let mut n = 1;
        if contiguous {
            return Some(n);
        }
        for v in window {
            let p = self.pte(v).expect("window entries exist");
            let got = fabric
                .rdma_read_pages(t, self.node, (entry.node, key), p.pfn(), 1, Traffic::Paging)
                .expect("reader registered");
            if let ReadOutcome::Data(mut pages) = got {
                self.install(fabric, v, pages.pop().unwrap());
                self.stats.pages_prefetched += 1;
                self.stats.bytes_over_network += PAGE_SIZE as u64;
                n += 1;
            }
        }
        Some(n)
    }

    fn rpc_fault(
        &mut self,
        fabric: &mut Fabric,
        owners: &dyn OwnerDirectory,
        t: &mut SimTime,
        vpn: Vpn,
        entry: AncestorEntry,
    ) -> Result<(), FaultError> {
        let service = fabric.cost().fallback_service();
        fabric
            .rpc_exchange(
                t,
                self.node,
                entry.node,
                service,
                PAGE_SIZE as u64,
                Traffic::Paging,
            )
            .map_err(|source| FaultError::OwnerUnreachable { vpn, source })?;
        let data = match owners.resolve(&entry, vpn) {
            Some(PageOrigin::Frame(pfn)) => fabric
                .frame(entry.node, pfn)
                .cloned()
                .ok_or(FaultError::Unserviceable { vpn })?,
            Some(PageOrigin::File { path, index }) => file_page_content(&path, index),
            Some(PageOrigin::Zero) => zero_page(),
            None => return Err(FaultError::Unserviceable { vpn }),
        };
        self.install(fabric, vpn, data);
        self.stats.faults_rpc += 1;
        self.stats.bytes_over_network += PAGE_SIZE as u64;
        Ok(())
    }

    /// Owner-side fallback: what this (parent) space can serve for `vpn`.
    pub fn serve_fallback(&self, vpn: Vpn) -> Option<PageOrigin> {
        let vma = self.vma_of(vpn)?;
        match self.pte(vpn) {
            Some(p) if p.present() => Some(PageOrigin::Frame(p.pfn())),
            Some(p) if p.is_remote() => None,
            _ => Some(match self.file_maps.get(&vma.vma_id) {
                Some(path) => PageOrigin::File {
                    path: path.clone(),
                    index: vpn.0 - vma.first_vpn().0,
                },
                None => PageOrigin::Zero,
            }),
        }
    }

    /// Snapshot of the clean, inherited part of this space for the page-table
    /// cache. Dirty entries revert to what the shared base holds; purely local
    /// pages are dropped.
    pub(crate) fn clean_snapshot(&self) -> Vec<(Vpn, Pte)> {
        let mut out = Vec::with_capacity(self.base.len());
        for (vpn, pte) in self.entries() {
            let base = self.base_pte(vpn);
            let chosen = if pte.dirty() { base } else if base.is_some() { Some(pte) } else { None };
            if let Some(p) = chosen {
                out.push((vpn, p));
            }
        }
        out
    }

    /// Releases every frame and key this space holds.
    pub fn release(&mut self, fabric: &mut Fabric) {
        for pte in self.overlay.values() {
            if pte.present() {
                fabric.release_frame(self.node, pte.pfn());
            }
        }
        self.overlay.clear();
        let base = std::mem::replace(&mut self.base, Arc::new(Vec::new()));
        release_table(fabric, self.node, base);
        fabric.sub_aux_bytes(self.node, self.aux_bytes);
        self.aux_bytes = 0;
    }

    /// Canonical content hash of every mapped page, faulting nothing.
    pub fn content_hash(&self, fabric: &Fabric) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for (vpn, pte) in self.entries() {
            vpn.hash(&mut h);
            pte.present().hash(&mut h);
            if pte.present() {
                if let Some(f) = fabric.frame(self.node, pte.pfn()) {
                    f[..].hash(&mut h);
                }
            } else {
                pte.0.hash(&mut h);
            }
        }
        h.finish()
    }

    /// Whether this space materialized clean pages its shared table lacks.
    pub(crate) fn has_new_clean_pages(&self) -> bool {
        self.overlay.values().any(|p| p.present() && !p.dirty())
    }

    pub(crate) fn base(&self) -> &Arc<Vec<(Vpn, Pte)>> {
        &self.base
    }

    pub(crate) fn from_snapshot(
        fabric: &mut Fabric,
        node: NodeId,
        entry: &PtCacheEntry,
        config: PagingConfig,
    ) -> AddressSpace {
        let mut space = AddressSpace {
            node,
            ancestors: entry.ancestors.clone(),
            vmas: entry.vmas.clone(),
            base: entry.table.clone(),
            overlay: BTreeMap::new(),
            keys: entry.keys.clone(),
            file_maps: BTreeMap::new(),
            config,
            stats: PagingStats::default(),
            aux_bytes: 0,
        };
        let n = (space.vmas.len() + space.keys.len()) as u64;
        space.charge_keys(fabric, n);
        space
    }

    pub(crate) fn keys(&self) -> &HashMap<(u8, u32), DcKey> {
        &self.keys
    }
}

/// Drops one handle on a shared table, releasing its frames if it was the last.
pub(crate) fn release_table(fabric: &mut Fabric, node: NodeId, table: Arc<Vec<(Vpn, Pte)>>) {
    if let Some(table) = Arc::into_inner(table) {
        for (_, pte) in table {
            if pte.present() {
                fabric.release_frame(node, pte.pfn());
            }
        }
    }
}

#[cfg(test)]
mod tests;
