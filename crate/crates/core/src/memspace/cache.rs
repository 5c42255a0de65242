use std::collections::HashMap;
use std::sync::Arc;

use super::{release_table, AddressSpace, PagingConfig};
use crate::descriptor::{AncestorEntry, DescriptorId, Pte, Vma, Vpn};
use crate::fabric::{DcKey, Fabric, NodeId};
use crate::time::SimTime;

/// A finished child's page table, kept so the next child of the same parent
/// on this node can start from it.
#[derive(Debug, Clone)]
pub struct PtCacheEntry {
    pub parent: DescriptorId,
    pub(crate) ancestors: Vec<AncestorEntry>,
    pub(crate) vmas: Vec<Vma>,
    pub(crate) keys: HashMap<(u8, u32), DcKey>,
    /// Holds one reference per present frame, shared with every space
    /// started from it.
    pub(crate) table: Arc<Vec<(Vpn, Pte)>>,
    pub expires_at: SimTime,
}

impl PtCacheEntry {
    pub fn present_pages(&self) -> usize {
        self.table.iter().filter(|(_, p)| p.present()).count()
    }
}

/// Per-node short-lived page-table cache keyed by parent descriptor.
#[derive(Debug)]
pub struct PtCache {
    node: NodeId,
    entries: HashMap<(NodeId, u64), PtCacheEntry>,
}

impl PtCache {
    pub fn new(node: NodeId) -> Self {
        PtCache {
            node,
            entries: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores a snapshot of `space`, replacing any older one for `parent`.
    pub fn put(
        &mut self,
        fabric: &mut Fabric,
        parent: DescriptorId,
        space: &AddressSpace,
        now: SimTime,
    ) {
        assert_eq!(space.node(), self.node, "cache and space on different nodes");
        let expires_at = now + space.config().pt_cache_ttl;
        let k = (parent.node, parent.handle_id);
        if let Some(e) = self.entries.get_mut(&k) {
            // Nothing new to remember: keep the table, extend its life.
            if e.parent == parent
                && Arc::ptr_eq(&e.table, space.base())
                && !space.has_new_clean_pages()
            {
                e.expires_at = expires_at;
                return;
            }
        }
        let table = space.clean_snapshot();
        for (_, pte) in &table {
            if pte.present() {
                fabric.share_frame(self.node, pte.pfn());
            }
        }
        let entry = PtCacheEntry {
            parent,
            ancestors: space.ancestors().to_vec(),
            vmas: space.vmas().to_vec(),
            keys: space.keys().clone(),
            table: Arc::new(table),
            expires_at,
        };
        if let Some(old) = self.entries.insert(k, entry) {
            release_table(fabric, self.node, old.table);
        }
    }

    /// A live entry for `parent`, evicting it first if it has expired.
    pub fn get(&mut self, fabric: &mut Fabric, parent: DescriptorId, now: SimTime) -> Option<&PtCacheEntry> {
        let k = (parent.node, parent.handle_id);
        if self.entries.get(&k).is_some_and(|e| e.expires_at <= now) {
            let old = self.entries.remove(&k).unwrap();
            release_table(fabric, self.node, old.table);
        }
        self.entries.get(&k).filter(|e| e.parent == parent)
    }

    /// Starts a new address space from the cached snapshot, if one is live.
    pub fn instantiate(
        &mut self,
        fabric: &mut Fabric,
        parent: DescriptorId,
        now: SimTime,
        config: PagingConfig,
    ) -> Option<AddressSpace> {
        let node = self.node;
        let entry = self.get(fabric, parent, now)?.clone();
        Some(AddressSpace::from_snapshot(fabric, node, &entry, config))
    }

    /// Drops every expired entry; returns how many were evicted.
    pub fn evict_expired(&mut self, fabric: &mut Fabric, now: SimTime) -> usize {
        let expired: Vec<_> = self
            .entries
            .iter()
            .filter(|(_, e)| e.expires_at <= now)
            .map(|(k, _)| *k)
            .collect();
        for k in &expired {
            let e = self.entries.remove(k).unwrap();
            release_table(fabric, self.node, e.table);
        }
        expired.len()
    }

    /// Drops the entry for `parent` regardless of age.
    pub fn invalidate(&mut self, fabric: &mut Fabric, parent: &AncestorEntry) {
        if let Some(e) = self.entries.remove(&(parent.node, parent.handle_id)) {
            release_table(fabric, self.node, e.table);
        }
    }

    pub fn clear(&mut self, fabric: &mut Fabric) {
        for (_, e) in self.entries.drain() {
            release_table(fabric, self.node, e.table);
        }
    }

    pub fn next_expiry(&self) -> Option<SimTime> {
        self.entries.values().map(|e| e.expires_at).min()
    }
}
