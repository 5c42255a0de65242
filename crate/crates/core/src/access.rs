//! Connection-based memory access control.
//!
//! Each parent VMA is guarded by its own DC target, drawn from a per-node
//! pool of pre-created targets. Destroying the target revokes every child
//! read into that VMA and nothing else.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::descriptor::{DescriptorError, DescriptorId, DescriptorStore};
use crate::fabric::{DcKey, Fabric, NodeId, PageRange, Pfn};
use crate::memspace::AddressSpace;
use crate::time::{Nanos, SimTime};

#[derive(Debug, Clone, PartialEq)]
pub struct PoolConfig {
    pub capacity: usize,
    pub low_watermark: usize,
    pub refill_period: Nanos,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            capacity: 64,
            low_watermark: 16,
            refill_period: Nanos::from_ms(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AccessControlError {
    #[error("VMA {0} has no live target in this descriptor")]
    NoSuchVma(u32),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
}

/// Pre-created, unassigned DC targets on one node.
#[derive(Debug)]
pub struct TargetPool {
    node: NodeId,
    free: VecDeque<DcKey>,
    config: PoolConfig,
    created_sync: u64,
}

impl TargetPool {
    pub fn new(node: NodeId, config: PoolConfig) -> Self {
        TargetPool {
            node,
            free: VecDeque::new(),
            config,
            created_sync: 0,
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn free(&self) -> usize {
        self.free.len()
    }

    pub fn config(&self) -> &PoolConfig {
        &self.config
    }

    /// Targets that had to be created on the caller's critical path.
    pub fn created_sync(&self) -> u64 {
        self.created_sync
    }

    pub fn needs_refill(&self) -> bool {
        self.free.len() < self.config.low_watermark
    }

    /// Tops the pool up to capacity off the critical path. The connect
    /// charges go to the ledger but not to any caller's clock.
    pub fn refill(&mut self, fabric: &mut Fabric) -> usize {
        let mut background = SimTime::ZERO;
        let mut created = 0;
        while self.free.len() < self.config.capacity {
            let user_key = fabric.next_random();
            let key = fabric
                .create_dc_target(&mut background, self.node, user_key, Vec::new())
                .expect("pool node registered");
            self.free.push_back(key);
            created += 1;
        }
        created
    }

    /// One unassigned target, created synchronously if the pool is empty.
    pub fn take(&mut self, fabric: &mut Fabric, t: &mut SimTime) -> DcKey {
        match self.free.pop_front() {
            Some(k) => k,
            None => {
                self.created_sync += 1;
                let user_key = fabric.next_random();
                fabric
                    .create_dc_target(t, self.node, user_key, Vec::new())
                    .expect("pool node registered")
            }
        }
    }

    /// Gives every VMA of `space` its own target guarding the VMA's current
    /// physical pages on this node.
    pub fn assign_targets(
        &mut self,
        fabric: &mut Fabric,
        t: &mut SimTime,
        space: &AddressSpace,
    ) -> BTreeMap<u32, DcKey> {
        assert_eq!(space.node(), self.node, "assigning targets on a foreign node");
        let entries = space.entries();
        let mut out = BTreeMap::new();
        for vma in space.vmas() {
            let mut pfns: Vec<Pfn> = entries
                .iter()
                .filter(|(vpn, pte)| vma.contains(*vpn) && pte.present())
                .map(|(_, pte)| pte.pfn())
                .collect();
            pfns.sort();
            let key = self.take(fabric, t);
            fabric
                .set_guarded_ranges(self.node, key, coalesce(&pfns))
                .expect("fresh target is live");
            out.insert(vma.vma_id, key);
        }
        out
    }
}

/// Sorted pfns to maximal contiguous ranges.
fn coalesce(pfns: &[Pfn]) -> Vec<PageRange> {
    let mut out: Vec<PageRange> = Vec::new();
    for &p in pfns {
        match out.last_mut() {
            Some(r) if r.start.0 + r.count == p.0 => r.count += 1,
            _ => out.push(PageRange::new(p, 1)),
        }
    }
    out
}

/// Destroys the target guarding `vma_id` of descriptor `id`. Every later
/// child read into that VMA is rejected, including pages that never moved.
pub fn revoke_vma(
    fabric: &mut Fabric,
    store: &mut DescriptorStore,
    id: &DescriptorId,
    vma_id: u32,
    at: SimTime,
) -> Result<(), AccessControlError> {
    store.authenticate(id)?;
    let published = store.get_mut(id.handle_id).expect("authenticated");
    let key = published
        .vma_keys
        .remove(&vma_id)
        .ok_or(AccessControlError::NoSuchVma(vma_id))?;
    fabric
        .destroy_dc_target(id.node, key, at)
        .map_err(|_| AccessControlError::NoSuchVma(vma_id))
}
