use std::collections::{BTreeMap, HashMap};

use super::{deserialize, serialize, ContainerDescriptor, DescriptorError, DescriptorId};
use crate::fabric::{
    transfer_time, DcKey, Fabric, NodeId, PageRange, Pfn, ReadOutcome, RpcError, Traffic,
    PAGE_SIZE,
};
use crate::time::{Nanos, SimTime};

/// A descriptor pinned in its node's memory.
#[derive(Debug, Clone)]
pub struct Published {
    pub id: DescriptorId,
    pub start: Pfn,
    pub len: usize,
    pub desc_key: DcKey,
    /// Live VMA targets; revoked VMAs are removed.
    pub vma_keys: BTreeMap<u32, DcKey>,
    pub published_at: SimTime,
}

/// What a successful authentication RPC discloses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthReply {
    pub addr: u64,
    pub len: usize,
    pub key: DcKey,
}

const AUTH_REPLY_BYTES: u64 = 8 + 4 + 12;

/// Per-node table of published descriptors.
#[derive(Debug)]
pub struct DescriptorStore {
    node: NodeId,
    next_handle: u64,
    live: HashMap<u64, Published>,
}

impl DescriptorStore {
    pub fn new(node: NodeId) -> Self {
        DescriptorStore {
            node,
            next_handle: 1,
            live: HashMap::new(),
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    /// Allocates a handle for a descriptor about to be built.
    pub fn reserve_handle(&mut self) -> u64 {
        let h = self.next_handle;
        self.next_handle += 1;
        h
    }

    /// Pins the serialized descriptor and guards it with `desc_key`.
    /// Charges the copy into pinned memory.
    pub fn publish(
        &mut self,
        fabric: &mut Fabric,
        t: &mut SimTime,
        descriptor: &ContainerDescriptor,
        desc_key: DcKey,
        vma_keys: BTreeMap<u32, DcKey>,
    ) -> DescriptorId {
        assert!(
            !self.live.contains_key(&descriptor.handle_id),
            "handle {} already published",
            descriptor.handle_id
        );
        let bytes = serialize(descriptor);
        let len = bytes.len();
        *t += transfer_time(len as u64, fabric.cost().file_copy_bandwidth);
        let start = fabric.pin_buffer(self.node, bytes).expect("node registered");
        let pages = len.div_ceil(PAGE_SIZE) as u64;
        fabric
            .set_guarded_ranges(self.node, desc_key, vec![PageRange::new(start, pages)])
            .expect("descriptor target is live");
        let id = DescriptorId {
            node: self.node,
            handle_id: descriptor.handle_id,
            key: fabric.next_random(),
        };
        self.live.insert(
            id.handle_id,
            Published {
                id,
                start,
                len,
                desc_key,
                vma_keys,
                published_at: *t,
            },
        );
        id
    }

    fn check(&self, id: &DescriptorId) -> Result<&Published, DescriptorError> {
        if id.node != self.node {
            return Err(DescriptorError::NoSuchDescriptor);
        }
        let p = self
            .live
            .get(&id.handle_id)
            .ok_or(DescriptorError::NoSuchDescriptor)?;
        if p.id.key != id.key {
            return Err(DescriptorError::AuthFailed);
        }
        Ok(p)
    }

    /// Server side of the fetch handshake.
    pub fn authenticate(&self, id: &DescriptorId) -> Result<AuthReply, DescriptorError> {
        let p = self.check(id)?;
        Ok(AuthReply {
            addr: p.start.0 * PAGE_SIZE as u64,
            len: p.len,
            key: p.desc_key,
        })
    }

    pub fn get(&self, handle_id: u64) -> Option<&Published> {
        self.live.get(&handle_id)
    }

    pub fn get_mut(&mut self, handle_id: u64) -> Option<&mut Published> {
        self.live.get_mut(&handle_id)
    }

    pub fn is_published(&self, handle_id: u64) -> bool {
        self.live.contains_key(&handle_id)
    }

    pub fn vma_key(&self, handle_id: u64, vma_id: u32) -> Option<DcKey> {
        self.live.get(&handle_id)?.vma_keys.get(&vma_id).copied()
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = DescriptorId> + '_ {
        self.live.values().map(|p| p.id)
    }

    /// Unpins the descriptor and destroys its descriptor and VMA targets.
    pub fn reclaim(
        &mut self,
        fabric: &mut Fabric,
        id: &DescriptorId,
        at: SimTime,
    ) -> Result<Published, DescriptorError> {
        self.check(id)?;
        let p = self.live.remove(&id.handle_id).unwrap();
        fabric.unpin_buffer(self.node, p.start);
        let _ = fabric.destroy_dc_target(self.node, p.desc_key, at);
        for key in p.vma_keys.values() {
            let _ = fabric.destroy_dc_target(self.node, *key, at);
        }
        Ok(p)
    }
}

/// Child side: authenticate over RPC, then read the descriptor one-sidedly.
pub fn fetch_descriptor(
    fabric: &mut Fabric,
    parent_store: &DescriptorStore,
    t: &mut SimTime,
    child: NodeId,
    id: &DescriptorId,
) -> Result<ContainerDescriptor, DescriptorError> {
    fabric
        .rpc_exchange(t, child, id.node, Nanos::ZERO, AUTH_REPLY_BYTES, Traffic::Descriptor)
        .map_err(|e| match e {
            RpcError::Timeout(n) => DescriptorError::Timeout(n),
            _ => DescriptorError::NoSuchDescriptor,
        })?;
    let reply = parent_store.authenticate(id)?;
    let bytes = fabric
        .rdma_read_bytes(t, child, (id.node, reply.key), reply.addr, reply.len, Traffic::Descriptor)
        .expect("child registered");
    match bytes {
        ReadOutcome::Data(b) => deserialize(&b),
        ReadOutcome::Rejected => Err(DescriptorError::NoSuchDescriptor),
    }
}
