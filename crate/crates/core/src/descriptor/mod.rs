//! Container descriptors: everything a child needs to resume a parent except
//! the memory pages themselves.

mod build;
mod pte;
mod store;
mod wire;

use std::fmt;

use thiserror::Error;

pub use build::{build_descriptor, ParentImage};
pub use pte::{Pte, MAX_OWNER};
pub use store::{fetch_descriptor, AuthReply, DescriptorStore, Published};
pub use wire::{deserialize, serialize, serialized_len, HEADER_LEN, MAGIC, PER_PTE_LEN, PER_VMA_LEN, VERSION};

use crate::fabric::{DcKey, NodeId, PAGE_SIZE};

/// Virtual page number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vpn(pub u64);

impl Vpn {
    pub fn of(va: u64) -> Vpn {
        Vpn(va / PAGE_SIZE as u64)
    }

    pub fn va(self) -> u64 {
        self.0 * PAGE_SIZE as u64
    }
}

pub mod prot {
    pub const READ: u8 = 1;
    pub const WRITE: u8 = 2;
    pub const EXEC: u8 = 4;
    pub const RW: u8 = READ | WRITE;
}

pub mod vma_flags {
    pub const GROWS_DOWN: u8 = 1;
    pub const SHARED: u8 = 2;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vma {
    pub vma_id: u32,
    pub start_va: u64,
    /// Exclusive.
    pub end_va: u64,
    pub prot: u8,
    pub flags: u8,
    pub dc_key: DcKey,
}

impl Vma {
    pub fn new(vma_id: u32, start_va: u64, end_va: u64, prot: u8, flags: u8) -> Vma {
        Vma {
            vma_id,
            start_va,
            end_va,
            prot,
            flags,
            dc_key: DcKey::default(),
        }
    }

    pub fn is_valid(&self) -> bool {
        let page = PAGE_SIZE as u64;
        self.start_va < self.end_va && self.start_va.is_multiple_of(page) && self.end_va.is_multiple_of(page)
    }

    pub fn contains_va(&self, va: u64) -> bool {
        va >= self.start_va && va < self.end_va
    }

    pub fn contains(&self, vpn: Vpn) -> bool {
        self.contains_va(vpn.va())
    }

    pub fn first_vpn(&self) -> Vpn {
        Vpn::of(self.start_va)
    }

    /// One past the last page.
    pub fn end_vpn(&self) -> Vpn {
        Vpn::of(self.end_va)
    }

    pub fn pages(&self) -> u64 {
        (self.end_va - self.start_va) / PAGE_SIZE as u64
    }

    pub fn grows_down(&self) -> bool {
        self.flags & vma_flags::GROWS_DOWN != 0
    }

    pub fn readable(&self) -> bool {
        self.prot & prot::READ != 0
    }

    pub fn writable(&self) -> bool {
        self.prot & prot::WRITE != 0
    }
}

/// One hop of a container's lineage, addressed by owner index `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AncestorEntry {
    pub node: NodeId,
    pub handle_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub fd: u32,
    pub path: String,
    pub offset: u64,
    pub flags: u32,
}

pub const REGISTERS_LEN: usize = 256;

/// Opaque CPU register block, restored verbatim.
#[derive(Clone, PartialEq, Eq)]
pub struct Registers(pub [u8; REGISTERS_LEN]);

impl Default for Registers {
    fn default() -> Self {
        Registers([0; REGISTERS_LEN])
    }
}

impl fmt::Debug for Registers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nz = self.0.iter().filter(|&&b| b != 0).count();
        write!(f, "Registers({nz} nonzero bytes)")
    }
}

/// A VMA together with its remote-tagged entries, sorted by vpn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescribedVma {
    pub vma: Vma,
    pub ptes: Vec<(Vpn, Pte)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContainerDescriptor {
    pub handle_id: u64,
    pub isolation: Vec<u8>,
    pub registers: Registers,
    pub ancestors: Vec<AncestorEntry>,
    pub vmas: Vec<DescribedVma>,
    pub files: Vec<FileEntry>,
}

impl ContainerDescriptor {
    pub fn pte_count(&self) -> usize {
        self.vmas.iter().map(|v| v.ptes.len()).sum()
    }
}

/// Address of a published descriptor plus its authentication secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DescriptorId {
    pub node: NodeId,
    pub handle_id: u64,
    pub key: u64,
}

impl DescriptorId {
    pub fn ancestor(&self) -> AncestorEntry {
        AncestorEntry {
            node: self.node,
            handle_id: self.handle_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptorError {
    #[error("VMA {0} has no access key assigned")]
    MissingAccessKey(u32),
    #[error("malformed descriptor at byte {offset}: {reason}")]
    MalformedDescriptor { offset: usize, reason: &'static str },
    #[error("descriptor authentication failed")]
    AuthFailed,
    #[error("no such descriptor")]
    NoSuchDescriptor,
    #[error("descriptor owner {0} unreachable")]
    Timeout(NodeId),
}
