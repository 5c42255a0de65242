use std::collections::BTreeMap;

use super::{ContainerDescriptor, DescribedVma, DescriptorError, FileEntry, Pte, Registers};
use crate::fabric::DcKey;
use crate::memspace::AddressSpace;

/// The parts of a paused container a descriptor is built from.
#[derive(Debug, Clone, Copy)]
pub struct ParentImage<'a> {
    pub space: &'a AddressSpace,
    pub isolation: &'a [u8],
    pub registers: &'a Registers,
    pub files: &'a [FileEntry],
}

/// Mirrors the parent's VMAs and page table as remote entries. Local pages
/// get owner 0; pages the parent itself still maps remotely keep their owner
/// index, which refers to the same ancestor table the descriptor carries.
pub fn build_descriptor(
    handle_id: u64,
    parent: ParentImage<'_>,
    assignments: &BTreeMap<u32, DcKey>,
) -> Result<ContainerDescriptor, DescriptorError> {
    let space = parent.space;
    let entries = space.entries();
    let mut vmas = Vec::with_capacity(space.vmas().len());
    let mut cursor = 0;
    for vma in space.vmas() {
        let key = *assignments
            .get(&vma.vma_id)
            .ok_or(DescriptorError::MissingAccessKey(vma.vma_id))?;
        let mut ptes = Vec::new();
        while cursor < entries.len() && entries[cursor].0 < vma.first_vpn() {
            cursor += 1;
        }
        while cursor < entries.len() && entries[cursor].0 < vma.end_vpn() {
            let (vpn, pte) = entries[cursor];
            let remote = if pte.present() {
                Pte::remote(pte.pfn(), 0)
            } else if pte.is_remote() {
                Pte::remote(pte.pfn(), pte.owner())
            } else {
                Pte::remote(crate::fabric::Pfn::NONE, 0)
            };
            ptes.push((vpn, remote));
            cursor += 1;
        }
        let mut vma = *vma;
        vma.dc_key = key;
        vmas.push(DescribedVma { vma, ptes });
    }
    Ok(ContainerDescriptor {
        handle_id,
        isolation: parent.isolation.to_vec(),
        registers: parent.registers.clone(),
        ancestors: space.ancestors().to_vec(),
        vmas,
        files: parent.files.to_vec(),
    })
}
