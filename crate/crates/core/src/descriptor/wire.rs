//! Little-endian wire format.
//!
//! ```text
//! header   magic u32 | version u16 | handle_id u64 | ancestor_count u8
//!          vma_count u32 | file_count u32 | isolation_len u32
//!          isolation bytes | registers 256 B
//! ancestor node u32 | handle_id u64
//! vma      vma_id u32 | start u64 | end u64 | prot u8 | flags u8
//!          dc_key 12 B | pte_count u32 | pte_count x (vpn u64, pte u64)
//! file     fd u32 | flags u32 | offset u64 | path_len u16 | path bytes
//! ```

use super::{
    AncestorEntry, ContainerDescriptor, DescribedVma, DescriptorError, FileEntry, Pte, Registers,
    Vma, Vpn, MAX_OWNER, REGISTERS_LEN,
};
use crate::fabric::{DcKey, NodeId, DC_KEY_BYTES};

pub const MAGIC: u32 = 0x4D49_5430;
pub const VERSION: u16 = 1;

/// Fixed header bytes, excluding the isolation block.
pub const HEADER_LEN: usize = 4 + 2 + 8 + 1 + 4 + 4 + 4 + REGISTERS_LEN;
pub const ANCESTOR_LEN: usize = 4 + 8;
/// Fixed bytes per VMA, excluding its entries.
pub const PER_VMA_LEN: usize = 4 + 8 + 8 + 1 + 1 + DC_KEY_BYTES + 4;
pub const PER_PTE_LEN: usize = 16;
const PER_FILE_LEN: usize = 4 + 4 + 8 + 2;

pub fn serialized_len(d: &ContainerDescriptor) -> usize {
    HEADER_LEN
        + d.isolation.len()
        + d.ancestors.len() * ANCESTOR_LEN
        + d.vmas
            .iter()
            .map(|v| PER_VMA_LEN + v.ptes.len() * PER_PTE_LEN)
            .sum::<usize>()
        + d.files
            .iter()
            .map(|f| PER_FILE_LEN + f.path.len())
            .sum::<usize>()
}

/// Encodes `d`. Panics on values the format cannot carry (more than 255
/// ancestors, paths longer than 65535 bytes).
pub fn serialize(d: &ContainerDescriptor) -> Vec<u8> {
    let mut out = Vec::with_capacity(serialized_len(d));
    out.extend_from_slice(&MAGIC.to_le_bytes());
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&d.handle_id.to_le_bytes());
    out.push(u8::try_from(d.ancestors.len()).expect("ancestor table too long"));
    out.extend_from_slice(&(d.vmas.len() as u32).to_le_bytes());
    out.extend_from_slice(&(d.files.len() as u32).to_le_bytes());
    out.extend_from_slice(&(d.isolation.len() as u32).to_le_bytes());
    out.extend_from_slice(&d.isolation);
    out.extend_from_slice(&d.registers.0);
    for a in &d.ancestors {
        out.extend_from_slice(&a.node.0.to_le_bytes());
        out.extend_from_slice(&a.handle_id.to_le_bytes());
    }
    for dv in &d.vmas {
        let v = &dv.vma;
        out.extend_from_slice(&v.vma_id.to_le_bytes());
        out.extend_from_slice(&v.start_va.to_le_bytes());
        out.extend_from_slice(&v.end_va.to_le_bytes());
        out.push(v.prot);
        out.push(v.flags);
        out.extend_from_slice(&v.dc_key.to_bytes());
        out.extend_from_slice(&(dv.ptes.len() as u32).to_le_bytes());
        for (vpn, pte) in &dv.ptes {
            out.extend_from_slice(&vpn.0.to_le_bytes());
            out.extend_from_slice(&pte.0.to_le_bytes());
        }
    }
    for f in &d.files {
        out.extend_from_slice(&f.fd.to_le_bytes());
        out.extend_from_slice(&f.flags.to_le_bytes());
        out.extend_from_slice(&f.offset.to_le_bytes());
        let len = u16::try_from(f.path.len()).expect("path too long");
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(f.path.as_bytes());
    }
    debug_assert_eq!(out.len(), serialized_len(d));
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DescriptorError> {
        if self.buf.len() - self.pos < n {
            return Err(malformed(self.pos, "truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DescriptorError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8, DescriptorError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DescriptorError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, DescriptorError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, DescriptorError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    /// Guards against absurd counts before allocating.
    fn expect_at_least(&self, n: usize) -> Result<(), DescriptorError> {
        if self.buf.len() - self.pos < n {
            Err(malformed(self.pos, "truncated"))
        } else {
            Ok(())
        }
    }
}

fn malformed(offset: usize, reason: &'static str) -> DescriptorError {
    DescriptorError::MalformedDescriptor { offset, reason }
}

pub fn deserialize(bytes: &[u8]) -> Result<ContainerDescriptor, DescriptorError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.u32()? != MAGIC {
        return Err(malformed(0, "bad magic"));
    }
    if r.u16()? != VERSION {
        return Err(malformed(4, "unsupported version"));
    }
    let handle_id = r.u64()?;
    let ancestor_at = r.pos;
    let ancestor_count = r.u8()? as usize;
    if ancestor_count > MAX_OWNER as usize {
        return Err(malformed(ancestor_at, "too many ancestors"));
    }
    let vma_count = r.u32()? as usize;
    let file_count = r.u32()? as usize;
    let isolation_len = r.u32()? as usize;
    let isolation = r.take(isolation_len)?.to_vec();
    let registers = Registers(r.array::<REGISTERS_LEN>()?);

    let mut ancestors = Vec::with_capacity(ancestor_count);
    for _ in 0..ancestor_count {
        let node = NodeId(r.u32()?);
        let handle_id = r.u64()?;
        ancestors.push(AncestorEntry { node, handle_id });
    }

    r.expect_at_least(vma_count.saturating_mul(PER_VMA_LEN))?;
    let mut vmas: Vec<DescribedVma> = Vec::with_capacity(vma_count);
    for _ in 0..vma_count {
        let at = r.pos;
        let vma_id = r.u32()?;
        let start_va = r.u64()?;
        let end_va = r.u64()?;
        let prot = r.u8()?;
        let flags = r.u8()?;
        let dc_key = DcKey::from_bytes(r.array()?);
        let vma = Vma {
            vma_id,
            start_va,
            end_va,
            prot,
            flags,
            dc_key,
        };
        if !vma.is_valid() {
            return Err(malformed(at, "VMA bounds not page-aligned or empty"));
        }
        if let Some(prev) = vmas.last() {
            if prev.vma.end_va > start_va {
                return Err(malformed(at, "VMAs overlap or are unsorted"));
            }
        }
        let pte_count = r.u32()? as usize;
        r.expect_at_least(pte_count.saturating_mul(PER_PTE_LEN))?;
        let mut ptes = Vec::with_capacity(pte_count);
        for _ in 0..pte_count {
            let at = r.pos;
            let vpn = Vpn(r.u64()?);
            let pte = Pte(r.u64()?);
            if !vma.contains(vpn) {
                return Err(malformed(at, "PTE outside its VMA"));
            }
            ptes.push((vpn, pte));
        }
        vmas.push(DescribedVma { vma, ptes });
    }

    r.expect_at_least(file_count.saturating_mul(PER_FILE_LEN))?;
    let mut files = Vec::with_capacity(file_count);
    for _ in 0..file_count {
        let fd = r.u32()?;
        let flags = r.u32()?;
        let offset = r.u64()?;
        let len = r.u16()? as usize;
        let at = r.pos;
        let path = std::str::from_utf8(r.take(len)?)
            .map_err(|_| malformed(at, "path is not UTF-8"))?
            .to_string();
        files.push(FileEntry {
            fd,
            path,
            offset,
            flags,
        });
    }

    if r.pos != bytes.len() {
        return Err(malformed(r.pos, "trailing bytes"));
    }
    Ok(ContainerDescriptor {
        handle_id,
        isolation,
        registers,
        ancestors,
        vmas,
        files,
    })
}
