use std::fmt;

use crate::fabric::Pfn;

/// Packed 64-bit page-table entry.
///
/// ```text
///  63      58 57 56   52 51                    12 11   7 6   1 0
/// +--------+--+-------+-------------------------+------+--+---+-+
/// |        |R |       | owner |  physical page number |  |D|   |P|
/// +--------+--+-------+-------------------------+------+--+---+-+
/// ```
///
/// `P` present, `D` dirty (software), `R` remote; owner is bits 52..55.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Pte(pub u64);

const PRESENT: u64 = 1 << 0;
const DIRTY: u64 = 1 << 6;
const REMOTE: u64 = 1 << 58;
const OWNER_SHIFT: u32 = 52;
const OWNER_MASK: u64 = 0xF << OWNER_SHIFT;
const PFN_SHIFT: u32 = 12;
const PFN_MASK: u64 = ((1u64 << 40) - 1) << PFN_SHIFT;

/// Largest representable owner index; also the ancestor-table limit.
pub const MAX_OWNER: u8 = 15;

impl Pte {
    /// Materialized page backed by a local frame.
    pub fn local(pfn: Pfn) -> Pte {
        Pte(PRESENT | ((pfn.0 << PFN_SHIFT) & PFN_MASK))
    }

    /// Page held by ancestor `owner` at physical page `pfn`. A `Pfn::NONE`
    /// means the owner maps the page but has no frame for it.
    pub fn remote(pfn: Pfn, owner: u8) -> Pte {
        assert!(owner <= MAX_OWNER, "owner index {owner} exceeds 4 bits");
        Pte(REMOTE | ((owner as u64) << OWNER_SHIFT) | ((pfn.0 << PFN_SHIFT) & PFN_MASK))
    }

    /// Mapped at this container but not resident anywhere (e.g. a file page
    /// that was never loaded).
    pub fn unloaded() -> Pte {
        Pte(0)
    }

    pub fn present(self) -> bool {
        self.0 & PRESENT != 0
    }

    pub fn is_remote(self) -> bool {
        self.0 & REMOTE != 0
    }

    pub fn dirty(self) -> bool {
        self.0 & DIRTY != 0
    }

    pub fn with_dirty(self) -> Pte {
        Pte(self.0 | DIRTY)
    }

    pub fn owner(self) -> u8 {
        ((self.0 & OWNER_MASK) >> OWNER_SHIFT) as u8
    }

    pub fn pfn(self) -> Pfn {
        Pfn((self.0 & PFN_MASK) >> PFN_SHIFT)
    }

    pub fn with_owner(self, owner: u8) -> Pte {
        assert!(owner <= MAX_OWNER, "owner index {owner} exceeds 4 bits");
        Pte((self.0 & !OWNER_MASK) | ((owner as u64) << OWNER_SHIFT))
    }
}

impl fmt::Debug for Pte {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Pte({:#018x} p={} r={} d={} owner={} pfn={})",
            self.0,
            self.present() as u8,
            self.is_remote() as u8,
            self.dirty() as u8,
            self.owner(),
            self.pfn().0
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bit_positions() {
        let p = Pte::remote(Pfn(1), 0);
        assert_eq!(p.0, (1 << 58) | (1 << 12));
        let p = Pte::remote(Pfn::NONE, 15);
        assert_eq!(p.0, (1 << 58) | (0xF << 52));
        assert_eq!(Pte::local(Pfn(3)).0, 1 | (3 << 12));
    }

    #[test]
    #[should_panic]
    fn owner_must_fit_in_four_bits() {
        Pte::remote(Pfn(1), 16);
    }

    proptest! {
        #[test]
        fn fields_are_independent(pfn in 0u64..(1 << 40), owner in 0u8..=15) {
            let p = Pte::remote(Pfn(pfn), owner);
            prop_assert!(p.is_remote());
            prop_assert!(!p.present());
            prop_assert_eq!(p.owner(), owner);
            prop_assert_eq!(p.pfn(), Pfn(pfn));
            let l = Pte::local(Pfn(pfn));
            prop_assert!(l.present() && !l.is_remote());
            prop_assert_eq!(l.owner(), 0);
            prop_assert_eq!(l.with_dirty().pfn(), Pfn(pfn));
        }
    }
}
