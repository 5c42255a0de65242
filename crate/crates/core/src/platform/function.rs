use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;

use crate::descriptor::{prot, vma_flags, Vma, Vpn};
use crate::fabric::{Fabric, NodeId, Page, PAGE_SIZE};
use crate::memspace::{file_page_content, AddressSpace, PagingConfig};
use crate::time::Nanos;

pub const PAGES_PER_MB: u64 = (1 << 20) / PAGE_SIZE as u64;

/// First page of a function's image; the working set is its prefix.
pub const IMAGE_BASE: Vpn = Vpn(0x10_0000);
pub const STACK_TOP: Vpn = Vpn(0x7_ffff_0000);
pub const STACK_PAGES: u64 = 256;
/// Workflow state slots, one per DAG node.
pub const STATE_BASE: Vpn = Vpn(0x40_0000_0000);
pub const STATE_SLOT_PAGES: u64 = 1 << 18;
pub const STATE_SLOTS: u64 = 64;

/// Distinct page contents per image; pages repeat with this period.
const CONTENT_PERIOD: u64 = 64;

/// What the simulator knows about a deployed function.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionModel {
    pub name: String,
    pub image_mb: f64,
    pub working_set_mb: f64,
    /// Fraction of the working set touched per invocation, in (0, 1].
    pub touch_ratio: f64,
    /// Pure compute time, excluding paging.
    pub exec_ms: f64,
}

/// Whole pages covering `mb` megabytes, tolerant of float noise.
pub fn mb_to_pages(mb: f64) -> u64 {
    ((mb * PAGES_PER_MB as f64) - 1e-9).ceil().max(0.0) as u64
}

impl FunctionModel {
    pub fn new(name: &str, image_mb: f64, working_set_mb: f64, touch_ratio: f64, exec_ms: f64) -> Self {
        FunctionModel {
            name: name.to_string(),
            image_mb,
            working_set_mb,
            touch_ratio,
            exec_ms,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = &self.name;
        if n.is_empty() || n.contains(',') {
            return Err(format!("bad function name {n:?}"));
        }
        if !(self.image_mb > 0.0 && self.image_mb.is_finite()) {
            return Err(format!("{n}: image_mb must be positive"));
        }
        if !(self.working_set_mb >= 0.0 && self.working_set_mb <= self.image_mb) {
            return Err(format!("{n}: working_set_mb must be within [0, image_mb]"));
        }
        if !(self.touch_ratio > 0.0 && self.touch_ratio <= 1.0) {
            return Err(format!("{n}: touch_ratio must be in (0, 1]"));
        }
        if !(self.exec_ms >= 0.0 && self.exec_ms.is_finite()) {
            return Err(format!("{n}: exec_ms must be non-negative"));
        }
        Ok(())
    }

    pub fn image_pages(&self) -> u64 {
        mb_to_pages(self.image_mb).max(1)
    }

    pub fn image_bytes(&self) -> u64 {
        self.image_pages() * PAGE_SIZE as u64
    }

    pub fn working_set_pages(&self) -> u64 {
        mb_to_pages(self.working_set_mb).min(self.image_pages())
    }

    /// Pages one invocation touches.
    pub fn touched_pages(&self) -> u64 {
        let n = ((self.touch_ratio * self.working_set_mb * PAGES_PER_MB as f64) - 1e-9).ceil();
        (n.max(0.0) as u64).min(self.working_set_pages())
    }

    pub fn exec(&self) -> Nanos {
        Nanos::from_ms_f64(self.exec_ms)
    }

    /// A uniform draw of `touched_pages()` distinct working-set pages, in
    /// address order.
    pub fn pick_pages<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vpn> {
        let ws = self.working_set_pages() as usize;
        let k = self.touched_pages() as usize;
        let mut idx = sample(rng, ws, k).into_vec();
        idx.sort_unstable();
        idx.into_iter()
            .map(|i| Vpn(IMAGE_BASE.0 + i as u64))
            .collect()
    }
}

/// Page contents of `name`'s image, one entry per distinct page.
pub fn image_content(name: &str) -> Arc<[Arc<Page>]> {
    (0..CONTENT_PERIOD)
        .map(|i| file_page_content(name, i))
        .collect()
}

pub fn state_slot(index: usize) -> Vpn {
    assert!((index as u64) < STATE_SLOTS, "state slot {index} out of range");
    Vpn(STATE_BASE.0 + index as u64 * STATE_SLOT_PAGES)
}

/// A freshly started container of `model`: the whole image resident, an
/// empty stack, and an empty state area.
pub fn build_root(
    fabric: &mut Fabric,
    node: NodeId,
    model: &FunctionModel,
    content: &[Arc<Page>],
    paging: PagingConfig,
) -> AddressSpace {
    let image = Vma::new(
        1,
        IMAGE_BASE.va(),
        Vpn(IMAGE_BASE.0 + model.image_pages()).va(),
        prot::RW,
        0,
    );
    let stack = Vma::new(
        2,
        Vpn(STACK_TOP.0 - STACK_PAGES).va(),
        STACK_TOP.va(),
        prot::RW,
        vma_flags::GROWS_DOWN,
    );
    let state = Vma::new(
        3,
        STATE_BASE.va(),
        Vpn(STATE_BASE.0 + STATE_SLOTS * STATE_SLOT_PAGES).va(),
        prot::RW,
        0,
    );
    let mut space = AddressSpace::new_root(node, vec![image, stack, state], paging);
    for i in 0..model.image_pages() {
        let data = content[(i % content.len() as u64) as usize].clone();
        space.populate(fabric, Vpn(IMAGE_BASE.0 + i), data);
    }
    space
}
