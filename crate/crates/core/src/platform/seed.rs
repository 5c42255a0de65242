use crate::descriptor::DescriptorId;
use crate::orchestrator::ContainerId;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeedKind {
    /// Kept per function to accelerate startup.
    LongLived,
    /// Carries one workflow step's state to its downstream.
    ShortLived,
}

/// A published descriptor the platform is responsible for reclaiming.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRecord {
    pub function: String,
    pub id: DescriptorId,
    pub container: ContainerId,
    pub deployed_at: SimTime,
    pub kind: SeedKind,
    /// Hard reclaim time; children are bounded by it.
    pub deadline: SimTime,
    /// No longer handed out; reclaimed once its children are gone.
    pub retired: bool,
}

impl SeedRecord {
    pub fn key(&self) -> (crate::fabric::NodeId, u64) {
        (self.id.node, self.id.handle_id)
    }
}
