use std::collections::BTreeMap;

use crate::time::Nanos;

/// What a charge was spent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChargeKind {
    RdmaRead,
    RdmaRejected,
    Rpc,
    RpcTimeout,
    DcConnect,
    /// Reads and writes against the shared storage tier (image store,
    /// state store).
    Storage,
}

/// Which subsystem a piece of traffic belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Traffic {
    Paging,
    Descriptor,
    Control,
    /// Function state handed between workflow steps.
    State,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LedgerLine {
    pub count: u64,
    pub time: Nanos,
    pub bytes: u64,
}

/// Running sums of every network charge the fabric has made.
#[derive(Debug, Clone, Default)]
pub struct CostLedger {
    lines: BTreeMap<(ChargeKind, Traffic), LedgerLine>,
}

impl CostLedger {
    pub fn record(&mut self, kind: ChargeKind, traffic: Traffic, time: Nanos, bytes: u64) {
        let line = self.lines.entry((kind, traffic)).or_default();
        line.count += 1;
        line.time += time;
        line.bytes += bytes;
    }

    pub fn total_time(&self) -> Nanos {
        self.lines.values().map(|l| l.time).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.lines.values().map(|l| l.bytes).sum()
    }

    pub fn bytes_for(&self, traffic: Traffic) -> u64 {
        self.lines
            .iter()
            .filter(|((_, t), _)| *t == traffic)
            .map(|(_, l)| l.bytes)
            .sum()
    }

    pub fn line(&self, kind: ChargeKind, traffic: Traffic) -> LedgerLine {
        self.lines.get(&(kind, traffic)).copied().unwrap_or_default()
    }

    pub fn count(&self, kind: ChargeKind) -> u64 {
        self.lines
            .iter()
            .filter(|((k, _), _)| *k == kind)
            .map(|(_, l)| l.count)
            .sum()
    }

    pub fn lines(&self) -> impl Iterator<Item = (ChargeKind, Traffic, LedgerLine)> + '_ {
        self.lines.iter().map(|(&(k, t), &l)| (k, t, l))
    }
}
