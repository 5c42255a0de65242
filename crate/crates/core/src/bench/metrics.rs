use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::platform::Strategy;
use crate::time::Nanos;

#[derive(Debug, Clone, PartialEq)]
pub struct InvocationRow {
    pub arrival_ms: f64,
    pub function: String,
    pub strategy: Strategy,
    pub node: u32,
    pub start_kind: &'static str,
    pub queue: Nanos,
    pub startup: Nanos,
    pub exec: Nanos,
    pub net_bytes: u64,
    pub faults_local: u64,
    pub faults_rdma: u64,
    pub faults_rpc: u64,
    pub pages_prefetched: u64,
    pub error: Option<String>,
}

impl InvocationRow {
    pub fn latency(&self) -> Nanos {
        self.queue + self.startup + self.exec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemorySample {
    pub t_ms: u64,
    pub node: u32,
    pub provisioned_bytes: u64,
    pub runtime_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub strategy: Strategy,
    pub invocations: Vec<InvocationRow>,
    pub memory: Vec<MemorySample>,
    /// Fabric ledger totals at the end of the run.
    pub ledger_bytes: u64,
    pub ledger_time: Nanos,
    pub peak_provisioned: usize,
    pub seeds_planted: u64,
    pub seed_renewals: u64,
}

/// Nearest-rank percentile, `p` in (0, 100].
pub fn percentile(sorted: &[u64], p: f64) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub p50: Nanos,
    pub p99: Nanos,
    pub mean_ns: f64,
}

impl Spread {
    pub fn of(values: impl Iterator<Item = Nanos>) -> Option<Spread> {
        let mut v: Vec<u64> = values.map(|n| n.0).collect();
        v.sort_unstable();
        Some(Spread {
            p50: Nanos(percentile(&v, 50.0)?),
            p99: Nanos(percentile(&v, 99.0)?),
            mean_ns: v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64,
        })
    }
}

impl Metrics {
    pub fn latency(&self) -> Option<Spread> {
        Spread::of(self.invocations.iter().map(|r| r.latency()))
    }

    pub fn startup(&self) -> Option<Spread> {
        Spread::of(self.invocations.iter().map(|r| r.startup))
    }

    pub fn net_bytes(&self) -> u64 {
        self.invocations.iter().map(|r| r.net_bytes).sum()
    }

    pub fn cold_starts(&self) -> usize {
        self.invocations
            .iter()
            .filter(|r| r.start_kind.starts_with("cold"))
            .count()
    }

    pub fn errors(&self) -> usize {
        self.invocations.iter().filter(|r| r.error.is_some()).count()
    }

    /// Highest provisioned bytes summed over nodes at any sample.
    pub fn peak_provisioned_bytes(&self) -> u64 {
        let mut peak = 0;
        for chunk in self.memory.chunk_by(|a, b| a.t_ms == b.t_ms) {
            peak = peak.max(chunk.iter().map(|s| s.provisioned_bytes).sum());
        }
        peak
    }

    /// Writes `invocations.csv`, `memory.csv` and `summary.txt` into `dir`.
    pub fn report(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("invocations.csv"))?;
        w.write_record([
            "arrival_ms",
            "function",
            "strategy",
            "node",
            "start_kind",
            "queue_us",
            "startup_us",
            "exec_us",
            "latency_us",
            "net_bytes",
            "faults_local",
            "faults_rdma",
            "faults_rpc",
            "pages_prefetched",
            "error",
        ])?;
        for r in &self.invocations {
            w.write_record([
                format!("{:.3}", r.arrival_ms),
                r.function.clone(),
                r.strategy.to_string(),
                r.node.to_string(),
                r.start_kind.to_string(),
                us(r.queue),
                us(r.startup),
                us(r.exec),
                us(r.latency()),
                r.net_bytes.to_string(),
                r.faults_local.to_string(),
                r.faults_rdma.to_string(),
                r.faults_rpc.to_string(),
                r.pages_prefetched.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("memory.csv"))?;
        w.write_record(["t_ms", "node", "provisioned_bytes", "runtime_bytes"])?;
        for s in &self.memory {
            w.write_record([
                s.t_ms.to_string(),
                s.node.to_string(),
                s.provisioned_bytes.to_string(),
                s.runtime_bytes.to_string(),
            ])?;
        }
        w.flush()?;

        let mut f = BufWriter::new(File::create(dir.join("summary.txt"))?);
        f.write_all(self.summary().as_bytes())?;
        f.flush()
    }

    /// `key=value` lines; latencies in microseconds.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("strategy", self.strategy.to_string());
        kv("invocations", self.invocations.len().to_string());
        kv("cold_starts", self.cold_starts().to_string());
        kv("errors", self.errors().to_string());
        let spreads = [
            ("queue_us", Spread::of(self.invocations.iter().map(|r| r.queue))),
            ("startup_us", self.startup()),
            ("exec_us", Spread::of(self.invocations.iter().map(|r| r.exec))),
            ("latency_us", self.latency()),
        ];
        for (name, sp) in spreads {
            if let Some(sp) = sp {
                kv(&format!("{name}.p50"), us(sp.p50));
                kv(&format!("{name}.p99"), us(sp.p99));
                kv(&format!("{name}.mean"), format!("{:.3}", sp.mean_ns / 1e3));
            }
        }
        kv("net_bytes", self.net_bytes().to_string());
        kv("ledger_bytes", self.ledger_bytes.to_string());
        kv("ledger_time_us", us(self.ledger_time));
        kv("peak_provisioned_instances", self.peak_provisioned.to_string());
        kv("peak_provisioned_bytes", self.peak_provisioned_bytes().to_string());
        kv("seeds_planted", self.seeds_planted.to_string());
        kv("seed_renewals", self.seed_renewals.to_string());
        s
    }
}

fn us(n: Nanos) -> String {
    format!("{}.{:03}", n.0 / 1000, n.0 % 1000)
}
