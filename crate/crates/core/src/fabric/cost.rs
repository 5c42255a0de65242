use crate::time::Nanos;

/// Calibrated latencies and bandwidths that drive every simulated duration.
///
/// Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub rdma_rtt: Nanos,
    /// Bytes per second.
    pub rdma_bandwidth: u64,
    pub rpc_fallback_per_page: Nanos,
    pub dfs_read_per_page: Nanos,
    pub unpause: Nanos,
    pub lean_container_setup: Nanos,
    pub local_fork: Nanos,
    pub coldstart_local: Nanos,
    pub coldstart_remote: Nanos,
    pub cr_restore_local: Nanos,
    pub cr_restore_remote: Nanos,
    pub checkpoint_per_mb: Nanos,
    /// Bytes per second.
    pub file_copy_bandwidth: u64,
    pub rc_connect: Nanos,
    pub dc_connect: Nanos,
    pub cache_keepalive: Nanos,
    pub descriptor_build_per_pte: Nanos,
    pub map_per_pte: Nanos,
    /// Message-mode state serialization, per GiB-ish (2^30 bytes).
    pub serialize_per_gb: Nanos,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            rdma_rtt: Nanos::from_us(3),
            rdma_bandwidth: 12_500_000_000,
            rpc_fallback_per_page: Nanos::from_us(65),
            dfs_read_per_page: Nanos::from_us(100),
            unpause: Nanos(500_000),
            lean_container_setup: Nanos::from_ms(2),
            local_fork: Nanos::from_ms(1),
            coldstart_local: Nanos::from_ms(100),
            coldstart_remote: Nanos::from_ms(1000),
            cr_restore_local: Nanos::from_ms(5),
            cr_restore_remote: Nanos::from_ms(24),
            checkpoint_per_mb: Nanos(500_000),
            file_copy_bandwidth: 12_500_000_000,
            rc_connect: Nanos::from_ms(4),
            dc_connect: Nanos::from_us(1),
            cache_keepalive: Nanos::from_secs(30),
            descriptor_build_per_pte: Nanos(50),
            map_per_pte: Nanos(50),
            serialize_per_gb: Nanos::from_ms(100),
        }
    }
}

/// Time to move `bytes` at `bandwidth` bytes/s, rounded up to whole nanoseconds.
pub fn transfer_time(bytes: u64, bandwidth: u64) -> Nanos {
    let num = bytes as u128 * 1_000_000_000u128;
    let bw = bandwidth.max(1) as u128;
    Nanos(num.div_ceil(bw) as u64)
}

impl CostModel {
    pub fn rdma_transfer(&self, bytes: u64) -> Nanos {
        transfer_time(bytes, self.rdma_bandwidth)
    }

    /// One-sided read: a round trip plus wire time.
    pub fn rdma_read(&self, bytes: u64) -> Nanos {
        self.rdma_rtt + self.rdma_transfer(bytes)
    }

    /// Service time of the parent-side fallback handler; the two network
    /// legs make up the rest of `rpc_fallback_per_page`.
    pub fn fallback_service(&self) -> Nanos {
        self.rpc_fallback_per_page - self.rdma_rtt * 2
    }

    pub fn checkpoint(&self, bytes: u64) -> Nanos {
        Nanos((self.checkpoint_per_mb.0 as u128 * bytes as u128).div_ceil(1 << 20) as u64)
    }

    pub fn serialize(&self, bytes: u64) -> Nanos {
        Nanos((self.serialize_per_gb.0 as u128 * bytes as u128).div_ceil(1 << 30) as u64)
    }

    pub fn coldstart(&self, image_local: bool) -> Nanos {
        if image_local {
            self.coldstart_local
        } else {
            self.coldstart_remote
        }
    }

    /// Every field must be strictly positive.
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in self.entries() {
            if v == 0 {
                return Err(format!("cost model field `{name}` must be positive"));
            }
        }
        if self.rpc_fallback_per_page <= self.rdma_rtt * 2 {
            return Err("rpc_fallback_per_page must exceed two rdma_rtt".into());
        }
        Ok(())
    }

    /// `(key, raw value)` pairs; durations in ns, bandwidths in bytes/s.
    pub fn entries(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("rdma_rtt", self.rdma_rtt.0),
            ("rdma_bandwidth", self.rdma_bandwidth),
            ("rpc_fallback_per_page", self.rpc_fallback_per_page.0),
            ("dfs_read_per_page", self.dfs_read_per_page.0),
            ("unpause", self.unpause.0),
            ("lean_container_setup", self.lean_container_setup.0),
            ("local_fork", self.local_fork.0),
            ("coldstart_local", self.coldstart_local.0),
            ("coldstart_remote", self.coldstart_remote.0),
            ("cr_restore_local", self.cr_restore_local.0),
            ("cr_restore_remote", self.cr_restore_remote.0),
            ("checkpoint_per_mb", self.checkpoint_per_mb.0),
            ("file_copy_bandwidth", self.file_copy_bandwidth),
            ("rc_connect", self.rc_connect.0),
            ("dc_connect", self.dc_connect.0),
            ("cache_keepalive", self.cache_keepalive.0),
            ("descriptor_build_per_pte", self.descriptor_build_per_pte.0),
            ("map_per_pte", self.map_per_pte.0),
            ("serialize_per_gb", self.serialize_per_gb.0),
        ]
    }

    pub fn is_bandwidth_key(key: &str) -> bool {
        matches!(key, "rdma_bandwidth" | "file_copy_bandwidth")
    }

    /// Sets one field by key. Returns false for unknown keys.
    pub fn set(&mut self, key: &str, value: u64) -> bool {
        let slot: &mut u64 = match key {
            "rdma_rtt" => &mut self.rdma_rtt.0,
            "rdma_bandwidth" => &mut self.rdma_bandwidth,
            "rpc_fallback_per_page" => &mut self.rpc_fallback_per_page.0,
            "dfs_read_per_page" => &mut self.dfs_read_per_page.0,
            "unpause" => &mut self.unpause.0,
            "lean_container_setup" => &mut self.lean_container_setup.0,
            "local_fork" => &mut self.local_fork.0,
            "coldstart_local" => &mut self.coldstart_local.0,
            "coldstart_remote" => &mut self.coldstart_remote.0,
            "cr_restore_local" => &mut self.cr_restore_local.0,
            "cr_restore_remote" => &mut self.cr_restore_remote.0,
            "checkpoint_per_mb" => &mut self.checkpoint_per_mb.0,
            "file_copy_bandwidth" => &mut self.file_copy_bandwidth,
            "rc_connect" => &mut self.rc_connect.0,
            "dc_connect" => &mut self.dc_connect.0,
            "cache_keepalive" => &mut self.cache_keepalive.0,
            "descriptor_build_per_pte" => &mut self.descriptor_build_per_pte.0,
            "map_per_pte" => &mut self.map_per_pte.0,
            "serialize_per_gb" => &mut self.serialize_per_gb.0,
            _ => return false,
        };
        *slot = value;
        true
    }
}
