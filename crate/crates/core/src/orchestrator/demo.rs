use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Cluster, ClusterConfig, ContainerMeta, ForkError};
use crate::descriptor::{prot, Vma, Vpn};
use crate::fabric::{NodeId, Page, PAGE_SIZE};
use crate::memspace::{AddressSpace, PagingConfig, PagingStats};
use crate::time::{Nanos, SimTime};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub hops: usize,
    pub pages: u64,
    pub touch_ratio: f64,
    pub seed: u64,
    pub prefetch: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            hops: 3,
            pages: 1024,
            touch_ratio: 0.5,
            seed: 1,
            prefetch: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopReport {
    pub hop: usize,
    pub node: NodeId,
    pub prepare: Nanos,
    pub resume: Nanos,
    pub access: Nanos,
    pub pages_touched: usize,
    pub stats: PagingStats,
    /// Every byte read matched the expected content.
    pub verified: bool,
}

const DEMO_BASE_VPN: u64 = 0x1000;

/// Forks a chain `hops` deep across `hops + 1` machines. Each hop reads a
/// random subset of pages, checks them against the expected content, and
/// overwrites half of what it read before being forked again.
pub fn fork_demo(config: &DemoConfig) -> Result<Vec<HopReport>, ForkError> {
    assert!(config.pages > 0, "demo needs at least one page");
    let mut cluster = Cluster::new(ClusterConfig {
        nodes: config.hops + 1,
        paging: PagingConfig {
            prefetch: config.prefetch,
            ..PagingConfig::default()
        },
        ..ClusterConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let root_node = NodeId(0);
    let vma = Vma::new(
        1,
        Vpn(DEMO_BASE_VPN).va(),
        Vpn(DEMO_BASE_VPN + config.pages).va(),
        prot::RW,
        0,
    );
    let mut space = AddressSpace::new_root(root_node, vec![vma], cluster.config().paging.clone());
    let mut expected: HashMap<Vpn, Arc<Page>> = HashMap::new();
    for i in 0..config.pages {
        let vpn = Vpn(DEMO_BASE_VPN + i);
        let mut page = [0u8; PAGE_SIZE];
        rng.fill(&mut page[..]);
        let page = Arc::new(page);
        space.populate(cluster.fabric_mut(), vpn, page.clone());
        expected.insert(vpn, page);
    }
    let mut current = cluster.adopt(space, ContainerMeta::default());

    let touch = ((config.touch_ratio * config.pages as f64).ceil() as usize).min(config.pages as usize);
    let mut t = SimTime::ZERO;
    let mut reports = Vec::with_capacity(config.hops);
    for hop in 1..=config.hops {
        let node = NodeId(hop as u32);
        let start = t;
        let id = cluster.fork_prepare(&mut t, current)?;
        let prepare = t.since(start);

        let start = t;
        let child = cluster.fork_resume(&mut t, node, &id)?;
        let resume = t.since(start);

        let start = t;
        let picked = sample(&mut rng, config.pages as usize, touch).into_vec();
        let mut verified = true;
        for &i in &picked {
            let vpn = Vpn(DEMO_BASE_VPN + i as u64);
            match cluster.read(&mut t, child, vpn.va(), PAGE_SIZE)? {
                Ok(bytes) => verified &= bytes[..] == expected[&vpn][..],
                Err(_) => verified = false,
            }
        }
        for &i in picked.iter().step_by(2) {
            let vpn = Vpn(DEMO_BASE_VPN + i as u64);
            let stamp = ((hop as u64) << 48 | vpn.0).to_le_bytes();
            if cluster.write(&mut t, child, vpn.va(), &stamp)?.is_ok() {
                let mut page = *expected[&vpn];
                page[..8].copy_from_slice(&stamp);
                expected.insert(vpn, Arc::new(page));
            }
        }
        let access = t.since(start);
        let stats = cluster.container(child).expect("child alive").space.stats();
        reports.push(HopReport {
            hop,
            node,
            prepare,
            resume,
            access,
            pages_touched: touch,
            stats,
            verified,
        });
        current = child;
    }
    Ok(reports)
}
