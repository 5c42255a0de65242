use super::*;
use crate::access::{PoolConfig, TargetPool};
use crate::descriptor::{
    build_descriptor, fetch_descriptor, prot, vma_flags, DescribedVma, DescriptorId,
    DescriptorStore, ParentImage, Registers,
};
use crate::fabric::{transfer_time, FabricConfig};

const BASE: u64 = 0x10;

struct World {
    f: Fabric,
    a: NodeId,
    b: NodeId,
    parent: AddressSpace,
    store: DescriptorStore,
    pool: TargetPool,
}

struct Owners<'a> {
    store: &'a DescriptorStore,
    space: &'a AddressSpace,
}

impl OwnerDirectory for Owners<'_> {
    fn resolve(&self, owner: &AncestorEntry, vpn: Vpn) -> Option<PageOrigin> {
        if owner.node == self.store.node() && self.store.is_published(owner.handle_id) {
            self.space.serve_fallback(vpn)
        } else {
            None
        }
    }
    fn vma_key(&self, owner: &AncestorEntry, vma_id: u32) -> Option<DcKey> {
        self.store.vma_key(owner.handle_id, vma_id)
    }
}

macro_rules! owners {
    ($w:expr) => {
        &Owners {
            store: &$w.store,
            space: &$w.parent,
        }
    };
}

/// Parent on node `a` with one RW VMA of `pages` pages, all filled with `fill`.
fn world(pages: u64, fill: u8) -> World {
    let mut f = Fabric::new(FabricConfig::default());
    let a = f.register_node();
    let b = f.register_node();
    let vma = Vma::new(1, BASE << 12, (BASE + pages) << 12, prot::RW, 0);
    let mut parent = AddressSpace::new_root(a, vec![vma], PagingConfig::default());
    for i in 0..pages {
        parent.populate(&mut f, Vpn(BASE + i), Arc::new([fill; PAGE_SIZE]));
    }
    let mut pool = TargetPool::new(a, PoolConfig::default());
    pool.refill(&mut f);
    World {
        f,
        a,
        b,
        parent,
        store: DescriptorStore::new(a),
        pool,
    }
}

fn publish(w: &mut World) -> DescriptorId {
    let mut t = SimTime::ZERO;
    let keys = w.pool.assign_targets(&mut w.f, &mut t, &w.parent);
    let handle = w.store.reserve_handle();
    let regs = Registers::default();
    let desc = build_descriptor(
        handle,
        ParentImage {
            space: &w.parent,
            isolation: &[],
            registers: &regs,
            files: &[],
        },
        &keys,
    )
    .unwrap();
    let desc_key = w.pool.take(&mut w.f, &mut t);
    w.store.publish(&mut w.f, &mut t, &desc, desc_key, keys)
}

fn child(w: &mut World, id: DescriptorId, config: PagingConfig) -> AddressSpace {
    let mut t = SimTime::ZERO;
    let desc = fetch_descriptor(&mut w.f, &w.store, &mut t, w.b, &id).unwrap();
    AddressSpace::map_from_descriptor(&mut w.f, w.b, id.ancestor(), &desc, config).unwrap()
}

#[test]
fn mapping_moves_no_page_bytes() {
    let mut w = world(256, 7);
    let id = publish(&mut w);
    let c = child(&mut w, id, PagingConfig::default());
    assert_eq!(w.f.ledger().bytes_for(Traffic::Paging), 0);
    assert_eq!(c.remote_pages(), 256);
    assert_eq!(c.present_pages(), 0);
    assert_eq!(w.f.frame_count(w.b), 0);
}

#[test]
fn out_of_range_owner_is_corrupt() {
    let mut f = Fabric::new(FabricConfig::default());
    let n = f.register_node();
    let anc = AncestorEntry {
        node: n,
        handle_id: 9,
    };
    let vma = Vma::new(1, 0x1000, 0x3000, prot::RW, 0);
    let desc = ContainerDescriptor {
        ancestors: vec![anc, anc],
        vmas: vec![DescribedVma {
            vma,
            ptes: vec![(Vpn(1), Pte::remote(Pfn(4), 3))],
        }],
        ..Default::default()
    };
    let err = AddressSpace::map_from_descriptor(&mut f, n, anc, &desc, PagingConfig::default())
        .unwrap_err();
    assert!(matches!(err, MapError::CorruptDescriptor(_)));

    let mut ok = desc.clone();
    ok.vmas[0].ptes[0].1 = Pte::remote(Pfn(4), 2);
    let s = AddressSpace::map_from_descriptor(&mut f, n, anc, &ok, PagingConfig::default()).unwrap();
    assert_eq!(s.pte(Vpn(1)).unwrap().owner(), 3);
}

#[test]
fn full_ancestor_table_is_corrupt() {
    let mut f = Fabric::new(FabricConfig::default());
    let n = f.register_node();
    let anc = AncestorEntry {
        node: n,
        handle_id: 1,
    };
    let desc = ContainerDescriptor {
        ancestors: vec![anc; 15],
        ..Default::default()
    };
    assert!(
        AddressSpace::map_from_descriptor(&mut f, n, anc, &desc, PagingConfig::default()).is_err()
    );
}

#[test]
fn first_touch_reads_parent_bytes_over_rdma() {
    let mut w = world(4, 0xCD);
    let id = publish(&mut w);
    let mut c = child(&mut w, id, PagingConfig::default());
    let mut t = SimTime::ZERO;
    let owners = Owners {
        store: &w.store,
        space: &w.parent,
    };
    let res = c
        .handle_fault(&mut w.f, &owners, &mut t, Vpn(BASE), AccessKind::Read)
        .unwrap();
    // contiguous neighbor comes along in the same read
    assert_eq!(res, FaultResolution::Rdma { pages: 2 });
    let cost = w.f.cost().clone();
    assert_eq!(
        t,
        SimTime::ZERO + cost.rdma_rtt + transfer_time(2 * 4096, cost.rdma_bandwidth)
    );
    let bytes = c.read(&mut w.f, &owners, &mut t, BASE << 12, 8192).unwrap();
    assert!(bytes.iter().all(|&b| b == 0xCD));
    assert_eq!(c.stats().faults_rdma, 1);
    assert_eq!(c.stats().pages_prefetched, 1);
}

#[test]
fn child_writes_stay_private() {
    let mut w = world(2, 1);
    let id = publish(&mut w);
    let mut c = child(&mut w, id, PagingConfig::default());
    let mut t = SimTime::ZERO;
    let owners = Owners {
        store: &w.store,
        space: &w.parent,
    };
    let va = (BASE << 12) + 100;
    c.write(&mut w.f, &owners, &mut t, va, b"hello").unwrap();
    assert_eq!(c.read(&mut w.f, &owners, &mut t, va, 5).unwrap(), b"hello");
    assert!(c.pte(Vpn(BASE)).unwrap().dirty());
    let p = w.parent.peek_page(&w.f, Vpn(BASE)).unwrap();
    assert_eq!(p[100], 1);
}

#[test]
fn unmapped_stack_page_is_local_zero() {
    let mut f = Fabric::new(FabricConfig::default());
    let n = f.register_node();
    let stack = Vma::new(2, 0x7000_0000, 0x7001_0000, prot::RW, vma_flags::GROWS_DOWN);
    let mut s = AddressSpace::new_root(n, vec![stack], PagingConfig::default());
    let mut t = SimTime::ZERO;
    let r = s
        .handle_fault(&mut f, &NoOwners, &mut t, Vpn::of(0x7000_f000), AccessKind::Write)
        .unwrap();
    assert_eq!(r, FaultResolution::Local);
    assert_eq!(t, SimTime::ZERO);
    assert_eq!(f.ledger().total_bytes(), 0);
    assert!(s.peek_page(&f, Vpn::of(0x7000_f000)).unwrap().iter().all(|&b| b == 0));
}

#[test]
fn access_outside_vmas_or_against_protection_fails() {
    let mut f = Fabric::new(FabricConfig::default());
    let n = f.register_node();
    let ro = Vma::new(1, 0x1000, 0x2000, prot::READ, 0);
    let mut s = AddressSpace::new_root(n, vec![ro], PagingConfig::default());
    let mut t = SimTime::ZERO;
    assert_eq!(
        s.read(&mut f, &NoOwners, &mut t, 0x5000, 1),
        Err(AccessError::SegFault(0x5000))
    );
    assert_eq!(
        s.write(&mut f, &NoOwners, &mut t, 0x1000, b"x"),
        Err(AccessError::ProtFault(0x1000))
    );
    assert_eq!(s.read(&mut f, &NoOwners, &mut t, 0x1ffe, 2).unwrap(), vec![0, 0]);
}

#[test]
fn unloaded_file_page_goes_through_rpc() {
    let mut w = world(1, 0);
    let file = Vma::new(5, 0x40_0000, 0x40_4000, prot::READ, 0);
    w.parent = AddressSpace::new_root(w.a, vec![file], PagingConfig::default());
    w.parent.map_file(5, "/lib/libc.so");
    for i in 0..4 {
        w.parent.map_unloaded(Vpn(0x400 + i));
    }
    let id = publish(&mut w);
    let mut c = child(&mut w, id, PagingConfig::default());
    assert_eq!(c.remote_pages(), 4);
    let owners = Owners {
        store: &w.store,
        space: &w.parent,
    };
    let mut t = SimTime::ZERO;
    let r = c
        .handle_fault(&mut w.f, &owners, &mut t, Vpn(0x402), AccessKind::Read)
        .unwrap();
    assert_eq!(r, FaultResolution::Rpc);
    assert_eq!(t, SimTime::ZERO + Nanos::from_us(65));
    assert_eq!(
        c.peek_page(&w.f, Vpn(0x402)).unwrap(),
        &file_page_content("/lib/libc.so", 2)
    );
    // the parent did not materialize it
    assert!(!w.parent.pte(Vpn(0x402)).unwrap().present());
}

#[test]
fn revoked_target_falls_back_then_fails_when_owner_dies() {
    let mut w = world(4, 0xAB);
    let id = publish(&mut w);
    let mut c = child(&mut w, id, PagingConfig::default());
    let key = w.store.vma_key(id.handle_id, 1).unwrap();
    w.f.destroy_dc_target(w.a, key, SimTime::ZERO).unwrap();

    let mut t = SimTime::ZERO;
    let r = c
        .handle_fault(&mut w.f, owners!(w), &mut t, Vpn(BASE), AccessKind::Read)
        .unwrap();
    assert_eq!(r, FaultResolution::Rpc);
    assert!(c.peek_page(&w.f, Vpn(BASE)).unwrap().iter().all(|&b| b == 0xAB));
    // one rejected read, then the fallback
    assert_eq!(t, SimTime::ZERO + Nanos::from_us(3) + Nanos::from_us(65));

    c.set_config(PagingConfig {
        strict_revocation: true,
        ..PagingConfig::default()
    });
    let e = c
        .handle_fault(&mut w.f, owners!(w), &mut t, Vpn(BASE + 1), AccessKind::Read)
        .unwrap_err();
    assert_eq!(e, FaultError::Revoked { vpn: Vpn(BASE + 1) });
    c.set_config(PagingConfig::default());

    w.f.crash(w.a, t).unwrap();
    let e = c
        .handle_fault(&mut w.f, owners!(w), &mut t, Vpn(BASE + 1), AccessKind::Read)
        .unwrap_err();
    assert!(matches!(e, FaultError::OwnerUnreachable { .. }));
}

#[test]
fn prefetch_window_rules() {
    let mut w = world(8, 3);
    let id = publish(&mut w);
    let mut c = child(&mut w, id, PagingConfig::default());
    assert_eq!(c.prefetch_window(Vpn(BASE)), vec![Vpn(BASE + 1)]);
    assert!(c.prefetch_window(Vpn(BASE + 7)).is_empty());

    let mut t = SimTime::ZERO;
    c.handle_fault(&mut w.f, owners!(w), &mut t, Vpn(BASE + 3), AccessKind::Read)
        .unwrap();
    // next page already materialized
    assert!(c.prefetch_window(Vpn(BASE + 2)).is_empty());

    c.set_config(PagingConfig {
        prefetch: 6,
        ..PagingConfig::default()
    });
    assert_eq!(
        c.prefetch_window(Vpn(BASE + 5)),
        vec![Vpn(BASE + 6), Vpn(BASE + 7)]
    );
    let mut w = world(5, 3);
    let id = publish(&mut w);
    let c = child(
        &mut w,
        id,
        PagingConfig {
            prefetch: 6,
            ..PagingConfig::default()
        },
    );
    assert_eq!(c.prefetch_window(Vpn(BASE)).len(), 4);
}

#[test]
fn cached_table_serves_the_next_child_without_network() {
    let mut w = world(16, 9);
    let id = publish(&mut w);
    let mut first = child(&mut w, id, PagingConfig::default());
    let mut t = SimTime::ZERO;
    for i in 0..8 {
        first
            .touch(&mut w.f, owners!(w), &mut t, Vpn(BASE + i), AccessKind::Read)
            .unwrap();
    }
    first
        .write(&mut w.f, owners!(w), &mut t, (BASE + 9) << 12, b"dirty")
        .unwrap();
    let mut cache = PtCache::new(w.b);
    cache.put(&mut w.f, id, &first, t);
    first.release(&mut w.f);

    let before = w.f.ledger().bytes_for(Traffic::Paging);
    let mut second = cache
        .instantiate(&mut w.f, id, t, PagingConfig::default())
        .unwrap();
    for i in 0..8 {
        second
            .touch(&mut w.f, owners!(w), &mut t, Vpn(BASE + i), AccessKind::Read)
            .unwrap();
    }
    assert_eq!(w.f.ledger().bytes_for(Traffic::Paging), before);
    // the dirtied page was reverted to remote in the snapshot
    assert!(second.pte(Vpn(BASE + 9)).unwrap().is_remote());

    // COW: writing in the second child leaves the cached frame intact
    second
        .write(&mut w.f, owners!(w), &mut t, BASE << 12, &[0xEE])
        .unwrap();
    let third = cache
        .instantiate(&mut w.f, id, t, PagingConfig::default())
        .unwrap();
    assert_eq!(third.peek_page(&w.f, Vpn(BASE)).unwrap()[0], 9);

    let later = t + Nanos::from_secs(5);
    assert!(cache.instantiate(&mut w.f, id, later, PagingConfig::default()).is_none());
    assert!(cache.is_empty());
}

#[test]
fn release_returns_all_frames() {
    let mut w = world(8, 2);
    let id = publish(&mut w);
    let mut c = child(&mut w, id, PagingConfig::default());
    let mut t = SimTime::ZERO;
    for i in 0..8 {
        c.touch(&mut w.f, owners!(w), &mut t, Vpn(BASE + i), AccessKind::Write)
            .unwrap();
    }
    assert_eq!(w.f.frame_count(w.b), 8);
    c.release(&mut w.f);
    assert_eq!(w.f.frame_count(w.b), 0);
    assert_eq!(w.f.memory_bytes(w.b), 0);
}

#[test]
fn keys_for_older_ancestors_are_looked_up_once() {
    // grandparent on a, parent on b (never touched), grandchild on c
    let mut w = world(4, 0x55);
    let gp_id = publish(&mut w);
    let c_node = w.f.register_node();
    let parent = child(&mut w, gp_id, PagingConfig::default());
    let mut pool_b = TargetPool::new(w.b, PoolConfig::default());
    pool_b.refill(&mut w.f);
    let mut store_b = DescriptorStore::new(w.b);
    let mut t = SimTime::ZERO;
    let keys = pool_b.assign_targets(&mut w.f, &mut t, &parent);
    let regs = Registers::default();
    let desc = build_descriptor(
        store_b.reserve_handle(),
        ParentImage {
            space: &parent,
            isolation: &[],
            registers: &regs,
            files: &[],
        },
        &keys,
    )
    .unwrap();
    assert_eq!(desc.ancestors, vec![gp_id.ancestor()]);
    let dk = pool_b.take(&mut w.f, &mut t);
    let p_id = store_b.publish(&mut w.f, &mut t, &desc, dk, keys);
    let desc = fetch_descriptor(&mut w.f, &store_b, &mut t, c_node, &p_id).unwrap();
    let mut gc =
        AddressSpace::map_from_descriptor(&mut w.f, c_node, p_id.ancestor(), &desc, PagingConfig::default())
            .unwrap();
    assert_eq!(gc.pte(Vpn(BASE)).unwrap().owner(), 2);

    let before = w.f.ledger().count(crate::fabric::ChargeKind::Rpc);
    let mut t = SimTime::ZERO;
    gc.touch(&mut w.f, owners!(w), &mut t, Vpn(BASE), AccessKind::Read).unwrap();
    gc.touch(&mut w.f, owners!(w), &mut t, Vpn(BASE + 2), AccessKind::Read).unwrap();
    assert_eq!(w.f.ledger().count(crate::fabric::ChargeKind::Rpc), before + 1);
    assert_eq!(gc.stats().faults_rdma, 2);
    assert_eq!(gc.stats().faults_rpc, 0);
    assert!(gc.peek_page(&w.f, Vpn(BASE + 3)).unwrap().iter().all(|&b| b == 0x55));
}
