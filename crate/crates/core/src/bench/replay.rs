use std::collections::VecDeque;

use thiserror::Error;

use super::config::SimConfig;
use super::metrics::{InvocationRow, MemorySample, Metrics};
use super::trace::Trace;
use crate::fabric::{NodeId, SimClock};
use crate::platform::{FunctionModel, Invocation, Platform};
use crate::time::{Nanos, SimTime};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("simulation: {0}")]
    Simulation(String),
}

#[derive(Debug)]
enum Event {
    Arrival(usize),
    Finish(Box<Invocation>),
    Sample,
    Background,
    Gc,
    Crash(NodeId),
}

/// Extra setup and disturbances for a replay.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayOptions {
    /// Node failures to inject.
    pub crashes: Vec<(SimTime, NodeId)>,
    /// Functions whose seed is planted on node 0 before the first arrival.
    pub prewarm: Vec<String>,
}

/// Runs `trace` against the configured strategy and collects metrics.
pub fn replay(trace: &Trace, registry: &[FunctionModel], config: &SimConfig) -> Result<Metrics, ReplayError> {
    replay_with(trace, registry, config, &ReplayOptions::default()).map(|(m, _)| m)
}

/// Like [`replay`], also handing back the platform for inspection.
pub fn replay_with(
    trace: &Trace,
    registry: &[FunctionModel],
    config: &SimConfig,
    options: &ReplayOptions,
) -> Result<(Metrics, Platform), ReplayError> {
    config
        .validate()
        .map_err(|e| ReplayError::Config(e.to_string()))?;
    let mut platform = Platform::new(config.cluster.clone(), config.platform.clone());
    for m in registry {
        platform
            .register(m.clone())
            .map_err(|e| ReplayError::Config(e.to_string()))?;
    }
    if let Some(e) = trace.events().iter().find(|e| platform.function(&e.function).is_none()) {
        return Err(ReplayError::Config(format!(
            "trace calls unregistered function {:?}",
            e.function
        )));
    }
    for &(_, n) in &options.crashes {
        if n.0 as usize >= platform.node_count() {
            return Err(ReplayError::Config(format!("no node {}", n.0)));
        }
    }

    for f in &options.prewarm {
        platform
            .prewarm(SimTime::ZERO, f, NodeId(0))
            .map_err(|e| ReplayError::Config(e.to_string()))?;
    }

    let strategy = config.platform.strategy;
    let mut clock: SimClock<Event> = SimClock::new();
    for (i, e) in trace.events().iter().enumerate() {
        clock.schedule(SimTime((e.t_ms * 1e6).round() as u64), Event::Arrival(i));
    }
    for &(t, n) in &options.crashes {
        clock.schedule(t, Event::Crash(n));
    }
    clock.schedule(SimTime::ZERO, Event::Sample);
    clock.schedule(SimTime::ZERO + config.background_period, Event::Background);
    clock.schedule(SimTime::ZERO + config.platform.gc_period, Event::Gc);

    let mut queue: VecDeque<(usize, SimTime)> = VecDeque::new();
    let mut rows = Vec::with_capacity(trace.len());
    let mut memory = Vec::new();
    let mut arrived = 0;
    let mut in_flight = 0usize;

    while let Some((now, ev)) = clock.pop() {
        let active = arrived < trace.len() || in_flight > 0 || !queue.is_empty();
        match ev {
            Event::Arrival(i) => {
                arrived += 1;
                queue.push_back((i, now));
            }
            Event::Finish(inv) => {
                in_flight -= 1;
                platform.complete(&inv);
            }
            Event::Sample => {
                for n in 0..platform.node_count() {
                    let node = NodeId(n as u32);
                    memory.push(MemorySample {
                        t_ms: now.0 / 1_000_000,
                        node: node.0,
                        provisioned_bytes: platform.provisioned_bytes(node),
                        runtime_bytes: platform.runtime_bytes(node),
                    });
                }
                if active {
                    clock.schedule(now + config.sample_period, Event::Sample);
                }
            }
            Event::Background => {
                platform.background(now);
                if active {
                    clock.schedule(now + config.background_period, Event::Background);
                }
            }
            Event::Gc => {
                platform.gc_tick(now);
                if active {
                    clock.schedule(now + config.platform.gc_period, Event::Gc);
                }
            }
            Event::Crash(n) => {
                if platform.cluster().is_node_up(n, now) {
                    platform
                        .crash_node(n, now)
                        .map_err(|e| ReplayError::Simulation(e.to_string()))?;
                }
            }
        }

        while let Some(&(i, arrival)) = queue.front() {
            let Some(node) = platform.pick_node(now) else {
                break;
            };
            queue.pop_front();
            let e = &trace.events()[i];
            let inv = platform
                .start(now, &e.function, node)
                .map_err(|err| ReplayError::Simulation(err.to_string()))?;
            rows.push(InvocationRow {
                arrival_ms: e.t_ms,
                function: e.function.clone(),
                strategy,
                node: node.0,
                start_kind: inv.kind.name(),
                queue: now.since(arrival),
                startup: inv.startup,
                exec: inv.exec,
                net_bytes: inv.net_bytes,
                faults_local: inv.stats.faults_local,
                faults_rdma: inv.stats.faults_rdma,
                faults_rpc: inv.stats.faults_rpc,
                pages_prefetched: inv.stats.pages_prefetched,
                error: inv.error.clone(),
            });
            in_flight += 1;
            clock.schedule(inv.end(), Event::Finish(Box::new(inv)));
        }
        if !queue.is_empty() && (0..platform.node_count()).all(|n| !platform.cluster().is_node_up(NodeId(n as u32), now)) {
            return Err(ReplayError::Simulation("every node is down with work queued".into()));
        }
    }

    let ledger = platform.cluster().fabric().ledger();
    let metrics = Metrics {
        strategy,
        invocations: rows,
        memory,
        ledger_bytes: ledger.total_bytes(),
        ledger_time: ledger.total_time(),
        peak_provisioned: platform.peak_provisioned(),
        seeds_planted: platform.seeds_planted(),
        seed_renewals: platform.renewals(),
    };
    if metrics.net_bytes() != metrics.ledger_bytes {
        return Err(ReplayError::Simulation(format!(
            "per-invocation bytes {} disagree with the ledger's {}",
            metrics.net_bytes(),
            metrics.ledger_bytes
        )));
    }
    Ok((metrics, platform))
}

/// Total simulated span of a run: last completion minus first arrival.
pub fn makespan(m: &Metrics) -> Nanos {
    let first = m.invocations.iter().map(|r| r.arrival_ms).fold(f64::INFINITY, f64::min);
    let last = m
        .invocations
        .iter()
        .map(|r| r.arrival_ms * 1e6 + r.latency().0 as f64)
        .fold(0.0, f64::max);
    if first.is_finite() {
        Nanos((last - first * 1e6).max(0.0) as u64)
    } else {
        Nanos::ZERO
    }
}
