use std::collections::BTreeMap;
use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub t_ms: f64,
    pub function: String,
}

/// Invocation arrivals in non-decreasing time order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    /// Sorts `events` by time, keeping the given order among ties.
    pub fn new(mut events: Vec<TraceEvent>) -> Result<Trace, String> {
        if let Some(e) = events.iter().find(|e| !(e.t_ms >= 0.0 && e.t_ms.is_finite())) {
            return Err(format!("bad event time {}", e.t_ms));
        }
        events.sort_by(|a, b| a.t_ms.total_cmp(&b.t_ms));
        Ok(Trace { events })
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count_between(&self, from_ms: f64, to_ms: f64) -> usize {
        self.events
            .iter()
            .filter(|e| e.t_ms >= from_ms && e.t_ms < to_ms)
            .count()
    }
}

/// Poisson arrivals of `function`: `base_rps` outside
/// `[spike_start_s, spike_start_s + spike_len_s)`, `spike_rps` inside.
pub fn gen_spike_trace(
    function: &str,
    base_rps: f64,
    spike_rps: f64,
    spike_start_s: f64,
    spike_len_s: f64,
    total_s: f64,
    seed: u64,
) -> Result<Trace, String> {
    for (n, v) in [
        ("base rate", base_rps),
        ("spike rate", spike_rps),
        ("spike start", spike_start_s),
        ("spike length", spike_len_s),
        ("duration", total_s),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(format!("{n} must be a non-negative number"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spike_end = (spike_start_s + spike_len_s).min(total_s);
    let spike_start = spike_start_s.min(total_s);
    let segments = [
        (0.0, spike_start, base_rps),
        (spike_start, spike_end, spike_rps),
        (spike_end, total_s, base_rps),
    ];
    let mut events = Vec::new();
    for (from, to, rate) in segments {
        if rate <= 0.0 || to <= from {
            continue;
        }
        // Memorylessness lets each segment restart at its own boundary.
        let gap = Exp::new(rate).map_err(|e| e.to_string())?;
        let mut t = from;
        loop {
            t += gap.sample(&mut rng);
            if t >= to {
                break;
            }
            events.push(TraceEvent {
                t_ms: t * 1000.0,
                function: function.to_string(),
            });
        }
    }
    Trace::new(events)
}

/// Spreads per-minute invocation counts uniformly within each minute.
pub fn from_minute_counts(function: &str, counts: &[u64]) -> Vec<TraceEvent> {
    let mut out = Vec::new();
    for (m, &n) in counts.iter().enumerate() {
        let step = 60_000.0 / n as f64;
        for k in 0..n {
            out.push(TraceEvent {
                t_ms: m as f64 * 60_000.0 + (k as f64 + 0.5) * step,
                function: function.to_string(),
            });
        }
    }
    out
}

/// Converts a per-minute invocation-count table: a header row, then one row
/// per function whose numbered columns (`1`, `2`, ...) hold counts. The
/// function name comes from `name_column`.
pub fn from_minute_table<R: Read>(reader: R, name_column: &str) -> Result<Trace, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let name_idx = headers
        .iter()
        .position(|h| h == name_column)
        .ok_or_else(|| format!("no column {name_column:?}"))?;
    let minutes: BTreeMap<u32, usize> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.parse::<u32>().ok().map(|m| (m, i)))
        .collect();
    if minutes.is_empty() {
        return Err("no minute columns".into());
    }
    let mut events = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let name = rec.get(name_idx).unwrap_or_default();
        let counts = minutes
            .values()
            .map(|&i| {
                let v = rec.get(i).unwrap_or("0");
                v.parse::<u64>().map_err(|_| format!("bad count {v:?} for {name}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        events.extend(from_minute_counts(name, &counts));
    }
    Trace::new(events)
}
