//! Line formats for the function registry, workflow DAGs and traces.

use std::io::{Read, Write};

use crate::platform::{Dag, DagNode, FunctionModel, NodeMode};

use super::trace::{Trace, TraceEvent};

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn num(field: &str, what: &str, line: u64) -> Result<f64, String> {
    field
        .parse::<f64>()
        .map_err(|_| format!("line {line}: bad {what} {field:?}"))
}

/// `name,image_mb,working_set_mb,touch_ratio,exec_ms` per line. A first line
/// starting with `name` is a header.
pub fn parse_registry<R: Read>(r: R) -> Result<Vec<FunctionModel>, String> {
    let mut out = Vec::new();
    for rec in reader(r).records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map_or(0, |p| p.line());
        if out.is_empty() && rec.get(0) == Some("name") {
            continue;
        }
        if rec.len() != 5 {
            return Err(format!("line {line}: expected 5 fields, got {}", rec.len()));
        }
        let m = FunctionModel::new(
            &rec[0],
            num(&rec[1], "image_mb", line)?,
            num(&rec[2], "working_set_mb", line)?,
            num(&rec[3], "touch_ratio", line)?,
            num(&rec[4], "exec_ms", line)?,
        );
        m.validate().map_err(|e| format!("line {line}: {e}"))?;
        if out.iter().any(|o: &FunctionModel| o.name == m.name) {
            return Err(format!("line {line}: duplicate function {:?}", m.name));
        }
        out.push(m);
    }
    Ok(out)
}

/// `node_id,function,upstreams,mode[,state_mb]` per line; upstreams are
/// `;`-separated and may be empty.
pub fn parse_dag<R: Read>(r: R) -> Result<Dag, String> {
    let mut nodes = Vec::new();
    for rec in reader(r).records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map_or(0, |p| p.line());
        if nodes.is_empty() && rec.get(0) == Some("node_id") {
            continue;
        }
        if !(3..=5).contains(&rec.len()) {
            return Err(format!("line {line}: expected 4 or 5 fields"));
        }
        let upstreams: Vec<&str> = rec[2].split(';').map(str::trim).filter(|s| !s.is_empty()).collect();
        let mode: NodeMode = rec
            .get(3)
            .unwrap_or("")
            .parse()
            .map_err(|e| format!("line {line}: {e}"))?;
        let mut node = DagNode::new(&rec[0], &rec[1], &upstreams, mode);
        if let Some(s) = rec.get(4).filter(|s| !s.is_empty()) {
            node = node.with_state_mb(num(s, "state_mb", line)?);
        }
        nodes.push(node);
    }
    Dag::new(nodes)
}

/// `t_ms,function` per line.
pub fn parse_trace<R: Read>(r: R) -> Result<Trace, String> {
    let mut events = Vec::new();
    for rec in reader(r).records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map_or(0, |p| p.line());
        if events.is_empty() && rec.get(0) == Some("t_ms") {
            continue;
        }
        if rec.len() != 2 {
            return Err(format!("line {line}: expected t_ms,function"));
        }
        events.push(TraceEvent {
            t_ms: num(&rec[0], "t_ms", line)?,
            function: rec[1].to_string(),
        });
    }
    Trace::new(events)
}

pub fn write_trace<W: Write>(trace: &Trace, w: W) -> Result<(), String> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t_ms", "function"]).map_err(|e| e.to_string())?;
    for e in trace.events() {
        wr.write_record([format!("{:.3}", e.t_ms), e.function.clone()])
            .map_err(|e| e.to_string())?;
    }
    wr.flush().map_err(|e| e.to_string())
}
