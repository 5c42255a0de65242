use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rfork_sim::bench::{
    gen_spike_trace, parse_dag, parse_registry, parse_trace, replay_with, write_trace,
    FunctionModel, ReplayError, ReplayOptions, SimConfig, Trace,
};
use rfork_sim::descriptor::{
    build_descriptor, deserialize, serialize, ContainerDescriptor, ParentImage, Registers,
};
use rfork_sim::fabric::{DcKey, NodeId};
use rfork_sim::orchestrator::{fork_demo, Cluster, ClusterConfig, DemoConfig};
use rfork_sim::platform::{
    build_root, image_content, Platform, StateMode, Strategy, WorkflowOptions,
};
use rfork_sim::time::{Nanos, SimTime};

#[derive(Parser)]
#[command(name = "sim", about = "Remote container fork simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay an invocation trace under one strategy.
    Replay(ReplayArgs),
    /// Generate a Poisson spike trace, optionally replaying it.
    Spike(SpikeArgs),
    /// Multi-hop fork demonstrations.
    Fork {
        #[command(subcommand)]
        command: ForkCommand,
    },
    /// Inspect serialized descriptors.
    Descriptor {
        #[command(subcommand)]
        command: DescriptorCommand,
    },
    /// Run a workflow DAG once and report per-step timing.
    Workflow(WorkflowArgs),
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Overrides the config's strategy.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's `registry` key.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Plant these functions' seeds before the first arrival.
    #[arg(long, value_delimiter = ',')]
    prewarm: Vec<String>,
}

#[derive(Args)]
struct SpikeArgs {
    /// Background arrival rate, requests per second.
    #[arg(long)]
    base: f64,
    /// Arrival rate during the spike.
    #[arg(long)]
    spike: f64,
    #[arg(long, default_value_t = 10.0)]
    spike_start: f64,
    #[arg(long, default_value_t = 5.0)]
    spike_len: f64,
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value = "hello")]
    function: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Where to write the trace; stdout when absent.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Replay the generated trace under each listed strategy.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<Strategy>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Result directory; one subdirectory per strategy.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ForkCommand {
    /// Fork a chain across machines and verify every page read.
    Demo {
        #[arg(long, default_value_t = 3)]
        hops: usize,
        #[arg(long, default_value_t = 1024)]
        pages: u64,
        #[arg(long, default_value_t = 0.5)]
        touch: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        prefetch: usize,
    },
}

#[derive(Subcommand)]
enum DescriptorCommand {
    /// Pretty-print a serialized descriptor.
    Dump {
        file: PathBuf,
        /// Also list every page table entry.
        #[arg(long)]
        entries: bool,
    },
    /// Write the descriptor of a freshly started function container.
    Sample {
        #[arg(long, default_value_t = 64.0)]
        image_mb: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct WorkflowArgs {
    #[arg(long)]
    dag: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    registry: Option<PathBuf>,
    /// `fork` or `message` state transfer.
    #[arg(long, default_value = "fork")]
    mode: String,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Simulation(String),
}

impl From<ReplayError> for Failure {
    fn from(e: ReplayError) -> Self {
        match e {
            ReplayError::Config(m) => Failure::Config(m),
            ReplayError::Simulation(m) => Failure::Simulation(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Replay(a) => replay_cmd(a),
        Command::Spike(a) => spike_cmd(a),
        Command::Fork {
            command: ForkCommand::Demo { hops, pages, touch, seed, prefetch },
        } => demo_cmd(DemoConfig { hops, pages, touch_ratio: touch, seed, prefetch }),
        Command::Descriptor { command: DescriptorCommand::Dump { file, entries } } => {
            dump_cmd(&file, entries)
        }
        Command::Descriptor { command: DescriptorCommand::Sample { image_mb, out } } => {
            sample_cmd(image_mb, &out)
        }
        Command::Workflow(a) => workflow_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Simulation(m)) => {
            eprintln!("simulation failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<SimConfig, Failure> {
    match path {
        Some(p) => SimConfig::load(p).map_err(|e| Failure::Config(e.to_string())),
        None => Ok(SimConfig::default()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn load_registry(cli: Option<&Path>, config: &SimConfig) -> Result<Vec<FunctionModel>, Failure> {
    let path = cli
        .or(config.registry.as_deref())
        .ok_or_else(|| Failure::Config("no function registry: pass --registry or set registry= in the config".into()))?;
    parse_registry(open(path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn run_replay(
    trace: &Trace,
    registry: &[FunctionModel],
    config: &SimConfig,
    prewarm: &[String],
    out: &Path,
) -> Result<(), Failure> {
    let options = ReplayOptions {
        prewarm: prewarm.to_vec(),
        ..ReplayOptions::default()
    };
    let (metrics, _) = replay_with(trace, registry, config, &options)?;
    metrics
        .report(out)
        .map_err(|e| Failure::Config(format!("{}: {e}", out.display())))?;
    print!("{}", metrics.summary());
    Ok(())
}

fn replay_cmd(a: ReplayArgs) -> Result<(), Failure> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(s) = a.strategy {
        config = config.with_strategy(s);
    }
    let registry = load_registry(a.registry.as_deref(), &config)?;
    let trace = parse_trace(open(&a.trace)?)
        .map_err(|e| Failure::Config(format!("{}: {e}", a.trace.display())))?;
    run_replay(&trace, &registry, &config, &a.prewarm, &a.out)
}

fn spike_cmd(a: SpikeArgs) -> Result<(), Failure> {
    let trace = gen_spike_trace(
        &a.function,
        a.base,
        a.spike,
        a.spike_start,
        a.spike_len,
        a.duration,
        a.seed,
    )
    .map_err(Failure::Config)?;
    match &a.trace_out {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            write_trace(&trace, f).map_err(Failure::Config)?;
        }
        None if a.strategies.is_empty() => {
            write_trace(&trace, std::io::stdout().lock()).map_err(Failure::Config)?;
        }
        None => {}
    }
    if a.strategies.is_empty() {
        return Ok(());
    }
    let out = a
        .out
        .as_deref()
        .ok_or_else(|| Failure::Config("--strategies needs --out".into()))?;
    let config = load_config(a.config.as_deref())?;
    let registry = match load_registry(a.registry.as_deref(), &config) {
        Ok(r) => r,
        Err(_) if a.registry.is_none() && config.registry.is_none() => {
            vec![FunctionModel::new(&a.function, 64.0, 16.0, 0.1, 5.0)]
        }
        Err(e) => return Err(e),
    };
    for s in a.strategies {
        println!("[{s}]");
        let dir = out.join(s.name());
        run_replay(&trace, &registry, &config.clone().with_strategy(s), &[], &dir)?;
    }
    Ok(())
}

fn demo_cmd(config: DemoConfig) -> Result<(), Failure> {
    if config.pages == 0 {
        return Err(Failure::Config("--pages must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.touch_ratio) {
        return Err(Failure::Config("--touch must be within [0, 1]".into()));
    }
    let reports = fork_demo(&config).map_err(|e| Failure::Simulation(e.to_string()))?;
    println!("hop node prepare_us resume_us access_us touched local rdma rpc prefetched verified");
    let mut ok = true;
    for r in &reports {
        println!(
            "{:>3} {:>4} {:>10.1} {:>9.1} {:>9.1} {:>7} {:>5} {:>4} {:>3} {:>10} {}",
            r.hop,
            r.node.0,
            us(r.prepare),
            us(r.resume),
            us(r.access),
            r.pages_touched,
            r.stats.faults_local,
            r.stats.faults_rdma,
            r.stats.faults_rpc,
            r.stats.pages_prefetched,
            r.verified
        );
        ok &= r.verified;
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Simulation("a child read bytes that differ from its parent's".into()))
    }
}

fn us(n: Nanos) -> f64 {
    n.0 as f64 / 1e3
}

fn dump_cmd(file: &Path, entries: bool) -> Result<(), Failure> {
    let bytes = std::fs::read(file).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
    let d = deserialize(&bytes).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
    print!("{}", render(&d, bytes.len(), entries));
    Ok(())
}

fn render(d: &ContainerDescriptor, len: usize, entries: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "descriptor {} bytes", len);
    let _ = writeln!(s, "  handle_id   {}", d.handle_id);
    let _ = writeln!(s, "  isolation   {} bytes", d.isolation.len());
    let nz = d.registers.0.iter().filter(|&&b| b != 0).count();
    let _ = writeln!(s, "  registers   {nz} nonzero bytes");
    let _ = writeln!(s, "  ancestors   {}", d.ancestors.len());
    for (i, a) in d.ancestors.iter().enumerate() {
        let _ = writeln!(s, "    owner {:>2}  node {} handle {}", i + 1, a.node.0, a.handle_id);
    }
    let _ = writeln!(s, "  vmas        {}", d.vmas.len());
    for v in &d.vmas {
        let m = &v.vma;
        let _ = writeln!(
            s,
            "    vma {:>3}  {:#014x}-{:#014x}  prot {:03b} flags {:#04x}  key {}/{:#x}  entries {}",
            m.vma_id,
            m.start_va,
            m.end_va,
            m.prot,
            m.flags,
            m.dc_key.nic_num,
            m.dc_key.user_key,
            v.ptes.len()
        );
        if entries {
            for (vpn, pte) in &v.ptes {
                let _ = writeln!(
                    s,
                    "      vpn {:#x}  pfn {:#x}  owner {}",
                    vpn.0,
                    pte.pfn().0,
                    pte.owner()
                );
            }
        }
    }
    let _ = writeln!(s, "  files       {}", d.files.len());
    for f in &d.files {
        let _ = writeln!(s, "    fd {:>3}  {}  offset {} flags {:#x}", f.fd, f.path, f.offset, f.flags);
    }
    s
}

fn sample_cmd(image_mb: f64, out: &Path) -> Result<(), Failure> {
    let model = FunctionModel::new("sample", image_mb, image_mb.min(1.0), 1.0, 1.0);
    model.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let mut cluster = Cluster::new(ClusterConfig {
        nodes: 1,
        ..ClusterConfig::default()
    });
    let paging = cluster.config().paging.clone();
    let space = build_root(
        cluster.fabric_mut(),
        NodeId(0),
        &model,
        &image_content("sample"),
        paging,
    );
    let keys: BTreeMap<u32, DcKey> = space
        .vmas()
        .iter()
        .map(|v| (v.vma_id, DcKey { nic_num: 0, user_key: 0x5eed_0000 + v.vma_id as u64 }))
        .collect();
    let parent = ParentImage {
        space: &space,
        isolation: b"ns:sample",
        registers: &Registers::default(),
        files: &[],
    };
    let d = build_descriptor(1, parent, &keys).map_err(|e| Failure::Simulation(e.to_string()))?;
    let bytes = serialize(&d);
    std::fs::write(out, &bytes).map_err(|e| Failure::Config(format!("{}: {e}", out.display())))?;
    println!("wrote {} bytes for {} entries to {}", bytes.len(), d.pte_count(), out.display());
    Ok(())
}

fn workflow_cmd(a: WorkflowArgs) -> Result<(), Failure> {
    let config = load_config(a.config.as_deref())?;
    let registry = load_registry(a.registry.as_deref(), &config)?;
    let dag = parse_dag(open(&a.dag)?).map_err(|e| Failure::Config(format!("{}: {e}", a.dag.display())))?;
    let mode = match a.mode.as_str() {
        "fork" => StateMode::Fork,
        "message" => StateMode::Message,
        m => return Err(Failure::Config(format!("unknown mode {m:?}"))),
    };
    let mut platform = Platform::new(config.cluster.clone(), config.with_strategy(Strategy::Mitosis).platform);
    for m in registry {
        platform.register(m).map_err(|e| Failure::Config(e.to_string()))?;
    }
    let r = platform
        .run_workflow(SimTime::ZERO, &dag, mode, WorkflowOptions::default())
        .map_err(|e| Failure::Config(e.to_string()))?;
    println!("step function node transfer start_us end_us startup_us state_pages");
    for o in &r.outcomes {
        println!(
            "{} {} {} {:?} {:.1} {:.1} {:.1} {}",
            o.id,
            dag.nodes().iter().find(|n| n.id == o.id).map_or("?", |n| n.function.as_str()),
            o.node.0,
            o.transfer,
            us(o.start.since(SimTime::ZERO)),
            us(o.end.since(SimTime::ZERO)),
            us(o.startup),
            o.state_pages_read
        );
    }
    println!("latency_us={:.1}", us(r.latency));
    println!("serialization_us={:.1}", us(r.serialization));
    println!("store_io_us={:.1}", us(r.store_io));
    match r.error {
        Some(e) => Err(Failure::Simulation(e)),
        None => Ok(()),
    }
}
