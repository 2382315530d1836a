//! `bcnet`: cut-set bounds, linear deterministic relaying, Marton coding and
//! discrete superposition emulation from the command line.
//!
//! Every command writes a `#` header line with the tool version, the seed
//! and a SHA-256 hash of the configuration (flags plus input file bytes).
//! Exit codes: 0 ok, 2 parse or invalid input, 3 cap exceeded,
//! 4 precondition failed, 5 internal error.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use bcnet_core::codec::{run_trials, RelayKind};
use bcnet_core::cutset::{
    enumerate_cuts, gap_certificate, gaussian_cut_value, gaussian_region, layered_min_cut, ldn_cut_value,
    ldn_region, min_cut, uniform_inputs, Cut, GaussianLogDet, LdnBits, RateRegion, Targets,
};
use bcnet_core::detnet::DetNet;
use bcnet_core::dsn::emulation::{emulation_run, EmulationConfig, EmulationScheme};
use bcnet_core::dsn::fractional::{fractional_reduction_check, FractionalOptions};
use bcnet_core::dsn::lift::{DEFAULT_SEARCH_BUDGET, DEFAULT_WEAK_SLACK};
use bcnet_core::dsn::{default_resolution, DsnNetwork};
use bcnet_core::marton::{
    level3_run, sample_relay_tables, subset_entropies, symmetric_rate, uniform_dist, InducedChannel, Level3Config,
    SchemeParams,
};
use bcnet_core::rng::derive_rng;
use bcnet_core::{
    AnyNetwork, BufferRule, CMatrix, Error, ErrorKind, LayeredNetwork, NetworkDescription, RelayNetwork, Schedule,
    UnfoldOptions,
};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser, Debug)]
#[command(name = "bcnet", version, about = "Broadcast relay network bounds and coding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Linear,
    Permutation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Buffers {
    Both,
    Literal,
    Receive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Fixture {
    /// Blackwell channel: input {0,1,2}, Y1 = [x = 2], Y2 = [x >= 1].
    Blackwell,
}

#[derive(clap::Args, Debug)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cut-set region of a Gaussian or linear deterministic network.
    Cutset {
        input: PathBuf,
        /// Emit every evaluated cut instead of the binding ones.
        #[arg(long)]
        all_cuts: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Random relay matrices on a linear deterministic network.
    LdnSim {
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = Kind::Linear)]
        relay_kind: Kind,
        /// Unfold over this many steps first; the network must be layered
        /// otherwise.
        #[arg(long)]
        depth: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Desk-scale three-level Marton scheme.
    MartonSim {
        /// Linear deterministic or Gaussian network file.
        input: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "input")]
        fixture: Option<Fixture>,
        /// Grid resolution when the input is Gaussian.
        #[arg(long)]
        b: Option<u32>,
        #[arg(long, default_value_t = 1)]
        t1: usize,
        #[arg(long, default_value_t = 8)]
        t2: usize,
        #[arg(long, default_value_t = 1)]
        t3: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
        /// Fraction of the entropy bound used as rate.
        #[arg(long, default_value_t = 0.7)]
        margin: f64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Skip the pruning step.
        #[arg(long)]
        unpruned: bool,
        /// Error rate reported as acceptable.
        #[arg(long, default_value_t = 0.1)]
        error_threshold: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Discrete superposition network: per-cut gap against the Gaussian
    /// network, or emulation of its output with `--emulate`.
    Dsn {
        input: PathBuf,
        #[arg(long)]
        b: Option<u32>,
        #[arg(long)]
        emulate: bool,
        #[arg(long, default_value_t = 8)]
        t2: usize,
        #[arg(long, default_value_t = 0.1)]
        kappa: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0.7)]
        margin: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Drop the channel noise (decoder test mode).
        #[arg(long)]
        noiseless: bool,
        #[arg(long, default_value_t = DEFAULT_WEAK_SLACK)]
        weak_slack: f64,
        #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET)]
        budget: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Mutual information of a single link through the fractional and
    /// integer reductions.
    Fractional {
        /// Channel gain as `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        h: String,
        #[arg(long, default_value_t = 2)]
        b: u32,
        #[arg(long, default_value_t = 400)]
        grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Min-cut of the time-unfolded network.
    Unfold {
        input: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
        /// Half-duplex schedule such as `TRR,RTR,RRT`; sets the depth.
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long, value_enum, default_value_t = Buffers::Both)]
        buffer_rule: Buffers,
        #[command(flatten)]
        common: Common,
    },
    /// Cut values of a network and of its reciprocal.
    Reciprocity {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Cutset { common, .. }
            | Command::LdnSim { common, .. }
            | Command::MartonSim { common, .. }
            | Command::Dsn { common, .. }
            | Command::Fractional { common, .. }
            | Command::Unfold { common, .. }
            | Command::Reciprocity { common, .. } => common,
        }
    }

    fn input(&self) -> Option<&PathBuf> {
        match self {
            Command::Cutset { input, .. }
            | Command::LdnSim { input, .. }
            | Command::Dsn { input, .. }
            | Command::Unfold { input, .. }
            | Command::Reciprocity { input, .. } => Some(input),
            Command::MartonSim { input, .. } => input.as_ref(),
            Command::Fractional { .. } => None,
        }
    }
}

enum Failure {
    Core(Error),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Input(_) => 2,
        Failure::Core(e) => match e.kind() {
            ErrorKind::Parse => 2,
            ErrorKind::CapExceeded => 3,
            ErrorKind::Precondition => 4,
            ErrorKind::Internal => 5,
        },
    }
}

/// Collects the body of one emission.
enum Body {
    Csv { columns: Vec<&'static str>, rows: Vec<Vec<String>>, trailer: Vec<String> },
    Json(serde_json::Value),
}

fn csv(columns: Vec<&'static str>, rows: Vec<Vec<String>>) -> Body {
    Body::Csv {
        columns,
        rows,
        trailer: Vec::new(),
    }
}

fn json<T: Serialize>(v: &T) -> Body {
    Body::Json(serde_json::to_value(v).expect("reports serialize"))
}

fn render(body: Body, seed: u64, hash: &str) -> String {
    let version = env!("CARGO_PKG_VERSION");
    match body {
        Body::Csv { columns, rows, trailer } => {
            let mut out = format!("# bcnet {version} seed={seed} config_hash={hash}\n");
            out.push_str(&columns.join(","));
            out.push('\n');
            for r in rows {
                out.push_str(&r.join(","));
                out.push('\n');
            }
            for t in trailer {
                let _ = writeln!(out, "# {t}");
            }
            out
        }
        Body::Json(v) => {
            let doc = serde_json::json!({
                "header": { "tool": "bcnet", "version": version, "seed": seed, "config_hash": hash },
                "result": v,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("json");
            s.push('\n');
            s
        }
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn load(path: &PathBuf) -> Outcome<(NetworkDescription, AnyNetwork)> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let desc = NetworkDescription::parse(&text)?;
    let net = desc.build()?;
    Ok((desc, net))
}

fn target_label(t: &Targets) -> String {
    t.to_string()
}

fn cut_mask(c: &Cut) -> String {
    format!("{:#x}", c.omega.bits())
}

fn region_body(region: &RateRegion, all: bool, format: Format) -> Body {
    if format == Format::Json {
        return json(region);
    }
    let rows = if all {
        region
            .rows
            .iter()
            .map(|r| vec![target_label(&r.targets), cut_mask(&r.cut), num(r.value)])
            .collect()
    } else {
        let mut rows: Vec<Vec<String>> = region
            .constraints
            .iter()
            .map(|(&m, b)| vec![Targets::Flows(m).to_string(), cut_mask(&b.cut), num(b.value)])
            .collect();
        if let Some(b) = region.multicast_sum_bound {
            rows.push(vec!["sum".into(), cut_mask(&b.cut), num(b.value)]);
        }
        rows
    };
    csv(vec!["targets", "cut_bitmask", "value_bits"], rows)
}

fn cmd_cutset(input: &PathBuf, all: bool, format: Format) -> Outcome<Body> {
    let (_, net) = load(input)?;
    let region = match &net {
        AnyNetwork::Ldn(n) => ldn_region(n)?,
        AnyNetwork::Gaussian(n) => gaussian_region(n)?,
    };
    Ok(region_body(&region, all, format))
}

fn cmd_ldn_sim(input: &PathBuf, trials: u64, kind: Kind, depth: Option<usize>, c: &Common) -> Outcome<Body> {
    let (_, net) = load(input)?;
    let AnyNetwork::Ldn(net) = net else {
        return Err(Error::Precondition("ldn-sim needs a linear deterministic network".into()).into());
    };
    let layered = match depth {
        Some(k) => LayeredNetwork::unfold(&net, k, UnfoldOptions::default())?,
        None => LayeredNetwork::from_network(net)?,
    };
    let kind = match kind {
        Kind::Linear => RelayKind::Linear,
        Kind::Permutation => RelayKind::Permutation,
    };
    let records = run_trials(&layered, trials, c.seed, kind)?;
    if c.format == Format::Json {
        return Ok(json(&records));
    }
    let rows = records
        .iter()
        .map(|r| {
            let ranks: Vec<String> = r.ranks.iter().map(usize::to_string).collect();
            vec![r.trial.to_string(), ranks.join(";"), r.success.to_string()]
        })
        .collect();
    let successes = records.iter().filter(|r| r.success).count();
    Ok(Body::Csv {
        columns: vec!["trial", "rank_per_subset", "success"],
        rows,
        trailer: vec![format!("successes={successes}/{trials}")],
    })
}

fn dsn_of(net: &bcnet_core::GaussianNetwork, b: Option<u32>) -> Outcome<DsnNetwork> {
    Ok(DsnNetwork::derive(net, b.unwrap_or_else(|| default_resolution(net)))?)
}

#[derive(Serialize)]
struct MartonOutput {
    report: bcnet_core::marton::Level3Report,
    error_threshold: f64,
    within_threshold: bool,
}

#[allow(clippy::too_many_arguments)]
fn cmd_marton(
    input: Option<&PathBuf>,
    fixture: Option<Fixture>,
    b: Option<u32>,
    params: SchemeParams,
    margin: f64,
    trials: usize,
    pruned: bool,
    error_threshold: f64,
    seed: u64,
) -> Outcome<Body> {
    let net = match (input, fixture) {
        (_, Some(Fixture::Blackwell)) => DetNet::broadcast(3, &[vec![0, 0, 1], vec![0, 1, 1]])?,
        (Some(path), None) => match load(path)?.1 {
            AnyNetwork::Ldn(n) => DetNet::from_ldn(&LayeredNetwork::from_network(n)?)?,
            AnyNetwork::Gaussian(n) => DetNet::from_dsn(&dsn_of(&n, b)?)?,
        },
        (None, None) => return Err(Failure::Input("give a network file or --fixture".into())),
    };
    let cfg = Level3Config {
        params,
        margin,
        trials_per_block: trials,
        pruned,
        seed,
    };
    let report = level3_run(&net, &uniform_dist(&net), &cfg)?;
    let within_threshold = report.error_rate <= error_threshold;
    Ok(json(&MartonOutput {
        report,
        error_threshold,
        within_threshold,
    }))
}

fn cmd_dsn_gap(net: &bcnet_core::GaussianNetwork, b: Option<u32>, format: Format) -> Outcome<Body> {
    let dsn = dsn_of(net, b)?;
    let cert = gap_certificate(net, &dsn, &uniform_inputs(&dsn))?;
    if format == Format::Json {
        return Ok(json(&cert));
    }
    let rows = cert
        .entries
        .iter()
        .map(|e| vec![cut_mask(&e.cut), num(e.gaussian), num(e.discrete), num(e.gap)])
        .collect();
    Ok(Body::Csv {
        columns: vec!["cut_bitmask", "gaussian_bits", "discrete_bits", "gap_bits"],
        rows,
        trailer: vec![format!("b={} worst_gap_bits={}", dsn.bits().unwrap_or(0), num(cert.worst_gap))],
    })
}

#[derive(Serialize)]
struct EmulationOutput {
    b: u32,
    params: SchemeParams,
    rate_bits: f64,
    report: bcnet_core::dsn::emulation::EmulationReport,
}

fn cmd_dsn_emulate(
    net: &bcnet_core::GaussianNetwork,
    b: Option<u32>,
    params: SchemeParams,
    margin: f64,
    cfg: EmulationConfig,
) -> Outcome<Body> {
    let dsn = dsn_of(net, b)?;
    let det = DetNet::from_dsn(&dsn)?;
    let dist = uniform_dist(&det);
    let tables = sample_relay_tables(&det, &dist, 1, &mut derive_rng(cfg.seed, "relay-tables", 0))?;
    let ch = InducedChannel::induce(&det, &dist, &tables)?;
    let dests = det.roles().bc_destinations().to_vec();
    let h = subset_entropies(&ch, &dests)?;
    let rate = symmetric_rate(&h, det.receiving_nodes().len(), params.kappa, margin).max(0.0);
    let rates = vec![rate; dests.len()];
    let scheme = EmulationScheme::build(&dsn, dist, tables, &params, &rates, cfg.seed)?;
    let report = emulation_run(&scheme, &cfg)?;
    Ok(json(&EmulationOutput {
        b: dsn.bits().unwrap_or(0),
        params,
        rate_bits: rate,
        report,
    }))
}

fn parse_complex(s: &str) -> Outcome<Complex64> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || Failure::Input(format!("gain {s:?} is not `re,im`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let re = parts[0].trim().parse().map_err(|_| bad())?;
    let im = parts[1].trim().parse().map_err(|_| bad())?;
    Ok(Complex64::new(re, im))
}

fn cmd_fractional(h: &str, b: u32, grid: usize, c: &Common) -> Outcome<Body> {
    let h = CMatrix::from_element(1, 1, parse_complex(h)?);
    let opts = FractionalOptions {
        grid,
        seed: c.seed,
        ..FractionalOptions::default()
    };
    let rep = fractional_reduction_check(&h, b, &opts)?;
    if c.format == Format::Json {
        return Ok(json(&rep));
    }
    let rows = rep
        .checks
        .iter()
        .map(|k| vec![k.name.clone(), num(k.lhs), num(k.rhs), num(k.tolerance), k.holds.to_string()])
        .collect();
    Ok(Body::Csv {
        columns: vec!["check", "lhs_bits", "rhs_bits", "tolerance_bits", "holds"],
        rows,
        trailer: vec![format!(
            "gaussian_mi={} fractional_mi={} rounded_mi={} dsn_mi={}",
            num(rep.gaussian_mi),
            num(rep.fractional_mi),
            num(rep.rounded_mi),
            num(rep.dsn_mi)
        )],
    })
}

#[derive(Serialize)]
struct UnfoldRow {
    targets: String,
    depth: usize,
    unfolded_bits: f64,
    per_step_bits: f64,
    original_bits: f64,
}

fn unfold_rows<N: RelayNetwork>(
    net: &N,
    layered: &LayeredNetwork<N>,
    unfolded: impl Fn(&LayeredNetwork<N>, u32) -> Outcome<f64>,
    original: impl Fn(u32) -> Outcome<f64>,
) -> Outcome<Vec<UnfoldRow>> {
    let depth = layered.layers().len() - 2;
    let flows = net.roles().flow_count() as u32;
    let mut rows = Vec::new();
    for mask in 1u32..1 << flows {
        let u = unfolded(layered, mask)?;
        rows.push(UnfoldRow {
            targets: Targets::Flows(mask).to_string(),
            depth,
            unfolded_bits: u,
            per_step_bits: u / depth as f64,
            original_bits: original(mask)?,
        });
    }
    Ok(rows)
}

fn cmd_unfold(
    input: &PathBuf,
    depth: Option<usize>,
    schedule: Option<&str>,
    rule: Buffers,
    format: Format,
) -> Outcome<Body> {
    let (_, net) = load(input)?;
    let options = UnfoldOptions {
        buffer_rule: match rule {
            Buffers::Both => BufferRule::Both,
            Buffers::Literal => BufferRule::Literal,
            Buffers::Receive => BufferRule::Receive,
        },
    };
    let schedule: Option<Schedule> = schedule.map(str::parse).transpose()?;
    if schedule.is_none() && depth.is_none() {
        return Err(Failure::Input("give --depth or --schedule".into()));
    }
    macro_rules! unfold {
        ($n:expr) => {
            match &schedule {
                Some(s) => LayeredNetwork::unfold_scheduled($n, s, options)?,
                None => LayeredNetwork::unfold($n, depth.unwrap_or(0), options)?,
            }
        };
    }
    let rows = match &net {
        AnyNetwork::Ldn(n) => {
            let layered = unfold!(n);
            unfold_rows(
                n,
                &layered,
                |l, m| Ok(layered_min_cut(l, m, &LdnBits(l.network()))?.0),
                |m| Ok(min_cut(n, m, &LdnBits(n))?.0),
            )?
        }
        AnyNetwork::Gaussian(n) => {
            let layered = unfold!(n);
            unfold_rows(
                n,
                &layered,
                |l, m| Ok(layered_min_cut(l, m, &GaussianLogDet(l.network()))?.0),
                |m| Ok(min_cut(n, m, &GaussianLogDet(n))?.0),
            )?
        }
    };
    if format == Format::Json {
        return Ok(json(&rows));
    }
    Ok(csv(
        vec!["targets", "depth", "unfolded_bits", "per_step_bits", "original_bits"],
        rows.iter()
            .map(|r| {
                vec![
                    r.targets.clone(),
                    r.depth.to_string(),
                    num(r.unfolded_bits),
                    num(r.per_step_bits),
                    num(r.original_bits),
                ]
            })
            .collect(),
    ))
}

#[derive(Serialize)]
struct ReciprocityRow {
    targets: String,
    cut_bitmask: String,
    forward_bits: f64,
    reverse_bits: f64,
}

#[derive(Serialize)]
struct ReciprocityOutput {
    rows: Vec<ReciprocityRow>,
    all_equal: bool,
}

fn cmd_reciprocity(input: &PathBuf, format: Format) -> Outcome<Body> {
    let (_, net) = load(input)?;
    let n = net.node_count();
    let flows = net.roles().flow_count() as u32;
    let mut rows = Vec::new();
    let mut all_equal = true;
    let mut push = |mask: u32, c: &Cut, f: f64, r: f64, exact: bool| {
        let equal = if exact { f == r } else { (f - r).abs() <= 1e-9 * (1.0 + f.abs()) };
        all_equal &= equal;
        rows.push(ReciprocityRow {
            targets: Targets::Flows(mask).to_string(),
            cut_bitmask: cut_mask(c),
            forward_bits: f,
            reverse_bits: r,
        });
    };
    match &net {
        AnyNetwork::Ldn(g) => {
            let rec = g.reciprocal()?;
            for mask in 1..1 << flows {
                for c in enumerate_cuts(g, mask)? {
                    let back = Cut {
                        omega: c.omega.complement(n),
                    };
                    push(mask, &c, ldn_cut_value(g, &c), ldn_cut_value(&rec, &back), true);
                }
            }
        }
        AnyNetwork::Gaussian(g) => {
            let rec = g.reciprocal()?;
            for mask in 1..1 << flows {
                for c in enumerate_cuts(g, mask)? {
                    let back = Cut {
                        omega: c.omega.complement(n),
                    };
                    let f = gaussian_cut_value(g, &c, None)?;
                    let r = gaussian_cut_value(&rec, &back, None)?;
                    push(mask, &c, f, r, false);
                }
            }
        }
    }
    if format == Format::Json {
        return Ok(json(&ReciprocityOutput { rows, all_equal }));
    }
    Ok(Body::Csv {
        columns: vec!["targets", "cut_bitmask", "forward_bits", "reverse_bits"],
        rows: rows
            .iter()
            .map(|r| vec![r.targets.clone(), r.cut_bitmask.clone(), num(r.forward_bits), num(r.reverse_bits)])
            .collect(),
        trailer: vec![format!("all_equal={all_equal}")],
    })
}

fn run(cmd: &Command) -> Outcome<Body> {
    match cmd {
        Command::Cutset { input, all_cuts, common } => cmd_cutset(input, *all_cuts, common.format),
        Command::LdnSim {
            input,
            trials,
            relay_kind,
            depth,
            common,
        } => cmd_ldn_sim(input, *trials, *relay_kind, *depth, common),
        Command::MartonSim {
            input,
            fixture,
            b,
            t1,
            t2,
            t3,
            delta,
            kappa,
            margin,
            trials,
            unpruned,
            error_threshold,
            common,
        } => {
            let params = SchemeParams {
                t1: *t1,
                t2: *t2,
                t3: *t3,
                delta: *delta,
                kappa: *kappa,
            };
            cmd_marton(
                input.as_ref(),
                *fixture,
                *b,
                params,
                *margin,
                *trials,
                !unpruned,
                *error_threshold,
                common.seed,
            )
        }
        Command::Dsn {
            input,
            b,
            emulate,
            t2,
            kappa,
            delta,
            margin,
            trials,
            noiseless,
            weak_slack,
            budget,
            common,
        } => {
            let (_, net) = load(input)?;
            let AnyNetwork::Gaussian(net) = net else {
                return Err(Error::Precondition("dsn needs a Gaussian network".into()).into());
            };
            if !emulate {
                return cmd_dsn_gap(&net, *b, common.format);
            }
            let params = SchemeParams {
                t1: 1,
                t2: *t2,
                t3: 1,
                delta: delta.unwrap_or(1.0 / *t2 as f64),
                kappa: *kappa,
            };
            let cfg = EmulationConfig {
                trials: *trials,
                seed: common.seed,
                noiseless: *noiseless,
                weak_slack: *weak_slack,
                budget: *budget,
            };
            cmd_dsn_emulate(&net, *b, params, *margin, cfg)
        }
        Command::Fractional { h, b, grid, common } => cmd_fractional(h, *b, *grid, common),
        Command::Unfold {
            input,
            depth,
            schedule,
            buffer_rule,
            common,
        } => cmd_unfold(input, *depth, schedule.as_deref(), *buffer_rule, common.format),
        Command::Reciprocity { input, common } => cmd_reciprocity(input, common.format),
    }
}

fn config_hash(cmd: &Command) -> String {
    let mut h = Sha256::new();
    h.update(format!("{cmd:?}").as_bytes());
    if let Some(p) = cmd.input() {
        if let Ok(bytes) = std::fs::read(p) {
            h.update(&bytes);
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let hash = config_hash(&cli.command);
    match run(&cli.command) {
        Ok(body) => {
            print!("{}", render(body, cli.command.common().seed, &hash));
            ExitCode::SUCCESS
        }
        Err(f) => {
            let msg = match &f {
                Failure::Core(e) => e.to_string(),
                Failure::Input(s) => s.clone(),
            };
            eprintln!("bcnet: {msg}");
            ExitCode::from(exit_code(&f))
        }
    }
}
