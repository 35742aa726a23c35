//! `polyflow`: build surfaces, trace flows, and run the analyses from the
//! command line.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::{json, Value};

use polyflow::analysis::{self, ProbeOptions, ProbeOutcome, ProbeReport};
use polyflow::contfrac::{cf_convergents, cf_expand, check_property_A};
use polyflow::cylinders::{self, DecomposeOptions, Direction, Gate, Seed, TowerQuery};
use polyflow::experiment::{self, ExperimentManifest};
use polyflow::flow::{self, Budget, Sense, TraceOptions};
use polyflow::generators::{LStripSpec, WindTreeSpec};
use polyflow::shortline;
use polyflow::surface::{self, build_named, four_copy, p_ball, surface_from_json, surface_to_json, SurfaceRef};
use polyflow::{FaceId, PhasePoint, QuadRat};

use output::{OutputArgs, Sink, Table};

#[derive(Parser, Debug)]
#[command(name = "polyflow", version, about = "Exact geodesic flow on polysquare surfaces")]
struct Cli {
    /// Seed for generators and sampling; defaults to POLYFLOW_SEED or 0.
    #[arg(long, global = true, env = "POLYFLOW_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel analyses (default: all cores).
    #[arg(long, short, global = true)]
    jobs: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and inspect surfaces.
    #[command(subcommand)]
    Surface(SurfaceCmd),
    /// Continued fractions of quadratic irrationals.
    #[command(subcommand)]
    Cf(CfCmd),
    /// Trace a geodesic and list its edge crossings.
    Trace(TraceArgs),
    /// Shortline chains, ancestor tables and free gaps.
    #[command(subcommand)]
    Shortline(ShortlineCmd),
    /// Rational directions: cylinders, towers, L-strips, rhombus mazes.
    #[command(subcommand)]
    Cyl(CylCmd),
    /// Cover time T(n) of a corner geodesic.
    Density(DensityArgs),
    /// Growth of the region explored by a geodesic, or wind-tree diffusion.
    Escape(EscapeArgs),
    /// Complete periodicity probe of wind-tree slopes.
    Periodic(PeriodicArgs),
    /// First completely periodic wind-tree slope up to a bound.
    Search(SearchArgs),
    /// Cover lengths of a line in the unit square or cube.
    Torusdemo(TorusArgs),
    /// Execute an experiment manifest.
    Run(RunArgs),
}

#[derive(Args, Debug, Clone)]
struct SurfaceArgs {
    /// Named builder, e.g. L-surface, shark, windtree.
    #[arg(long, short = 's', default_value = "L-surface")]
    surface: String,
    /// Builder parameters as a JSON object.
    #[arg(long, default_value = "{}")]
    params: String,
    /// Surface file (JSON); overrides --surface.
    #[arg(long)]
    file: Option<PathBuf>,
}

impl SurfaceArgs {
    fn build(&self, seed: u64) -> Result<SurfaceRef> {
        if let Some(path) = &self.file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(surface_from_json(&text)?);
        }
        let params: Value = serde_json::from_str(&self.params).context("--params must be a JSON object")?;
        Ok(build_named(&self.surface, &params, seed)?)
    }
}

#[derive(Subcommand, Debug)]
enum SurfaceCmd {
    /// Write the surface as a JSON surface file.
    Build(SurfaceArgs),
    /// List the horizontal and vertical streets.
    Streets {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// Restrict to faces within this P-distance of the origin.
        #[arg(long)]
        radius: Option<usize>,
    },
    /// P-distance between two faces.
    Pdist {
        #[command(flatten)]
        surface: SurfaceArgs,
        a: String,
        b: String,
        #[arg(long, default_value_t = 1 << 20)]
        budget: usize,
    },
    /// The 4-copy translation surface of a billiard region.
    Fourcopy {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// Faces of the region to copy when it is infinite.
        #[arg(long, default_value_t = 4)]
        radius: usize,
    },
    /// The diagonal (1,1) subdivision, as a finite surface.
    Subdivide {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, default_value_t = 1)]
        k: i64,
        #[arg(long, default_value_t = 1)]
        l: i64,
    },
    /// List the names accepted by --surface.
    List,
}

#[derive(Subcommand, Debug)]
enum CfCmd {
    /// Digits of the expansion.
    Expand {
        x: String,
        #[arg(long, default_value_t = 20)]
        depth: usize,
    },
    /// Convergents p_k / q_k.
    Convergents {
        x: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Empirical Property A constant C1(n).
    #[command(name = "propA")]
    PropA {
        x: String,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        n: Vec<u64>,
    },
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[command(flatten)]
    surface: SurfaceArgs,
    /// Start as "face,x,y", e.g. "0:0,0,1/2".
    #[arg(long, default_value = "0:0,0,0")]
    start: String,
    #[arg(long, default_value = "1 + sqrt(2)")]
    slope: String,
    /// Number of crossings.
    #[arg(long, default_value_t = 100)]
    budget: usize,
    /// Trace backwards in time.
    #[arg(long)]
    reverse: bool,
    /// Reflect off walls (billiard flow).
    #[arg(long)]
    billiard: bool,
}

#[derive(Subcommand, Debug)]
enum ShortlineCmd {
    /// Slopes, detour counts and crossing counts of each level.
    Chain(ChainArgs),
    /// Unit types and their ancestors at a fine level.
    Ancestors {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, default_value_t = 2)]
        fine: usize,
        /// Iterate the ancestor relation this many steps.
        #[arg(long, default_value_t = 1)]
        steps: usize,
    },
    /// Largest free interval on the vertical edges.
    Freegap {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, default_value = "1 + sqrt(2)")]
        slope: String,
        /// Squared Euclidean length of the segment.
        #[arg(long, default_value = "1000000")]
        length2: String,
    },
}

#[derive(Args, Debug)]
struct ChainArgs {
    #[command(flatten)]
    surface: SurfaceArgs,
    #[arg(long, default_value = "1 + sqrt(2)")]
    slope: String,
    #[arg(long, default_value = "64")]
    m0: String,
    #[arg(long, default_value_t = 4)]
    depth: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GateArg {
    G1,
    G2,
}

#[derive(Subcommand, Debug)]
enum CylCmd {
    /// Cylinder decomposition in a rational direction.
    Decompose {
        #[command(flatten)]
        surface: SurfaceArgs,
        /// Slope p/q, or "vertical".
        #[arg(long, default_value = "1")]
        slope: String,
        /// Seed faces within this P-distance when the surface is infinite.
        #[arg(long, default_value_t = 2)]
        radius: usize,
    },
    /// Exit of a slope-m billiard from a k-tower.
    Tower {
        #[arg(long)]
        k: u32,
        #[arg(long, allow_hyphen_values = true)]
        m: i64,
        #[arg(long, value_enum, default_value = "g1")]
        gate: GateArg,
    },
    /// Tilted streets of a periodic L-strip.
    Strip {
        /// Period as "v x h" pairs, e.g. "2x3,3x2".
        #[arg(long, default_value = "2x2")]
        pattern: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "2,3")]
        m: Vec<i64>,
        #[arg(long, default_value_t = 40)]
        bound: usize,
    },
    /// Rhombus maze of the 4-copy infinite L-strip.
    Rhombus {
        #[arg(long, default_value_t = 2)]
        m: i64,
        /// Number of L periods in the scope.
        #[arg(long, default_value_t = 3)]
        periods: i64,
    },
    /// Original slope of a rhombus-maze slope.
    Mapslope {
        #[arg(long, allow_hyphen_values = true)]
        m: i64,
        beta: String,
    },
}

#[derive(Clone, Debug, ValueEnum)]
enum ScopeArg {
    All,
    Ball,
}

#[derive(Args, Debug)]
struct DensityArgs {
    #[command(flatten)]
    surface: SurfaceArgs,
    #[arg(long, default_value = "1 + sqrt(2)")]
    slope: String,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
    n: Vec<u64>,
    /// Faces whose edges must be covered.
    #[arg(long, value_enum, default_value = "all")]
    scope: ScopeArg,
    /// P-ball radius for --scope ball.
    #[arg(long, default_value_t = 1)]
    radius: usize,
    #[arg(long, default_value_t = 1 << 26)]
    max_events: usize,
}

#[derive(Args, Debug)]
struct EscapeArgs {
    #[command(flatten)]
    surface: SurfaceArgs,
    #[arg(long, default_value = "1 + sqrt(2)")]
    slope: String,
    #[arg(long, default_value = "0")]
    x: String,
    #[arg(long, default_value = "0")]
    y: String,
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    checkpoints: Vec<f64>,
    #[arg(long, default_value_t = 1 << 20)]
    budget: usize,
    /// Mean displacement of random wind-tree billiards instead.
    #[arg(long)]
    diffusion: bool,
    #[arg(long, default_value = "1/2")]
    a: String,
    #[arg(long, default_value = "1/2")]
    b: String,
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Scatterer side a.
    #[arg(long, default_value = "1/2")]
    a: String,
    /// Scatterer side b.
    #[arg(long, default_value = "1/2")]
    b: String,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 100_000)]
    cutoff: u64,
    #[arg(long, default_value_t = 100)]
    escape: i64,
    /// Denominator of the sampled start points.
    #[arg(long, default_value_t = 1009)]
    q: i64,
}

impl ProbeArgs {
    fn spec(&self) -> Result<WindTreeSpec> {
        Ok(WindTreeSpec::new(rational(&self.a)?, rational(&self.b)?))
    }

    fn options(&self, seed: u64) -> ProbeOptions {
        ProbeOptions { samples: self.samples, cutoff: self.cutoff, escape: self.escape, q: self.q, seed }
    }
}

#[derive(Args, Debug)]
struct PeriodicArgs {
    #[command(flatten)]
    probe: ProbeArgs,
    /// Probe every lowest-terms k/l with k, l up to this bound.
    #[arg(long, default_value_t = 5)]
    max: i64,
    /// A single slope "k/l" instead.
    #[arg(long)]
    slope: Option<String>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    probe: ProbeArgs,
    #[arg(long, default_value_t = 4)]
    bound: i64,
    /// Probe every candidate instead of stopping at the first hit.
    #[arg(long)]
    all: bool,
}

#[derive(Args, Debug)]
struct TorusArgs {
    /// Direction vector, 2 or 3 components.
    #[arg(long, value_delimiter = ',', default_value = "1,1.2599210498948732,1.5874010519681994")]
    direction: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
    n: Vec<u64>,
    #[arg(long, default_value_t = 1e9)]
    max_length: f64,
}

#[derive(Args, Debug)]
struct RunArgs {
    manifest: PathBuf,
    /// Directory for the artifacts.
    #[arg(long, default_value = "polyflow-out")]
    out_dir: PathBuf,
}

fn quad(s: &str) -> Result<QuadRat> {
    s.parse().map_err(|e| anyhow!("{e}"))
}

fn rational(s: &str) -> Result<BigRational> {
    quad(s)?.as_rational().cloned().ok_or_else(|| anyhow!("{s:?} is not rational"))
}

fn fraction(s: &str) -> Result<(i64, i64)> {
    let (k, l) = s.split_once('/').unwrap_or((s, "1"));
    Ok((k.trim().parse()?, l.trim().parse()?))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn strip_pattern(s: &str) -> Result<Vec<(u32, u32)>> {
    s.split(',')
        .map(|p| {
            let (v, h) = p.split_once('x').ok_or_else(|| anyhow!("pattern entry {p:?} is not \"v x h\""))?;
            Ok((v.trim().parse()?, h.trim().parse()?))
        })
        .collect()
}

fn direction(s: &str) -> Result<Direction> {
    if s.trim() == "vertical" {
        return Ok(Direction::vertical());
    }
    Ok(Direction::from_slope(&quad(s)?)?)
}

fn scope_faces(s: &SurfaceRef, radius: usize) -> Result<Vec<FaceId>> {
    match s.faces() {
        Some(f) => Ok(f),
        None => Ok(p_ball(&**s, s.origin(), radius, 1 << 20)?),
    }
}

fn probe_table(reports: &[ProbeReport]) -> Table {
    let mut t = Table::new(&["k", "l", "outcome", "closed", "max_period", "resampled", "distance"]);
    for r in reports {
        let (outcome, distance) = match &r.outcome {
            ProbeOutcome::AllClosed => ("closed", String::new()),
            ProbeOutcome::Undecided => ("undecided", String::new()),
            ProbeOutcome::EscapeWitness { distance, .. } => ("escape", distance.to_string()),
        };
        t.push(vec![r.k.to_string(), r.l.to_string(), outcome.into(), r.closed.to_string(), r.max_period.to_string(), r.resampled.to_string(), distance]);
    }
    t
}

fn surface_cmd(cmd: SurfaceCmd, seed: u64, sink: &Sink) -> Result<()> {
    match cmd {
        SurfaceCmd::Build(a) => {
            let s = a.build(seed)?;
            let v: Value = serde_json::from_str(&surface_to_json(&*s)?)?;
            sink.report(&v, None)
        }
        SurfaceCmd::Streets { surface, radius } => {
            let s = surface.build(seed)?;
            let scope = match radius {
                Some(r) => Some(p_ball(&*s, s.origin(), r, 1 << 20)?),
                None => None,
            };
            let streets = surface::streets(&*s, scope.as_deref())?;
            let mut t = Table::new(&["direction", "length", "faces"]);
            for st in &streets {
                let faces: Vec<String> = st.cycle.iter().map(|f| f.to_string()).collect();
                t.push(vec![format!("{:?}", st.direction).to_lowercase(), st.length.to_string(), faces.join(" ")]);
            }
            let lcm = surface::street_lcm(&*s, scope.as_deref())?;
            let report = json!({"surface": s.name(), "street_lcm": lcm, "streets": streets});
            sink.report(&report, Some(&t))
        }
        SurfaceCmd::Pdist { surface, a, b, budget } => {
            let s = surface.build(seed)?;
            let (a, b): (FaceId, FaceId) = (a.parse()?, b.parse()?);
            let d = surface::p_distance(&*s, a, b, budget)?;
            sink.report(&json!({"a": a, "b": b, "p_distance": d}), None)
        }
        SurfaceCmd::Fourcopy { surface, radius } => {
            let s = surface.build(seed)?;
            let region = scope_faces(&s, radius)?;
            let fc = four_copy(s);
            let faces: Vec<FaceId> = region.iter().flat_map(|&f| (0..4).map(move |c| (f, c))).map(|(f, c)| fc.lift(f, c)).collect();
            let snap = surface::FiniteSurface::snapshot(&fc, &faces)?;
            let v: Value = serde_json::from_str(&surface_to_json(&snap)?)?;
            sink.report(&v, None)
        }
        SurfaceCmd::Subdivide { surface, k, l } => {
            let s = surface.build(seed)?;
            let base = s.faces().ok_or_else(|| anyhow!("subdivide needs a finite surface"))?;
            let m = cylinders::subdivide(s, k, l)?;
            let faces: Vec<FaceId> = base.iter().flat_map(|&f| (0..2).map(move |j| (f, j))).map(|(f, j)| m.rhombus(f, j)).collect();
            let snap = surface::FiniteSurface::snapshot(&m, &faces)?;
            let v: Value = serde_json::from_str(&surface_to_json(&snap)?)?;
            sink.report(&v, None)
        }
        SurfaceCmd::List => {
            let mut t = Table::new(&["name"]);
            for n in surface::named_list() {
                t.push(vec![n.to_string()]);
            }
            sink.table(&t)
        }
    }
}

fn cf_cmd(cmd: CfCmd, sink: &Sink) -> Result<()> {
    match cmd {
        CfCmd::Expand { x, depth } => {
            let cf = cf_expand(&quad(&x)?, depth)?;
            let mut t = Table::new(&["index", "digit"]);
            for (i, d) in cf.take(depth + 1).iter().enumerate() {
                t.push(vec![i.to_string(), d.to_string()]);
            }
            sink.report(&cf, Some(&t))
        }
        CfCmd::Convergents { x, k } => {
            let x = quad(&x)?;
            let cf = cf_expand(&x, k + 1)?;
            let c = cf_convergents(&cf, k)?;
            let mut t = Table::new(&["k", "p", "q", "value"]).plot(&[0, 3]);
            for i in 0..c.len() {
                let v = QuadRat::rational(BigRational::new(c.p[i].clone(), c.q[i].clone())).to_f64();
                t.push(vec![i.to_string(), c.p[i].to_string(), c.q[i].to_string(), v.to_string()]);
            }
            let report = json!({
                "x": x,
                "convergents": c,
                "determinant_holds": c.determinant_holds(),
                "approximation_holds": c.approximation_holds(&x),
            });
            sink.report(&report, Some(&t))
        }
        CfCmd::PropA { x, n } => {
            let rows = check_property_A(&quad(&x)?, &n)?;
            let mut t = Table::new(&["n", "j_max", "c1"]).plot(&[0, 2]);
            for r in &rows {
                t.push(vec![r.n.to_string(), r.j_max.to_string(), r.c1.to_string()]);
            }
            sink.report(&rows, Some(&t))
        }
    }
}

fn parse_start(s: &str) -> Result<(FaceId, QuadRat, QuadRat)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        bail!("--start must be \"face,x,y\"");
    }
    Ok((parts[0].parse()?, quad(parts[1])?, quad(parts[2])?))
}

fn trace_cmd(a: TraceArgs, seed: u64, sink: &Sink) -> Result<()> {
    let s = a.surface.build(seed)?;
    let (face, x, y) = parse_start(&a.start)?;
    let sense = if a.reverse { Sense::Backward } else { Sense::Forward };
    let p = PhasePoint::new(face, x, y, quad(&a.slope)?, sense)?;
    let opts = TraceOptions { reflect_walls: a.billiard, ..TraceOptions::default() };
    let t = flow::trace(&*s, &p, &Budget::Crossings(a.budget), &opts)?;
    let mut table = Table::new(&["index", "face", "side", "coord", "arclen", "arclen_f64"]).plot(&[0, 5]);
    for e in &t.events {
        table.push(vec![e.index.to_string(), e.edge.0.to_string(), e.edge.1.letter().to_string(), e.coord.to_string(), e.arclen.to_string(), e.arclen.to_f64().to_string()]);
    }
    sink.report(&t, Some(&table))
}

fn chain_of(a: &ChainArgs, seed: u64) -> Result<(SurfaceRef, polyflow::ShortlineChain)> {
    let s = a.surface.build(seed)?;
    let chain = shortline::build_chain(&*s, s.origin(), &quad(&a.slope)?, &quad(&a.m0)?, a.depth)?;
    Ok((s, chain))
}

fn shortline_cmd(cmd: ShortlineCmd, seed: u64, sink: &Sink) -> Result<()> {
    match cmd {
        ShortlineCmd::Chain(a) => {
            let (_, chain) = chain_of(&a, seed)?;
            let mut t = Table::new(&["level", "orientation", "alpha", "alpha_f64", "m", "m_f64", "crossings"]);
            let mut levels = Vec::new();
            for (j, seg) in chain.segments.iter().enumerate() {
                let (al, m) = (&chain.alphas[j], &chain.ms[j]);
                t.push(vec![j.to_string(), format!("{:?}", seg.orientation), al.to_string(), al.to_f64().to_string(), m.to_string(), m.to_f64().to_string(), seg.trace.len().to_string()]);
                levels.push(json!({"level": j, "orientation": seg.orientation, "alpha": al, "alpha_f64": al.to_f64(), "m": m, "m_f64": m.to_f64(), "crossings": seg.trace.len()}));
            }
            let same = shortline::same_edge_cutting(&chain);
            let report = json!({
                "levels": levels,
                "digits_ok": chain.digits_ok,
                "street_lcm": chain.street_lcm,
                "same_edge_cutting": same.iter().all(|r| r.equal),
            });
            sink.report(&report, Some(&t))
        }
        ShortlineCmd::Ancestors { chain, fine, steps } => {
            let (s, c) = chain_of(&chain, seed)?;
            let it = shortline::iterated_ancestors(&*s, &c, fine, steps)?;
            let mut t = Table::new(&["unit", "step", "ancestors"]);
            for (unit, sets) in &it {
                for (i, set) in sets.iter().enumerate() {
                    t.push(vec![unit.clone(), (i + 1).to_string(), set.iter().cloned().collect::<Vec<_>>().join(" ")]);
                }
            }
            sink.report(&it, Some(&t))
        }
        ShortlineCmd::Freegap { surface, slope, length2 } => {
            let s = surface.build(seed)?;
            let g = shortline::free_gap_fast(&*s, s.origin(), &quad(&slope)?, &quad(&length2)?)?;
            let report = json!({
                "gap": g.gap,
                "gap_f64": g.gap_f64,
                "edge": g.edge,
                "length_f64": g.length_f64,
                "gap_times_length": g.gap_f64 * g.length_f64,
                "events": g.events,
                "vertical_events": g.vertical_events,
            });
            sink.report(&report, None)
        }
    }
}

fn cyl_cmd(cmd: CylCmd, seed: u64, sink: &Sink) -> Result<()> {
    match cmd {
        CylCmd::Decompose { surface, slope, radius } => {
            let s = surface.build(seed)?;
            let seed_faces = match s.faces() {
                Some(_) => Seed::All,
                None => Seed::Faces(p_ball(&*s, s.origin(), radius, 1 << 20)?),
            };
            let cyls = cylinders::cylinder_decompose(&*s, direction(&slope)?, &seed_faces, DecomposeOptions::default())?;
            let mut t = Table::new(&["face", "atom", "atoms", "steps", "circumference", "width", "area", "rhombi", "closed"]);
            for c in &cyls {
                t.push(vec![c.core[0].face.to_string(), c.core[0].index.to_string(), c.atoms.to_string(), c.steps.to_string(), opt(c.circumference.as_ref()), opt(c.width.as_ref()), c.area.to_string(), opt(c.rhombi), c.is_closed().to_string()]);
            }
            let report: Vec<Value> = cyls
                .iter()
                .map(|c| json!({"core": c.core[0].face, "atoms": c.atoms, "steps": c.steps, "circumference": c.circumference, "width": c.width, "area": c.area, "rhombi": c.rhombi, "status": c.status}))
                .collect();
            sink.report(&report, Some(&t))
        }
        CylCmd::Tower { k, m, gate } => {
            let gate = match gate {
                GateArg::G1 => Gate::G1,
                GateArg::G2 => Gate::G2,
            };
            let q = TowerQuery::new(k, m, gate)?;
            let e = cylinders::tower_exit(q)?;
            let report = json!({"k": k, "m": m, "gate": format!("{gate:?}"), "x0": e.x0, "exit": e.exit, "bounces_back": e.bounces_back()});
            sink.report(&report, None)
        }
        CylCmd::Strip { pattern, m, bound } => {
            let spec = LStripSpec::periodic(&strip_pattern(&pattern)?);
            let mut t = Table::new(&["m", "infinite", "closed", "escaped", "rhombi", "consistent"]);
            let mut reports = Vec::new();
            for mi in m {
                let r = cylinders::strip_street_analysis(&spec, mi, bound)?;
                let rh: Vec<String> = r.rhombi.iter().map(|x| x.to_string()).collect();
                t.push(vec![mi.to_string(), r.infinite.to_string(), r.closed_cylinders.to_string(), r.escaped_cylinders.to_string(), rh.join(" "), r.consistent.to_string()]);
                reports.push(json!({"m": mi, "report": r}));
            }
            sink.report(&reports, Some(&t))
        }
        CylCmd::Rhombus { m, periods } => {
            let spec = LStripSpec::infinite_l();
            let fc = four_copy(Arc::new(polyflow::generators::l_strip(spec.clone())?));
            let mut scope = Vec::new();
            for i in 0..periods {
                let x0 = spec.start(i);
                for (x, y) in [(x0, 0), (x0, 1), (x0 + 1, 0)] {
                    scope.extend((0..4).map(|c| fc.lift(FaceId::new(x, y), c)));
                }
            }
            let (_, r) = cylinders::rhombus_maze(Arc::new(fc), m, &scope, DecomposeOptions::default())?;
            sink.report(&r, None)
        }
        CylCmd::Mapslope { m, beta } => {
            let beta = quad(&beta)?;
            let s = cylinders::map_slope(m, &beta)?;
            sink.report(&json!({"m": m, "beta": beta, "slope": s, "slope_f64": s.to_f64()}), None)
        }
    }
}

fn density_cmd(a: DensityArgs, seed: u64, sink: &Sink) -> Result<()> {
    let s = a.surface.build(seed)?;
    let scope = match a.scope {
        ScopeArg::All => s.faces().ok_or_else(|| anyhow!("--scope all needs a finite surface; use --scope ball"))?,
        ScopeArg::Ball => p_ball(&*s, s.origin(), a.radius, 1 << 20)?,
    };
    let r = analysis::cover_time(&*s, s.origin(), &quad(&a.slope)?, &a.n, &scope, a.max_events)?;
    let mut t = Table::new(&["n", "events", "length"]).plot(&[0, 2]);
    for row in &r.rows {
        t.push(vec![row.n.to_string(), opt(row.events), opt(row.length)]);
    }
    sink.report(&r, Some(&t))
}

fn escape_cmd(a: EscapeArgs, seed: u64, sink: &Sink) -> Result<()> {
    if a.diffusion {
        let w = WindTreeSpec::new(rational(&a.a)?, rational(&a.b)?);
        let r = analysis::windtree_diffusion(&w, a.samples, &a.checkpoints, seed)?;
        let mut t = Table::new(&["time", "mean_displacement"]);
        for (c, d) in r.checkpoints.iter().zip(&r.mean_displacement) {
            t.push(vec![c.to_string(), d.to_string()]);
        }
        return sink.report(&r, Some(&t));
    }
    let s = a.surface.build(seed)?;
    let p = PhasePoint::new(s.origin(), quad(&a.x)?, quad(&a.y)?, quad(&a.slope)?, Sense::Forward)?;
    let r = analysis::escape_rate(&*s, &p, &a.checkpoints, a.budget)?;
    let mut t = Table::new(&["length", "faces", "diameter", "displacement"]).plot(&[0, 2]);
    for row in &r.rows {
        t.push(vec![row.length.to_string(), row.faces.to_string(), opt(row.diameter), row.displacement.to_string()]);
    }
    sink.report(&r, Some(&t))
}

fn periodic_cmd(a: PeriodicArgs, seed: u64, sink: &Sink) -> Result<()> {
    let w = a.probe.spec()?;
    let opts = a.probe.options(seed);
    let slopes = match &a.slope {
        Some(s) => vec![fraction(s)?],
        None => analysis::slope_candidates(a.max),
    };
    // Probes are independent; collect keeps the slope order.
    use rayon::prelude::*;
    let reports: Vec<ProbeReport> = slopes.par_iter().map(|&(k, l)| analysis::complete_periodicity_probe(&w, k, l, &opts)).collect::<polyflow::Result<_>>()?;
    sink.report(&reports, Some(&probe_table(&reports)))
}

fn search_cmd(a: SearchArgs, seed: u64, sink: &Sink) -> Result<()> {
    let w = a.probe.spec()?;
    let opts = a.probe.options(seed);
    let r = if a.all { analysis::periodic_directions(&w, a.bound, &opts)? } else { analysis::search_periodic_direction(&w, a.bound, &opts)? };
    sink.report(&r, Some(&probe_table(&r.tried)))
}

fn torus_cmd(a: TorusArgs, sink: &Sink) -> Result<()> {
    let r = analysis::torus_cover_demo(&a.direction, &a.n, a.max_length)?;
    let mut t = Table::new(&["n", "length"]);
    for row in &r.rows {
        t.push(vec![row.n.to_string(), opt(row.length)]);
    }
    sink.report(&r, Some(&t))
}

/// Returns whether every manifest check passed.
fn run_cmd(a: RunArgs, sink: &Sink) -> Result<bool> {
    let m = ExperimentManifest::load(&a.manifest)?;
    let base = a.manifest.parent().map(PathBuf::from).unwrap_or_default();
    let summary = experiment::run(&m, &base, &a.out_dir)?;
    sink.report(&summary, None)?;
    Ok(summary.passed)
}

fn dispatch(cli: Cli) -> Result<bool> {
    let sink = Sink::new(cli.output);
    let seed = cli.seed;
    match cli.command {
        Command::Surface(c) => surface_cmd(c, seed, &sink)?,
        Command::Cf(c) => cf_cmd(c, &sink)?,
        Command::Trace(a) => trace_cmd(a, seed, &sink)?,
        Command::Shortline(c) => shortline_cmd(c, seed, &sink)?,
        Command::Cyl(c) => cyl_cmd(c, seed, &sink)?,
        Command::Density(a) => density_cmd(a, seed, &sink)?,
        Command::Escape(a) => escape_cmd(a, seed, &sink)?,
        Command::Periodic(a) => periodic_cmd(a, seed, &sink)?,
        Command::Search(a) => search_cmd(a, seed, &sink)?,
        Command::Torusdemo(a) => torus_cmd(a, &sink)?,
        Command::Run(a) => return run_cmd(a, &sink),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("polyflow: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        // A closed pipe (for example `| head`) is not a failure.
        Err(e) if output::is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polyflow: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_helpers() {
        assert_eq!(fraction("3/2").unwrap(), (3, 2));
        assert_eq!(fraction("3").unwrap(), (3, 1));
        assert_eq!(strip_pattern("2x3, 3x2").unwrap(), vec![(2, 3), (3, 2)]);
        assert!(strip_pattern("2-3").is_err());
        let (f, x, y) = parse_start("1:0,1/2,0").unwrap();
        assert_eq!(f, FaceId::new(1, 0));
        assert_eq!(x, QuadRat::frac(1, 2));
        assert!(y.is_zero());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
