//! Reproducible experiment manifests.
//!
//! A manifest is a JSON list of tasks. Each task writes one CSV table into
//! the output directory and may carry checks; [`run`] also writes
//! `summary.json`. Nothing in the outputs depends on wall-clock time or
//! thread scheduling, so rerunning a manifest reproduces every byte.
//!
//! ```json
//! {"seed": 7, "tasks": [
//!   {"task": "density", "output": "density.csv",
//!    "surface": {"name": "L-surface"}, "slope": "1 + sqrt(2)",
//!    "n": [8, 16, 32, 64], "expect_exponent": [0.85, 1.15]}
//! ]}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{self, ProbeOptions, ProbeOutcome};
use crate::cylinders::{self, Direction, Gate, Seed, TowerQuery};
use crate::flow::{PhasePoint, Sense};
use crate::generators::{LStripSpec, WindTreeSpec};
use crate::surface::{build_named, p_ball, surface_from_json, FaceId, SurfaceRef};
use crate::{Error, QuadRat, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    /// Default seed for seeded providers and samplers.
    #[serde(default)]
    pub seed: u64,
    pub tasks: Vec<Task>,
}

/// A named family or a JSON surface file (relative to the manifest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeSpec {
    /// Every face of a finite surface.
    All,
    /// P-ball of the given radius around the start face.
    Ball(usize),
    Faces(Vec<FaceId>),
}

fn default_scope() -> ScopeSpec {
    ScopeSpec::All
}
fn default_events() -> usize {
    1 << 24
}
fn default_budget() -> usize {
    1 << 20
}
fn default_zero() -> String {
    "0".into()
}
fn default_half() -> String {
    "1/2".into()
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// Cover lengths of a corner line.
    Density {
        output: String,
        surface: SurfaceSpec,
        #[serde(default)]
        face: Option<FaceId>,
        slope: String,
        n: Vec<u64>,
        #[serde(default = "default_scope")]
        scope: ScopeSpec,
        #[serde(default = "default_events")]
        max_events: usize,
        #[serde(default)]
        expect_exponent: Option<[f64; 2]>,
    },
    /// Restricted P-diameter of a geodesic at checkpoint lengths.
    Escape {
        output: String,
        surface: SurfaceSpec,
        #[serde(default)]
        face: Option<FaceId>,
        slope: String,
        #[serde(default = "default_zero")]
        x: String,
        #[serde(default = "default_zero")]
        y: String,
        checkpoints: Vec<f64>,
        #[serde(default = "default_budget")]
        budget: usize,
        /// Upper bound on last/first diameter.
        #[serde(default)]
        expect_max_ratio: Option<f64>,
    },
    /// Tower exits by formula and by simulation.
    TowerSweep {
        output: String,
        k_max: u32,
        m_max: i64,
        #[serde(default = "default_true")]
        check_oracle: bool,
    },
    /// Complete-periodicity probes over all lowest-terms slopes.
    Periodic {
        output: String,
        #[serde(default = "default_half")]
        a: String,
        #[serde(default = "default_half")]
        b: String,
        max: i64,
        #[serde(default)]
        probe: Option<ProbeSpec>,
        /// Check the odd/odd parity rule of the square half-side table.
        #[serde(default)]
        check_parity: bool,
    },
    /// First completely periodic slope within a height bound.
    Search {
        output: String,
        a: String,
        b: String,
        bound: i64,
        #[serde(default)]
        probe: Option<ProbeSpec>,
        /// Expected first slope `k/l`, or `"none"`.
        #[serde(default)]
        expect: Option<String>,
    },
    /// Slope-`p/q` cylinder decomposition of a finite surface.
    Cylinders {
        output: String,
        surface: SurfaceSpec,
        slope: String,
        #[serde(default)]
        expect_all_closed: bool,
    },
    /// Tilted streets of a periodic L-strip for each slope.
    Strip {
        output: String,
        pattern: Vec<(u32, u32)>,
        m: Vec<i64>,
        #[serde(default = "default_strip_bound")]
        bound: usize,
        #[serde(default = "default_true")]
        check_consistent: bool,
    },
    /// Float torus line cover lengths.
    Torus {
        output: String,
        direction: Vec<f64>,
        n: Vec<u64>,
        #[serde(default = "default_torus_len")]
        max_length: f64,
        #[serde(default)]
        expect_exponent: Option<[f64; 2]>,
    },
}

fn default_strip_bound() -> usize {
    40
}
fn default_torus_len() -> f64 {
    1e9
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub samples: Option<usize>,
    pub cutoff: Option<u64>,
    pub escape: Option<i64>,
    pub q: Option<i64>,
}

impl ProbeSpec {
    fn options(spec: Option<ProbeSpec>, seed: u64) -> ProbeOptions {
        let d = ProbeOptions { seed, ..ProbeOptions::default() };
        let Some(p) = spec else { return d };
        ProbeOptions {
            samples: p.samples.unwrap_or(d.samples),
            cutoff: p.cutoff.unwrap_or(d.cutoff),
            escape: p.escape.unwrap_or(d.escape),
            q: p.q.unwrap_or(d.q),
            seed,
        }
    }
}

impl Task {
    pub fn output(&self) -> &str {
        match self {
            Task::Density { output, .. }
            | Task::Escape { output, .. }
            | Task::TowerSweep { output, .. }
            | Task::Periodic { output, .. }
            | Task::Search { output, .. }
            | Task::Cylinders { output, .. }
            | Task::Strip { output, .. }
            | Task::Torus { output, .. } => output,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Task::Density { .. } => "density",
            Task::Escape { .. } => "escape",
            Task::TowerSweep { .. } => "tower_sweep",
            Task::Periodic { .. } => "periodic",
            Task::Search { .. } => "search",
            Task::Cylinders { .. } => "cylinders",
            Task::Strip { .. } => "strip",
            Task::Torus { .. } => "torus",
        }
    }
}

/// One assertion-mode check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task: String,
    pub output: String,
    pub rows: usize,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tasks: Vec<TaskOutcome>,
    /// Every check passed.
    pub passed: bool,
}

fn schema(msg: impl std::fmt::Display) -> Error {
    Error::Schema(msg.to_string())
}

fn parse_quad(field: &str, s: &str) -> Result<QuadRat> {
    s.parse::<QuadRat>().map_err(|e| schema(format!("{field}: {e}")))
}

fn parse_rational(field: &str, s: &str) -> Result<BigRational> {
    parse_quad(field, s)?.as_rational().cloned().ok_or_else(|| schema(format!("{field} must be rational")))
}

fn parse_fraction(field: &str, s: &str) -> Result<(i64, i64)> {
    let q = parse_rational(field, s)?;
    let conv = |v: &num_bigint::BigInt| i64::try_from(v).map_err(|_| schema(format!("{field} too large")));
    Ok((conv(q.numer())?, conv(q.denom())?))
}

impl ExperimentManifest {
    pub fn from_json(text: &str) -> Result<ExperimentManifest> {
        let m: ExperimentManifest = serde_json::from_str(text).map_err(schema)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<ExperimentManifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        ExperimentManifest::from_json(&text)
    }

    /// Checks what serde cannot: number strings, output names, ranges.
    pub fn validate(&self) -> Result<()> {
        let mut outputs = std::collections::BTreeSet::new();
        for t in &self.tasks {
            let out = t.output();
            if out.is_empty() || out.contains(['/', '\\']) || out == "summary.json" {
                return Err(schema(format!("output {out:?} must be a plain file name other than summary.json")));
            }
            if !outputs.insert(out) {
                return Err(schema(format!("output {out:?} used twice")));
            }
            match t {
                Task::Density { surface, slope, n, .. } => {
                    surface.check()?;
                    parse_quad("slope", slope)?;
                    if n.is_empty() || n.contains(&0) {
                        return Err(schema("density levels must be positive"));
                    }
                }
                Task::Escape { surface, slope, x, y, checkpoints, .. } => {
                    surface.check()?;
                    parse_quad("slope", slope)?;
                    parse_quad("x", x)?;
                    parse_quad("y", y)?;
                    if checkpoints.is_empty() {
                        return Err(schema("escape needs checkpoints"));
                    }
                }
                Task::TowerSweep { k_max, m_max, .. } => {
                    if *k_max < 2 || *m_max < 2 {
                        return Err(schema("tower sweep needs k_max >= 2 and m_max >= 2"));
                    }
                }
                Task::Periodic { a, b, max, .. } => {
                    parse_rational("a", a)?;
                    parse_rational("b", b)?;
                    if *max < 1 {
                        return Err(schema("periodic needs max >= 1"));
                    }
                }
                Task::Search { a, b, expect, .. } => {
                    parse_rational("a", a)?;
                    parse_rational("b", b)?;
                    if let Some(e) = expect.as_deref().filter(|e| *e != "none") {
                        parse_fraction("expect", e)?;
                    }
                }
                Task::Cylinders { surface, slope, .. } => {
                    surface.check()?;
                    parse_rational("slope", slope)?;
                }
                Task::Strip { pattern, m, .. } => {
                    LStripSpec::periodic(pattern).validate().map_err(schema)?;
                    if m.is_empty() {
                        return Err(schema("strip needs slopes"));
                    }
                }
                Task::Torus { direction, n, .. } => {
                    if !(2..=3).contains(&direction.len()) || n.is_empty() {
                        return Err(schema("torus needs a 2 or 3 component direction and levels"));
                    }
                }
            }
        }
        Ok(())
    }
}

impl SurfaceSpec {
    fn check(&self) -> Result<()> {
        match (&self.name, &self.file) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(schema("surface needs exactly one of name or file")),
        }
    }

    pub fn build(&self, base: &Path, seed: u64) -> Result<SurfaceRef> {
        self.check()?;
        if let Some(name) = &self.name {
            return build_named(name, &self.params, seed);
        }
        let path = base.join(self.file.as_ref().expect("checked"));
        let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("surface file {}: {e}", path.display())))?;
        surface_from_json(&text)
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn range_check(name: &str, value: Option<f64>, range: Option<[f64; 2]>) -> Option<Check> {
    let [lo, hi] = range?;
    let passed = value.is_some_and(|v| (lo..=hi).contains(&v));
    Some(Check { name: name.into(), passed, detail: format!("{} in [{lo}, {hi}]", opt(value)) })
}

/// An executed task's table and checks.
struct TaskResult {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    checks: Vec<Check>,
}

fn run_task(t: &Task, base: &Path, seed: u64) -> Result<TaskResult> {
    Ok(match t {
        Task::Density { surface, face, slope, n, scope, max_events, expect_exponent, .. } => {
            let s = surface.build(base, seed)?;
            let face = face.unwrap_or_else(|| s.origin());
            let slope = parse_quad("slope", slope)?;
            let scope = match scope {
                ScopeSpec::All => s.faces().ok_or_else(|| Error::Precondition("scope \"all\" needs a finite surface".into()))?,
                ScopeSpec::Ball(r) => p_ball(&*s, face, *r, default_budget())?,
                ScopeSpec::Faces(f) => f.clone(),
            };
            let r = analysis::cover_time(&*s, face, &slope, n, &scope, *max_events)?;
            let rows = r.rows.iter().map(|row| vec![row.n.to_string(), opt(row.events), opt(row.length)]).collect();
            let checks = range_check("exponent", r.exponent, *expect_exponent).into_iter().collect();
            TaskResult { header: vec!["n", "events", "length"], rows, checks }
        }
        Task::Escape { surface, face, slope, x, y, checkpoints, budget, expect_max_ratio, .. } => {
            let s = surface.build(base, seed)?;
            let face = face.unwrap_or_else(|| s.origin());
            let p = PhasePoint::new(face, parse_quad("x", x)?, parse_quad("y", y)?, parse_quad("slope", slope)?, Sense::Forward)?;
            let r = analysis::escape_rate(&*s, &p, checkpoints, *budget)?;
            let rows = r.rows.iter().map(|row| vec![row.length.to_string(), row.faces.to_string(), opt(row.diameter), row.displacement.to_string()]).collect();
            let mut checks = Vec::new();
            if let Some(bound) = expect_max_ratio {
                let first = r.rows.first().and_then(|r| r.diameter);
                let last = r.rows.last().and_then(|r| r.diameter);
                let ratio = first.zip(last).filter(|(f, _)| *f > 0).map(|(f, l)| l as f64 / f as f64);
                checks.push(Check { name: "diameter ratio".into(), passed: ratio.is_some_and(|x| x <= *bound), detail: format!("{} <= {bound}", opt(ratio)) });
            }
            TaskResult { header: vec!["length", "faces", "diameter", "displacement"], rows, checks }
        }
        Task::TowerSweep { k_max, m_max, check_oracle, .. } => {
            let mut rows = Vec::new();
            let mut mismatches = 0;
            for k in 2..=*k_max {
                for m in (-*m_max..=*m_max).filter(|m| m.abs() >= 2) {
                    for gate in [Gate::G1, Gate::G2] {
                        let q = TowerQuery::new(k, m, gate)?;
                        let e = cylinders::tower_exit(q)?;
                        let sim = if *check_oracle { Some(cylinders::tower_exit_simulated(q)?) } else { None };
                        if sim.is_some_and(|s| s != e) {
                            mismatches += 1;
                        }
                        let (sx, se) = sim.map_or((String::new(), String::new()), |s| (s.x0.to_string(), s.exit.to_string()));
                        rows.push(vec![k.to_string(), m.to_string(), format!("{gate:?}"), e.x0.to_string(), e.exit.to_string(), sx, se]);
                    }
                }
            }
            let checks = if *check_oracle {
                vec![Check { name: "formula = simulation".into(), passed: mismatches == 0, detail: format!("{mismatches} mismatches in {} cases", rows.len()) }]
            } else {
                Vec::new()
            };
            TaskResult { header: vec!["k", "m", "gate", "x0", "exit", "sim_x0", "sim_exit"], rows, checks }
        }
        Task::Periodic { a, b, max, probe, check_parity, .. } => {
            let w = WindTreeSpec::new(parse_rational("a", a)?, parse_rational("b", b)?);
            let opts = ProbeSpec::options(*probe, seed);
            let mut rows = Vec::new();
            let mut violations = 0;
            for (k, l) in analysis::slope_candidates(*max) {
                let r = analysis::complete_periodicity_probe(&w, k, l, &opts)?;
                let closed = r.outcome == ProbeOutcome::AllClosed;
                let escaped = matches!(r.outcome, ProbeOutcome::EscapeWitness { .. });
                let odd = k % 2 == 1 && l % 2 == 1;
                if (odd && !closed) || (!odd && !escaped) {
                    violations += 1;
                }
                rows.push(probe_row(&r));
            }
            let checks = if *check_parity {
                vec![Check { name: "closed iff both odd".into(), passed: violations == 0, detail: format!("{violations} violations") }]
            } else {
                Vec::new()
            };
            TaskResult { header: PROBE_HEADER.to_vec(), rows, checks }
        }
        Task::Search { a, b, bound, probe, expect, .. } => {
            let w = WindTreeSpec::new(parse_rational("a", a)?, parse_rational("b", b)?);
            let r = analysis::search_periodic_direction(&w, *bound, &ProbeSpec::options(*probe, seed))?;
            let rows = r.tried.iter().map(probe_row).collect();
            let found = r.found.map_or("none".to_string(), |(k, l)| format!("{k}/{l}"));
            let mut checks = Vec::new();
            if let Some(e) = expect {
                let want = if e == "none" { "none".to_string() } else { let (k, l) = parse_fraction("expect", e)?; format!("{k}/{l}") };
                checks.push(Check { name: "first periodic slope".into(), passed: found == want, detail: format!("found {found}, expected {want}") });
            }
            TaskResult { header: PROBE_HEADER.to_vec(), rows, checks }
        }
        Task::Cylinders { surface, slope, expect_all_closed, .. } => {
            let s = surface.build(base, seed)?;
            let dir = Direction::from_slope(&parse_quad("slope", slope)?)?;
            let cyls = cylinders::cylinder_decompose(&*s, dir, &Seed::All, Default::default())?;
            let rows = cyls
                .iter()
                .map(|c| vec![c.core[0].face.to_string(), c.core[0].index.to_string(), c.atoms.to_string(), c.steps.to_string(), opt(c.circumference.as_ref()), opt(c.width.as_ref()), opt(c.rhombi), c.is_closed().to_string()])
                .collect();
            let mut checks = Vec::new();
            if *expect_all_closed {
                let open = cyls.iter().filter(|c| !c.is_closed()).count();
                checks.push(Check { name: "all cylinders closed".into(), passed: open == 0, detail: format!("{open} open of {}", cyls.len()) });
            }
            TaskResult { header: vec!["face", "atom", "atoms", "steps", "circumference", "width", "rhombi", "closed"], rows, checks }
        }
        Task::Strip { pattern, m, bound, check_consistent, .. } => {
            let spec = LStripSpec::periodic(pattern);
            let mut rows = Vec::new();
            let mut bad = Vec::new();
            for &mi in m {
                let r = cylinders::strip_street_analysis(&spec, mi, *bound)?;
                if !r.consistent {
                    bad.push(mi);
                }
                let rh: Vec<String> = r.rhombi.iter().map(|x| x.to_string()).collect();
                rows.push(vec![mi.to_string(), r.infinite.to_string(), r.closed_cylinders.to_string(), r.escaped_cylinders.to_string(), rh.join(" "), r.consistent.to_string()]);
            }
            let checks = if *check_consistent {
                vec![Check { name: "towers agree with decomposition".into(), passed: bad.is_empty(), detail: format!("inconsistent slopes {bad:?}") }]
            } else {
                Vec::new()
            };
            TaskResult { header: vec!["m", "infinite", "closed", "escaped", "rhombi", "consistent"], rows, checks }
        }
        Task::Torus { direction, n, max_length, expect_exponent, .. } => {
            let r = analysis::torus_cover_demo(direction, n, *max_length)?;
            let rows = r.rows.iter().map(|row| vec![row.n.to_string(), opt(row.length)]).collect();
            let checks = range_check("exponent", r.exponent, *expect_exponent).into_iter().collect();
            TaskResult { header: vec!["n", "length"], rows, checks }
        }
    })
}

const PROBE_HEADER: [&str; 8] = ["k", "l", "outcome", "closed", "max_period", "resampled", "witness", "distance"];

fn probe_row(r: &analysis::ProbeReport) -> Vec<String> {
    let (outcome, witness, distance) = match &r.outcome {
        ProbeOutcome::AllClosed => ("closed", String::new(), String::new()),
        ProbeOutcome::Undecided => ("undecided", String::new(), String::new()),
        ProbeOutcome::EscapeWitness { start, distance, .. } => {
            ("escape", format!("{}:{}+({},{})/{}", start.cell.0, start.cell.1, start.a, start.b, start.q), distance.to_string())
        }
    };
    vec![r.k.to_string(), r.l.to_string(), outcome.into(), r.closed.to_string(), r.max_period.to_string(), r.resampled.to_string(), witness, distance]
}

/// Runs every task in order, writing `<output>` tables and `summary.json`
/// into `out_dir`. Surface files resolve against `base`.
pub fn run(manifest: &ExperimentManifest, base: &Path, out_dir: &Path) -> Result<RunSummary> {
    manifest.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let mut tasks = Vec::new();
    for t in &manifest.tasks {
        let r = run_task(t, base, manifest.seed)?;
        write_csv(&out_dir.join(t.output()), &r.header, &r.rows)?;
        tasks.push(TaskOutcome { task: t.kind().into(), output: t.output().into(), rows: r.rows.len(), checks: r.checks });
    }
    let passed = tasks.iter().all(|t| t.checks.iter().all(|c| c.passed));
    let summary = RunSummary { tasks, passed };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))? + "\n";
    fs::write(out_dir.join("summary.json"), text).map_err(|e| Error::Io(e.to_string()))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_errors() {
        let bad = r#"{"tasks":[{"task":"density","output":"d.csv","surface":{"name":"L-surface"},"slope":"1 + sqrt(","n":[8]}]}"#;
        assert!(matches!(ExperimentManifest::from_json(bad), Err(Error::Schema(_))));
        let unknown = r#"{"tasks":[],"extra":1}"#;
        assert!(matches!(ExperimentManifest::from_json(unknown), Err(Error::Schema(_))));
        let dup = r#"{"tasks":[{"task":"torus","output":"a.csv","direction":[1,2],"n":[2]},{"task":"torus","output":"a.csv","direction":[1,2],"n":[2]}]}"#;
        assert!(matches!(ExperimentManifest::from_json(dup), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_surface_file() {
        let m = ExperimentManifest::from_json(r#"{"tasks":[{"task":"cylinders","output":"c.csv","surface":{"file":"nope.json"},"slope":"1"}]}"#).unwrap();
        let dir = std::env::temp_dir().join(format!("polyflow-missing-{}", std::process::id()));
        assert!(matches!(run(&m, Path::new("/nonexistent"), &dir), Err(Error::Io(_))));
        let _ = fs::remove_dir_all(dir);
    }
}
