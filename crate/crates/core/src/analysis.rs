//! Density, escape, periodicity and torus-line measurements.
//!
//! Cover times use the edge free-gap criterion: a corner line has covered
//! a scope at level `n` once every scoped edge is cut into gaps shorter
//! than `1/n`. Gap comparisons are exact; only reported lengths are floats.
//! The wind-tree probes trace rational billiard directions with integer
//! coordinates over a common denominator.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flow::{max_gap_lin, trace, Budget, CornerLine, LineEvent, PhasePoint, TraceOptions};
use crate::generators::{WindTreeGrid, WindTreeSpec};
use crate::surface::{p_diameter, FaceId, Side, Surface};
use crate::{Error, QuadRat, Result};

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Exponent `e` of the best fit `y ~ C x^e` on positive data.
pub fn fit_power(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    fit_slope(&lx, &ly)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub n: u64,
    /// Crossings needed, or `None` if the budget ran out first.
    pub events: Option<usize>,
    /// Euclidean length of the covering segment.
    pub length: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub surface: String,
    pub slope: String,
    pub rows: Vec<DensityRow>,
    /// Fitted exponent of length against `n` over the covered rows.
    pub exponent: Option<f64>,
    /// First crossing index at which each scoped face was entered.
    pub first_visits: BTreeMap<FaceId, usize>,
    /// The line ran into a vertex before covering every level.
    pub singular: bool,
}

struct CoverRun<'a> {
    line: CornerLine<'a>,
    events: Vec<LineEvent>,
    edge_index: HashMap<(FaceId, bool), usize>,
    slope: crate::flow::IntForm,
    inv: crate::flow::IntForm,
    max_events: usize,
}

impl CoverRun<'_> {
    /// Pulls events until there are `e`, or the line stops.
    fn ensure(&mut self, e: usize) -> Result<()> {
        while self.events.len() < e.min(self.max_events) {
            match self.line.next() {
                Some(ev) => self.events.push(ev?),
                None => break,
            }
        }
        Ok(())
    }

    /// Whether the first `e` crossings cut every scoped edge into gaps
    /// shorter than `1/n`.
    fn covered(&self, e: usize, n: u64) -> bool {
        let mut pts: Vec<Vec<(i64, i64)>> = vec![Vec::new(); self.edge_index.len()];
        for ev in &self.events[..e.min(self.events.len())] {
            if let Some(&i) = self.edge_index.get(&(ev.from, ev.vertical)) {
                pts[i].push((ev.k, ev.n));
            }
        }
        let n = n as i64;
        let mut keys: Vec<(&(FaceId, bool), &usize)> = self.edge_index.iter().collect();
        keys.sort();
        keys.into_iter().all(|(&(_, vertical), &i)| {
            let theta = if vertical { &self.slope } else { &self.inv };
            match max_gap_lin(theta, &mut pts[i]) {
                None => false,
                // gap < 1/n  <=>  n k theta - (n n' + 1) < 0
                Some((k, m)) => theta.sign_lin(n * k, n * m + 1) < 0,
            }
        })
    }

    fn length(&self, e: usize, speed: f64) -> f64 {
        self.line.advance_f64(&self.events[e - 1]) * speed
    }
}

/// Cover lengths `T(n)` of the corner line of slope `alpha` from `face`.
///
/// `scope` lists the faces whose right and top edges must be covered.
/// `T(n)` is nondecreasing, so each level's search starts from the last.
pub fn cover_time(s: &dyn Surface, face: FaceId, alpha: &QuadRat, n_list: &[u64], scope: &[FaceId], max_events: usize) -> Result<DensityReport> {
    if scope.is_empty() {
        return Err(Error::InvalidArgument("empty cover scope".into()));
    }
    if n_list.windows(2).any(|w| w[0] > w[1]) || n_list.first() == Some(&0) {
        return Err(Error::InvalidArgument("levels must be positive and increasing".into()));
    }
    let line = CornerLine::new(s, face, alpha)?;
    let (slope, inv) = (line.slope, line.inv);
    let mut edge_index = HashMap::new();
    for &f in scope {
        for vertical in [true, false] {
            let k = edge_index.len();
            edge_index.entry((f, vertical)).or_insert(k);
        }
    }
    let mut run = CoverRun { line, events: Vec::new(), edge_index, slope, inv, max_events };
    let speed = (alpha * alpha + QuadRat::one()).to_f64().sqrt();
    let mut rows = Vec::new();
    let mut lo = 0usize;
    let mut exhausted = false;
    for &n in n_list {
        if exhausted {
            rows.push(DensityRow { n, events: None, length: None });
            continue;
        }
        // Exponential search for a covering prefix, then bisection.
        let mut hi = (2 * lo).max(64);
        loop {
            run.ensure(hi)?;
            let avail = run.events.len();
            if run.covered(hi.min(avail), n) {
                hi = hi.min(avail);
                break;
            }
            if avail < hi {
                exhausted = true;
                break;
            }
            lo = hi;
            hi *= 2;
        }
        if exhausted {
            rows.push(DensityRow { n, events: None, length: None });
            continue;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if run.covered(mid, n) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        rows.push(DensityRow { n, events: Some(hi), length: Some(run.length(hi, speed)) });
        lo = hi - 1;
    }
    let scoped: HashSet<FaceId> = scope.iter().copied().collect();
    let mut first_visits = BTreeMap::new();
    if scoped.contains(&face) {
        first_visits.insert(face, 0);
    }
    for (i, ev) in run.events.iter().enumerate() {
        if scoped.contains(&ev.from) {
            first_visits.entry(ev.from).or_insert(i);
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| r.length.map(|l| (r.n as f64, l))).unzip();
    Ok(DensityReport {
        surface: s.name(),
        slope: alpha.to_string(),
        rows,
        exponent: fit_power(&xs, &ys),
        first_visits,
        singular: run.line.singular,
    })
}

/// Float cross-check of [`cover_time`]: length after which the corner line
/// has met every cell of the `n x n` grid in each face of a finite surface.
pub fn grid_cover_time(s: &dyn Surface, face: FaceId, alpha: &QuadRat, n: usize, max_events: usize) -> Result<Option<f64>> {
    let faces = s.faces().ok_or_else(|| Error::Precondition("grid cover needs a finite surface".into()))?;
    let index: HashMap<FaceId, usize> = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let mut seen = vec![false; faces.len() * n * n];
    let mut left = seen.len();
    let line = CornerLine::new(s, face, alpha)?;
    let a = line.slope.to_f64();
    let ia = line.inv.to_f64();
    let speed = (a * a + 1.0).sqrt();
    let nf = n as f64;
    let (mut x0, mut y0) = (0.0f64, 0.0f64);
    let mut base = 0.0f64;
    for (count, ev) in line.enumerate() {
        if count >= max_events {
            break;
        }
        let ev = ev?;
        let fi = index[&ev.from];
        let (x1, y1) = if ev.vertical { (1.0, a * ev.k as f64 - ev.n as f64) } else { (ia * ev.k as f64 - ev.n as f64, 1.0) };
        // Walk the grid cells met by the segment, in order.
        let (mut i, mut j) = (((x0 * nf) as usize).min(n - 1), ((y0 * nf) as usize).min(n - 1));
        loop {
            let c = fi * n * n + i * n + j;
            if !seen[c] {
                seen[c] = true;
                left -= 1;
                if left == 0 {
                    // Length at entry of the last cell, measured in x.
                    let tx = ((i as f64 / nf) - x0).max((j as f64 / nf - y0) / a).max(0.0);
                    return Ok(Some(base + tx * speed));
                }
            }
            let tx = ((i + 1) as f64 / nf - x0).min(x1 - x0);
            let ty = ((j + 1) as f64 / nf - y0) / a;
            if tx.min(ty) >= x1 - x0 - 1e-15 || (i + 1 >= n && j + 1 >= n) {
                break;
            }
            if tx < ty {
                i += 1;
            } else {
                j += 1;
            }
            if i >= n || j >= n {
                break;
            }
        }
        base += (x1 - x0) * speed;
        if ev.vertical {
            x0 = 0.0;
            y0 = y1;
        } else {
            x0 = x1;
            y0 = 0.0;
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeRow {
    pub length: f64,
    pub faces: usize,
    /// Restricted P-diameter; `None` when a street through the visited
    /// faces is infinite and P-distance is undefined.
    pub diameter: Option<usize>,
    /// Largest lattice displacement (max of |dx|, |dy|, |dz|) of a visited
    /// face from the start face.
    pub displacement: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeReport {
    pub surface: String,
    pub rows: Vec<EscapeRow>,
    /// Slope of diameter against `ln T`.
    pub log_fit: Option<f64>,
    /// Exponent of diameter against `T`.
    pub power_fit: Option<f64>,
    /// Exponent of displacement against `T`.
    pub displacement_fit: Option<f64>,
}

fn escape_rows(s: &dyn Surface, start: FaceId, visits: &[(f64, FaceId)], checkpoints: &[f64], budget: usize) -> Result<Vec<EscapeRow>> {
    let mut rows = Vec::new();
    let mut seen: HashSet<FaceId> = HashSet::new();
    let mut order: Vec<FaceId> = Vec::new();
    let mut displacement = 0;
    let mut it = visits.iter().peekable();
    let mut infinite = false;
    for &t in checkpoints {
        while let Some(&&(l, f)) = it.peek() {
            if l > t {
                break;
            }
            if seen.insert(f) {
                order.push(f);
                displacement = displacement.max((f.x - start.x).abs().max((f.y - start.y).abs()).max((f.z - start.z).abs()));
            }
            it.next();
        }
        let mut scope = order.clone();
        scope.sort();
        // Once a street is infinite it stays in scope.
        let diameter = if infinite {
            None
        } else {
            match p_diameter(s, &scope, budget) {
                Ok(d) => Some(d),
                Err(Error::Unreachable(_)) if s.faces().is_none() => {
                    infinite = true;
                    None
                }
                Err(e) => return Err(e),
            }
        };
        rows.push(EscapeRow { length: t, faces: scope.len(), diameter, displacement });
    }
    Ok(rows)
}

/// Restricted P-diameter (over the faces met so far) of a geodesic at each
/// checkpoint length.
///
/// Corner starts with irrational slope on translation surfaces use the
/// integer tracer; everything else goes through the exact tracer.
pub fn escape_rate(s: &dyn Surface, start: &PhasePoint, checkpoints: &[f64], budget: usize) -> Result<EscapeReport> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be nonempty and increasing".into()));
    }
    let tmax = *checkpoints.last().unwrap();
    let corner = start.x.is_zero() && start.y.is_zero() && start.turn == 0 && start.sense == crate::flow::Sense::Forward;
    let mut visits = vec![(0.0, start.face)];
    if corner && !start.slope.is_rational() && s.is_translation() {
        let line = CornerLine::new(s, start.face, &start.slope)?;
        let speed = (&start.slope * &start.slope + QuadRat::one()).to_f64().sqrt();
        let mut it = line;
        // An event's own face is the one being left; the next event says
        // which face was entered, so record entries once the move is known.
        while let Some(ev) = it.next() {
            let ev = ev?;
            let l = it.advance_f64(&ev) * speed;
            if l > tmax {
                break;
            }
            let side = if ev.vertical { Side::R } else { Side::T };
            if let Some((g, _)) = s.glue(ev.from, side) {
                visits.push((l, g));
            }
        }
    } else {
        let (dx, dy) = start.direction();
        let speed = (&dx * &dx + &dy * &dy).to_f64().sqrt();
        let budget_len = QuadRat::rational(num_rational::BigRational::from_float(tmax / speed).ok_or(Error::Overflow)?) + QuadRat::one();
        let opts = TraceOptions { detect_periodic: false, ..TraceOptions::default() };
        let t = trace(s, start, &Budget::Arclen(budget_len), &opts)?;
        for e in &t.events {
            visits.push((e.arclen.to_f64() * speed, e.entered.0));
        }
    }
    let rows = escape_rows(s, start.face, &visits, checkpoints, budget)?;
    let with_d: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.diameter.map(|d| (r.length, d as f64))).collect();
    let (ts, ds): (Vec<f64>, Vec<f64>) = with_d.into_iter().unzip();
    let lts: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let all_t: Vec<f64> = rows.iter().map(|r| r.length).collect();
    let disp: Vec<f64> = rows.iter().map(|r| r.displacement as f64).collect();
    Ok(EscapeReport {
        surface: s.name(),
        log_fit: fit_slope(&lts, &ds),
        power_fit: fit_power(&ts, &ds),
        displacement_fit: fit_power(&all_t, &disp),
        rows,
    })
}

/// Mean displacement of float billiard paths in a wind-tree table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub checkpoints: Vec<f64>,
    /// Mean Euclidean displacement, in lattice units.
    pub mean_displacement: Vec<f64>,
    pub exponent: Option<f64>,
    pub samples: usize,
}

/// Float billiard in the rescaled wind-tree grid from `(x, y)` with unit
/// direction `(dx, dy)`, recording displacement at each checkpoint.
fn windtree_float_path(g: &WindTreeGrid, w: &WindTreeSpec, start: (f64, f64), dir: (f64, f64), checkpoints: &[f64]) -> Vec<f64> {
    let free = |cx: i64, cy: i64| !g.obstacle(cx, cy, w.fconfig.as_ref());
    let (mut x, mut y) = start;
    let (mut dx, mut dy) = dir;
    let (mut cx, mut cy) = (x.floor() as i64, y.floor() as i64);
    let scale = g.l as f64;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    while next < checkpoints.len() {
        let tx = if dx > 0.0 { ((cx + 1) as f64 - x) / dx } else if dx < 0.0 { (cx as f64 - x) / dx } else { f64::INFINITY };
        let ty = if dy > 0.0 { ((cy + 1) as f64 - y) / dy } else if dy < 0.0 { (cy as f64 - y) / dy } else { f64::INFINITY };
        let step = tx.min(ty).max(0.0);
        // Checkpoints are in original lattice units.
        while next < checkpoints.len() && (t + step) / scale >= checkpoints[next] {
            let dt = checkpoints[next] * scale - t;
            let (px, py) = (x + dx * dt, y + dy * dt);
            out.push(((px - start.0).powi(2) + (py - start.1).powi(2)).sqrt() / scale);
            next += 1;
        }
        t += step;
        x += dx * step;
        y += dy * step;
        if tx <= ty {
            let nx = cx + dx.signum() as i64;
            if free(nx, cy) {
                cx = nx;
            } else {
                dx = -dx;
            }
            x = if dx > 0.0 { cx as f64 } else { (cx + 1) as f64 };
            if tx == ty {
                continue;
            }
        } else {
            let ny = cy + dy.signum() as i64;
            if free(cx, ny) {
                cy = ny;
            } else {
                dy = -dy;
            }
            y = if dy > 0.0 { cy as f64 } else { (cy + 1) as f64 };
        }
    }
    out
}

/// Displacement growth of float billiards with uniformly random directions
/// from a free cell near the origin; samples run in parallel and are merged
/// in sample order.
pub fn windtree_diffusion(w: &WindTreeSpec, samples: usize, checkpoints: &[f64], seed: u64) -> Result<DiffusionReport> {
    if samples == 0 || checkpoints.is_empty() || checkpoints.windows(2).any(|p| p[0] >= p[1]) || checkpoints[0] <= 0.0 {
        return Err(Error::InvalidArgument("need samples and increasing positive checkpoints".into()));
    }
    let g = w.grid()?;
    let (fx, fy) = g.free_cell(w.fconfig.as_ref());
    let starts: Vec<((f64, f64), (f64, f64))> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|_| {
                let p = (fx as f64 + rng.gen_range(0.05..0.95), fy as f64 + rng.gen_range(0.05..0.95));
                let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                (p, (th.cos(), th.sin()))
            })
            .collect()
    };
    let paths: Vec<Vec<f64>> = starts.par_iter().map(|&(p, d)| windtree_float_path(&g, w, p, d, checkpoints)).collect();
    let mean: Vec<f64> = (0..checkpoints.len()).map(|i| paths.iter().map(|p| p[i]).sum::<f64>() / samples as f64).collect();
    Ok(DiffusionReport { checkpoints: checkpoints.to_vec(), exponent: fit_power(checkpoints, &mean), mean_displacement: mean, samples })
}

/// Starting point of a rational wind-tree orbit: a free cell plus offsets
/// `a/q, b/q` inside it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitStart {
    pub cell: (i64, i64),
    pub a: i64,
    pub b: i64,
    pub q: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OrbitFate {
    /// Returned to its first crossing state after this many crossings.
    Closed { events: u64, reflections: u64 },
    /// Moved more than the escape distance (lattice units) from the start.
    Escaped { distance: f64, reflections: u64 },
    Cutoff { reflections: u64 },
    Corner,
}

/// Billiard orbit of direction `(l, k)` in a rescaled wind-tree grid.
///
/// Positions are integers over `D = q k l`: every crossing of a grid line
/// then lands on an integer, so the orbit is followed without rounding.
pub fn windtree_orbit(g: &WindTreeGrid, w: &WindTreeSpec, k: i64, l: i64, start: OrbitStart, cutoff: u64, escape: i64) -> OrbitFate {
    let free = |cx: i64, cy: i64| !g.obstacle(cx, cy, w.fconfig.as_ref());
    let d = start.q as i128 * k as i128 * l as i128;
    let (k, l) = (k as i128, l as i128);
    let (mut cx, mut cy) = start.cell;
    let mut u = start.a as i128 * k * l;
    let mut v = start.b as i128 * k * l;
    let (mut sx, mut sy) = (1i128, 1i128);
    let mut first: Option<(i64, i64, i128, i128, i128, i128)> = None;
    let mut events = 0u64;
    let mut reflections = 0u64;
    let limit = escape * g.l;
    loop {
        let du = if sx > 0 { d - u } else { u };
        let dv = if sy > 0 { d - v } else { v };
        let (ct, cs) = (du * k, dv * l);
        if ct == cs {
            return OrbitFate::Corner;
        }
        if ct < cs {
            // Vertical line first; the vertical move du k / l is integral.
            v += sy * ct / l;
            let nx = cx + sx as i64;
            if free(nx, cy) {
                cx = nx;
                u = if sx > 0 { 0 } else { d };
            } else {
                sx = -sx;
                u = if sx > 0 { 0 } else { d };
                reflections += 1;
            }
        } else {
            u += sx * cs / k;
            let ny = cy + sy as i64;
            if free(cx, ny) {
                cy = ny;
                v = if sy > 0 { 0 } else { d };
            } else {
                sy = -sy;
                v = if sy > 0 { 0 } else { d };
                reflections += 1;
            }
        }
        events += 1;
        let state = (cx, cy, u, v, sx, sy);
        match first {
            None => first = Some(state),
            Some(f) if f == state => return OrbitFate::Closed { events: events - 1, reflections },
            _ => {}
        }
        let dist = (cx - start.cell.0).abs().max((cy - start.cell.1).abs());
        if dist > limit {
            return OrbitFate::Escaped { distance: dist as f64 / g.l as f64, reflections };
        }
        if reflections > cutoff {
            return OrbitFate::Cutoff { reflections };
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub samples: usize,
    /// Reflections allowed per orbit.
    pub cutoff: u64,
    /// Escape distance in lattice units.
    pub escape: i64,
    /// Prime denominator of the start offsets.
    pub q: i64,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { samples: 100, cutoff: 100_000, escape: 100, q: 1009, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProbeOutcome {
    AllClosed,
    EscapeWitness { start: OrbitStart, distance: f64, reflections: u64 },
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub k: i64,
    pub l: i64,
    pub outcome: ProbeOutcome,
    pub closed: usize,
    /// Longest closed orbit, in crossings.
    pub max_period: u64,
    pub resampled: usize,
}

/// Samples rational starting points and follows orbits of slope `k/l`
/// until each closes, one escapes, or the cutoff is hit.
pub fn complete_periodicity_probe(w: &WindTreeSpec, k: i64, l: i64, opts: &ProbeOptions) -> Result<ProbeReport> {
    if k < 1 || l < 1 || k.gcd(&l) != 1 {
        return Err(Error::InvalidArgument(format!("slope {k}/{l} must be positive and in lowest terms")));
    }
    if opts.q < 3 || (2..opts.q).take_while(|p| p * p <= opts.q).any(|p| opts.q % p == 0) {
        return Err(Error::InvalidArgument("start denominator must be an odd prime".into()));
    }
    let g = w.grid()?;
    // Starts are spread over the free cells of one period block.
    let period = if w.fconfig.is_some() { 3 * g.l } else { g.l };
    let cells: Vec<(i64, i64)> = (0..period).flat_map(|x| (0..period).map(move |y| (x, y))).filter(|&(x, y)| !g.obstacle(x, y, w.fconfig.as_ref())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((k as u64) << 32 | l as u64));
    let mut closed = 0;
    let mut max_period = 0;
    let mut resampled = 0;
    let mut undecided = false;
    let mut drawn = 0;
    while drawn < opts.samples {
        let cell = cells[rng.gen_range(0..cells.len())];
        let a = rng.gen_range(1..opts.q);
        let b = rng.gen_range(1..opts.q);
        // b l = +-k a (mod q) puts a grid vertex on the line.
        if (b * l - k * a).rem_euclid(opts.q) == 0 || (b * l + k * a).rem_euclid(opts.q) == 0 {
            resampled += 1;
            continue;
        }
        let start = OrbitStart { cell, a, b, q: opts.q };
        match windtree_orbit(&g, w, k, l, start, opts.cutoff, opts.escape) {
            OrbitFate::Corner => {
                resampled += 1;
                continue;
            }
            OrbitFate::Closed { events, .. } => {
                closed += 1;
                max_period = max_period.max(events);
            }
            OrbitFate::Escaped { distance, reflections } => {
                let outcome = ProbeOutcome::EscapeWitness { start, distance, reflections };
                return Ok(ProbeReport { k, l, outcome, closed, max_period, resampled });
            }
            OrbitFate::Cutoff { .. } => undecided = true,
        }
        drawn += 1;
    }
    let outcome = if undecided { ProbeOutcome::Undecided } else { ProbeOutcome::AllClosed };
    Ok(ProbeReport { k, l, outcome, closed, max_period, resampled })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    /// First completely periodic slope `(k, l)` found, as `k/l`.
    pub found: Option<(i64, i64)>,
    /// Every probed slope whose samples all closed, in scan order.
    pub periodic: Vec<(i64, i64)>,
    pub tried: Vec<ProbeReport>,
}

/// Lowest-terms slopes `k/l` with `k, l <= bound`, by height `max(k, l)`,
/// steeper first within a height.
pub fn slope_candidates(bound: i64) -> Vec<(i64, i64)> {
    let mut out: Vec<(i64, i64)> = (1..=bound).flat_map(|k| (1..=bound).map(move |l| (k, l))).filter(|&(k, l)| k.gcd(&l) == 1).collect();
    out.sort_by(|&(k1, l1), &(k2, l2)| k1.max(l1).cmp(&k2.max(l2)).then((k2 * l1).cmp(&(k1 * l2))));
    out
}

/// Scans [`slope_candidates`] with the periodicity probe and returns the
/// first slope all of whose sampled orbits close.
pub fn search_periodic_direction(w: &WindTreeSpec, bound: i64, opts: &ProbeOptions) -> Result<SearchReport> {
    scan(w, bound, opts, true)
}

/// Like [`search_periodic_direction`] but probes every candidate, listing
/// all slopes that look completely periodic.
pub fn periodic_directions(w: &WindTreeSpec, bound: i64, opts: &ProbeOptions) -> Result<SearchReport> {
    scan(w, bound, opts, false)
}

fn scan(w: &WindTreeSpec, bound: i64, opts: &ProbeOptions, stop: bool) -> Result<SearchReport> {
    let mut tried = Vec::new();
    let mut periodic = Vec::new();
    for (k, l) in slope_candidates(bound) {
        let r = complete_periodicity_probe(w, k, l, opts)?;
        if r.outcome == ProbeOutcome::AllClosed {
            periodic.push((k, l));
        }
        tried.push(r);
        if stop && !periodic.is_empty() {
            break;
        }
    }
    Ok(SearchReport { found: periodic.first().copied(), periodic, tried })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusDemoRow {
    pub n: u64,
    /// Euclidean length until every grid cell was met.
    pub length: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusDemoReport {
    pub dimension: usize,
    pub direction: Vec<f64>,
    pub rows: Vec<TorusDemoRow>,
    pub exponent: Option<f64>,
}

fn torus_cells_cover(dir: &[f64], n: usize, max_len: f64) -> Option<f64> {
    let d = dir.len();
    let total = n.pow(d as u32);
    let mut seen = vec![false; total];
    let mut left = total;
    let nf = n as f64;
    // Start off every grid hyperplane.
    let mut p: Vec<f64> = (0..d).map(|i| 0.5 / nf * (1.0 + i as f64) / (d as f64 + 1.0)).collect();
    let mut c: Vec<usize> = p.iter().map(|x| (x * nf) as usize).collect();
    let speed = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut t = 0.0;
    loop {
        let idx = c.iter().fold(0, |acc, &ci| acc * n + ci);
        if !seen[idx] {
            seen[idx] = true;
            left -= 1;
            if left == 0 {
                return Some(t * speed);
            }
        }
        let (axis, dt) = (0..d)
            .map(|i| (i, ((c[i] + 1) as f64 / nf - p[i]) / dir[i]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("dimension >= 1");
        t += dt;
        if t * speed > max_len {
            return None;
        }
        for i in 0..d {
            p[i] += dir[i] * dt;
        }
        c[axis] += 1;
        if c[axis] == n {
            c[axis] = 0;
            for x in p.iter_mut().take(axis + 1).skip(axis) {
                *x -= 1.0;
            }
        }
        p[axis] = c[axis] as f64 / nf;
    }
}

/// Float torus line in `[0,1)^d` with positive direction `dir`: length to
/// meet all `n^d` cells of the `1/n` grid, per level.
pub fn torus_cover_demo(dir: &[f64], n_list: &[u64], max_len: f64) -> Result<TorusDemoReport> {
    if !(2..=3).contains(&dir.len()) || dir.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("direction needs 2 or 3 positive components".into()));
    }
    let rows: Vec<TorusDemoRow> = n_list.par_iter().map(|&n| TorusDemoRow { n, length: torus_cells_cover(dir, n as usize, max_len) }).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| r.length.map(|l| (r.n as f64, l))).unzip();
    Ok(TorusDemoReport { dimension: dir.len(), direction: dir.to_vec(), exponent: fit_power(&xs, &ys), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{l_surface, torus};
    use num_rational::BigRational;

    fn half() -> BigRational {
        BigRational::new(1.into(), 2.into())
    }

    #[test]
    fn torus_cover_is_linear() {
        let t = torus(1, 1);
        let a: QuadRat = "1 + sqrt(2)".parse().unwrap();
        let f = FaceId::new(0, 0);
        let r = cover_time(&t, f, &a, &[8, 16, 32, 64, 128], &[f], 1 << 20).unwrap();
        for row in &r.rows {
            let l = row.length.unwrap();
            assert!(l >= 2.0 / 3.0 * row.n as f64 - 1.0);
            assert!(l / (row.n as f64) < 20.0);
        }
        assert!((r.exponent.unwrap() - 1.0).abs() < 0.2);
    }

    #[test]
    fn cover_monotone_and_grid_agrees() {
        let l = l_surface();
        let a: QuadRat = "1 + sqrt(2)".parse().unwrap();
        let f = FaceId::new(0, 0);
        let faces = l.faces().unwrap();
        let r = cover_time(&l, f, &a, &[4, 8, 16, 32], &faces, 1 << 20).unwrap();
        let ev: Vec<usize> = r.rows.iter().map(|r| r.events.unwrap()).collect();
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(r.first_visits.len(), 3);
        let g = grid_cover_time(&l, f, &a, 16, 1 << 20).unwrap().unwrap();
        assert!(g > 0.0);
    }

    #[test]
    fn windtree_probe_basics() {
        let w = WindTreeSpec::new(half(), half());
        let opts = ProbeOptions { samples: 20, ..ProbeOptions::default() };
        assert_eq!(complete_periodicity_probe(&w, 1, 1, &opts).unwrap().outcome, ProbeOutcome::AllClosed);
        assert_eq!(complete_periodicity_probe(&w, 1, 3, &opts).unwrap().outcome, ProbeOutcome::AllClosed);
        assert!(matches!(complete_periodicity_probe(&w, 2, 1, &opts).unwrap().outcome, ProbeOutcome::EscapeWitness { .. }));
        assert!(complete_periodicity_probe(&w, 2, 2, &opts).is_err());
    }

    #[test]
    fn candidate_order() {
        let c = slope_candidates(3);
        assert_eq!(c, vec![(1, 1), (2, 1), (1, 2), (3, 1), (3, 2), (2, 3), (1, 3)]);
    }

    #[test]
    fn torus_demo_2d() {
        let g = (1.0 + 5f64.sqrt()) / 2.0;
        let r = torus_cover_demo(&[1.0, g], &[4, 8, 16, 32, 64], 1e6).unwrap();
        assert!((r.exponent.unwrap() - 1.0).abs() < 0.3, "{:?}", r.exponent);
    }

    #[test]
    fn corridor_escapes_linearly() {
        let c = crate::generators::corridor();
        let p = PhasePoint::new(FaceId::new(0, 0), QuadRat::frac(1, 2), QuadRat::frac(1, 7), QuadRat::frac(1, 3), crate::flow::Sense::Forward).unwrap();
        let r = escape_rate(&c, &p, &[10.0, 20.0, 40.0, 80.0], 1 << 16).unwrap();
        assert!(r.rows.iter().all(|r| r.diameter.is_none()));
        assert!((r.displacement_fit.unwrap() - 1.0).abs() < 0.1, "{r:?}");
    }

    #[test]
    fn staircase_diameter_grows() {
        let st = crate::generators::staircase(false);
        let a: QuadRat = "sqrt(2) - 1".parse().unwrap();
        let p = PhasePoint::new(st.origin(), QuadRat::zero(), QuadRat::zero(), a, crate::flow::Sense::Forward).unwrap();
        let r = escape_rate(&st, &p, &[10.0, 100.0, 1000.0], 1 << 16).unwrap();
        let d: Vec<usize> = r.rows.iter().map(|r| r.diameter.unwrap()).collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]), "{d:?}");
        assert!(r.rows[2].faces > r.rows[0].faces);
    }
}
