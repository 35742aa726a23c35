//! Shortlines and their bookkeeping.
//!
//! An almost vertical geodesic `V` of slope `alpha > 1` crosses each vertical
//! street by a detour; replacing every detour by its chord gives the shortline
//! `H_1` of slope `1 / alpha_1` with `alpha_1 = 1 / {alpha}`. Iterating
//! alternates orientation: `V -> H_1 -> V_2 -> H_3 -> ...`. Every level of a
//! [`ShortlineChain`] is traced independently from the same face corner and
//! the chain is then checked against the same-edge-cutting property.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::flow::{self, Budget, CornerLine, EdgeInterval, LineEvent, PhasePoint, TraceOptions, TraceStatus, Trajectory};
use crate::surface::{lcm, street_of, FaceId, Side, Street, StreetDir, Surface, STREET_LIMIT};
use crate::{Error, QuadRat, Result};

/// Almost vertical (slope above 1) or almost horizontal (slope below 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    AlmostVertical,
    AlmostHorizontal,
}

impl Orientation {
    pub fn of_slope(slope: &QuadRat) -> Result<Orientation> {
        match slope.cmp(&QuadRat::one()) {
            std::cmp::Ordering::Greater => Ok(Orientation::AlmostVertical),
            std::cmp::Ordering::Less if slope.signum() > 0 => Ok(Orientation::AlmostHorizontal),
            _ => Err(Error::InvalidArgument(format!("slope {slope} is neither above nor below 1"))),
        }
    }

    /// Whether the edges that delimit detours (and are cut by the shortline
    /// at the same points) are vertical.
    fn detour_edges_vertical(self) -> bool {
        self == Orientation::AlmostVertical
    }
}

/// Slope of the shortline of a geodesic with slope `slope`, and whether the
/// leading digit is divisible by `lcm` (the condition that keeps shortlines
/// on the same surface with positive slope).
///
/// For `slope > 1` this is `{slope}`; for `slope < 1` the roles of the axes
/// swap and the result is `1 / {1 / slope}`.
pub fn shortline_slope(slope: &QuadRat, lcm: u64) -> Result<(QuadRat, bool)> {
    let orient = Orientation::of_slope(slope)?;
    let gamma = match orient {
        Orientation::AlmostVertical => slope.clone(),
        Orientation::AlmostHorizontal => slope.recip()?,
    };
    let digit = gamma.floor();
    let frac = gamma.fract();
    if frac.is_zero() {
        return Err(Error::InvalidArgument(format!("slope {slope} has a terminating expansion")));
    }
    let ok = (&digit % num_bigint::BigInt::from(lcm.max(1))).sign() == num_bigint::Sign::NoSign;
    let out = match orient {
        Orientation::AlmostVertical => frac,
        Orientation::AlmostHorizontal => frac.recip()?,
    };
    Ok((out, ok))
}

/// One level of a chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainSegment {
    pub level: usize,
    pub orientation: Orientation,
    pub slope: QuadRat,
    /// Flow time of the trace; the horizontal advance for almost vertical
    /// levels and `m_j alpha_j` for almost horizontal ones.
    pub budget: QuadRat,
    pub trace: Trajectory,
}

/// A chain `V*, H_1*, V_2*, ...` of mutual shortline segments.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShortlineChain {
    /// `alpha_0 = alpha`, `alpha_{j+1} = 1 / {alpha_j}`.
    pub alphas: Vec<QuadRat>,
    /// Detour counts, `alpha_{j+1} m_{j+1} = m_j`.
    pub ms: Vec<QuadRat>,
    pub segments: Vec<ChainSegment>,
    /// Whether every digit used was divisible by the street-LCM of the faces
    /// met by the first level.
    pub digits_ok: bool,
    pub street_lcm: u64,
}

impl ShortlineChain {
    pub fn depth(&self) -> usize {
        self.segments.len() - 1
    }

    /// Smallest `l >= 1` with `m_l <= bound`.
    pub fn first_level_below(&self, bound: &QuadRat) -> Option<usize> {
        (1..self.ms.len()).find(|&l| &self.ms[l] <= bound)
    }
}

/// The `alpha_j` and `m_j` sequences without tracing.
pub fn chain_numbers(alpha: &QuadRat, m0: &QuadRat, depth: usize) -> Result<(Vec<QuadRat>, Vec<QuadRat>)> {
    if alpha <= &QuadRat::one() {
        return Err(Error::InvalidArgument("chain slope must exceed 1".into()));
    }
    if m0.signum() <= 0 {
        return Err(Error::InvalidArgument("m0 must be positive".into()));
    }
    let mut alphas = vec![alpha.clone()];
    let mut ms = vec![m0.clone()];
    for j in 0..depth {
        let f = alphas[j].fract();
        if f.is_zero() {
            return Err(Error::InvalidArgument("slope has a terminating expansion".into()));
        }
        let next = f.recip()?;
        ms.push(&ms[j] / &next);
        alphas.push(next);
    }
    Ok((alphas, ms))
}

fn digit_divisible(a: &QuadRat, l: u64) -> bool {
    (a.floor() % num_bigint::BigInt::from(l.max(1))).sign() == num_bigint::Sign::NoSign
}

/// Builds the chain from the bottom-left corner of `face`, each level traced
/// exactly and independently.
pub fn build_chain(s: &dyn Surface, face: FaceId, alpha: &QuadRat, m0: &QuadRat, depth: usize) -> Result<ShortlineChain> {
    let (alphas, ms) = chain_numbers(alpha, m0, depth)?;
    let opts = TraceOptions { reflect_walls: false, detect_periodic: false, escape_bound: None };
    let mut segments = Vec::with_capacity(depth + 1);
    for j in 0..=depth {
        let (orientation, slope, budget) = if j % 2 == 0 {
            (Orientation::AlmostVertical, alphas[j].clone(), ms[j].clone())
        } else {
            (Orientation::AlmostHorizontal, alphas[j].recip()?, &ms[j] * &alphas[j])
        };
        let p = PhasePoint::corner(face, slope.clone())?;
        let trace = flow::trace(s, &p, &Budget::Arclen(budget.clone()), &opts)?;
        if let TraceStatus::Singularity(i) = trace.status {
            return Err(Error::Precondition(format!("level {j} hits a vertex at event {i}")));
        }
        segments.push(ChainSegment { level: j, orientation, slope, budget, trace });
    }
    let mut l = 1u64;
    for e in &segments[0].trace.events {
        for dir in [StreetDir::Horizontal, StreetDir::Vertical] {
            l = lcm(l, street_of(s, e.entered.0, dir, STREET_LIMIT)?.length as u64);
        }
    }
    let digits_ok = alphas[..depth.max(1)].iter().all(|a| digit_divisible(a, l));
    Ok(ShortlineChain { alphas, ms, segments, digits_ok, street_lcm: l })
}

/// A crossing point named by the face to its left (vertical edges) or below
/// (horizontal edges), with the coordinate along the edge.
pub type EdgePoint = (FaceId, Side, QuadRat);

fn canonical_point(e: &flow::CrossingEvent) -> EdgePoint {
    let (f, side) = e.edge;
    match side {
        Side::R | Side::T => (f, side, e.coord.clone()),
        // Translation gluings only: the entered side is R or T.
        _ => (e.entered.0, e.entered.1, e.coord.clone()),
    }
}

/// Crossing points of a trace on vertical (or horizontal) edges.
pub fn crossing_set(t: &Trajectory, vertical: bool) -> BTreeSet<EdgePoint> {
    t.events
        .iter()
        .filter(|e| !e.reflected && e.edge.1.is_vertical() == vertical)
        .map(canonical_point)
        .collect()
}

/// Result of comparing two adjacent chain levels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SameEdgeReport {
    pub coarse: usize,
    pub fine: usize,
    pub vertical_edges: bool,
    pub coarse_points: usize,
    pub fine_points: usize,
    pub equal: bool,
}

/// Checks `V_{2i}` against `H_{2i+1}` on vertical edges and `H_{2i+1}`
/// against `V_{2i+2}` on horizontal edges, as exact sets.
pub fn same_edge_cutting(chain: &ShortlineChain) -> Vec<SameEdgeReport> {
    let mut out = Vec::new();
    for j in 0..chain.depth() {
        let vertical = chain.segments[j].orientation.detour_edges_vertical();
        let a = crossing_set(&chain.segments[j].trace, vertical);
        let b = crossing_set(&chain.segments[j + 1].trace, vertical);
        out.push(SameEdgeReport {
            coarse: j,
            fine: j + 1,
            vertical_edges: vertical,
            coarse_points: a.len(),
            fine_points: b.len(),
            equal: a == b,
        });
    }
    out
}

/// A detour crossing of a street, or the fractional one at the end.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetourCrossing {
    pub street: Street,
    /// Event that starts the crossing; `None` for the trace start.
    pub start_event: Option<usize>,
    /// Event that ends it; `None` for the fractional tail.
    pub end_event: Option<usize>,
    pub shortcut_start: EdgePoint,
    pub shortcut_end: Option<EdgePoint>,
    /// 1 for whole crossings, in `(0, 1)` for the tail.
    pub fraction: QuadRat,
}

/// Splits a trace into detour crossings of the streets transverse to its
/// orientation. Returns the crossings and `m`, the whole count plus the tail
/// fraction.
pub fn detour_decompose(s: &dyn Surface, t: &Trajectory, orientation: Orientation) -> Result<(Vec<DetourCrossing>, QuadRat)> {
    let (dx, dy) = t.start.direction();
    if Orientation::of_slope(&t.start.slope)? != orientation || t.start.turn != 0 {
        return Err(Error::Precondition("trajectory slope does not match the orientation".into()));
    }
    let vertical = orientation.detour_edges_vertical();
    let (rate, on_edge, dir) = if vertical {
        (dx.abs(), t.start.x.is_zero() || t.start.x == QuadRat::one(), StreetDir::Vertical)
    } else {
        (dy.abs(), t.start.y.is_zero() || t.start.y == QuadRat::one(), StreetDir::Horizontal)
    };
    if !on_edge {
        return Err(Error::Precondition("detours are counted from a start on a street side".into()));
    }
    let marks: Vec<&flow::CrossingEvent> = t.events.iter().filter(|e| e.edge.1.is_vertical() == vertical).collect();
    let first_face = t.start.face;
    let start_side = if vertical { Side::L } else { Side::B };
    let mut out = Vec::new();
    let mut prev: Option<&flow::CrossingEvent> = None;
    let mut prev_time = QuadRat::zero();
    for e in &marks {
        let face = prev.map(|p| p.entered.0).unwrap_or(first_face);
        let start = match prev {
            Some(p) => canonical_point(p),
            None => (first_face, start_side, if vertical { t.start.y.clone() } else { t.start.x.clone() }),
        };
        out.push(DetourCrossing {
            street: street_of(s, face, dir, STREET_LIMIT)?,
            start_event: prev.map(|p| p.index),
            end_event: Some(e.index),
            shortcut_start: start,
            shortcut_end: Some(canonical_point(e)),
            fraction: QuadRat::one(),
        });
        prev = Some(e);
        prev_time = e.arclen.clone();
    }
    let tail = (&t.arclen - &prev_time) * &rate;
    if out.is_empty() && tail.is_zero() {
        return Err(Error::Precondition("trajectory too short for one street entry".into()));
    }
    let whole = QuadRat::int(out.len() as i64);
    if !tail.is_zero() {
        let face = prev.map(|p| p.entered.0).unwrap_or(first_face);
        let start = match prev {
            Some(p) => canonical_point(p),
            None => (first_face, start_side, if vertical { t.start.y.clone() } else { t.start.x.clone() }),
        };
        out.push(DetourCrossing {
            street: street_of(s, face, dir, STREET_LIMIT)?,
            start_event: prev.map(|p| p.index),
            end_event: None,
            shortcut_start: start,
            shortcut_end: None,
            fraction: tail.clone(),
        });
    }
    Ok((out, whole + tail))
}

/// Unit kinds: almost vertical units with or without a vertical-side hit in
/// between, and the almost horizontal analogues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnitKind {
    Up,
    UpBroken,
    Right,
    RightBroken,
}

impl UnitKind {
    pub fn is_broken(self) -> bool {
        matches!(self, UnitKind::UpBroken | UnitKind::RightBroken)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            UnitKind::Up => "^",
            UnitKind::UpBroken => "-^",
            UnitKind::Right => ">",
            UnitKind::RightBroken => "+>",
        }
    }
}

/// Type of a unit; `label` is set on surfaces with edge labels, e.g.
/// `h1h2` or `v3v1*`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitType {
    pub kind: UnitKind,
    pub label: Option<String>,
}

impl std::fmt::Display for UnitType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.label {
            Some(l) => f.write_str(l),
            None => f.write_str(self.kind.symbol()),
        }
    }
}

/// A unit occurrence inside a trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Unit {
    pub face: FaceId,
    pub ty: UnitType,
    /// Delimiting crossings (event indices); `None` is the trace start.
    pub start_event: Option<usize>,
    pub end_event: usize,
    pub t_start: QuadRat,
    pub t_end: QuadRat,
}

/// Whether some face has `a` on side `lo` and `b` on side `hi`: a labelled
/// pair realised by an unbroken unit.
fn unbroken_pair_exists(s: &dyn Surface, faces: &[FaceId], lo: Side, hi: Side, a: &str, b: &str) -> bool {
    faces
        .iter()
        .any(|&f| s.label(f, lo).as_deref() == Some(a) && s.label(f, hi).as_deref() == Some(b))
}

/// Splits a trace into whole units (segments between consecutive crossings
/// of horizontal edges for almost vertical flow, vertical edges otherwise).
/// The start counts as a boundary when it lies on such an edge.
pub fn classify_units(s: &dyn Surface, t: &Trajectory) -> Result<Vec<Unit>> {
    let orient = Orientation::of_slope(&t.start.slope)?;
    let up = orient == Orientation::AlmostVertical;
    // Units end on horizontal edges for almost vertical flow.
    let boundary_vertical = !up;
    let (lo_side, hi_side) = if up { (Side::B, Side::T) } else { (Side::L, Side::R) };
    let label_faces = s.faces().unwrap_or_default();
    let labelled = label_faces.iter().any(|&f| s.label(f, lo_side).is_some());
    let mut out = Vec::new();
    let starts_on_edge = if up { t.start.y.is_zero() } else { t.start.x.is_zero() };
    let mut cur: Option<(Option<usize>, FaceId, QuadRat, Option<String>)> = if starts_on_edge {
        Some((None, t.start.face, QuadRat::zero(), s.label(t.start.face, lo_side)))
    } else {
        None
    };
    let mut broken = false;
    for e in t.events.iter().filter(|e| !e.reflected) {
        if e.edge.1.is_vertical() != boundary_vertical {
            broken = true;
            continue;
        }
        if let Some((si, face, t0, lab0)) = cur.take() {
            let kind = match (up, broken) {
                (true, false) => UnitKind::Up,
                (true, true) => UnitKind::UpBroken,
                (false, false) => UnitKind::Right,
                (false, true) => UnitKind::RightBroken,
            };
            let label = match (lab0, s.label(e.edge.0, e.edge.1)) {
                (Some(a), Some(b)) if labelled => {
                    let star = broken && unbroken_pair_exists(s, &label_faces, lo_side, hi_side, &a, &b);
                    Some(format!("{a}{b}{}", if star { "*" } else { "" }))
                }
                _ => None,
            };
            out.push(Unit { face, ty: UnitType { kind, label }, start_event: si, end_event: e.index, t_start: t0, t_end: e.arclen.clone() });
        }
        cur = Some((Some(e.index), e.entered.0, e.arclen.clone(), s.label(e.entered.0, e.entered.1)));
        broken = false;
    }
    Ok(out)
}

/// Coarse units, fine units, and the ancestor indices of each fine unit.
pub type AncestorInstances = (Vec<Unit>, Vec<Unit>, Vec<Option<Vec<usize>>>);

/// For each whole unit of chain level `fine`, the indices of the units of
/// level `fine - 1` making up its ancestor detour crossing, fractional ends
/// extended to whole units. `None` marks units whose ancestor runs past the
/// traced part of the coarser level.
pub fn ancestor_instances(s: &dyn Surface, chain: &ShortlineChain, fine: usize) -> Result<AncestorInstances> {
    if fine == 0 || fine > chain.depth() {
        return Err(Error::InvalidArgument(format!("level {fine} has no coarser level in the chain")));
    }
    let coarse_seg = &chain.segments[fine - 1];
    let fine_seg = &chain.segments[fine];
    let fine_units = classify_units(s, &fine_seg.trace)?;
    let coarse_units = classify_units(s, &coarse_seg.trace)?;
    // Fine units end on edges cut by the coarse level's detour boundaries.
    let vertical = coarse_seg.orientation.detour_edges_vertical();
    let mut at: HashMap<EdgePoint, (usize, QuadRat)> = HashMap::new();
    let marks: Vec<&flow::CrossingEvent> =
        coarse_seg.trace.events.iter().filter(|e| !e.reflected && e.edge.1.is_vertical() == vertical).collect();
    for (k, e) in marks.iter().enumerate() {
        at.insert(canonical_point(e), (k, e.arclen.clone()));
    }
    let fine_events = &fine_seg.trace.events;
    let mut anc = Vec::with_capacity(fine_units.len());
    for u in &fine_units {
        let Some(si) = u.start_event else {
            anc.push(None);
            continue;
        };
        let a = at.get(&canonical_point(&fine_events[si]));
        let b = at.get(&canonical_point(&fine_events[u.end_event]));
        let (Some((ka, ta)), Some((kb, tb))) = (a, b) else {
            anc.push(None);
            continue;
        };
        if kb != &(ka + 1) {
            return Err(Error::Precondition(format!("unit at {} is not the shortcut of one detour crossing", u.face)));
        }
        // Coarse units meeting the open span (ta, tb); all must be whole.
        // Units are in trace order, so the span is a contiguous run.
        let lo = coarse_units.partition_point(|c| &c.t_end <= ta);
        let hi = coarse_units.partition_point(|c| &c.t_start < tb);
        let idx: Vec<usize> = (lo..hi.max(lo)).collect();
        let covered_to = idx.last().map(|&i| &coarse_units[i].t_end >= tb).unwrap_or(false);
        let covered_from = idx.first().map(|&i| &coarse_units[i].t_start <= ta).unwrap_or(false);
        anc.push(if covered_to && covered_from { Some(idx) } else { None });
    }
    Ok((fine_units, coarse_units, anc))
}

/// Ancestor table per unit type between levels `fine - 1` and `fine`, as
/// label (or kind) strings; multiplicities collapsed.
pub fn ancestor_table(s: &dyn Surface, chain: &ShortlineChain, fine: usize) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let (fu, cu, anc) = ancestor_instances(s, chain, fine)?;
    let mut table: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (u, a) in fu.iter().zip(&anc) {
        if let Some(idx) = a {
            let e = table.entry(u.ty.to_string()).or_default();
            e.extend(idx.iter().map(|&i| cu[i].ty.to_string()));
        }
    }
    Ok(table)
}

/// Iterated ancestors, instance by instance: starting from every whole unit
/// of level `fine`, the unit types met after 1, 2, ... `steps` coarsenings.
/// Only starting units whose whole ancestry lies inside the traces count.
pub fn iterated_ancestors(s: &dyn Surface, chain: &ShortlineChain, fine: usize, steps: usize) -> Result<BTreeMap<String, Vec<BTreeSet<String>>>> {
    if steps == 0 || steps > fine {
        return Err(Error::InvalidArgument("need 1 <= steps <= fine".into()));
    }
    let mut levels = Vec::new();
    for l in (fine + 1 - steps..=fine).rev() {
        levels.push(ancestor_instances(s, chain, l)?);
    }
    let mut out: BTreeMap<String, Vec<BTreeSet<String>>> = BTreeMap::new();
    'unit: for (i, u) in levels[0].0.iter().enumerate() {
        let mut cur: BTreeSet<usize> = BTreeSet::from([i]);
        let mut sets = Vec::new();
        for (fu, cu, anc) in &levels {
            let _ = fu;
            let mut next = BTreeSet::new();
            for &k in &cur {
                match &anc[k] {
                    Some(idx) => next.extend(idx.iter().copied()),
                    None => continue 'unit,
                }
            }
            sets.push(next.iter().map(|&k| cu[k].ty.to_string()).collect::<BTreeSet<_>>());
            cur = next;
        }
        let entry = out.entry(u.ty.to_string()).or_insert_with(|| vec![BTreeSet::new(); steps]);
        for (acc, s) in entry.iter_mut().zip(sets) {
            acc.extend(s);
        }
    }
    Ok(out)
}

/// Which unit types (and broken units per face) a chain level exhibits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CornerCutReport {
    pub level: usize,
    pub m: QuadRat,
    pub orientation: Orientation,
    pub types: BTreeSet<String>,
    /// Broken units per face.
    pub broken_per_face: BTreeMap<FaceId, usize>,
    /// Labelled surfaces: all three broken types of the orientation occur,
    /// which is what exhibiting all six corner cuts amounts to.
    pub all_corner_cuts: Option<bool>,
}

/// Census of a chain level.
pub fn corner_cut_census(s: &dyn Surface, chain: &ShortlineChain, level: usize) -> Result<CornerCutReport> {
    let seg = chain
        .segments
        .get(level)
        .ok_or_else(|| Error::InvalidArgument(format!("chain has no level {level}")))?;
    let units = classify_units(s, &seg.trace)?;
    let mut types = BTreeSet::new();
    let mut broken_per_face = BTreeMap::new();
    let mut broken_labels = BTreeSet::new();
    let mut labelled = false;
    for u in &units {
        types.insert(u.ty.to_string());
        if u.ty.kind.is_broken() {
            *broken_per_face.entry(u.face).or_insert(0) += 1;
            if let Some(l) = &u.ty.label {
                broken_labels.insert(l.clone());
            }
        }
        labelled |= u.ty.label.is_some();
    }
    let all_corner_cuts = if labelled { Some(broken_labels.len() >= 3) } else { None };
    Ok(CornerCutReport { level, m: chain.ms[level].clone(), orientation: seg.orientation, types, broken_per_face, all_corner_cuts })
}

/// The longest crossing-free open interval over the scoped edges.
pub fn max_free_interval(t: &Trajectory, edges: &[(FaceId, Side)]) -> Result<(EdgeInterval, QuadRat)> {
    if edges.is_empty() {
        return Err(Error::InvalidArgument("empty edge scope".into()));
    }
    let mut pts: BTreeMap<(FaceId, Side), Vec<QuadRat>> = edges.iter().map(|&e| (e, Vec::new())).collect();
    for e in t.events.iter().filter(|e| !e.reflected) {
        let (f, side, c) = canonical_point(e);
        if let Some(v) = pts.get_mut(&(f, side)) {
            v.push(c);
        }
    }
    let mut best: Option<(EdgeInterval, QuadRat)> = None;
    for (edge, mut v) in pts {
        v.push(QuadRat::zero());
        v.push(QuadRat::one());
        v.sort();
        v.dedup();
        for w in v.windows(2) {
            let len = &w[1] - &w[0];
            if best.as_ref().map(|b| len > b.1).unwrap_or(true) {
                best = Some((EdgeInterval { edge, lo: w[0].clone(), hi: w[1].clone() }, len));
            }
        }
    }
    Ok(best.expect("nonempty scope"))
}

/// Free-gap measurement of a long corner-started segment with the integer
/// tracer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeGap {
    pub events: usize,
    pub vertical_events: usize,
    /// Exact gap, the largest over all vertical edges of the surface.
    pub gap: QuadRat,
    pub gap_f64: f64,
    pub edge: FaceId,
    /// Euclidean length of the segment actually traced.
    pub length_f64: f64,
}

/// Traces from the corner of `face` with slope `alpha` up to Euclidean
/// length `sqrt(length2)` and returns the largest crossing-free interval on
/// the vertical edges. The squared length keeps the budget in the field.
pub fn free_gap_fast(s: &dyn Surface, face: FaceId, alpha: &QuadRat, length2: &QuadRat) -> Result<FreeGap> {
    let faces = s.faces().ok_or_else(|| Error::Precondition("free gaps need a finite surface".into()))?;
    let line = CornerLine::new(s, face, alpha)?;
    let speed2 = alpha * alpha + QuadRat::one();
    let l2 = length2.clone();
    let tmax = (length2.to_f64() / speed2.to_f64()).sqrt();
    let slope = line.slope;
    let inv = line.inv;
    let mut per_edge: BTreeMap<FaceId, Vec<(i64, i64)>> = faces.iter().map(|&f| (f, Vec::new())).collect();
    let mut events = 0usize;
    let mut vertical_events = 0usize;
    let mut last_t = 0.0;
    for ev in line {
        let ev: LineEvent = ev?;
        let t = if ev.vertical { ev.k as f64 } else { ev.k as f64 * inv.to_f64() };
        if t > tmax * (1.0 + 1e-9) {
            break;
        }
        if t > tmax * (1.0 - 1e-9) {
            let exact = if ev.vertical { QuadRat::int(ev.k) } else { inv.to_quad().mul_int(ev.k) };
            if &(&exact * &exact) * &speed2 > l2 {
                break;
            }
        }
        events += 1;
        last_t = t;
        if ev.vertical {
            vertical_events += 1;
            per_edge.entry(ev.from).or_default().push((ev.k, ev.n));
        }
    }
    let mut best: Option<((i64, i64), FaceId)> = None;
    let mut whole_edge: Option<FaceId> = None;
    for (f, pts) in per_edge.iter_mut() {
        match flow::max_gap_lin(&slope, pts) {
            None => {
                whole_edge.get_or_insert(*f);
            }
            Some(g) => {
                if best.map(|(b, _)| slope.cmp_lin(g, b) == std::cmp::Ordering::Greater).unwrap_or(true) {
                    best = Some((g, *f));
                }
            }
        }
    }
    let (gap, edge) = match (whole_edge, best) {
        (Some(f), _) => (QuadRat::one(), f),
        (None, Some(((k, n), f))) => (slope.to_quad().mul_int(k).add_int(-n), f),
        (None, None) => unreachable!("finite surface has faces"),
    };
    Ok(FreeGap { events, vertical_events, gap_f64: gap.to_f64(), gap, edge, length_f64: last_t * speed2.to_f64().sqrt() })
}

/// Smallest integer strictly above `alpha`.
pub fn digit_bound(alpha: &QuadRat) -> i64 {
    use num_traits::ToPrimitive;
    (alpha.floor() + num_bigint::BigInt::from(1u8)).to_i64().expect("small slope")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{l_surface, torus};

    fn q(s: &str) -> QuadRat {
        s.parse().unwrap()
    }

    #[test]
    fn shortline_slopes() {
        assert_eq!(shortline_slope(&q("1 + sqrt(2)"), 2).unwrap(), (q("sqrt(2) - 1"), true));
        assert_eq!(shortline_slope(&q("2 + sqrt(5)"), 2).unwrap(), (q("sqrt(5) - 2"), true));
        let a = QuadRat::alpha(4);
        let (h, _) = shortline_slope(&a, 2).unwrap();
        assert_eq!(h, a.recip().unwrap());
        assert_eq!(shortline_slope(&h, 2).unwrap().0, a);
        // alpha(3) = [3; 3, ...]: odd leading digit is flagged.
        assert!(!shortline_slope(&QuadRat::alpha(3), 2).unwrap().1);
        assert!(shortline_slope(&QuadRat::one(), 2).is_err());
    }

    #[test]
    fn m_sequence_and_same_edge_cutting() {
        let l = l_surface();
        let alpha = q("1 + sqrt(2)");
        let c = build_chain(&l, FaceId::new(0, 0), &alpha, &QuadRat::int(8), 3).unwrap();
        assert!(c.digits_ok);
        assert_eq!(c.street_lcm, 2);
        for j in 0..3 {
            assert_eq!(&c.alphas[j + 1] * &c.ms[j + 1], c.ms[j]);
        }
        assert_eq!(c.ms[1], QuadRat::int(8) * q("sqrt(2) - 1"));
        assert!(same_edge_cutting(&c).iter().all(|r| r.equal && r.coarse_points > 0));
        let (d, m) = detour_decompose(&l, &c.segments[0].trace, Orientation::AlmostVertical).unwrap();
        assert_eq!(m, QuadRat::int(8));
        assert_eq!(d.len(), 8);
        let (_, m1) = detour_decompose(&l, &c.segments[1].trace, Orientation::AlmostHorizontal).unwrap();
        assert_eq!(m1, c.ms[1]);
    }

    #[test]
    fn unit_labels_on_l_surface() {
        let l = l_surface();
        let c = build_chain(&l, FaceId::new(0, 0), &q("1 + sqrt(2)"), &QuadRat::int(60), 1).unwrap();
        let v: BTreeSet<String> = classify_units(&l, &c.segments[0].trace).unwrap().into_iter().map(|u| u.ty.to_string()).collect();
        let want: BTreeSet<String> = ["h1h3", "h1h2", "h2h2", "h2h3", "h3h1", "h3h1*"].iter().map(|s| s.to_string()).collect();
        assert_eq!(v, want);
        let h: BTreeSet<String> = classify_units(&l, &c.segments[1].trace).unwrap().into_iter().map(|u| u.ty.to_string()).collect();
        let want: BTreeSet<String> = ["v1v3", "v1v2", "v3v1", "v3v1*", "v2v2", "v2v3"].iter().map(|s| s.to_string()).collect();
        assert_eq!(h, want);
    }

    #[test]
    fn torus_units_unbroken_sometimes() {
        let t = torus(1, 1);
        let p = PhasePoint::corner(FaceId::new(0, 0), q("1 + sqrt(2)")).unwrap();
        let tr = flow::trace(&t, &p, &Budget::Crossings(50), &TraceOptions::default()).unwrap();
        let u = classify_units(&t, &tr).unwrap();
        assert!(u.iter().all(|u| u.ty.label.is_none()));
        assert!(u.iter().any(|u| u.ty.kind == UnitKind::Up));
    }

    #[test]
    fn free_interval_oracle() {
        // Torus: gaps of {k alpha}, k = 1..n, by sort and scan.
        let t = torus(1, 1);
        let alpha = q("1 + sqrt(2)");
        let p = PhasePoint::corner(FaceId::new(0, 0), alpha.clone()).unwrap();
        let tr = flow::trace(&t, &p, &Budget::Arclen(QuadRat::int(30)), &TraceOptions::default()).unwrap();
        let (i, g) = max_free_interval(&tr, &[(FaceId::new(0, 0), Side::R)]).unwrap();
        let mut pts: Vec<f64> = (1..=30).map(|k| (k as f64 * alpha.to_f64()).fract()).collect();
        pts.extend([0.0, 1.0]);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = pts.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!((g.to_f64() - want).abs() < 1e-12);
        assert_eq!(i.length(), g);
        let fast = free_gap_fast(&t, FaceId::new(0, 0), &alpha, &(QuadRat::int(900) * (&alpha * &alpha + QuadRat::one()))).unwrap();
        assert_eq!(fast.gap, g);
    }
}
