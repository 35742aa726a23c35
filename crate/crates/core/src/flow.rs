//! Exact straight-line flow: geodesics on translation and rotation-tagged
//! surfaces, billiards in regions, and projection of edge intervals.
//!
//! The tracer is event driven. From a point `(x, y)` of a face moving with
//! direction `(dx, dy)` it computes the exit time through each axis, compares
//! them exactly and crosses the nearer side. Equal exit times mean the path
//! runs into a vertex, which ends the trajectory.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::surface::{cone_angle_bl, gluing_rotation, FaceId, Side, Surface};
use crate::{Error, QuadRat, Result};

/// Orientation of the base direction `(1, slope)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Forward,
    Backward,
}

/// A point on a face together with a direction.
///
/// The direction is `(1, slope)`, negated for [`Sense::Backward`], then
/// rotated counterclockwise by `turn` quarter turns. On translation surfaces
/// `turn` stays 0; rotation-tagged gluings change it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhasePoint {
    pub face: FaceId,
    pub x: QuadRat,
    pub y: QuadRat,
    pub slope: QuadRat,
    pub sense: Sense,
    #[serde(default)]
    pub turn: u8,
}

impl PhasePoint {
    pub fn new(face: FaceId, x: QuadRat, y: QuadRat, slope: QuadRat, sense: Sense) -> Result<PhasePoint> {
        let p = PhasePoint { face, x, y, slope, sense, turn: 0 };
        p.check()?;
        Ok(p)
    }

    /// Bottom-left corner of `face`, moving forward.
    pub fn corner(face: FaceId, slope: QuadRat) -> Result<PhasePoint> {
        PhasePoint::new(face, QuadRat::zero(), QuadRat::zero(), slope, Sense::Forward)
    }

    fn check(&self) -> Result<()> {
        let unit = |v: &QuadRat| v.signum() >= 0 && v <= &QuadRat::one();
        if !unit(&self.x) || !unit(&self.y) {
            return Err(Error::InvalidArgument(format!("point ({}, {}) outside the unit square", self.x, self.y)));
        }
        if self.slope.signum() <= 0 {
            return Err(Error::InvalidArgument("slope must be positive".into()));
        }
        Ok(())
    }

    pub fn direction(&self) -> (QuadRat, QuadRat) {
        let (mut dx, mut dy) = match self.sense {
            Sense::Forward => (QuadRat::one(), self.slope.clone()),
            Sense::Backward => (-QuadRat::one(), -&self.slope),
        };
        for _ in 0..self.turn % 4 {
            let t = -&dy;
            dy = dx;
            dx = t;
        }
        (dx, dy)
    }

    /// The same point with the opposite direction.
    pub fn reversed(&self) -> PhasePoint {
        let sense = match self.sense {
            Sense::Forward => Sense::Backward,
            Sense::Backward => Sense::Forward,
        };
        PhasePoint { sense, ..self.clone() }
    }
}

/// One crossing of a face side (or a reflection off a wall).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub index: usize,
    /// Face left and its exit side.
    pub edge: (FaceId, Side),
    /// Position along the edge: `y` on vertical sides, `x` on horizontal
    /// ones, in the frame of the face left.
    pub coord: QuadRat,
    /// Cumulative flow time in units of the direction vector's length.
    pub arclen: QuadRat,
    /// Face entered and the side it was entered through. Equals `edge` on
    /// a reflection.
    pub entered: (FaceId, Side),
    pub reflected: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    BudgetExhausted,
    /// The path runs into a vertex; the event index it would have had.
    Singularity(usize),
    /// The state after event 0 recurs after `period` further events.
    Periodic(usize),
    /// Left the Chebyshev box of this radius around the start face.
    Escaped(i64),
    /// Met a wall with reflection disabled, at this event.
    Wall(usize),
}

/// Exact flow state inside one face.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowState {
    pub face: FaceId,
    pub x: QuadRat,
    pub y: QuadRat,
    pub dx: QuadRat,
    pub dy: QuadRat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: PhasePoint,
    pub events: Vec<CrossingEvent>,
    pub status: TraceStatus,
    /// Where the flow stopped.
    pub end: FlowState,
    pub arclen: QuadRat,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Crossings of vertical sides (left/right), excluding reflections.
    pub fn vertical_crossings(&self) -> impl Iterator<Item = &CrossingEvent> {
        self.events.iter().filter(|e| e.edge.1.is_vertical() && !e.reflected)
    }

    pub fn horizontal_crossings(&self) -> impl Iterator<Item = &CrossingEvent> {
        self.events.iter().filter(|e| !e.edge.1.is_vertical() && !e.reflected)
    }
}

/// When to stop tracing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Budget {
    Crossings(usize),
    /// Flow time in units of the direction vector; the end point is placed
    /// exactly at this time.
    Arclen(QuadRat),
    /// Euclidean length; the trajectory stops at the last crossing within it.
    Length(QuadRat),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceOptions {
    pub reflect_walls: bool,
    /// Check for exact recurrence of the post-event-0 state (only ever
    /// attempted for rational directions).
    pub detect_periodic: bool,
    /// Chebyshev radius in face coordinates beyond which the trace stops.
    pub escape_bound: Option<i64>,
}

impl Default for TraceOptions {
    fn default() -> TraceOptions {
        TraceOptions { reflect_walls: false, detect_periodic: true, escape_bound: None }
    }
}

fn rotate_point(x: &QuadRat, y: &QuadRat, r: u8) -> (QuadRat, QuadRat) {
    let (mut x, mut y) = (x.clone(), y.clone());
    for _ in 0..r % 4 {
        let nx = QuadRat::one() - &y;
        y = x;
        x = nx;
    }
    (x, y)
}

fn rotate_vec(dx: &QuadRat, dy: &QuadRat, r: u8) -> (QuadRat, QuadRat) {
    let (mut dx, mut dy) = (dx.clone(), dy.clone());
    for _ in 0..r % 4 {
        let t = -&dy;
        dy = dx;
        dx = t;
    }
    (dx, dy)
}

/// Moves a state sitting on side `exit` of its face across the gluing.
fn cross(st: &FlowState, exit: Side, to: (FaceId, Side)) -> FlowState {
    let (g, entered) = to;
    let r = gluing_rotation(exit, entered);
    let (nx, ny) = exit.normal();
    let x = st.x.add_int(-nx);
    let y = st.y.add_int(-ny);
    let (x, y) = rotate_point(&x, &y, r);
    let (dx, dy) = rotate_vec(&st.dx, &st.dy, r);
    FlowState { face: g, x, y, dx, dy }
}

fn exit_time(pos: &QuadRat, vel: &QuadRat) -> Option<QuadRat> {
    match vel.signum() {
        1 => Some((QuadRat::one() - pos) / vel),
        -1 => Some(-pos / vel),
        _ => None,
    }
}

fn is_rational_direction(st: &FlowState) -> bool {
    st.dx.is_rational() && st.dy.is_rational()
}

/// Pushes a state that sits on its boundary moving outward across it.
fn normalize(s: &dyn Surface, mut st: FlowState, reflect: bool) -> Result<FlowState> {
    for _ in 0..2 {
        let out_x = (st.x == QuadRat::one() && st.dx.signum() > 0) || (st.x.is_zero() && st.dx.signum() < 0);
        let out_y = (st.y == QuadRat::one() && st.dy.signum() > 0) || (st.y.is_zero() && st.dy.signum() < 0);
        if out_x && out_y {
            return Err(Error::Precondition("start point is a corner and the direction points out of the face".into()));
        }
        let exit = if out_x {
            if st.dx.signum() > 0 {
                Side::R
            } else {
                Side::L
            }
        } else if out_y {
            if st.dy.signum() > 0 {
                Side::T
            } else {
                Side::B
            }
        } else {
            return Ok(st);
        };
        match s.glue(st.face, exit) {
            Some(to) => st = cross(&st, exit, to),
            None if reflect => {
                if exit.is_vertical() {
                    st.dx = -st.dx;
                } else {
                    st.dy = -st.dy;
                }
            }
            None => return Err(Error::Precondition("start point on a wall, moving into it".into())),
        }
    }
    Ok(st)
}

/// Core event loop shared by [`trace`] and [`trace_billiard`].
pub fn trace_state(
    s: &dyn Surface,
    start: PhasePoint,
    st: FlowState,
    budget: &Budget,
    opts: &TraceOptions,
) -> Result<Trajectory> {
    match budget {
        Budget::Crossings(0) => return Err(Error::InvalidArgument("budget must be positive".into())),
        Budget::Arclen(l) | Budget::Length(l) if l.signum() <= 0 => {
            return Err(Error::InvalidArgument("budget must be positive".into()))
        }
        _ => {}
    }
    if st.dx.is_zero() && st.dy.is_zero() {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    if !s.contains(st.face) {
        return Err(Error::UnknownFace(st.face.to_string()));
    }
    let mut st = normalize(s, st, opts.reflect_walls)?;
    let origin = st.face;
    let periodic = opts.detect_periodic && is_rational_direction(&st);
    let speed2 = &st.dx * &st.dx + &st.dy * &st.dy;
    let mut events: Vec<CrossingEvent> = Vec::new();
    let mut arclen = QuadRat::zero();
    let mut first_state: Option<FlowState> = None;
    let status = loop {
        if let Budget::Crossings(n) = budget {
            if events.len() >= *n {
                break TraceStatus::BudgetExhausted;
            }
        }
        let tx = exit_time(&st.x, &st.dx);
        let ty = exit_time(&st.y, &st.dy);
        let (t, exit) = match (tx, ty) {
            (Some(a), Some(b)) => match a.cmp(&b) {
                std::cmp::Ordering::Less => (a, if st.dx.signum() > 0 { Side::R } else { Side::L }),
                std::cmp::Ordering::Greater => (b, if st.dy.signum() > 0 { Side::T } else { Side::B }),
                std::cmp::Ordering::Equal => break TraceStatus::Singularity(events.len()),
            },
            (Some(a), None) => (a, if st.dx.signum() > 0 { Side::R } else { Side::L }),
            (None, Some(b)) => (b, if st.dy.signum() > 0 { Side::T } else { Side::B }),
            (None, None) => unreachable!("nonzero direction"),
        };
        let next = &arclen + &t;
        match budget {
            Budget::Arclen(l) if next > *l => {
                let dt = l - &arclen;
                st.x = &st.x + &(&dt * &st.dx);
                st.y = &st.y + &(&dt * &st.dy);
                arclen = l.clone();
                break TraceStatus::BudgetExhausted;
            }
            Budget::Length(l) if &(&next * &next) * &speed2 > l * l => break TraceStatus::BudgetExhausted,
            _ => {}
        }
        arclen = next;
        // Land exactly on the exit side.
        match exit {
            Side::R => {
                st.y = &st.y + &(&t * &st.dy);
                st.x = QuadRat::one();
            }
            Side::L => {
                st.y = &st.y + &(&t * &st.dy);
                st.x = QuadRat::zero();
            }
            Side::T => {
                st.x = &st.x + &(&t * &st.dx);
                st.y = QuadRat::one();
            }
            Side::B => {
                st.x = &st.x + &(&t * &st.dx);
                st.y = QuadRat::zero();
            }
        }
        let coord = if exit.is_vertical() { st.y.clone() } else { st.x.clone() };
        let from = st.face;
        let index = events.len();
        match s.glue(from, exit) {
            Some(to) => {
                st = cross(&st, exit, to);
                events.push(CrossingEvent { index, edge: (from, exit), coord, arclen: arclen.clone(), entered: to, reflected: false });
            }
            None if opts.reflect_walls => {
                if exit.is_vertical() {
                    st.dx = -&st.dx;
                } else {
                    st.dy = -&st.dy;
                }
                events.push(CrossingEvent {
                    index,
                    edge: (from, exit),
                    coord,
                    arclen: arclen.clone(),
                    entered: (from, exit),
                    reflected: true,
                });
            }
            None => {
                events.push(CrossingEvent {
                    index,
                    edge: (from, exit),
                    coord,
                    arclen: arclen.clone(),
                    entered: (from, exit),
                    reflected: true,
                });
                break TraceStatus::Wall(index);
            }
        }
        if periodic {
            match &first_state {
                None => first_state = Some(st.clone()),
                Some(f) if *f == st => break TraceStatus::Periodic(events.len() - 1),
                _ => {}
            }
        }
        if let Some(b) = opts.escape_bound {
            let f = st.face;
            if (f.x - origin.x).abs().max((f.y - origin.y).abs()).max((f.z - origin.z).abs()) > b {
                break TraceStatus::Escaped(b);
            }
        }
    };
    Ok(Trajectory { start, events, status, end: st, arclen })
}

/// Traces a geodesic from `p0`.
pub fn trace(s: &dyn Surface, p0: &PhasePoint, budget: &Budget, opts: &TraceOptions) -> Result<Trajectory> {
    p0.check()?;
    if p0.turn != 0 && s.is_translation() {
        return Err(Error::Precondition("quarter-turn headings only arise on rotation surfaces".into()));
    }
    let (dx, dy) = p0.direction();
    let st = FlowState { face: p0.face, x: p0.x.clone(), y: p0.y.clone(), dx, dy };
    trace_state(s, p0.clone(), st, budget, opts)
}

/// Billiard in a region: walls reflect specularly. The start must be in
/// the open face and the direction `(dx, dy)` nonzero.
pub fn trace_billiard(
    r: &dyn Surface,
    face: FaceId,
    x: QuadRat,
    y: QuadRat,
    dir: (QuadRat, QuadRat),
    budget: &Budget,
) -> Result<Trajectory> {
    let inside = |v: &QuadRat| v.signum() > 0 && v < &QuadRat::one();
    if !inside(&x) || !inside(&y) {
        return Err(Error::Precondition("billiard start must lie in the open face".into()));
    }
    let (dx, dy) = dir;
    if dx.is_zero() && dy.is_zero() {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    // A nominal phase point for the record; the state carries the real direction.
    let slope = if dx.is_zero() || dy.is_zero() { QuadRat::one() } else { (&dy / &dx).abs() };
    let start = PhasePoint { face, x: x.clone(), y: y.clone(), slope, sense: Sense::Forward, turn: 0 };
    let st = FlowState { face, x, y, dx, dy };
    let opts = TraceOptions { reflect_walls: true, ..TraceOptions::default() };
    trace_state(r, start, st, budget, &opts)
}

/// Flows a point by the vector `(vx, vy)` on a translation surface.
pub fn translate_point(s: &dyn Surface, face: FaceId, x: QuadRat, y: QuadRat, vx: QuadRat, vy: QuadRat) -> Result<(FaceId, QuadRat, QuadRat)> {
    let start = PhasePoint { face, x: x.clone(), y: y.clone(), slope: QuadRat::one(), sense: Sense::Forward, turn: 0 };
    let st = FlowState { face, x, y, dx: vx, dy: vy };
    let opts = TraceOptions { reflect_walls: false, detect_periodic: false, escape_bound: None };
    let t = trace_state(s, start, st, &Budget::Arclen(QuadRat::one()), &opts)?;
    match t.status {
        TraceStatus::BudgetExhausted => Ok((t.end.face, t.end.x, t.end.y)),
        TraceStatus::Singularity(_) => Err(Error::DegenerateSplit("translation passes through a vertex".into())),
        other => Err(Error::Unsupported(format!("translation stopped: {other:?}"))),
    }
}

/// A half-open face position is canonical when `x, y` lie in `[0, 1)`:
/// points on a right or top side are moved to the neighbor.
pub fn canonical_point(s: &dyn Surface, mut face: FaceId, mut x: QuadRat, mut y: QuadRat) -> Result<(FaceId, QuadRat, QuadRat)> {
    let wall = || Error::Unsupported("point on a wall".into());
    if x == QuadRat::one() {
        let (g, e) = s.glue(face, Side::R).ok_or_else(wall)?;
        if e != Side::L {
            return Err(Error::Unsupported("canonical points need translation gluings".into()));
        }
        face = g;
        x = QuadRat::zero();
    }
    if y == QuadRat::one() {
        let (g, e) = s.glue(face, Side::T).ok_or_else(wall)?;
        if e != Side::B {
            return Err(Error::Unsupported("canonical points need translation gluings".into()));
        }
        face = g;
        y = QuadRat::zero();
    }
    Ok((face, x, y))
}

/// The edge named by its left face (vertical edges) or lower face
/// (horizontal edges), when the other side is glued by translation.
pub fn canonical_edge(s: &dyn Surface, f: FaceId, side: Side) -> (FaceId, Side) {
    match side {
        Side::L | Side::B => match s.glue(f, side) {
            Some((g, e)) if e == side.opposite() => (g, e),
            _ => (f, side),
        },
        _ => (f, side),
    }
}

/// An open interval on a face side.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeInterval {
    pub edge: (FaceId, Side),
    pub lo: QuadRat,
    pub hi: QuadRat,
}

impl EdgeInterval {
    pub fn new(edge: (FaceId, Side), lo: QuadRat, hi: QuadRat) -> Result<EdgeInterval> {
        if lo.signum() < 0 || hi > QuadRat::one() || lo >= hi {
            return Err(Error::InvalidArgument(format!("need 0 <= lo < hi <= 1, got ({lo}, {hi})")));
        }
        Ok(EdgeInterval { edge, lo, hi })
    }

    pub fn length(&self) -> QuadRat {
        &self.hi - &self.lo
    }

    pub fn contains(&self, c: &QuadRat) -> bool {
        c > &self.lo && c < &self.hi
    }
}

/// Which family of edges the projection lands on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transversal {
    ToHorizontal,
    ToVertical,
}

/// Vertex met while projecting, as the face whose bottom-left corner it is.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexHit {
    pub corner_of: FaceId,
    pub singular: bool,
    /// Source coordinate whose image is the vertex.
    pub preimage: QuadRat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    pub pieces: Vec<EdgeInterval>,
    pub splits: Vec<VertexHit>,
}

impl Projection {
    pub fn total_length(&self) -> QuadRat {
        self.pieces.iter().fold(QuadRat::zero(), |a, p| a + p.length())
    }
}

/// Surface viewed through the reflection `(x, y) -> (y, x)`.
struct Transposed<'a>(&'a dyn Surface);

fn swap_side(s: Side) -> Side {
    match s {
        Side::R => Side::T,
        Side::T => Side::R,
        Side::L => Side::B,
        Side::B => Side::L,
    }
}

impl Surface for Transposed<'_> {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        self.0.glue(f, swap_side(s)).map(|(g, e)| (g, swap_side(e)))
    }
    fn contains(&self, f: FaceId) -> bool {
        self.0.contains(f)
    }
    fn origin(&self) -> FaceId {
        self.0.origin()
    }
    fn name(&self) -> String {
        self.0.name()
    }
}

/// Surface viewed through the half turn `(x, y) -> (1 - x, 1 - y)`.
struct HalfTurn<'a>(&'a dyn Surface);

impl Surface for HalfTurn<'_> {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        self.0.glue(f, s.opposite()).map(|(g, e)| (g, e.opposite()))
    }
    fn contains(&self, f: FaceId) -> bool {
        self.0.contains(f)
    }
    fn origin(&self) -> FaceId {
        self.0.origin()
    }
    fn name(&self) -> String {
        self.0.name()
    }
}

fn vertex_is_singular(s: &dyn Surface, corner_of: FaceId) -> bool {
    !matches!(cone_angle_bl(s, corner_of, 64), Ok(1))
}

/// Forward projection of a vertical-edge interval onto horizontal edges
/// along slope `1/alpha`, in the frame of `s`.
fn project_forward_h(s: &dyn Surface, lo: QuadRat, hi: QuadRat, face: FaceId, alpha: &QuadRat, real: &dyn Fn(FaceId) -> bool) -> Result<Projection> {
    // Points (0, y), y in (lo, hi), of `face`, moving with direction (alpha, 1).
    let inv = alpha.recip()?;
    let mut out = Projection { pieces: Vec::new(), splits: Vec::new() };
    // Work list of (face, lo, hi, offset) where offset maps back to source y.
    let mut work = vec![(face, lo, hi, QuadRat::zero())];
    let mut guard = 0usize;
    while let Some((h, lo, hi, off)) = work.pop() {
        guard += 1;
        if guard > 1 << 16 {
            return Err(Error::Unreachable("projection did not terminate".into()));
        }
        // Points above y* reach the top of h inside it; those below exit right.
        let ystar = QuadRat::one() - &inv;
        let top_lo = if ystar > lo { ystar.clone() } else { lo.clone() };
        if top_lo < hi {
            let a = (QuadRat::one() - &hi) * alpha;
            let b = (QuadRat::one() - &top_lo) * alpha;
            out.pieces.push(EdgeInterval { edge: (h, Side::T), lo: a, hi: b });
        }
        if ystar > lo && ystar < hi {
            let corner = s.glue(h, Side::T).and_then(|(t, _)| s.glue(t, Side::R)).map(|(g, _)| g);
            let corner = corner.ok_or_else(|| Error::Unsupported("projection meets a wall".into()))?;
            out.splits.push(VertexHit { corner_of: corner, singular: real(corner), preimage: &ystar - &off });
        } else if ystar == lo || ystar == hi {
            let corner = s.glue(h, Side::T).and_then(|(t, _)| s.glue(t, Side::R)).map(|(g, _)| g);
            if corner.map(real).unwrap_or(true) {
                return Err(Error::DegenerateSplit(format!("interval endpoint {} maps to a vertex", &ystar - &off)));
            }
        }
        if ystar > lo {
            let up = if ystar < hi { ystar.clone() } else { hi.clone() };
            let (g, e) = s.glue(h, Side::R).ok_or_else(|| Error::Unsupported("projection meets a wall".into()))?;
            if e != Side::L {
                return Err(Error::Unsupported("projection needs translation gluings".into()));
            }
            work.push((g, &lo + &inv, &up + &inv, &off + &inv));
        }
    }
    Ok(out)
}

/// Projects an open edge interval along the flow of the magnifying slope
/// `alpha > 1` onto the next edges of the other family.
///
/// `ToHorizontal`: `i` is on a vertical edge, the flow has slope `1/alpha`
/// and the image lies on the horizontal edges above (forward) or below
/// (backward). `ToVertical` swaps the axes: `i` is on a horizontal edge and
/// the flow has slope `alpha`. The total image length is
/// `alpha * length(i)`; each vertex met splits the image.
pub fn project_interval(s: &dyn Surface, i: &EdgeInterval, alpha: &QuadRat, sense: Sense, transversal: Transversal) -> Result<Projection> {
    if !s.is_translation() {
        return Err(Error::Precondition("projection needs a translation surface".into()));
    }
    if alpha <= &QuadRat::one() {
        return Err(Error::InvalidArgument("the magnifying slope must exceed 1".into()));
    }
    let (f, side) = i.edge;
    let want_vertical = transversal == Transversal::ToHorizontal;
    if side.is_vertical() != want_vertical {
        return Err(Error::Precondition("interval lies on the wrong edge family".into()));
    }
    let real = |c: FaceId| vertex_is_singular(s, c);
    // Reduce to the forward, to-horizontal case on a transformed view.
    let t = Transposed(s);
    let view_t: &dyn Surface = if want_vertical { s } else { &t };
    let side_t = if want_vertical { side } else { swap_side(side) };
    let ht = HalfTurn(view_t);
    let (view, side_v, lo, hi): (&dyn Surface, Side, QuadRat, QuadRat) = match sense {
        Sense::Forward => (view_t, side_t, i.lo.clone(), i.hi.clone()),
        Sense::Backward => (&ht, side_t.opposite(), QuadRat::one() - &i.hi, QuadRat::one() - &i.lo),
    };
    // Entry face: the face to the right of the edge in this view.
    let face = match side_v {
        Side::L => f,
        Side::R => {
            let (g, e) = view.glue(f, Side::R).ok_or_else(|| Error::Unsupported("interval on a wall".into()))?;
            if e != Side::L {
                return Err(Error::Unsupported("projection needs translation gluings".into()));
            }
            g
        }
        _ => unreachable!(),
    };
    // Vertex singularity is intrinsic; the views only relabel corners, so
    // test through the original surface at the same point.
    let corner_real = |c: FaceId| -> bool {
        match (want_vertical, sense) {
            (true, Sense::Forward) => real(c),
            _ => vertex_singular_any(s, c),
        }
    };
    let mut p = project_forward_h(view, lo, hi, face, alpha, &corner_real)?;
    // Map pieces back to the original frame.
    for piece in &mut p.pieces {
        let (h, sd) = piece.edge;
        let (sd, lo, hi) = match sense {
            Sense::Forward => (sd, piece.lo.clone(), piece.hi.clone()),
            Sense::Backward => (sd.opposite(), QuadRat::one() - &piece.hi, QuadRat::one() - &piece.lo),
        };
        let sd = if want_vertical { sd } else { swap_side(sd) };
        let edge = canonical_edge(s, h, sd);
        *piece = EdgeInterval { edge, lo, hi };
    }
    for hit in &mut p.splits {
        hit.preimage = match sense {
            Sense::Forward => hit.preimage.clone(),
            Sense::Backward => QuadRat::one() - &hit.preimage,
        };
    }
    p.pieces.sort_by(|a, b| (a.edge, &a.lo).cmp(&(b.edge, &b.lo)));
    Ok(p)
}

/// Whether any corner of face `c` is a cone point. Used for vertices named
/// through a transformed view, where the corner label is not the bottom-left.
fn vertex_singular_any(s: &dyn Surface, c: FaceId) -> bool {
    // The four corners of c, each as a bottom-left corner of some face.
    let r = s.glue(c, Side::R).map(|(g, _)| g);
    let t = s.glue(c, Side::T).map(|(g, _)| g);
    let tr = t.and_then(|t| s.glue(t, Side::R)).map(|(g, _)| g);
    [Some(c), r, t, tr].into_iter().flatten().any(|f| vertex_is_singular(s, f))
}

/// Exact value `(a + b sqrt(d)) / c` with machine integers, `c > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntForm {
    pub a: i128,
    pub b: i128,
    pub c: i128,
    pub d: i128,
}

/// Sign of `u + v sqrt(d)`.
pub fn sign_surd(u: i128, v: i128, d: i128) -> i32 {
    let su = u.signum() as i32;
    let sv = v.signum() as i32;
    if sv == 0 || d == 0 {
        return su;
    }
    if su == 0 || su == sv {
        return sv;
    }
    match (u.checked_mul(u), v.checked_mul(v).and_then(|w| w.checked_mul(d))) {
        (Some(uu), Some(vv)) => match uu.cmp(&vv) {
            std::cmp::Ordering::Greater => su,
            std::cmp::Ordering::Less => sv,
            std::cmp::Ordering::Equal => 0,
        },
        _ => {
            let (u, v) = (BigInt::from(u), BigInt::from(v));
            let uu = &u * &u;
            let vv = &v * &v * BigInt::from(d);
            match uu.cmp(&vv) {
                std::cmp::Ordering::Greater => su,
                std::cmp::Ordering::Less => sv,
                std::cmp::Ordering::Equal => 0,
            }
        }
    }
}

impl IntForm {
    pub fn from_quad(x: &QuadRat) -> Result<IntForm> {
        let (a, b, c) = x.integer_form();
        let cv = |v: &BigInt| v.to_i128().filter(|w| w.abs() < 1 << 40).ok_or(Error::Overflow);
        Ok(IntForm { a: cv(&a)?, b: cv(&b)?, c: cv(&c)?, d: x.d() as i128 })
    }

    pub fn to_quad(&self) -> QuadRat {
        let r = |n: i128| num_rational::BigRational::new(BigInt::from(n), BigInt::from(self.c));
        QuadRat::new(r(self.a), r(self.b), self.d as u64)
    }

    pub fn recip(&self) -> Result<IntForm> {
        // c / (a + b sqrt d) = c (a - b sqrt d) / (a^2 - b^2 d)
        let norm = self.a * self.a - self.b * self.b * self.d;
        if norm == 0 {
            return Err(Error::DivisionByZero);
        }
        let (mut a, mut b, mut c) = (self.c * self.a, -self.c * self.b, norm);
        if c < 0 {
            a = -a;
            b = -b;
            c = -c;
        }
        let g = gcd3(a, b, c);
        Ok(IntForm { a: a / g, b: b / g, c: c / g, d: self.d })
    }

    /// Sign of `k x - n`.
    pub fn sign_lin(&self, k: i64, n: i64) -> i32 {
        let k = k as i128;
        let n = n as i128;
        sign_surd(k * self.a - n * self.c, k * self.b, self.d)
    }

    /// `floor(k x)`.
    pub fn floor_mul(&self, k: i64) -> i64 {
        let est = (k as f64) * self.to_f64();
        let mut n = est.floor() as i64;
        while self.sign_lin(k, n) < 0 {
            n -= 1;
        }
        while self.sign_lin(k, n + 1) >= 0 {
            n += 1;
        }
        n
    }

    pub fn to_f64(&self) -> f64 {
        (self.a as f64 + self.b as f64 * (self.d as f64).sqrt()) / self.c as f64
    }

    /// Compares `k1 x - n1` with `k2 x - n2`.
    pub fn cmp_lin(&self, (k1, n1): (i64, i64), (k2, n2): (i64, i64)) -> std::cmp::Ordering {
        self.sign_lin(k1 - k2, n1 - n2).cmp(&0)
    }

    /// Whether `k x - n < 1/m` (for `m > 0`).
    pub fn lin_below_inv(&self, k: i64, n: i64, m: i64) -> bool {
        // m (k x - n) - 1 < 0  <=>  m k a - (m n c + c) + m k b sqrt d < 0
        let (k, n, m) = (k as i128, n as i128, m as i128);
        sign_surd(m * k * self.a - (m * n + 1) * self.c, m * k * self.b, self.d) < 0
    }
}

fn gcd3(a: i128, b: i128, c: i128) -> i128 {
    fn g(mut a: i128, mut b: i128) -> i128 {
        a = a.abs();
        b = b.abs();
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    }
    g(g(a, b), c).max(1)
}

/// A crossing produced by [`CornerLine`]. The local coordinate is
/// `k theta - n`, where `theta` is the slope for vertical crossings and its
/// inverse for horizontal ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LineEvent {
    pub vertical: bool,
    /// Face left at the crossing.
    pub from: FaceId,
    /// Index of the crossed grid line (`x = k` or `y = k` in the unfolding).
    pub k: i64,
    pub n: i64,
}

/// Fast exact tracer for a forward geodesic of slope `s > 0` from the
/// bottom-left corner of a face of a translation surface. All decisions use
/// integer arithmetic on the coefficients of `s = (a + b sqrt d)/c`.
pub struct CornerLine<'a> {
    surface: &'a dyn Surface,
    pub slope: IntForm,
    pub inv: IntForm,
    face: FaceId,
    kv: i64,
    kh: i64,
    done: bool,
    /// Set when the line reached a vertex.
    pub singular: bool,
}

impl<'a> CornerLine<'a> {
    pub fn new(surface: &'a dyn Surface, face: FaceId, slope: &QuadRat) -> Result<CornerLine<'a>> {
        if slope.signum() <= 0 {
            return Err(Error::InvalidArgument("slope must be positive".into()));
        }
        if !surface.is_translation() {
            return Err(Error::Precondition("the fast tracer needs a translation surface".into()));
        }
        if !surface.contains(face) {
            return Err(Error::UnknownFace(face.to_string()));
        }
        let s = IntForm::from_quad(slope)?;
        let inv = s.recip()?;
        Ok(CornerLine { surface, slope: s, inv, face, kv: 1, kh: 1, done: false, singular: false })
    }

    /// Horizontal advance (unfolded `x`) of an event.
    pub fn advance_f64(&self, e: &LineEvent) -> f64 {
        if e.vertical {
            e.k as f64
        } else {
            e.k as f64 * self.inv.to_f64()
        }
    }

    /// Exact horizontal advance of an event.
    pub fn advance(&self, e: &LineEvent) -> QuadRat {
        if e.vertical {
            QuadRat::int(e.k)
        } else {
            self.inv.to_quad().mul_int(e.k)
        }
    }

    /// Local coordinate of an event as an exact number.
    pub fn coord(&self, e: &LineEvent) -> QuadRat {
        let th = if e.vertical { self.slope } else { self.inv };
        th.to_quad().mul_int(e.k).add_int(-e.n)
    }

    pub fn face(&self) -> FaceId {
        self.face
    }
}

impl Iterator for CornerLine<'_> {
    type Item = Result<LineEvent>;

    fn next(&mut self) -> Option<Result<LineEvent>> {
        if self.done {
            return None;
        }
        // Vertical line x = kv is reached at height kv s; compare with kh.
        let sign = self.slope.sign_lin(self.kv, self.kh);
        if sign == 0 {
            self.done = true;
            self.singular = true;
            return None;
        }
        let from = self.face;
        let ev = if sign < 0 {
            let k = self.kv;
            self.kv += 1;
            let n = self.slope.floor_mul(k);
            match self.surface.glue(from, Side::R) {
                Some((g, Side::L)) => self.face = g,
                _ => {
                    self.done = true;
                    return Some(Err(Error::Unsupported(format!("no translation gluing right of {from}"))));
                }
            }
            LineEvent { vertical: true, from, k, n }
        } else {
            let k = self.kh;
            self.kh += 1;
            let n = self.inv.floor_mul(k);
            match self.surface.glue(from, Side::T) {
                Some((g, Side::B)) => self.face = g,
                _ => {
                    self.done = true;
                    return Some(Err(Error::Unsupported(format!("no translation gluing above {from}"))));
                }
            }
            LineEvent { vertical: false, from, k, n }
        };
        if self.kv > i64::MAX / 4 || self.kh > i64::MAX / 4 {
            self.done = true;
        }
        Some(Ok(ev))
    }
}

/// Points of one edge as `(k, n)` pairs over a common `theta`.
#[derive(Clone, Debug, Default)]
pub struct EdgePoints {
    pub points: Vec<(i64, i64)>,
}

/// Largest gap between consecutive points of one edge (ends included), as
/// `(k, n)` with value `k theta - n`, or `None` for a point-free edge (gap 1).
pub fn max_gap_lin(theta: &IntForm, pts: &mut [(i64, i64)]) -> Option<(i64, i64)> {
    if pts.is_empty() {
        return None;
    }
    pts.sort_by(|a, b| theta.cmp_lin(*a, *b));
    // Gap values as linear forms: first point - 0, differences, 1 - last.
    let mut best = pts[0];
    for w in pts.windows(2) {
        let g = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        if theta.cmp_lin(g, best) == std::cmp::Ordering::Greater {
            best = g;
        }
    }
    let last = pts[pts.len() - 1];
    let tail = (-last.0, -last.1 - 1);
    if theta.cmp_lin(tail, best) == std::cmp::Ordering::Greater {
        best = tail;
    }
    Some(best)
}

/// Collects [`CornerLine`] events per canonical edge.
pub fn group_line_events(s: &dyn Surface, events: &[LineEvent]) -> (BTreeMap<FaceId, EdgePoints>, BTreeMap<FaceId, EdgePoints>) {
    let mut vert: BTreeMap<FaceId, EdgePoints> = BTreeMap::new();
    let mut horiz: BTreeMap<FaceId, EdgePoints> = BTreeMap::new();
    for e in events {
        let map = if e.vertical { &mut vert } else { &mut horiz };
        map.entry(e.from).or_default().points.push((e.k, e.n));
    }
    let _ = s;
    (vert, horiz)
}

/// Convenience: the `n`-th vertical crossing coordinate of a torus line.
pub fn torus_crossing(alpha: &QuadRat, k: i64) -> QuadRat {
    alpha.mul_int(k).fract()
}

/// Whether a rational value has a small denominator; used to pick sample
/// points off the separatrices.
pub fn is_small_rational(x: &QuadRat, bound: u64) -> bool {
    x.as_rational().map(|r| r.denom().abs() <= BigInt::from(bound)).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{four_copy, l_surface, snake_region, torus};
    use std::sync::Arc;

    fn q(s: &str) -> QuadRat {
        s.parse().unwrap()
    }

    #[test]
    fn l_surface_first_crossing() {
        let l = l_surface();
        let slope = q("sqrt(2) - 1");
        let p = PhasePoint::corner(FaceId::new(0, 0), slope.clone()).unwrap();
        let t = trace(&l, &p, &Budget::Crossings(1), &TraceOptions::default()).unwrap();
        let e = &t.events[0];
        assert_eq!(e.edge, (FaceId::new(0, 0), Side::R));
        assert_eq!(e.coord, slope);
        assert_eq!(l.label(e.edge.0, e.edge.1).as_deref(), Some("v3"));
    }

    #[test]
    fn torus_crossings_are_fractional_parts() {
        let t1 = torus(1, 1);
        let alpha = q("1 + sqrt(2)");
        let p = PhasePoint::corner(FaceId::new(0, 0), alpha.clone()).unwrap();
        let t = trace(&t1, &p, &Budget::Crossings(40), &TraceOptions::default()).unwrap();
        let verts: Vec<QuadRat> = t.vertical_crossings().map(|e| e.coord.clone()).collect();
        for (k, c) in verts.iter().enumerate() {
            assert_eq!(*c, torus_crossing(&alpha, k as i64 + 1));
        }
    }

    #[test]
    fn slope_one_hits_corner() {
        let t1 = torus(1, 1);
        let p = PhasePoint::corner(FaceId::new(0, 0), QuadRat::one()).unwrap();
        let t = trace(&t1, &p, &Budget::Crossings(5), &TraceOptions::default()).unwrap();
        assert_eq!(t.status, TraceStatus::Singularity(0));
        assert!(t.events.is_empty());
    }

    #[test]
    fn rational_slope_is_periodic() {
        let t1 = torus(2, 1);
        let p = PhasePoint::new(FaceId::new(0, 0), QuadRat::frac(1, 3), QuadRat::zero(), QuadRat::frac(1, 2), Sense::Forward).unwrap();
        let t = trace(&t1, &p, &Budget::Crossings(100), &TraceOptions::default()).unwrap();
        assert!(matches!(t.status, TraceStatus::Periodic(_)));
    }

    #[test]
    fn arclen_budget_and_reversal() {
        let l = l_surface();
        let p = PhasePoint::new(FaceId::new(0, 0), q("1/3"), q("1/5"), q("1 + sqrt(2)"), Sense::Forward).unwrap();
        let t = trace(&l, &p, &Budget::Arclen(q("7/2")), &TraceOptions::default()).unwrap();
        assert_eq!(t.arclen, q("7/2"));
        // Flow back from the end for the same time.
        let back = FlowState { dx: -&t.end.dx, dy: -&t.end.dy, ..t.end.clone() };
        let r = trace_state(&l, p.reversed(), back, &Budget::Arclen(q("7/2")), &TraceOptions::default()).unwrap();
        assert_eq!((r.end.face, r.end.x.clone(), r.end.y.clone()), (p.face, p.x.clone(), p.y.clone()));
        assert_eq!(r.events.len(), t.events.len());
    }

    #[test]
    fn billiard_matches_unfolding() {
        let r = snake_region();
        let fc = four_copy(Arc::new(snake_region()));
        let (x, y) = (q("1/3"), q("2/7"));
        let dir = (q("1"), q("sqrt(3)"));
        let b = trace_billiard(&r, FaceId::new(0, 0), x.clone(), y.clone(), dir.clone(), &Budget::Crossings(60)).unwrap();
        let p = PhasePoint::new(fc.lift(FaceId::new(0, 0), 0), x, y, q("sqrt(3)"), Sense::Forward).unwrap();
        let t = trace(&fc, &p, &Budget::Crossings(60), &TraceOptions::default()).unwrap();
        assert_eq!(b.events.len(), t.events.len());
        for (e, f) in b.events.iter().zip(&t.events) {
            let (g, c) = fc.fold(f.edge.0);
            let (_, cx, cy) = fc.fold_point(f.edge.0, f.coord.clone(), f.coord.clone(), QuadRat::one());
            let side = f.edge.1;
            let flip = if side.is_vertical() { c & 1 != 0 } else { c & 2 != 0 };
            let side = if flip { side.opposite() } else { side };
            let coord = if side.is_vertical() { cy } else { cx };
            assert_eq!((e.edge.0, e.edge.1, &e.coord), (g, side, &coord));
        }
    }

    #[test]
    fn projection_magnifies() {
        let l = l_surface();
        let alpha = q("1 + sqrt(2)");
        let i = EdgeInterval::new((FaceId::new(0, 0), Side::L), q("1/10"), q("2/10")).unwrap();
        let p = project_interval(&l, &i, &alpha, Sense::Forward, Transversal::ToHorizontal).unwrap();
        assert_eq!(p.total_length(), i.length() * &alpha);
        // An interval straddling the split point breaks in two.
        let ystar = QuadRat::one() - alpha.recip().unwrap();
        let j = EdgeInterval::new((FaceId::new(0, 0), Side::L), &ystar - q("1/100"), &ystar + q("1/100")).unwrap();
        let p = project_interval(&l, &j, &alpha, Sense::Forward, Transversal::ToHorizontal).unwrap();
        assert_eq!(p.pieces.len(), 2);
        assert_eq!(p.splits.len(), 1);
        assert_eq!(p.total_length(), j.length() * &alpha);
        let k = EdgeInterval::new((FaceId::new(0, 0), Side::L), ystar.clone(), q("9/10")).unwrap();
        assert!(matches!(project_interval(&l, &k, &alpha, Sense::Forward, Transversal::ToHorizontal), Err(Error::DegenerateSplit(_))));
        assert!(project_interval(&l, &i, &QuadRat::zero(), Sense::Forward, Transversal::ToHorizontal).is_err());
    }

    #[test]
    fn corner_line_matches_exact_tracer() {
        let l = l_surface();
        let alpha = q("1 + sqrt(2)");
        let p = PhasePoint::corner(FaceId::new(0, 0), alpha.clone()).unwrap();
        let t = trace(&l, &p, &Budget::Crossings(300), &TraceOptions::default()).unwrap();
        let fast = CornerLine::new(&l, FaceId::new(0, 0), &alpha).unwrap();
        let evs: Vec<LineEvent> = {
            let line = CornerLine::new(&l, FaceId::new(0, 0), &alpha).unwrap();
            line.take(300).collect::<Result<Vec<_>>>().unwrap()
        };
        for (e, f) in t.events.iter().zip(&evs) {
            assert_eq!(e.edge.0, f.from);
            assert_eq!(e.edge.1.is_vertical(), f.vertical);
            assert_eq!(e.coord, fast.coord(f));
            assert_eq!(e.arclen, fast.advance(f));
        }
    }
}
