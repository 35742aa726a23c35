//! Rational-direction cylinders, k-tower exits, L-strip street analysis and
//! the rhombus-maze re-coordinatization.
//!
//! A direction `(q, p)` with slope `p/q > 0` cuts every bottom edge into `p`
//! atoms of width `1/p`. Flowing up one row maps atoms to atoms, so atom
//! orbits are exact and need no arithmetic beyond integer division. Two
//! neighboring atom orbits lie in the same cylinder unless the orbit of
//! their shared boundary point passes through a cone point. Negative slopes
//! use the same machinery on a vertically mirrored view.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::flow::{canonical_point, trace_billiard, translate_point, Budget, EdgeInterval};
use crate::generators::{l_strip, LStripSpec, MazeProfile};
use crate::surface::{four_copy, is_singular_bl, region, street_of, validate, FaceId, Side, StreetDir, Surface, SurfaceRef};
use crate::{Error, QuadRat, Result};

/// A rational direction `(q, p)`: `q >= 0`, `p != 0`, coprime. Slope `p/q`,
/// vertical when `q = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction {
    pub p: i64,
    pub q: i64,
}

impl Direction {
    pub fn new(p: i64, q: i64) -> Result<Direction> {
        if p == 0 {
            return Err(Error::InvalidArgument("horizontal cylinders are the streets".into()));
        }
        let (p, q) = if q < 0 { (-p, -q) } else { (p, q) };
        let g = p.gcd(&q);
        Ok(Direction { p: p / g, q: q / g })
    }

    pub fn vertical() -> Direction {
        Direction { p: 1, q: 0 }
    }

    /// Integer slope `m`.
    pub fn slope_int(m: i64) -> Result<Direction> {
        Direction::new(m, 1)
    }

    pub fn from_slope(s: &QuadRat) -> Result<Direction> {
        let r = s.as_rational().ok_or_else(|| Error::InvalidArgument(format!("slope {s} is not rational")))?;
        let p = r.numer().to_i64().ok_or(Error::Overflow)?;
        let q = r.denom().to_i64().ok_or(Error::Overflow)?;
        Direction::new(p, q)
    }

    pub fn slope(&self) -> Option<QuadRat> {
        (self.q != 0).then(|| QuadRat::frac(self.p, self.q))
    }

    /// Length of the vector `(q, p)`.
    pub fn speed(&self) -> QuadRat {
        let n = self.p as i128 * self.p as i128 + self.q as i128 * self.q as i128;
        QuadRat::sqrt(u64::try_from(n).expect("direction too large"))
    }

    fn atoms_per_edge(&self) -> i64 {
        self.p.abs()
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.q == 1 {
            write!(f, "{}", self.p)
        } else if self.q == 0 {
            write!(f, "inf")
        } else {
            write!(f, "{}/{}", self.p, self.q)
        }
    }
}

/// The surface mirrored in the horizontal axis: top and bottom swap.
struct VFlip<'a>(&'a dyn Surface);

fn vflip(s: Side) -> Side {
    match s {
        Side::T => Side::B,
        Side::B => Side::T,
        other => other,
    }
}

impl Surface for VFlip<'_> {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        self.0.glue(f, vflip(s)).map(|(g, t)| (g, vflip(t)))
    }

    fn contains(&self, f: FaceId) -> bool {
        self.0.contains(f)
    }

    fn faces(&self) -> Option<Vec<FaceId>> {
        self.0.faces()
    }

    fn origin(&self) -> FaceId {
        self.0.origin()
    }

    fn is_translation(&self) -> bool {
        self.0.is_translation()
    }

    fn name(&self) -> String {
        format!("vflip({})", self.0.name())
    }
}

/// Interval `[index/p, (index+1)/p]` on the bottom edge of `face`, or on the
/// top edge for negative slopes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub face: FaceId,
    pub index: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CylinderStatus {
    Closed,
    /// An orbit ran past this many steps, or the band past this many atoms.
    Escaped(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cylinder {
    pub direction: Direction,
    /// The closed atom orbit through the cylinder's smallest atom; for an
    /// escaped band, the explored part of the orbit.
    pub core: Vec<Atom>,
    /// Atom orbits side by side in the band.
    pub orbits: usize,
    pub atoms: usize,
    /// Rows crossed by one trip around.
    pub steps: usize,
    pub circumference: Option<QuadRat>,
    pub width: Option<QuadRat>,
    pub area: QuadRat,
    /// Rhombi along one row of the slope-`m` rhombus tiling (integer slopes).
    pub rhombi: Option<u64>,
    pub status: CylinderStatus,
}

impl Cylinder {
    pub fn is_closed(&self) -> bool {
        self.status == CylinderStatus::Closed
    }

    /// The core orbit as intervals on horizontal edges.
    pub fn core_intervals(&self) -> Vec<EdgeInterval> {
        let p = self.direction.atoms_per_edge();
        let side = if self.direction.p > 0 { Side::B } else { Side::T };
        self.core
            .iter()
            .map(|a| {
                let lo = QuadRat::frac(a.index as i64, p);
                let hi = QuadRat::frac(a.index as i64 + 1, p);
                EdgeInterval::new((a.face, side), lo, hi).expect("atoms are nonempty")
            })
            .collect()
    }
}

/// Where the decomposition starts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Seed {
    /// Every face of a finite surface.
    All,
    Faces(Vec<FaceId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub max_steps: usize,
    pub max_atoms: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { max_steps: 1 << 16, max_atoms: 1 << 20 }
    }
}

struct Orbit {
    atoms: Vec<Atom>,
    closed: bool,
    left_singular: bool,
}

struct Decomposer<'a> {
    view: &'a dyn Surface,
    dir: Direction,
    opts: DecomposeOptions,
    orbit_of: HashMap<Atom, usize>,
    orbits: Vec<Orbit>,
}

impl<'a> Decomposer<'a> {
    fn go(&self, f: FaceId, side: Side) -> Result<FaceId> {
        match self.view.glue(f, side) {
            Some((g, t)) if t == side.opposite() => Ok(g),
            Some(_) => Err(Error::Unsupported("cylinders need a translation surface".into())),
            None => Err(Error::Precondition(format!("wall at {f}/{}: unfold the region with four_copy", side.letter()))),
        }
    }

    fn step(&self, a: Atom) -> Result<Atom> {
        let p = self.dir.atoms_per_edge();
        let k = a.index as i64 + self.dir.q;
        let mut f = a.face;
        for _ in 0..k / p {
            f = self.go(f, Side::R)?;
        }
        Ok(Atom { face: self.go(f, Side::T)?, index: (k % p) as u32 })
    }

    fn left_atom(&self, a: Atom) -> Result<Atom> {
        if a.index > 0 {
            Ok(Atom { index: a.index - 1, ..a })
        } else {
            Ok(Atom { face: self.go(a.face, Side::L)?, index: (self.dir.atoms_per_edge() - 1) as u32 })
        }
    }

    fn right_atom(&self, a: Atom) -> Result<Atom> {
        if (a.index as i64) + 1 < self.dir.atoms_per_edge() {
            Ok(Atom { index: a.index + 1, ..a })
        } else {
            Ok(Atom { face: self.go(a.face, Side::R)?, index: 0 })
        }
    }

    fn orbit(&mut self, a: Atom) -> Result<usize> {
        if let Some(&id) = self.orbit_of.get(&a) {
            return Ok(id);
        }
        let id = self.orbits.len();
        let mut atoms = vec![a];
        let mut closed = false;
        let mut cur = a;
        while atoms.len() <= self.opts.max_steps {
            cur = self.step(cur)?;
            if cur == a {
                closed = true;
                break;
            }
            if self.orbit_of.contains_key(&cur) {
                // Merged into an orbit already known to be open.
                break;
            }
            atoms.push(cur);
        }
        let left_singular = atoms.iter().any(|t| t.index == 0 && is_singular_bl(self.view, t.face));
        for &t in &atoms {
            self.orbit_of.insert(t, id);
        }
        self.orbits.push(Orbit { atoms, closed, left_singular });
        Ok(id)
    }

    /// Orbits sharing a nonsingular boundary line with `id`.
    fn neighbours(&mut self, id: usize) -> Result<Vec<usize>> {
        if !self.orbits[id].closed {
            return Ok(Vec::new());
        }
        let first = self.orbits[id].atoms[0];
        let mut out = Vec::new();
        if !self.orbits[id].left_singular {
            let l = self.left_atom(first)?;
            out.push(self.orbit(l)?);
        }
        let r = self.right_atom(first)?;
        let rid = self.orbit(r)?;
        if self.orbits[rid].closed && !self.orbits[rid].left_singular {
            out.push(rid);
        }
        Ok(out)
    }

    fn cylinder(&mut self, start: usize, done: &mut HashSet<usize>) -> Result<Cylinder> {
        let mut band = vec![start];
        let mut queue = VecDeque::from([start]);
        done.insert(start);
        let mut atoms = self.orbits[start].atoms.len();
        let mut overflow = false;
        while let Some(id) = queue.pop_front() {
            for n in self.neighbours(id)? {
                if done.insert(n) {
                    atoms += self.orbits[n].atoms.len();
                    band.push(n);
                    queue.push_back(n);
                }
            }
            if atoms > self.opts.max_atoms {
                overflow = true;
                break;
            }
        }
        let closed = !overflow && band.iter().all(|&id| self.orbits[id].closed);
        let core_id = *band.iter().min_by_key(|&&id| self.orbits[id].atoms.iter().min().copied()).expect("nonempty band");
        let mut core = self.orbits[core_id].atoms.clone();
        if self.orbits[core_id].closed {
            // Rotate so the orbit starts at its smallest atom.
            let k = core.iter().enumerate().min_by_key(|(_, a)| **a).map(|(k, _)| k).unwrap_or(0);
            core.rotate_left(k);
        }
        let steps = core.len();
        if closed && band.iter().any(|&id| self.orbits[id].atoms.len() != steps) {
            return Err(Error::Precondition("orbits of one cylinder have different periods".into()));
        }
        let p = self.dir.atoms_per_edge();
        let area = QuadRat::frac(atoms as i64, p);
        let (circumference, width) = if closed {
            let c = &(&QuadRat::int(steps as i64) * &self.dir.speed()) / &QuadRat::int(p);
            let w = &area / &c;
            (Some(c), Some(w))
        } else {
            (None, None)
        };
        let status = if closed {
            CylinderStatus::Closed
        } else if overflow {
            CylinderStatus::Escaped(self.opts.max_atoms)
        } else {
            CylinderStatus::Escaped(self.opts.max_steps)
        };
        let rhombi = (closed && self.dir.q == 1).then_some(2 * steps as u64);
        Ok(Cylinder { direction: self.dir, core, orbits: band.len(), atoms, steps, circumference, width, area, rhombi, status })
    }
}

/// Cylinders of direction `dir` met by the seed faces, in order of their
/// smallest atom.
///
/// Exact on finite and lazy translation surfaces; regions must be unfolded
/// with [`four_copy`] first. On lazy surfaces an orbit that does not close
/// within `max_steps` rows is reported as an escaped band.
pub fn cylinder_decompose(s: &dyn Surface, dir: Direction, seed: &Seed, opts: DecomposeOptions) -> Result<Vec<Cylinder>> {
    let flipped = VFlip(s);
    let view: &dyn Surface = if dir.p > 0 { s } else { &flipped };
    let faces = match seed {
        Seed::All => s.faces().ok_or_else(|| Error::Precondition("lazy surfaces need seed faces".into()))?,
        Seed::Faces(f) => f.clone(),
    };
    if faces.is_empty() {
        return Err(Error::InvalidArgument("empty seed".into()));
    }
    let mut d = Decomposer { view, dir, opts, orbit_of: HashMap::new(), orbits: Vec::new() };
    let mut done = HashSet::new();
    let mut out = Vec::new();
    for f in faces {
        if !s.contains(f) {
            return Err(Error::UnknownFace(f.to_string()));
        }
        for i in 0..dir.atoms_per_edge() {
            let id = d.orbit(Atom { face: f, index: i as u32 })?;
            if !done.contains(&id) {
                out.push(d.cylinder(id, &mut done)?);
            }
        }
    }
    out.sort_by_key(|c| c.core.iter().min().copied());
    Ok(out)
}

/// The rhombus tiling of a translation surface cut by the lines of slopes
/// `m` and `-m` through the vertices, as a square-tiled surface.
///
/// Each face holds `2m` rhombus centres `(j/2m, 1/2)` for even `j` and
/// `(j/2m, 0)` for odd `j`. The linear map taking `e1 = (1, m)/2m` to
/// `(1, 0)` and `e2 = (-1, m)/2m` to `(0, 1)` turns rhombi into unit
/// squares: right neighbors lie along slope `m`, top neighbors along `-m`.
#[derive(Clone)]
pub struct RhombusMaze {
    inner: SurfaceRef,
    m: i64,
}

impl RhombusMaze {
    pub fn new(inner: SurfaceRef, m: i64) -> Result<RhombusMaze> {
        if m < 1 {
            return Err(Error::InvalidArgument("rhombus maze needs m >= 1".into()));
        }
        if !inner.is_translation() {
            return Err(Error::Precondition("rhombus maze needs a translation surface".into()));
        }
        Ok(RhombusMaze { inner, m })
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn inner(&self) -> &SurfaceRef {
        &self.inner
    }

    fn per_face(&self) -> u64 {
        2 * self.m as u64
    }

    /// Rhombus `j` of an inner face.
    pub fn rhombus(&self, f: FaceId, j: u64) -> FaceId {
        let tag = f.tag.checked_mul(self.per_face()).expect("face tag too large for rhombus maze") + j;
        f.with_tag(tag)
    }

    /// Inner face and index `j` of a rhombus.
    pub fn split(&self, f: FaceId) -> (FaceId, u64) {
        (f.with_tag(f.tag / self.per_face()), f.tag % self.per_face())
    }

    /// Centre of a rhombus in inner coordinates.
    pub fn centre(&self, f: FaceId) -> (FaceId, QuadRat, QuadRat) {
        let (g, j) = self.split(f);
        let x = QuadRat::frac(j as i64, 2 * self.m);
        let y = if j % 2 == 0 { QuadRat::frac(1, 2) } else { QuadRat::zero() };
        (g, x, y)
    }

    /// The rhombus centred at a canonical inner point.
    pub fn at_centre(&self, g: FaceId, x: &QuadRat, y: &QuadRat) -> Result<FaceId> {
        let j = x * &QuadRat::int(2 * self.m);
        let odd = if y.is_zero() {
            true
        } else if *y == QuadRat::frac(1, 2) {
            false
        } else {
            return Err(Error::Precondition(format!("({x}, {y}) is not a rhombus centre")));
        };
        match j.as_rational().filter(|r| r.is_integer()).and_then(|r| r.to_integer().to_u64()) {
            Some(j) if (j % 2 == 1) == odd && j < self.per_face() => Ok(self.rhombus(g, j)),
            _ => Err(Error::Precondition(format!("({x}, {y}) is not a rhombus centre"))),
        }
    }

    fn neighbour(&self, f: FaceId, side: Side) -> Result<FaceId> {
        let (g, x, y) = self.centre(f);
        let two_m = QuadRat::int(2 * self.m);
        let half = QuadRat::frac(1, 2);
        let (vx, vy) = match side {
            Side::R => (&QuadRat::one() / &two_m, half),
            Side::L => (-&(&QuadRat::one() / &two_m), -&half),
            Side::T => (-&(&QuadRat::one() / &two_m), half),
            Side::B => (&QuadRat::one() / &two_m, -&half),
        };
        let (h, x, y) = translate_point(self.inner.as_ref(), g, x, y, vx, vy)?;
        let (h, x, y) = canonical_point(self.inner.as_ref(), h, x, y)?;
        self.at_centre(h, &x, &y)
    }
}

impl Surface for RhombusMaze {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        if !self.contains(f) {
            return None;
        }
        self.neighbour(f, s).ok().map(|g| (g, s.opposite()))
    }

    fn contains(&self, f: FaceId) -> bool {
        self.inner.contains(self.split(f).0)
    }

    fn faces(&self) -> Option<Vec<FaceId>> {
        let inner = self.inner.faces()?;
        let mut out: Vec<FaceId> = inner.iter().flat_map(|&f| (0..self.per_face()).map(move |j| (f, j))).map(|(f, j)| self.rhombus(f, j)).collect();
        out.sort();
        Some(out)
    }

    fn origin(&self) -> FaceId {
        self.rhombus(self.inner.origin(), 1)
    }

    fn profile(&self) -> MazeProfile {
        MazeProfile::default()
    }

    fn name(&self) -> String {
        format!("rhombus{}({})", self.m, self.inner.name())
    }
}

/// The `(k, l)` subdivision. Only the diagonal case `(1, 1)` is built: it
/// is the `m = 1` rhombus maze, with twice the faces.
pub fn subdivide(s: SurfaceRef, k: i64, l: i64) -> Result<RhombusMaze> {
    if k < 1 || l < 1 || k.gcd(&l) != 1 {
        return Err(Error::InvalidArgument(format!("({k}, {l}) must be coprime positive integers")));
    }
    if (k, l) != (1, 1) {
        return Err(Error::Unsupported(format!("({k}, {l}) subdivision; only (1, 1) is implemented")));
    }
    RhombusMaze::new(s, 1)
}

/// Slope on the diagonal subdivision of a geodesic of slope `sigma`.
pub fn subdivided_slope(sigma: &QuadRat) -> Result<QuadRat> {
    let den = sigma + &QuadRat::one();
    if den.is_zero() {
        return Err(Error::InvalidArgument("slope -1 runs along the subdivision's vertical edges".into()));
    }
    Ok(&(sigma - &QuadRat::one()) / &den)
}

/// Original-frame slope of the rhombus-maze slope `beta`: the direction
/// `(1, m) + beta (-1, m)` has slope `m (1 + beta) / (1 - beta)`.
pub fn map_slope(m: i64, beta: &QuadRat) -> Result<QuadRat> {
    let den = &QuadRat::one() - beta;
    if den.is_zero() {
        return Err(Error::InvalidArgument("beta = 1 is parallel to a rhombus side".into()));
    }
    Ok(&(&QuadRat::int(m) * &(&QuadRat::one() + beta)) / &den)
}

/// Summary of a rhombus-maze construction over a finite scope.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhombusReport {
    pub m: i64,
    pub ne: Vec<Cylinder>,
    pub nw: Vec<Cylinder>,
    pub faces: usize,
    pub horizontal_lengths: BTreeSet<usize>,
    pub vertical_lengths: BTreeSet<usize>,
}

/// Builds the slope-`m` rhombus maze of a translation surface and checks it
/// on the faces of `scope`: both tilted decompositions close, the gluings
/// are involutions, and each maze street has as many faces as its tilted
/// street has rhombi.
pub fn rhombus_maze(s: SurfaceRef, m: i64, scope: &[FaceId], opts: DecomposeOptions) -> Result<(RhombusMaze, RhombusReport)> {
    let maze = RhombusMaze::new(s.clone(), m)?;
    let seed = Seed::Faces(scope.to_vec());
    let ne = cylinder_decompose(s.as_ref(), Direction::slope_int(m)?, &seed, opts)?;
    let nw = cylinder_decompose(s.as_ref(), Direction::slope_int(-m)?, &seed, opts)?;
    if ne.iter().chain(&nw).any(|c| !c.is_closed()) {
        return Err(Error::Unsupported(format!("a slope +-{m} street does not close within the bound")));
    }
    let atom_rhombi = |cyls: &[Cylinder]| -> HashMap<Atom, u64> {
        let mut out = HashMap::new();
        for c in cyls {
            let r = c.rhombi.expect("integer slope");
            for a in &c.core {
                out.insert(*a, r);
            }
        }
        out
    };
    let ne_map = atom_rhombi(&ne);
    let nw_map = atom_rhombi(&nw);
    let faces: Vec<FaceId> = scope.iter().flat_map(|&f| (0..maze.per_face()).map(move |j| (f, j))).map(|(f, j)| maze.rhombus(f, j)).collect();
    validate(&maze, &faces).map_err(|e| Error::Unsupported(format!("rhombus pattern is not a valid tiling: {e}")))?;
    let limit = opts.max_steps.saturating_mul(2).max(16);
    let mut horizontal_lengths = BTreeSet::new();
    let mut vertical_lengths = BTreeSet::new();
    for &f in &faces {
        let h = street_of(&maze, f, StreetDir::Horizontal, limit)?.length;
        let v = street_of(&maze, f, StreetDir::Vertical, limit)?.length;
        horizontal_lengths.insert(h);
        vertical_lengths.insert(v);
        let (g, j) = maze.split(f);
        if j % 2 == 1 {
            // Centre on the bottom edge of g, the midpoint of atom (j-1)/2.
            let i = ((j - 1) / 2) as u32;
            let mismatch = |map: &HashMap<Atom, u64>, a: Atom, len: usize| map.get(&a).is_some_and(|&r| r != len as u64);
            let below = s.glue(g, Side::B).map(|(b, _)| b).ok_or_else(|| Error::Precondition(format!("wall below {g}")))?;
            if mismatch(&ne_map, Atom { face: g, index: i }, h) || mismatch(&nw_map, Atom { face: below, index: i }, v) {
                return Err(Error::Unsupported(format!("street through rhombus {f} disagrees with its tilted street")));
            }
        }
    }
    let report = RhombusReport { m, ne, nw, faces: faces.len(), horizontal_lengths, vertical_lengths };
    Ok((maze, report))
}

/// Entry gate of a k-tower.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    /// Left gate, entered moving right.
    G1,
    /// Right gate, entered moving left.
    G2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TowerQuery {
    pub k: u32,
    /// Integer slope; positive means moving up on entry.
    pub m: i64,
    pub gate: Gate,
}

/// Exit of a k-tower: `x0` vertical-side hits, type 1/2 through the far
/// gate moving up/down, type 3/4 back through the entry gate moving up/down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TowerExit {
    pub x0: u64,
    pub exit: u8,
}

impl TowerExit {
    pub fn bounces_back(&self) -> bool {
        self.exit >= 3
    }

    pub fn moving_up(&self) -> bool {
        self.exit % 2 == 1
    }
}

impl TowerQuery {
    pub fn new(k: u32, m: i64, gate: Gate) -> Result<TowerQuery> {
        if k < 2 || m.abs() < 2 {
            return Err(Error::InvalidArgument("tower needs k >= 2 and |m| >= 2".into()));
        }
        Ok(TowerQuery { k, m, gate })
    }
}

/// Exit of a billiard entering a k-tower with integer slope `m`, by the
/// residue of `m x` modulo `2k`. The right gate is the mirror image.
pub fn tower_exit(q: TowerQuery) -> Result<TowerExit> {
    let q = TowerQuery::new(q.k, q.m, q.gate)?;
    let n = 2 * q.k as i64;
    let x0 = (1..=n).find(|&t| matches!((q.m * t).rem_euclid(n), 0) || (q.m * t).rem_euclid(n) == n - 1).expect("t = 2k works");
    let zero = (q.m * x0).rem_euclid(n) == 0;
    let exit = match (q.m > 0, x0 % 2 == 1, zero) {
        (true, true, true) => 1,
        (true, true, false) => 2,
        (true, false, _) => 3,
        (false, true, true) => 2,
        (false, true, false) => 1,
        (false, false, _) => 4,
    };
    Ok(TowerExit { x0: x0 as u64, exit })
}

/// [`tower_exit`] by exact billiard simulation: the tower is a column of
/// `k` cells with one gate cell on each side of the bottom cell, and the
/// path starts inside the entry gate.
pub fn tower_exit_simulated(q: TowerQuery) -> Result<TowerExit> {
    let q = TowerQuery::new(q.k, q.m, q.gate)?;
    let mut cells = vec![(-1, 0), (1, 0)];
    cells.extend((0..q.k as i64).map(|y| (0, y)));
    let r = region("k-tower", &cells);
    let am = q.m.abs();
    let (face, x, dx) = match q.gate {
        Gate::G1 => (FaceId::new(-1, 0), QuadRat::one() - QuadRat::frac(1, 4 * am), QuadRat::one()),
        Gate::G2 => (FaceId::new(1, 0), QuadRat::frac(1, 4 * am), -QuadRat::one()),
    };
    let far = match q.gate {
        Gate::G1 => 1,
        Gate::G2 => -1,
    };
    let t = trace_billiard(&r, face, x, QuadRat::frac(1, 2), (dx, QuadRat::int(q.m)), &Budget::Crossings(1 << 16))?;
    let mut up = q.m > 0;
    let mut hits = 0u64;
    for e in t.events.iter().skip(1) {
        if e.edge.1.is_vertical() {
            hits += 1;
        } else if e.reflected {
            up = !up;
        }
        if !e.reflected && e.entered.0.x != 0 {
            let through = e.entered.0.x == far;
            let exit = match (through, up) {
                (true, true) => 1,
                (true, false) => 2,
                (false, true) => 3,
                (false, false) => 4,
            };
            return Ok(TowerExit { x0: hits, exit });
        }
    }
    Err(Error::Unreachable("billiard did not leave the tower".into()))
}

/// Position in the L-strip's tower dynamics: about to enter tower `tower`
/// (the column of `L_tower`) from the left or right, moving up or down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TowerState {
    pub tower: i64,
    pub from_left: bool,
    pub up: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreetKind {
    Finite,
    Infinite,
}

/// One slope-`m` street of the strip, followed tower to tower.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicStreet {
    pub start: TowerState,
    pub kind: StreetKind,
    /// Smallest and largest tower index visited.
    pub span: (i64, i64),
    /// Towers where the street turned back.
    pub bounces: Vec<i64>,
    pub visits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripReport {
    pub m: i64,
    pub bound: usize,
    pub infinite: bool,
    pub streets: Vec<SymbolicStreet>,
    /// Slope-`m` cylinders of the 4-copy seeded at `L_0` and `L_1`.
    pub closed_cylinders: usize,
    pub escaped_cylinders: usize,
    /// Rhombus counts of the closed cylinders.
    pub rhombi: BTreeSet<u64>,
    /// The tower dynamics and the exact decomposition agree.
    pub consistent: bool,
}

fn follow_towers(spec: &LStripSpec, m: i64, start: TowerState, bound: usize) -> Result<SymbolicStreet> {
    let mut seen = HashSet::new();
    let mut cur = start;
    let mut span = (start.tower, start.tower);
    let mut bounces = Vec::new();
    let cap = 64 * (bound + 1);
    for visits in 0..cap {
        if !seen.insert(cur) {
            let kind = if cur == start { StreetKind::Finite } else { StreetKind::Infinite };
            return Ok(SymbolicStreet { start, kind, span, bounces, visits });
        }
        if cur.tower.unsigned_abs() as usize > bound {
            return Ok(SymbolicStreet { start, kind: StreetKind::Infinite, span, bounces, visits });
        }
        let k = spec.shape(cur.tower).0;
        let signed = if cur.up { m.abs() } else { -m.abs() };
        let gate = if cur.from_left { Gate::G1 } else { Gate::G2 };
        let ex = tower_exit(TowerQuery::new(k, signed, gate)?)?;
        let right = cur.from_left != ex.bounces_back();
        if ex.bounces_back() {
            bounces.push(cur.tower);
        }
        let (next, gap) = if right {
            (cur.tower + 1, spec.shape(cur.tower).1 as i64 - 1)
        } else {
            (cur.tower - 1, spec.shape(cur.tower - 1).1 as i64 - 1)
        };
        // |m| bounces per unit of corridor, each flipping the vertical sense.
        let up = ex.moving_up() != ((m.abs() * gap) % 2 == 1);
        cur = TowerState { tower: next, from_left: right, up };
        span = (span.0.min(next), span.1.max(next));
    }
    Ok(SymbolicStreet { start, kind: StreetKind::Infinite, span, bounces, visits: cap })
}

/// Slope-`m` streets of an L-strip billiard.
///
/// Streets are followed through the towers with [`tower_exit`]: a street
/// is finite when it is trapped between two bounce backs, infinite when it
/// passes more than `bound` towers. Every street through `L_0` or `L_1` is
/// followed, and the verdict is checked against the exact cylinder
/// decomposition of the strip's 4-copy seeded at the same cells.
pub fn strip_street_analysis(spec: &LStripSpec, m: i64, bound: usize) -> Result<StripReport> {
    if m.abs() < 2 {
        return Err(Error::InvalidArgument("strip analysis needs |m| >= 2".into()));
    }
    spec.validate()?;
    let mut streets = Vec::new();
    for tower in [0, 1] {
        for from_left in [true, false] {
            for up in [true, false] {
                streets.push(follow_towers(spec, m, TowerState { tower, from_left, up }, bound)?);
            }
        }
    }
    let infinite = streets.iter().any(|s| s.kind == StreetKind::Infinite);

    let strip: SurfaceRef = Arc::new(l_strip(spec.clone())?);
    let fc = four_copy(strip);
    let mut seeds = Vec::new();
    for i in [0, 1] {
        let x0 = spec.start(i);
        let (v, h) = spec.shape(i);
        let cells = (0..v as i64).map(|y| (x0, y)).chain((1..h as i64).map(|x| (x0 + x, 0)));
        for (x, y) in cells {
            seeds.extend((0..4).map(|c| fc.lift(FaceId::new(x, y), c)));
        }
    }
    let r = (-(bound as i64) - 2..=bound as i64 + 2).map(|i| spec.shape(i)).map(|(v, h)| v.max(h) as usize).max().unwrap_or(2);
    let opts = DecomposeOptions { max_steps: 8 * r * m.unsigned_abs() as usize * (bound + 2), max_atoms: usize::MAX };
    let cyls = cylinder_decompose(&fc, Direction::slope_int(m)?, &Seed::Faces(seeds), opts)?;
    let closed_cylinders = cyls.iter().filter(|c| c.is_closed()).count();
    let escaped_cylinders = cyls.len() - closed_cylinders;
    let rhombi = cyls.iter().filter_map(|c| c.rhombi).collect();
    let consistent = infinite == (escaped_cylinders > 0);
    Ok(StripReport { m, bound, infinite, streets, closed_cylinders, escaped_cylinders, rhombi, consistent })
}

/// Street census `(rhombi -> count)` over closed cylinders.
pub fn rhombus_histogram(cyls: &[Cylinder]) -> BTreeMap<u64, usize> {
    let mut out = BTreeMap::new();
    for c in cyls {
        if let Some(r) = c.rhombi {
            *out.entry(r).or_insert(0) += 1;
        }
    }
    out
}

/// Total area of the closed cylinders.
pub fn closed_area(cyls: &[Cylinder]) -> QuadRat {
    cyls.iter().filter(|c| c.is_closed()).fold(QuadRat::zero(), |acc, c| &acc + &c.area)
}
