//! Polysquare surfaces in the permutation model.
//!
//! A surface is a set of unit squares whose sides are glued in pairs. On a
//! translation surface every gluing sends a right side to a left side and a
//! top side to a bottom side; rotation surfaces (cube nets, polycubes) may
//! glue any side to any other. A missing gluing is a reflecting wall, which is
//! how billiard regions are represented.

mod builders;
mod fourcopy;
mod json;
mod polycube;

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::generators::MazeProfile;
use crate::{Error, Result};

pub use builders::{build_named, cube, gap_wall_surface, l_surface, named_list, region, snake_region, square_region, torus};
pub use fourcopy::{four_copy, FourCopy, FourCopyMode};
pub use json::{surface_from_json, surface_to_json, SurfaceFile};
pub use polycube::{Polycube, PolycubeShape};

/// A side of a unit square, in counterclockwise order from the right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    R,
    T,
    L,
    B,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::R, Side::T, Side::L, Side::B];

    /// Quarter turns counterclockwise from `R`.
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Side {
        Side::ALL[(i % 4) as usize]
    }

    pub fn opposite(self) -> Side {
        self.rotate(2)
    }

    /// Rotates counterclockwise by `quarter_turns`.
    pub fn rotate(self, quarter_turns: i32) -> Side {
        Side::from_index((self.index() as i32 + quarter_turns).rem_euclid(4) as u8)
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, Side::L | Side::R)
    }

    /// Unit outward normal `(dx, dy)`.
    pub fn normal(self) -> (i64, i64) {
        match self {
            Side::R => (1, 0),
            Side::T => (0, 1),
            Side::L => (-1, 0),
            Side::B => (0, -1),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Side::R => 'R',
            Side::T => 'T',
            Side::L => 'L',
            Side::B => 'B',
        }
    }

    pub fn from_letter(c: char) -> Option<Side> {
        match c {
            'R' => Some(Side::R),
            'T' => Some(Side::T),
            'L' => Some(Side::L),
            'B' => Some(Side::B),
            _ => None,
        }
    }
}

/// Rotation tag of a gluing in quarter turns: 0 for a translation.
pub fn gluing_rotation(from: Side, to: Side) -> u8 {
    (to.index() + 4 - from.opposite().index()) % 4
}

/// Identifier of a unit square.
///
/// Planar builders use `(x, y)`; polycubes add the cube `z` and encode the
/// outward normal in `tag`; derived surfaces pack their extra index into `tag`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FaceId {
    pub x: i64,
    pub y: i64,
    pub z: i64,
    pub tag: u64,
}

impl FaceId {
    pub const fn new(x: i64, y: i64) -> FaceId {
        FaceId { x, y, z: 0, tag: 0 }
    }

    pub const fn full(x: i64, y: i64, z: i64, tag: u64) -> FaceId {
        FaceId { x, y, z, tag }
    }

    pub fn with_tag(self, tag: u64) -> FaceId {
        FaceId { tag, ..self }
    }

    pub fn offset(self, dx: i64, dy: i64) -> FaceId {
        FaceId { x: self.x + dx, y: self.y + dy, ..self }
    }
}

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.z == 0 && self.tag == 0 {
            write!(f, "{}:{}", self.x, self.y)
        } else {
            write!(f, "{}:{}:{}:{}", self.x, self.y, self.z, self.tag)
        }
    }
}

impl FromStr for FaceId {
    type Err = Error;
    fn from_str(s: &str) -> Result<FaceId> {
        let bad = || Error::InvalidArgument(format!("bad face id {s:?}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let int = |t: &str| t.trim().parse::<i64>().map_err(|_| bad());
        match parts.len() {
            2 => Ok(FaceId::new(int(parts[0])?, int(parts[1])?)),
            4 => Ok(FaceId::full(
                int(parts[0])?,
                int(parts[1])?,
                int(parts[2])?,
                parts[3].trim().parse::<u64>().map_err(|_| bad())?,
            )),
            _ => Err(bad()),
        }
    }
}

impl Serialize for FaceId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FaceId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<FaceId, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The gluing model shared by finite and lazily generated surfaces.
///
/// Implementations must be deterministic: the same query always gets the
/// same answer, independent of query order or thread.
pub trait Surface: Send + Sync {
    /// Neighbor across side `s` of face `f`, with the side of the neighbor it
    /// is glued to. `None` is a reflecting wall. The gluing reverses the
    /// counterclockwise edge parameter.
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)>;

    fn contains(&self, f: FaceId) -> bool;

    /// All faces in a fixed order, for finite surfaces.
    fn faces(&self) -> Option<Vec<FaceId>> {
        None
    }

    /// A distinguished face (the start face of experiments).
    fn origin(&self) -> FaceId;

    /// True when every gluing is a translation (walls allowed).
    fn is_translation(&self) -> bool {
        true
    }

    fn label(&self, _f: FaceId, _s: Side) -> Option<String> {
        None
    }

    fn profile(&self) -> MazeProfile {
        MazeProfile::default()
    }

    fn name(&self) -> String;
}

pub type SurfaceRef = Arc<dyn Surface>;

/// Neighbor across a side on a translation surface.
pub fn step(s: &(impl Surface + ?Sized), f: FaceId, side: Side) -> Option<FaceId> {
    s.glue(f, side).map(|(g, _)| g)
}

pub fn right_of(s: &(impl Surface + ?Sized), f: FaceId) -> Option<FaceId> {
    step(s, f, Side::R)
}

pub fn top_of(s: &(impl Surface + ?Sized), f: FaceId) -> Option<FaceId> {
    step(s, f, Side::T)
}

pub fn left_of(s: &(impl Surface + ?Sized), f: FaceId) -> Option<FaceId> {
    step(s, f, Side::L)
}

pub fn bottom_of(s: &(impl Surface + ?Sized), f: FaceId) -> Option<FaceId> {
    step(s, f, Side::B)
}

/// One side glued to another.
pub type Gluing = ((FaceId, Side), (FaceId, Side));

/// An explicit finite surface.
#[derive(Clone, Debug)]
pub struct FiniteSurface {
    name: String,
    faces: Vec<FaceId>,
    index: HashMap<FaceId, usize>,
    /// `glue[4 i + side]`: gluing of side `side` of `faces[i]`.
    glue: Vec<Option<(FaceId, Side)>>,
    labels: HashMap<(FaceId, Side), String>,
    origin: FaceId,
    translation: bool,
    profile: MazeProfile,
}

impl FiniteSurface {
    /// Builds a surface from side gluings. Each pair needs to be listed in
    /// one direction only; missing sides become walls.
    pub fn from_gluings(
        name: &str,
        faces: Vec<FaceId>,
        pairs: &[Gluing],
    ) -> Result<FiniteSurface> {
        let mut faces = faces;
        faces.sort();
        faces.dedup();
        if faces.is_empty() {
            return Err(Error::InvalidArgument("surface without faces".into()));
        }
        let index: HashMap<FaceId, usize> = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        let mut glue: Vec<Option<(FaceId, Side)>> = vec![None; faces.len() * 4];
        let slot = |f: FaceId, s: Side| -> Result<usize> {
            index
                .get(&f)
                .map(|&i| 4 * i + s.index() as usize)
                .ok_or_else(|| Error::UnknownFace(f.to_string()))
        };
        for &(a, b) in pairs {
            for (p, q) in [(a, b), (b, a)] {
                let k = slot(p.0, p.1)?;
                match glue[k] {
                    Some(old) if old != q => {
                        return Err(Error::InvalidArgument(format!(
                            "side {}/{} glued twice",
                            p.0,
                            p.1.letter()
                        )))
                    }
                    _ => glue[k] = Some(q),
                }
            }
        }
        let translation = faces.iter().all(|&f| {
            Side::ALL.iter().all(|&s| match glue[4 * index[&f] + s.index() as usize] {
                Some((_, t)) => t == s.opposite(),
                None => true,
            })
        });
        let origin = faces[0];
        Ok(FiniteSurface {
            name: name.to_string(),
            faces,
            index,
            glue,
            labels: HashMap::new(),
            origin,
            translation,
            profile: MazeProfile::default(),
        })
    }

    /// Builds a translation surface from its right and top permutations.
    pub fn from_permutations(
        name: &str,
        right: &[(FaceId, FaceId)],
        top: &[(FaceId, FaceId)],
    ) -> Result<FiniteSurface> {
        let mut faces: Vec<FaceId> = right.iter().chain(top).flat_map(|&(a, b)| [a, b]).collect();
        faces.sort();
        faces.dedup();
        let mut pairs = Vec::new();
        for &(a, b) in right {
            pairs.push(((a, Side::R), (b, Side::L)));
        }
        for &(a, b) in top {
            pairs.push(((a, Side::T), (b, Side::B)));
        }
        let s = FiniteSurface::from_gluings(name, faces, &pairs)?;
        s.check_closed()?;
        Ok(s)
    }

    /// Copies any surface restricted to `faces`; gluings leaving the set
    /// become walls.
    pub fn snapshot(s: &dyn Surface, faces: &[FaceId]) -> Result<FiniteSurface> {
        let set: HashSet<FaceId> = faces.iter().copied().collect();
        let mut pairs = Vec::new();
        for &f in faces {
            for side in Side::ALL {
                if let Some((g, t)) = s.glue(f, side) {
                    if set.contains(&g) {
                        pairs.push(((f, side), (g, t)));
                    }
                }
            }
        }
        let mut out = FiniteSurface::from_gluings(&s.name(), faces.to_vec(), &pairs)?;
        out.origin = if set.contains(&s.origin()) { s.origin() } else { out.faces[0] };
        for &f in faces {
            for side in Side::ALL {
                if let Some(l) = s.label(f, side) {
                    out.labels.insert((f, side), l);
                }
            }
        }
        Ok(out)
    }

    /// Fails if some side is a wall.
    pub fn check_closed(&self) -> Result<()> {
        for (k, g) in self.glue.iter().enumerate() {
            if g.is_none() {
                return Err(Error::InvalidArgument(format!(
                    "side {}/{} is not glued",
                    self.faces[k / 4],
                    Side::from_index((k % 4) as u8).letter()
                )));
            }
        }
        Ok(())
    }

    pub fn with_labels(mut self, labels: HashMap<(FaceId, Side), String>) -> FiniteSurface {
        self.labels = labels;
        self
    }

    pub fn with_origin(mut self, f: FaceId) -> FiniteSurface {
        if self.index.contains_key(&f) {
            self.origin = f;
        }
        self
    }

    pub fn with_profile(mut self, p: MazeProfile) -> FiniteSurface {
        self.profile = p;
        self
    }

    pub fn with_name(mut self, name: &str) -> FiniteSurface {
        self.name = name.to_string();
        self
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn face_list(&self) -> &[FaceId] {
        &self.faces
    }

    pub fn labels(&self) -> &HashMap<(FaceId, Side), String> {
        &self.labels
    }

    pub fn has_walls(&self) -> bool {
        self.glue.iter().any(|g| g.is_none())
    }
}

impl Surface for FiniteSurface {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        let i = *self.index.get(&f)?;
        self.glue[4 * i + s.index() as usize]
    }

    fn contains(&self, f: FaceId) -> bool {
        self.index.contains_key(&f)
    }

    fn faces(&self) -> Option<Vec<FaceId>> {
        Some(self.faces.clone())
    }

    fn origin(&self) -> FaceId {
        self.origin
    }

    fn is_translation(&self) -> bool {
        self.translation
    }

    fn label(&self, f: FaceId, s: Side) -> Option<String> {
        self.labels.get(&(f, s)).cloned()
    }

    fn profile(&self) -> MazeProfile {
        self.profile.clone()
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Checks that gluings are involutions and stay inside the surface.
pub fn validate(s: &dyn Surface, faces: &[FaceId]) -> Result<()> {
    for &f in faces {
        if !s.contains(f) {
            return Err(Error::UnknownFace(f.to_string()));
        }
        for side in Side::ALL {
            if let Some((g, t)) = s.glue(f, side) {
                if !s.contains(g) {
                    return Err(Error::Precondition(format!("{f}/{} glued to missing face {g}", side.letter())));
                }
                if s.glue(g, t) != Some((f, side)) {
                    return Err(Error::Precondition(format!(
                        "gluing of {f}/{} is not an involution",
                        side.letter()
                    )));
                }
                if s.is_translation() && t != side.opposite() {
                    return Err(Error::Precondition(format!("{f}/{} is rotated on a translation surface", side.letter())));
                }
            }
        }
    }
    Ok(())
}

/// Horizontal or vertical, in the local frame of the street's first face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StreetDir {
    Horizontal,
    Vertical,
}

impl StreetDir {
    pub fn heading(self) -> Side {
        match self {
            StreetDir::Horizontal => Side::R,
            StreetDir::Vertical => Side::T,
        }
    }
}

/// A closed cycle of faces traversed straight ahead.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Street {
    pub direction: StreetDir,
    pub cycle: Vec<FaceId>,
    /// Exit side in each face of the cycle (constant on translation surfaces).
    pub headings: Vec<Side>,
    pub length: usize,
}

impl Street {
    /// Canonical key: the smallest (face, axis) pair on the cycle.
    fn key(&self) -> (FaceId, bool) {
        self.cycle
            .iter()
            .zip(&self.headings)
            .map(|(&f, &h)| (f, h.is_vertical()))
            .min()
            .expect("nonempty street")
    }
}

/// Street through `f` in `dir`, following gluings straight ahead.
pub fn street_of(s: &dyn Surface, f: FaceId, dir: StreetDir, limit: usize) -> Result<Street> {
    if !s.contains(f) {
        return Err(Error::UnknownFace(f.to_string()));
    }
    let start = (f, dir.heading());
    let (mut cur, mut heading) = start;
    let mut cycle = Vec::new();
    let mut headings = Vec::new();
    loop {
        cycle.push(cur);
        headings.push(heading);
        let (g, entered) = s
            .glue(cur, heading)
            .ok_or_else(|| Error::Unsupported(format!("street through {f} meets a wall at {cur}")))?;
        cur = g;
        heading = entered.opposite();
        if (cur, heading) == start {
            break;
        }
        if cycle.len() >= limit {
            return Err(Error::Unreachable(format!("street through {f} longer than {limit}")));
        }
    }
    let length = cycle.len();
    Ok(Street { direction: dir, cycle, headings, length })
}

/// Default cap on the length of a single street on lazy surfaces.
pub const STREET_LIMIT: usize = 1 << 16;

/// All horizontal and vertical streets meeting `scope`, deduplicated, in a
/// deterministic order. `scope = None` means every face of a finite surface.
pub fn streets(s: &dyn Surface, scope: Option<&[FaceId]>) -> Result<Vec<Street>> {
    let owned;
    let scope = match scope {
        Some(sc) => sc,
        None => {
            owned = s
                .faces()
                .ok_or_else(|| Error::Precondition("lazy surface needs an explicit scope".into()))?;
            &owned
        }
    };
    if scope.is_empty() {
        return Err(Error::InvalidArgument("empty scope".into()));
    }
    let mut seen: HashSet<(FaceId, bool)> = HashSet::new();
    let mut out = Vec::new();
    for &f in scope {
        for dir in [StreetDir::Horizontal, StreetDir::Vertical] {
            if seen.contains(&(f, dir == StreetDir::Horizontal)) {
                continue;
            }
            let st = street_of(s, f, dir, STREET_LIMIT)?;
            for (&g, &h) in st.cycle.iter().zip(&st.headings) {
                seen.insert((g, h.is_vertical()));
            }
            out.push(st);
        }
    }
    out.sort_by_key(|st| (st.direction, st.key()));
    Ok(out)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    use num_integer::Integer;
    a.lcm(&b)
}

/// Least common multiple of the street lengths meeting `scope`, combined
/// with the generator's declared bound when `include_declared` is set.
pub fn street_lcm(s: &dyn Surface, scope: Option<&[FaceId]>) -> Result<u64> {
    let sts = streets(s, scope)?;
    Ok(sts.iter().fold(1u64, |acc, st| lcm(acc, st.length as u64)))
}

/// Sorted street lengths per direction.
pub fn street_lengths(s: &dyn Surface, scope: Option<&[FaceId]>) -> Result<(Vec<usize>, Vec<usize>)> {
    let sts = streets(s, scope)?;
    let mut h: Vec<usize> = sts.iter().filter(|t| t.direction == StreetDir::Horizontal).map(|t| t.length).collect();
    let mut v: Vec<usize> = sts.iter().filter(|t| t.direction == StreetDir::Vertical).map(|t| t.length).collect();
    h.sort_unstable();
    v.sort_unstable();
    Ok((h, v))
}

/// Breadth-first search over the street-incidence structure.
///
/// Reports the P-distance from `a` to every face reached, exploring at most
/// `budget` faces. Faces on one street are one step apart.
pub struct StreetBfs<'a> {
    surface: &'a dyn Surface,
    pub dist: HashMap<FaceId, usize>,
    queue: VecDeque<FaceId>,
    streets_done: HashSet<(FaceId, bool)>,
    budget: usize,
}

impl<'a> StreetBfs<'a> {
    pub fn new(surface: &'a dyn Surface, a: FaceId, budget: usize) -> Result<StreetBfs<'a>> {
        if !surface.contains(a) {
            return Err(Error::UnknownFace(a.to_string()));
        }
        let mut dist = HashMap::new();
        dist.insert(a, 0);
        let mut queue = VecDeque::new();
        queue.push_back(a);
        Ok(StreetBfs { surface, dist, queue, streets_done: HashSet::new(), budget })
    }

    /// Expands until `target` has a distance or the search is exhausted.
    pub fn run_until(&mut self, target: Option<FaceId>) -> Result<()> {
        loop {
            if let Some(t) = target {
                if self.dist.contains_key(&t) {
                    return Ok(());
                }
            }
            let Some(f) = self.queue.pop_front() else { break };
            let d = self.dist[&f];
            for dir in [StreetDir::Horizontal, StreetDir::Vertical] {
                if self.streets_done.contains(&(f, dir == StreetDir::Horizontal)) {
                    continue;
                }
                let st = street_of(self.surface, f, dir, STREET_LIMIT)?;
                for (&g, &hd) in st.cycle.iter().zip(&st.headings) {
                    self.streets_done.insert((g, hd.is_vertical()));
                    if let std::collections::hash_map::Entry::Vacant(e) = self.dist.entry(g) {
                        e.insert(d + 1);
                        self.queue.push_back(g);
                    }
                }
                if self.dist.len() > self.budget {
                    return Err(Error::Unreachable(format!("P-distance search exceeded {} faces", self.budget)));
                }
            }
        }
        Ok(())
    }
}

/// P-distance: the length of the shortest chain of streets joining `a` to
/// `b`, each meeting the next; 0 when `a == b`.
pub fn p_distance(s: &dyn Surface, a: FaceId, b: FaceId, budget: usize) -> Result<usize> {
    if a == b {
        return if s.contains(a) { Ok(0) } else { Err(Error::UnknownFace(a.to_string())) };
    }
    if !s.contains(b) {
        return Err(Error::UnknownFace(b.to_string()));
    }
    let mut bfs = StreetBfs::new(s, a, budget)?;
    bfs.run_until(Some(b))?;
    bfs.dist
        .get(&b)
        .copied()
        .ok_or_else(|| Error::Unreachable(format!("{b} not reachable from {a}")))
}

/// Maximum P-distance between faces of `scope`.
pub fn p_diameter(s: &dyn Surface, scope: &[FaceId], budget: usize) -> Result<usize> {
    if scope.is_empty() {
        return Err(Error::InvalidArgument("empty scope".into()));
    }
    let mut best = 0;
    for (i, &a) in scope.iter().enumerate() {
        let mut bfs = StreetBfs::new(s, a, budget)?;
        for &b in &scope[i + 1..] {
            bfs.run_until(Some(b))?;
            let d = *bfs
                .dist
                .get(&b)
                .ok_or_else(|| Error::Unreachable(format!("{b} not reachable from {a}")))?;
            best = best.max(d);
        }
    }
    Ok(best)
}

/// Faces within P-distance `r` of `a`.
pub fn p_ball(s: &dyn Surface, a: FaceId, r: usize, budget: usize) -> Result<Vec<FaceId>> {
    let mut bfs = StreetBfs::new(s, a, budget)?;
    // Expand level by level; stop once the frontier passes r.
    while let Some(&f) = bfs.queue.front() {
        if bfs.dist[&f] >= r {
            break;
        }
        let f = bfs.queue.pop_front().unwrap();
        let d = bfs.dist[&f];
        for dir in [StreetDir::Horizontal, StreetDir::Vertical] {
            let st = street_of(s, f, dir, STREET_LIMIT)?;
            for &g in &st.cycle {
                if let std::collections::hash_map::Entry::Vacant(e) = bfs.dist.entry(g) {
                    e.insert(d + 1);
                    bfs.queue.push_back(g);
                }
            }
        }
        if bfs.dist.len() > budget {
            return Err(Error::Unreachable(format!("ball of radius {r} exceeds {budget} faces")));
        }
    }
    let mut out: Vec<FaceId> = bfs.dist.iter().filter(|&(_, &d)| d <= r).map(|(&f, _)| f).collect();
    out.sort();
    Ok(out)
}

/// Vertex cone angle in multiples of `2 pi` at the bottom-left corner of
/// `f`, on a closed translation surface.
pub fn cone_angle_bl(s: &dyn Surface, f: FaceId, limit: usize) -> Result<usize> {
    // Going around the corner counterclockwise: up, right, down, left moves
    // return to f after k turns of 2 pi.
    let mut cur = f;
    for k in 1..=limit {
        let a = bottom_of(s, cur).ok_or_else(|| Error::Unsupported("vertex on a wall".into()))?;
        let b = left_of(s, a).ok_or_else(|| Error::Unsupported("vertex on a wall".into()))?;
        let c = top_of(s, b).ok_or_else(|| Error::Unsupported("vertex on a wall".into()))?;
        let d = right_of(s, c).ok_or_else(|| Error::Unsupported("vertex on a wall".into()))?;
        cur = d;
        if cur == f {
            return Ok(k);
        }
    }
    Err(Error::Unreachable(format!("cone at {f} exceeds {limit} turns")))
}

/// True when the bottom-left corner of `f` is a cone point (angle above 2 pi).
pub fn is_singular_bl(s: &dyn Surface, f: FaceId) -> bool {
    !matches!(cone_angle_bl(s, f, 64), Ok(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_id_text() {
        let f = FaceId::new(-3, 4);
        assert_eq!(f.to_string(), "-3:4");
        assert_eq!("-3:4".parse::<FaceId>().unwrap(), f);
        let g = FaceId::full(1, 2, 3, 17);
        assert_eq!(g.to_string().parse::<FaceId>().unwrap(), g);
        assert!("1".parse::<FaceId>().is_err());
    }

    #[test]
    fn side_algebra() {
        assert_eq!(Side::R.opposite(), Side::L);
        assert_eq!(Side::B.rotate(1), Side::R);
        assert_eq!(gluing_rotation(Side::R, Side::L), 0);
        assert_eq!(gluing_rotation(Side::R, Side::B), 1);
    }

    #[test]
    fn torus_streets_and_distance() {
        let t = torus(1, 1);
        assert_eq!(street_lcm(&t, None).unwrap(), 1);
        let t = torus(3, 2);
        assert_eq!(street_lengths(&t, None).unwrap(), (vec![3, 3], vec![2, 2, 2]));
        assert_eq!(p_distance(&t, FaceId::new(0, 0), FaceId::new(2, 0), 100).unwrap(), 1);
        assert_eq!(p_distance(&t, FaceId::new(0, 0), FaceId::new(2, 1), 100).unwrap(), 2);
        assert_eq!(cone_angle_bl(&t, FaceId::new(1, 1), 10).unwrap(), 1);
    }

    #[test]
    fn l_surface_has_one_cone_point() {
        let l = l_surface();
        for f in l.faces().unwrap() {
            assert_eq!(cone_angle_bl(&l, f, 10).unwrap(), 3);
        }
    }

    #[test]
    fn bad_gluings_rejected() {
        let a = FaceId::new(0, 0);
        let b = FaceId::new(1, 0);
        let r = FiniteSurface::from_gluings("x", vec![a, b], &[((a, Side::R), (b, Side::L)), ((a, Side::R), (a, Side::L))]);
        assert!(r.is_err());
        assert!(FiniteSurface::from_permutations("x", &[(a, b)], &[]).is_err());
    }
}
