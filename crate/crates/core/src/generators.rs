//! Lazy providers for the infinite surface and region families.
//!
//! Every provider answers neighbor queries with a pure function of the face
//! and the seed. There is no cache to keep consistent, so concurrent queries
//! in any order always agree.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::surface::{four_copy, p_ball, streets, FaceId, Polycube, PolycubeShape, Side, Street, Surface, SurfaceRef};
use crate::{Error, Result};

/// How fast P-balls grow on a family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthClass {
    Finite,
    Linear,
    Quadratic,
    Cubic,
    Exponential,
    #[default]
    Unknown,
}

/// Declared street bound and growth class of a provider.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MazeProfile {
    pub bound: Option<u64>,
    pub growth: GrowthClass,
}

/// SplitMix64 finalizer, the mixing step behind every seeded choice.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic hash of a seed and a lattice point.
pub fn seeded_hash(seed: u64, i: i64, j: i64) -> u64 {
    mix64(mix64(mix64(seed) ^ i as u64) ^ (j as u64).rotate_left(32))
}

/// A choice function `f: Z^2 -> {+1, -1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FConfig {
    Constant(i8),
    /// `(-1)^(i+j)`.
    Checker,
    Seeded(u64),
    /// Explicit values on a window, `default` elsewhere.
    Table { values: Vec<((i64, i64), i8)>, default: i8 },
}

impl FConfig {
    pub fn value(&self, i: i64, j: i64) -> i8 {
        match self {
            FConfig::Constant(v) => {
                if *v < 0 {
                    -1
                } else {
                    1
                }
            }
            FConfig::Checker => {
                if (i + j).rem_euclid(2) == 0 {
                    1
                } else {
                    -1
                }
            }
            FConfig::Seeded(seed) => {
                if seeded_hash(*seed, i, j) & 1 == 0 {
                    1
                } else {
                    -1
                }
            }
            FConfig::Table { values, default } => {
                values.iter().find(|(k, _)| *k == (i, j)).map(|&(_, v)| v).unwrap_or(*default)
            }
        }
    }

    fn from_param(v: Option<&Value>, seed: u64) -> Result<FConfig> {
        match v {
            None | Some(Value::Null) => Ok(FConfig::Seeded(seed)),
            Some(Value::String(s)) => match s.as_str() {
                "+" => Ok(FConfig::Constant(1)),
                "-" => Ok(FConfig::Constant(-1)),
                "checker" => Ok(FConfig::Checker),
                "seed" => Ok(FConfig::Seeded(seed)),
                _ => Err(Error::InvalidArgument(format!("unknown choice function {s:?}"))),
            },
            Some(Value::Object(m)) => {
                let default = m.get("default").and_then(Value::as_i64).unwrap_or(1) as i8;
                let mut values = Vec::new();
                if let Some(Value::Array(rows)) = m.get("values") {
                    for r in rows {
                        let a = r.as_array().filter(|a| a.len() == 3).ok_or_else(|| {
                            Error::InvalidArgument("table rows are [i, j, value]".into())
                        })?;
                        let g = |k: usize| a[k].as_i64().ok_or_else(|| Error::InvalidArgument("table entries are integers".into()));
                        values.push(((g(0)?, g(1)?), if g(2)? < 0 { -1 } else { 1 }));
                    }
                }
                Ok(FConfig::Table { values, default })
            }
            Some(_) => Err(Error::InvalidArgument("choice function must be a string or table".into())),
        }
    }
}

/// An underlying 4-regular grid of cells, some of which are holes.
pub trait CellLattice: Send + Sync {
    fn go(&self, c: FaceId, s: Side) -> FaceId;
    fn hole(&self, c: FaceId) -> bool;
}

type CellPred = Arc<dyn Fn(i64, i64) -> bool + Send + Sync>;

/// The integer plane with a hole predicate.
pub struct PlaneLattice {
    hole: CellPred,
}

impl CellLattice for PlaneLattice {
    fn go(&self, c: FaceId, s: Side) -> FaceId {
        let (dx, dy) = s.normal();
        c.offset(dx, dy)
    }

    fn hole(&self, c: FaceId) -> bool {
        c.z != 0 || c.tag != 0 || (self.hole)(c.x, c.y)
    }
}

/// A translation surface cut out of a lattice by holes: each maximal run of
/// cells between two holes is closed up into a street.
pub struct HoleMaze<L: CellLattice> {
    lattice: L,
    name: String,
    origin: FaceId,
    profile: MazeProfile,
}

const RUN_LIMIT: usize = 1 << 12;

impl<L: CellLattice> HoleMaze<L> {
    pub fn new(lattice: L, name: &str, origin: FaceId, profile: MazeProfile) -> HoleMaze<L> {
        assert!(!lattice.hole(origin), "origin of {name} is a hole");
        HoleMaze { lattice, name: name.to_string(), origin, profile }
    }
}

impl<L: CellLattice> Surface for HoleMaze<L> {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        if self.lattice.hole(f) {
            return None;
        }
        let back = s.opposite();
        let n = self.lattice.go(f, s);
        if !self.lattice.hole(n) {
            return Some((n, back));
        }
        // Wrap to the far end of the run.
        let mut cur = f;
        for _ in 0..RUN_LIMIT {
            let prev = self.lattice.go(cur, back);
            if self.lattice.hole(prev) {
                return Some((cur, back));
            }
            cur = prev;
        }
        panic!("{}: run through {f} is unbounded", self.name);
    }

    fn contains(&self, f: FaceId) -> bool {
        !self.lattice.hole(f)
    }

    fn origin(&self) -> FaceId {
        self.origin
    }

    fn profile(&self) -> MazeProfile {
        self.profile.clone()
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// A billiard region in the plane: member cells, walls everywhere else.
pub struct PlaneRegion {
    member: CellPred,
    name: String,
    origin: FaceId,
}

impl PlaneRegion {
    pub fn new(name: &str, origin: FaceId, member: CellPred) -> PlaneRegion {
        assert!(member(origin.x, origin.y), "origin of {name} outside the region");
        PlaneRegion { member, name: name.to_string(), origin }
    }

    pub fn is_member(&self, x: i64, y: i64) -> bool {
        (self.member)(x, y)
    }
}

impl Surface for PlaneRegion {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        if !self.contains(f) {
            return None;
        }
        let (dx, dy) = s.normal();
        let g = f.offset(dx, dy);
        if (self.member)(g.x, g.y) {
            Some((g, s.opposite()))
        } else {
            None
        }
    }

    fn contains(&self, f: FaceId) -> bool {
        f.z == 0 && f.tag == 0 && (self.member)(f.x, f.y)
    }

    fn origin(&self) -> FaceId {
        self.origin
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Rows 0 and 1 are paired alternately, columns are 2-cycles: every street
/// has length 2.
pub struct Shark;

impl Surface for Shark {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        if !self.contains(f) {
            return None;
        }
        let g = match s {
            Side::R | Side::L => {
                // Row 0 pairs {2k, 2k+1}, row 1 pairs {2k+1, 2k+2}.
                let left_member = (f.x - f.y).rem_euclid(2) == 0;
                FaceId::new(if left_member { f.x + 1 } else { f.x - 1 }, f.y)
            }
            Side::T | Side::B => FaceId::new(f.x, 1 - f.y),
        };
        Some((g, s.opposite()))
    }

    fn contains(&self, f: FaceId) -> bool {
        f.z == 0 && f.tag == 0 && (f.y == 0 || f.y == 1)
    }

    fn origin(&self) -> FaceId {
        FaceId::new(0, 0)
    }

    fn profile(&self) -> MazeProfile {
        MazeProfile { bound: Some(2), growth: GrowthClass::Linear }
    }

    fn name(&self) -> String {
        "shark".into()
    }
}

fn plane_maze(name: &str, origin: FaceId, bound: Option<u64>, growth: GrowthClass, hole: CellPred) -> HoleMaze<PlaneLattice> {
    HoleMaze::new(PlaneLattice { hole }, name, origin, MazeProfile { bound, growth })
}

/// Staircase of 1x2 rectangles `{(k,-k), (k+1,-k)}` (down) or
/// `{(k,k), (k+1,k)}` (up). Every street has length 2.
pub fn staircase(down: bool) -> HoleMaze<PlaneLattice> {
    let name = if down { "down-staircase" } else { "up-staircase" };
    plane_maze(
        name,
        FaceId::new(0, 0),
        Some(2),
        GrowthClass::Linear,
        Arc::new(move |x, y| {
            let s = if down { x + y } else { x - y };
            !(s == 0 || s == 1)
        }),
    )
}

/// 3x3 blocks with a central hole on the lattice 4Z^2, joined by single
/// connector cells. Streets have length 1 or 3.
pub fn maze3_holes() -> HoleMaze<PlaneLattice> {
    plane_maze(
        "maze3-holes",
        FaceId::new(0, 0),
        Some(3),
        GrowthClass::Quadratic,
        Arc::new(|x, y| {
            let (i, j) = (x.rem_euclid(4), y.rem_euclid(4));
            let block = i < 3 && j < 3 && !(i == 1 && j == 1);
            let connector = (i == 3 && j == 1) || (i == 1 && j == 3);
            !(block || connector)
        }),
    )
}

/// Hole rows of the two 4x4 tile types: column `i` has its hole in row `s[i]`.
pub const PLUS_TILE: [i64; 4] = [1, 3, 0, 2];
pub const MINUS_TILE: [i64; 4] = [2, 0, 3, 1];

/// The plane tiled by 4x4 blocks of type `+` or `-` chosen by `f`.
pub fn plusminus(f: FConfig) -> HoleMaze<PlaneLattice> {
    let origin = FaceId::new(0, 0);
    plane_maze(
        "plusminus-config",
        origin,
        Some(6),
        GrowthClass::Quadratic,
        Arc::new(move |x, y| {
            let (a, b) = (x.div_euclid(4), y.div_euclid(4));
            let rows = if f.value(a, b) > 0 { PLUS_TILE } else { MINUS_TILE };
            rows[x.rem_euclid(4) as usize] == y.rem_euclid(4)
        }),
    )
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

/// p x p blocks with hole cells `(i, q i mod p)`, the multiplier per block
/// being `q` (f = +1) or `q2` (f = -1). Streets have length at most `2p - 2`.
pub fn pq_config(p: u64, q: u64, q2: u64, f: FConfig) -> Result<HoleMaze<PlaneLattice>> {
    if p <= 2 || !is_prime(p) {
        return Err(Error::InvalidArgument(format!("p = {p} must be an odd prime")));
    }
    for (name, v) in [("q", q), ("q2", q2)] {
        if !is_prime(v) || v == p {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be a prime other than p")));
        }
    }
    let pi = p as i64;
    let (qa, qb) = (q as i64 % pi, q2 as i64 % pi);
    // Origin: a cell of block (0,0) off the hole in column 0 (row 0).
    let origin = FaceId::new(0, 1);
    Ok(plane_maze(
        "pq-config",
        origin,
        Some(2 * p - 2),
        GrowthClass::Quadratic,
        Arc::new(move |x, y| {
            let (a, b) = (x.div_euclid(pi), y.div_euclid(pi));
            let m = if f.value(a, b) > 0 { qa } else { qb };
            (m * x.rem_euclid(pi)).rem_euclid(pi) == y.rem_euclid(pi)
        }),
    ))
}

/// Blocks of the tree maze are addressed by reduced words in E, W, N, S,
/// packed base 5 with the last letter lowest (E=1, W=2, N=3, S=4).
pub struct TreeLattice {
    choice: FConfig,
}

const LETTERS: [(Side, u64); 4] = [(Side::R, 1), (Side::L, 2), (Side::T, 3), (Side::B, 4)];

fn letter_of(s: Side) -> u64 {
    LETTERS.iter().find(|(t, _)| *t == s).unwrap().1
}

fn inverse_letter(l: u64) -> u64 {
    match l {
        1 => 2,
        2 => 1,
        3 => 4,
        4 => 3,
        _ => 0,
    }
}

/// The neighbor block address in direction `s`; `None` past the deepest
/// address that fits in a `u64` (27 letters).
pub fn tree_move(word: u64, s: Side) -> Option<u64> {
    let l = letter_of(s);
    if word % 5 == inverse_letter(l) {
        Some(word / 5)
    } else {
        word.checked_mul(5).and_then(|w| w.checked_add(l))
    }
}

/// Number of letters in a packed word.
pub fn tree_depth(mut word: u64) -> usize {
    let mut d = 0;
    while word > 0 {
        word /= 5;
        d += 1;
    }
    d
}

impl CellLattice for TreeLattice {
    fn go(&self, c: FaceId, s: Side) -> FaceId {
        let (dx, dy) = s.normal();
        let (x, y) = (c.x + dx, c.y + dy);
        if (0..4).contains(&x) && (0..4).contains(&y) {
            FaceId::full(x, y, 0, c.tag)
        } else {
            // The tree is cut off at the deepest address; beyond it is a hole.
            match tree_move(c.tag, s) {
                Some(w) => FaceId::full(x.rem_euclid(4), y.rem_euclid(4), 0, w),
                None => FaceId::full(x.rem_euclid(4), y.rem_euclid(4), 1, 0),
            }
        }
    }

    fn hole(&self, c: FaceId) -> bool {
        if c.z != 0 || !(0..4).contains(&c.x) || !(0..4).contains(&c.y) {
            return true;
        }
        // A valid reduced word never has a letter followed by its inverse.
        let mut w = c.tag;
        while w > 0 {
            let (d, next) = (w % 5, (w / 5) % 5);
            if d == 0 || (next != 0 && inverse_letter(d) == next) {
                return true;
            }
            w /= 5;
        }
        let sign = self.choice.value(c.tag as i64, 0);
        let rows = if sign > 0 { PLUS_TILE } else { MINUS_TILE };
        rows[c.x as usize] == c.y
    }
}

/// 4x4 `+`/`-` blocks at the vertices of the 4-regular tree.
pub fn tree_maze(choice: FConfig) -> HoleMaze<TreeLattice> {
    HoleMaze::new(
        TreeLattice { choice },
        "tree-maze",
        // Column 0 always keeps row 0.
        FaceId::full(0, 0, 0, 0),
        MazeProfile { bound: Some(6), growth: GrowthClass::Exponential },
    )
}

/// The infinite horizontal cylinder of height 1.
pub fn corridor() -> HoleMaze<PlaneLattice> {
    plane_maze("corridor", FaceId::new(0, 0), None, GrowthClass::Linear, Arc::new(|_, y| y != 0))
}

pub fn polycube_corridor() -> Polycube {
    Polycube::new(PolycubeShape::Corridors, "polycube-corridor")
}

/// L-shapes `(v_i, h_i)` along a common bottom row. `nonneg[i mod n]` gives
/// `L_i` for `i >= 0` and `neg[(-1-i) mod n']` gives `L_i` for `i < 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LStripSpec {
    pub neg: Vec<(u32, u32)>,
    pub nonneg: Vec<(u32, u32)>,
}

impl LStripSpec {
    /// `L_i = pattern[i mod n]` for all `i`.
    pub fn periodic(pattern: &[(u32, u32)]) -> LStripSpec {
        let mut neg = pattern.to_vec();
        neg.reverse();
        LStripSpec { neg, nonneg: pattern.to_vec() }
    }

    /// The infinite L-strip: every L-shape is `(2, 2)`.
    pub fn infinite_l() -> LStripSpec {
        LStripSpec::periodic(&[(2, 2)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.neg.is_empty() || self.nonneg.is_empty() {
            return Err(Error::InvalidArgument("L-strip patterns must be nonempty".into()));
        }
        if self.neg.iter().chain(&self.nonneg).any(|&(v, h)| v < 2 || h < 2) {
            return Err(Error::InvalidArgument("L-shapes need v, h >= 2".into()));
        }
        Ok(())
    }

    pub fn shape(&self, i: i64) -> (u32, u32) {
        if i >= 0 {
            self.nonneg[(i as usize) % self.nonneg.len()]
        } else {
            self.neg[((-1 - i) as usize) % self.neg.len()]
        }
    }

    /// Left end `X_i` of `L_i`, with `X_0 = 0`.
    pub fn start(&self, i: i64) -> i64 {
        let period = |p: &[(u32, u32)]| p.iter().map(|&(_, h)| h as i64).sum::<i64>();
        if i >= 0 {
            let n = self.nonneg.len() as i64;
            let full = i / n;
            let part: i64 = self.nonneg[..(i % n) as usize].iter().map(|&(_, h)| h as i64).sum();
            full * period(&self.nonneg) + part
        } else {
            let k = -i; // L_{-1} .. L_{-k}
            let n = self.neg.len() as i64;
            let full = k / n;
            let part: i64 = self.neg[..(k % n) as usize].iter().map(|&(_, h)| h as i64).sum();
            -(full * period(&self.neg) + part)
        }
    }

    /// Index `i` of the L-shape whose bottom row contains column `x`.
    pub fn locate(&self, x: i64) -> i64 {
        // Estimate from the average width, then step.
        let avg = |p: &[(u32, u32)]| p.iter().map(|&(_, h)| h as i64).sum::<i64>() / p.len() as i64;
        let mut i = if x >= 0 { x / avg(&self.nonneg).max(1) } else { x / avg(&self.neg).max(1) - 1 };
        while self.start(i) > x {
            i -= 1;
        }
        while self.start(i + 1) <= x {
            i += 1;
        }
        i
    }

    pub fn member(&self, x: i64, y: i64) -> bool {
        if y == 0 {
            return true;
        }
        if y < 0 {
            return false;
        }
        let i = self.locate(x);
        self.start(i) == x && (y as u32) < self.shape(i).0
    }

    fn from_param(params: &Value) -> Result<LStripSpec> {
        let pairs = |key: &str| -> Result<Option<Vec<(u32, u32)>>> {
            match params.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => {
                    let rows: Vec<(u32, u32)> =
                        serde_json::from_value(v.clone()).map_err(|e| Error::InvalidArgument(format!("{key}: {e}")))?;
                    Ok(Some(rows))
                }
            }
        };
        let spec = if let Some(p) = pairs("pattern")? {
            LStripSpec::periodic(&p)
        } else {
            match (pairs("neg")?, pairs("nonneg")?) {
                (Some(neg), Some(nonneg)) => LStripSpec { neg, nonneg },
                (None, None) => LStripSpec::infinite_l(),
                _ => return Err(Error::InvalidArgument("give both neg and nonneg".into())),
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn l_strip(spec: LStripSpec) -> Result<PlaneRegion> {
    spec.validate()?;
    let s = Arc::new(spec);
    Ok(PlaneRegion::new("L-strip", FaceId::new(0, 0), Arc::new(move |x, y| s.member(x, y))))
}

/// Wind-tree table: `a x b` scatterers at the integer lattice, rescaled by
/// the common denominator so that scatterers are unions of unit cells.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindTreeSpec {
    pub a: BigRational,
    pub b: BigRational,
    /// Scatterer at `(3i, 3j)` removed where `f(i, j) = -1`.
    pub fconfig: Option<FConfig>,
}

/// Integer geometry of a rescaled wind-tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindTreeGrid {
    /// Lattice spacing after rescaling.
    pub l: i64,
    pub wa: i64,
    pub wb: i64,
}

impl WindTreeSpec {
    pub fn new(a: BigRational, b: BigRational) -> WindTreeSpec {
        WindTreeSpec { a, b, fconfig: None }
    }

    pub fn grid(&self) -> Result<WindTreeGrid> {
        let zero = BigRational::from_integer(BigInt::from(0));
        let one = BigRational::from_integer(BigInt::from(1));
        for v in [&self.a, &self.b] {
            if *v <= zero || *v >= one {
                return Err(Error::InvalidArgument("scatterer sides must lie in (0, 1)".into()));
            }
        }
        let l = self.a.denom().lcm(self.b.denom());
        let wa = (&self.a * BigRational::from_integer(l.clone())).to_integer();
        let wb = (&self.b * BigRational::from_integer(l.clone())).to_integer();
        let cv = |x: &BigInt| x.to_i64().filter(|v| v.abs() < 1 << 20).ok_or(Error::Overflow);
        Ok(WindTreeGrid { l: cv(&l)?, wa: cv(&wa)?, wb: cv(&wb)? })
    }
}

impl WindTreeGrid {
    /// `(lattice index, inside scatterer)` of a cell along one axis.
    pub fn axis(&self, c: i64, w: i64) -> (i64, bool) {
        let s = c + w / 2;
        (s.div_euclid(self.l), s.rem_euclid(self.l) < w)
    }

    pub fn obstacle(&self, x: i64, y: i64, f: Option<&FConfig>) -> bool {
        let (ux, ox) = self.axis(x, self.wa);
        let (uy, oy) = self.axis(y, self.wb);
        if !(ox && oy) {
            return false;
        }
        match f {
            Some(f) if ux.rem_euclid(3) == 0 && uy.rem_euclid(3) == 0 => f.value(ux / 3, uy / 3) > 0,
            _ => true,
        }
    }

    /// A free cell near the origin.
    pub fn free_cell(&self, f: Option<&FConfig>) -> (i64, i64) {
        for r in 0..(2 * self.l + 2) {
            for x in -r..=r {
                for y in -r..=r {
                    if !self.obstacle(x, y, f) {
                        return (x, y);
                    }
                }
            }
        }
        unreachable!("scatterers leave gaps")
    }
}

pub fn windtree(spec: &WindTreeSpec) -> Result<PlaneRegion> {
    let g = spec.grid()?;
    let f = spec.fconfig.clone();
    let (ox, oy) = g.free_cell(f.as_ref());
    Ok(PlaneRegion::new("windtree", FaceId::new(ox, oy), Arc::new(move |x, y| !g.obstacle(x, y, f.as_ref()))))
}

fn rational_param(params: &Value, key: &str, default: &str) -> Result<BigRational> {
    let s = match params.get(key) {
        None | Some(Value::Null) => default.to_string(),
        Some(Value::String(s)) => s.clone(),
        Some(v) => v.to_string(),
    };
    let q: crate::QuadRat = s.parse()?;
    q.as_rational().cloned().ok_or_else(|| Error::InvalidArgument(format!("{key} must be rational")))
}

fn uint_param(params: &Value, key: &str) -> Result<Option<u64>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_u64().map(Some).ok_or_else(|| Error::InvalidArgument(format!("{key} must be a nonnegative integer"))),
    }
}

/// Smallest prime other than the given ones.
fn other_prime(avoid: &[u64]) -> u64 {
    (2..).find(|&n| is_prime(n) && !avoid.contains(&n)).unwrap()
}

/// Lazy provider by family name.
pub fn provider(name: &str, params: &Value, seed: u64) -> Result<SurfaceRef> {
    let params = if params.is_null() { &Value::Object(Default::default()) } else { params };
    Ok(match name {
        "shark" => Arc::new(Shark),
        "down-staircase" => Arc::new(staircase(true)),
        "up-staircase" => Arc::new(staircase(false)),
        "maze3-holes" => Arc::new(maze3_holes()),
        "plusminus-config" => Arc::new(plusminus(FConfig::from_param(params.get("f"), seed)?)),
        "pq-config" => {
            let p = uint_param(params, "p")?.unwrap_or(5);
            let q = uint_param(params, "q")?.unwrap_or(3);
            let q2 = uint_param(params, "q2")?.unwrap_or_else(|| other_prime(&[p, q]));
            Arc::new(pq_config(p, q, q2, FConfig::from_param(params.get("f"), seed)?)?)
        }
        "tree-maze" => Arc::new(tree_maze(FConfig::from_param(params.get("choice"), seed)?)),
        "polycube-corridor" => Arc::new(polycube_corridor()),
        "corridor" => Arc::new(corridor()),
        "inf-L-strip" => Arc::new(l_strip(LStripSpec::infinite_l())?),
        "inf-L-strip-4copy" => Arc::new(four_copy(Arc::new(l_strip(LStripSpec::infinite_l())?))),
        "L-strip" => Arc::new(l_strip(LStripSpec::from_param(params)?)?),
        "L-strip-4copy" => Arc::new(four_copy(Arc::new(l_strip(LStripSpec::from_param(params)?)?))),
        "windtree" | "windtree-4copy" => {
            let mut spec = WindTreeSpec::new(rational_param(params, "a", "1/2")?, rational_param(params, "b", "1/2")?);
            if params.get("f").is_some_and(|v| !v.is_null()) {
                spec.fconfig = Some(FConfig::from_param(params.get("f"), seed)?);
            }
            let r = Arc::new(windtree(&spec)?);
            if name == "windtree" {
                r
            } else {
                Arc::new(four_copy(r))
            }
        }
        _ => return Err(Error::InvalidArgument(format!("unknown surface {name:?}"))),
    })
}

/// Outcome of an exhaustive street-bound check.
#[derive(Clone, Debug, Serialize)]
pub struct MazeBoundReport {
    pub pass: bool,
    pub declared: Option<u64>,
    pub radius: usize,
    pub faces: usize,
    pub streets: usize,
    pub max_length: usize,
    /// First street longer than the declared bound.
    pub witness: Option<Street>,
}

/// Checks every street meeting the P-ball of radius `r` around the origin
/// against the declared bound.
pub fn verify_maze_bound(s: &dyn Surface, r: usize) -> Result<MazeBoundReport> {
    let declared = s.profile().bound;
    let bound = declared.ok_or_else(|| Error::Precondition(format!("{} declares no street bound", s.name())))?;
    let ball = p_ball(s, s.origin(), r, 2_000_000)?;
    let sts = streets(s, Some(&ball))?;
    let max_length = sts.iter().map(|t| t.length).max().unwrap_or(0);
    let witness = sts.iter().find(|t| t.length as u64 > bound).cloned();
    Ok(MazeBoundReport {
        pass: witness.is_none(),
        declared,
        radius: r,
        faces: ball.len(),
        streets: sts.len(),
        max_length,
        witness,
    })
}

/// Wraps a provider and overrides its declared profile, for fault injection.
pub struct Mislabeled {
    pub inner: SurfaceRef,
    pub profile: MazeProfile,
}

impl Surface for Mislabeled {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        self.inner.glue(f, s)
    }
    fn contains(&self, f: FaceId) -> bool {
        self.inner.contains(f)
    }
    fn origin(&self) -> FaceId {
        self.inner.origin()
    }
    fn is_translation(&self) -> bool {
        self.inner.is_translation()
    }
    fn profile(&self) -> MazeProfile {
        self.profile.clone()
    }
    fn name(&self) -> String {
        format!("mislabeled({})", self.inner.name())
    }
}

/// Face counts of P-balls of radius `1..=n_max`.
pub fn ball_growth(s: &dyn Surface, n_max: usize, budget: usize) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        out.push((n, p_ball(s, s.origin(), n, budget)?.len()));
    }
    Ok(out)
}

/// Counts holes per row and column of block `(a, b)` of a pq-config.
pub fn pq_block_counts(p: u64, q: u64, q2: u64, f: &FConfig, a: i64, b: i64) -> Result<(Vec<usize>, Vec<usize>)> {
    let m = pq_config(p, q, q2, f.clone())?;
    let pi = p as i64;
    let mut rows = vec![0; p as usize];
    let mut cols = vec![0; p as usize];
    for i in 0..pi {
        for j in 0..pi {
            if !m.contains(FaceId::new(a * pi + i, b * pi + j)) {
                cols[i as usize] += 1;
                rows[j as usize] += 1;
            }
        }
    }
    Ok((rows, cols))
}

/// Explicit table helper: `f` on a window from a map.
pub fn table_config(values: &HashMap<(i64, i64), i8>, default: i8) -> FConfig {
    let mut v: Vec<((i64, i64), i8)> = values.iter().map(|(&k, &x)| (k, x)).collect();
    v.sort();
    FConfig::Table { values: v, default }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{street_of, StreetDir};

    fn sample_lengths(s: &dyn Surface, r: usize) -> Vec<usize> {
        let ball = p_ball(s, s.origin(), r, 1_000_000).unwrap();
        let mut v: Vec<usize> = streets(s, Some(&ball)).unwrap().iter().map(|t| t.length).collect();
        v.sort();
        v.dedup();
        v
    }

    #[test]
    fn shark_and_staircases() {
        assert_eq!(sample_lengths(&Shark, 10), vec![2]);
        assert_eq!(sample_lengths(&staircase(true), 10), vec![2]);
        assert_eq!(sample_lengths(&staircase(false), 10), vec![2]);
    }

    #[test]
    fn hole_mazes() {
        assert_eq!(sample_lengths(&maze3_holes(), 6), vec![1, 3]);
        let pm = plusminus(FConfig::Seeded(3));
        assert!(sample_lengths(&pm, 6).iter().all(|&l| (1..=6).contains(&l)));
        let pq = pq_config(5, 3, 2, FConfig::Seeded(9)).unwrap();
        assert!(sample_lengths(&pq, 5).iter().all(|&l| l <= 8));
        assert!(pq_config(4, 3, 2, FConfig::Constant(1)).is_err());
        assert!(pq_config(5, 5, 2, FConfig::Constant(1)).is_err());
    }

    #[test]
    fn pq_blocks_have_one_hole_per_line() {
        for (a, b) in [(0, 0), (1, -2), (3, 7)] {
            let (rows, cols) = pq_block_counts(5, 3, 2, &FConfig::Seeded(1), a, b).unwrap();
            assert!(rows.iter().chain(&cols).all(|&c| c == 1));
        }
    }

    #[test]
    fn tree_words() {
        let w = tree_move(0, Side::R).unwrap();
        assert_eq!(w, 1);
        assert_eq!(tree_move(w, Side::L), Some(0));
        let w2 = tree_move(w, Side::T).unwrap();
        assert_eq!(tree_depth(w2), 2);
        assert_eq!(tree_move(w2, Side::B), Some(w));
        let t = tree_maze(FConfig::Seeded(5));
        assert!(sample_lengths(&t, 4).iter().all(|&l| l <= 6));
    }

    #[test]
    fn polycube_street_lengths() {
        let p = polycube_corridor();
        let v = sample_lengths(&p, 3);
        assert!(v.iter().all(|l| [4, 12, 20].contains(l)), "{v:?}");
    }

    #[test]
    fn l_strip_geometry() {
        let spec = LStripSpec { neg: vec![(2, 2)], nonneg: vec![(3, 3), (2, 4)] };
        assert_eq!(spec.start(0), 0);
        assert_eq!(spec.start(1), 3);
        assert_eq!(spec.start(2), 7);
        assert_eq!(spec.start(-1), -2);
        assert_eq!(spec.locate(5), 1);
        assert_eq!(spec.locate(-1), -1);
        assert!(spec.member(0, 2) && !spec.member(0, 3));
        assert!(spec.member(3, 1) && !spec.member(3, 2));
        assert!(!spec.member(1, 1));
    }

    #[test]
    fn windtree_cells() {
        let spec = WindTreeSpec::new(BigRational::new(1.into(), 2.into()), BigRational::new(1.into(), 2.into()));
        let g = spec.grid().unwrap();
        assert_eq!((g.l, g.wa, g.wb), (2, 1, 1));
        assert!(g.obstacle(0, 0, None) && !g.obstacle(1, 0, None));
        let spec = WindTreeSpec::new(BigRational::new(3.into(), 4.into()), BigRational::new(3.into(), 4.into()));
        let g = spec.grid().unwrap();
        assert!(g.obstacle(-1, 1, None) && !g.obstacle(2, 0, None));
    }

    #[test]
    fn corridor_is_infinite_horizontally() {
        let c = corridor();
        assert!(street_of(&c, c.origin(), StreetDir::Horizontal, 100).is_err());
        assert_eq!(street_of(&c, c.origin(), StreetDir::Vertical, 100).unwrap().length, 1);
    }

    #[test]
    fn mislabeled_provider_fails_bound() {
        let bad = Mislabeled {
            inner: Arc::new(maze3_holes()),
            profile: MazeProfile { bound: Some(2), growth: GrowthClass::Quadratic },
        };
        let rep = verify_maze_bound(&bad, 4).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.witness.unwrap().length, 3);
    }
}
