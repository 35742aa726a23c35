//! The 4-copy construction.
//!
//! A billiard region (translation gluings plus walls) is unfolded by
//! reflection: each face gets four copies indexed by the reflection class
//! `{id, flip-x, flip-y, flip-xy}` and a wall crossing moves to the mirrored
//! copy of the same face. A rotation-tagged surface is unfolded by holonomy:
//! each face gets four copies indexed by a quarter-turn count, and rotated
//! gluings are absorbed into the index.

use super::{FaceId, Side, Surface, SurfaceRef};
use crate::generators::MazeProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FourCopyMode {
    Reflection,
    Rotation,
}

/// Lazy 4-fold translation cover of a region or a rotation surface.
pub struct FourCopy {
    inner: SurfaceRef,
    mode: FourCopyMode,
}

pub const FLIP_X: u8 = 1;
pub const FLIP_Y: u8 = 2;

/// Unfolds `s`. Translation inputs (walls allowed) use reflection classes,
/// anything with rotated gluings uses quarter-turn copies.
pub fn four_copy(s: SurfaceRef) -> FourCopy {
    let mode = if s.is_translation() { FourCopyMode::Reflection } else { FourCopyMode::Rotation };
    FourCopy { inner: s, mode }
}

impl FourCopy {
    pub fn mode(&self) -> FourCopyMode {
        self.mode
    }

    pub fn inner(&self) -> &SurfaceRef {
        &self.inner
    }

    /// Copy `class` of an inner face.
    pub fn lift(&self, f: FaceId, class: u8) -> FaceId {
        let tag = f.tag.checked_mul(4).expect("face tag too large for 4-copy") + (class % 4) as u64;
        f.with_tag(tag)
    }

    /// Inner face and class (reflection bits, or quarter turns) of a copy.
    pub fn fold(&self, f: FaceId) -> (FaceId, u8) {
        (f.with_tag(f.tag / 4), (f.tag % 4) as u8)
    }

    /// Maps a point of copy `f` to the inner face.
    pub fn fold_point<T: Clone + std::ops::Sub<Output = T>>(&self, f: FaceId, x: T, y: T, one: T) -> (FaceId, T, T) {
        let (g, c) = self.fold(f);
        match self.mode {
            FourCopyMode::Reflection => {
                let x = if c & FLIP_X != 0 { one.clone() - x } else { x };
                let y = if c & FLIP_Y != 0 { one - y } else { y };
                (g, x, y)
            }
            FourCopyMode::Rotation => {
                // Copy frame rotated by c quarter turns relative to the face.
                let (mut x, mut y) = (x, y);
                for _ in 0..c {
                    let nx = one.clone() - y.clone();
                    y = x;
                    x = nx;
                }
                (g, x, y)
            }
        }
    }
}

impl Surface for FourCopy {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        let (g, c) = self.fold(f);
        if !self.inner.contains(g) {
            return None;
        }
        match self.mode {
            FourCopyMode::Reflection => {
                let flip = if s.is_vertical() { FLIP_X } else { FLIP_Y };
                let o = if c & flip != 0 { s.opposite() } else { s };
                match self.inner.glue(g, o) {
                    Some((h, _)) => Some((self.lift(h, c), s.opposite())),
                    None => Some((self.lift(g, c ^ flip), s.opposite())),
                }
            }
            FourCopyMode::Rotation => {
                // Copy side s is inner side s rotated by c.
                let o = s.rotate(c as i32);
                let (h, o2) = self.inner.glue(g, o)?;
                let entered = s.opposite();
                let r = (o2.index() as i32 - entered.index() as i32).rem_euclid(4) as u8;
                Some((self.lift(h, r), entered))
            }
        }
    }

    fn contains(&self, f: FaceId) -> bool {
        self.inner.contains(self.fold(f).0)
    }

    fn faces(&self) -> Option<Vec<FaceId>> {
        let inner = self.inner.faces()?;
        let mut out: Vec<FaceId> = inner.iter().flat_map(|&f| (0..4).map(move |c| (f, c))).map(|(f, c)| self.lift(f, c)).collect();
        out.sort();
        Some(out)
    }

    fn origin(&self) -> FaceId {
        self.lift(self.inner.origin(), 0)
    }

    fn profile(&self) -> MazeProfile {
        self.inner.profile()
    }

    fn name(&self) -> String {
        format!("4copy({})", self.inner.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{cube, snake_region, square_region, street_lengths, street_lcm, validate};
    use std::sync::Arc;

    #[test]
    fn square_unfolds_to_two_by_two_torus() {
        let fc = four_copy(Arc::new(square_region()));
        let faces = fc.faces().unwrap();
        assert_eq!(faces.len(), 4);
        validate(&fc, &faces).unwrap();
        assert_eq!(street_lengths(&fc, None).unwrap(), (vec![2, 2], vec![2, 2]));
    }

    #[test]
    fn cube_cover() {
        let fc = four_copy(Arc::new(cube()));
        let faces = fc.faces().unwrap();
        assert_eq!(faces.len(), 24);
        validate(&fc, &faces).unwrap();
        assert_eq!(street_lcm(&fc, None).unwrap(), 4);
    }

    #[test]
    fn snake_cross() {
        let fc = four_copy(Arc::new(snake_region()));
        assert_eq!(fc.faces().unwrap().len(), 24);
        let (h, v) = street_lengths(&fc, None).unwrap();
        assert!(h.iter().chain(&v).all(|&l| l == 2 || l == 4));
        assert_eq!(street_lcm(&fc, None).unwrap(), 4);
    }
}
