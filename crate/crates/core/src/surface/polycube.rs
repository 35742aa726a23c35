//! Boundary surfaces of polycubes (unions of unit cubes).
//!
//! A face is a pair (solid cube, outward normal) whose neighbor cube in the
//! normal direction is empty. Walking off a face along one of its axes
//! crosses a concave edge (the cube diagonally ahead and above is solid), a
//! flat edge (the cube ahead is solid) or a convex edge, in that order. This
//! extends the cube-net convention: a street goes straight across every edge.

use super::{FaceId, Side, Surface};
use crate::generators::{GrowthClass, MazeProfile};

type V3 = [i64; 3];

const NORMALS: [V3; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

/// Local frame `(u, v)` per normal with `u x v = n`.
const FRAMES: [(V3, V3); 6] = [
    ([0, 1, 0], [0, 0, 1]),
    ([0, 0, 1], [0, 1, 0]),
    ([0, 0, 1], [1, 0, 0]),
    ([1, 0, 0], [0, 0, 1]),
    ([1, 0, 0], [0, 1, 0]),
    ([0, 1, 0], [1, 0, 0]),
];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn neg(a: V3) -> V3 {
    [-a[0], -a[1], -a[2]]
}

fn normal_index(n: V3) -> u64 {
    NORMALS.iter().position(|&m| m == n).expect("axis vector") as u64
}

/// 3D direction of a side of the face with normal index `k`.
fn side_vector(k: usize, s: Side) -> V3 {
    let (u, v) = FRAMES[k];
    match s {
        Side::R => u,
        Side::T => v,
        Side::L => neg(u),
        Side::B => neg(v),
    }
}

fn side_for(k: usize, d: V3) -> Side {
    Side::ALL.into_iter().find(|&s| side_vector(k, s) == d).expect("direction in face plane")
}

/// Which unit cubes are solid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PolycubeShape {
    /// A single unit cube at the origin.
    Cube,
    /// 3x3x3 cubes centered on 6Z^3 joined by 1x1x3 corridors.
    Corridors,
    /// An explicit finite list of cubes.
    Cubes(Vec<V3>),
}

impl PolycubeShape {
    pub fn solid(&self, c: V3) -> bool {
        match self {
            PolycubeShape::Cube => c == [0, 0, 0],
            PolycubeShape::Corridors => {
                // Residues centered in -2..=3.
                let r: Vec<i64> = c.iter().map(|&x| (x + 2).rem_euclid(6) - 2).collect();
                if r.iter().all(|x| x.abs() <= 1) {
                    return true;
                }
                let zeros = r.iter().filter(|&&x| x == 0).count();
                zeros == 2 && r.iter().any(|x| x.abs() >= 2)
            }
            PolycubeShape::Cubes(v) => v.contains(&c),
        }
    }
}

/// The boundary surface of a polycube.
#[derive(Clone, Debug)]
pub struct Polycube {
    shape: PolycubeShape,
    name: String,
}

impl Polycube {
    pub fn new(shape: PolycubeShape, name: &str) -> Polycube {
        Polycube { shape, name: name.to_string() }
    }

    pub fn face(c: V3, normal: V3) -> FaceId {
        FaceId::full(c[0], c[1], c[2], normal_index(normal))
    }

    fn decode(f: FaceId) -> Option<(V3, usize)> {
        if f.tag >= 6 {
            return None;
        }
        Some(([f.x, f.y, f.z], f.tag as usize))
    }
}

impl Surface for Polycube {
    fn glue(&self, f: FaceId, s: Side) -> Option<(FaceId, Side)> {
        let (c, k) = Polycube::decode(f)?;
        let n = NORMALS[k];
        let d = side_vector(k, s);
        let ahead_up = add(add(c, d), n);
        let ahead = add(c, d);
        let (cube, normal, motion) = if self.shape.solid(ahead_up) {
            (ahead_up, neg(d), n)
        } else if self.shape.solid(ahead) {
            (ahead, n, d)
        } else {
            (c, d, neg(n))
        };
        let k2 = normal_index(normal) as usize;
        let entered = side_for(k2, neg(motion));
        Some((Polycube::face(cube, normal), entered))
    }

    fn contains(&self, f: FaceId) -> bool {
        match Polycube::decode(f) {
            Some((c, k)) => self.shape.solid(c) && !self.shape.solid(add(c, NORMALS[k])),
            None => false,
        }
    }

    fn faces(&self) -> Option<Vec<FaceId>> {
        let cubes: Vec<V3> = match &self.shape {
            PolycubeShape::Cube => vec![[0, 0, 0]],
            PolycubeShape::Cubes(v) => v.clone(),
            PolycubeShape::Corridors => return None,
        };
        let mut out = Vec::new();
        for c in cubes {
            for n in NORMALS {
                let f = Polycube::face(c, n);
                if self.contains(f) {
                    out.push(f);
                }
            }
        }
        out.sort();
        out.dedup();
        Some(out)
    }

    fn origin(&self) -> FaceId {
        match &self.shape {
            PolycubeShape::Cubes(v) => Polycube::face(v[0], [0, 0, 1]),
            // Top face of the origin block, off the corridor attachment.
            PolycubeShape::Corridors => Polycube::face([1, 1, 1], [0, 0, 1]),
            PolycubeShape::Cube => Polycube::face([0, 0, 0], [0, 0, 1]),
        }
    }

    fn is_translation(&self) -> bool {
        false
    }

    fn profile(&self) -> MazeProfile {
        match self.shape {
            PolycubeShape::Corridors => MazeProfile { bound: Some(20), growth: GrowthClass::Cubic },
            _ => MazeProfile { bound: None, growth: GrowthClass::Unknown },
        }
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{street_lengths, validate};

    #[test]
    fn frames_are_right_handed() {
        for (k, &(u, v)) in FRAMES.iter().enumerate() {
            let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            assert_eq!(cross, NORMALS[k]);
        }
    }

    #[test]
    fn unit_cube_streets() {
        let c = Polycube::new(PolycubeShape::Cube, "cube");
        let faces = c.faces().unwrap();
        assert_eq!(faces.len(), 6);
        validate(&c, &faces).unwrap();
        let (h, v) = street_lengths(&c, None).unwrap();
        assert!(h.iter().chain(&v).all(|&l| l == 4));
    }

    #[test]
    fn l_tricube_is_consistent() {
        let c = Polycube::new(PolycubeShape::Cubes(vec![[0, 0, 0], [1, 0, 0], [0, 1, 0]]), "tricube");
        let faces = c.faces().unwrap();
        assert_eq!(faces.len(), 14);
        validate(&c, &faces).unwrap();
    }
}
