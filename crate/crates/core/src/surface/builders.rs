//! Finite named surfaces and the `build_named` dispatcher.

use std::collections::HashMap;
use std::sync::Arc;

use serde_json::Value;

use super::{four_copy, FaceId, FiniteSurface, Polycube, PolycubeShape, Side, SurfaceRef};
use crate::generators::{self, GrowthClass, MazeProfile};
use crate::{Error, Result};

/// The three-square L-surface with its edge labels `h1..h3`, `v1..v3`.
///
/// Faces: `0:0` bottom left, `1:0` right arm, `0:1` top arm.
pub fn l_surface() -> FiniteSurface {
    let bl = FaceId::new(0, 0);
    let r = FaceId::new(1, 0);
    let t = FaceId::new(0, 1);
    let s = FiniteSurface::from_permutations("L-surface", &[(bl, r), (r, bl), (t, t)], &[(bl, t), (t, bl), (r, r)])
        .expect("L-surface gluings");
    let mut labels = HashMap::new();
    // (bottom, top, left, right) per face.
    for (f, [b, tp, l, rt]) in [(bl, ["h1", "h3", "v1", "v3"]), (r, ["h2", "h2", "v3", "v1"]), (t, ["h3", "h1", "v2", "v2"])] {
        labels.insert((f, Side::B), b.to_string());
        labels.insert((f, Side::T), tp.to_string());
        labels.insert((f, Side::L), l.to_string());
        labels.insert((f, Side::R), rt.to_string());
    }
    s.with_labels(labels).with_profile(MazeProfile { bound: Some(2), growth: GrowthClass::Finite })
}

/// The `w x h` square torus.
pub fn torus(w: i64, h: i64) -> FiniteSurface {
    let mut right = Vec::new();
    let mut top = Vec::new();
    for x in 0..w {
        for y in 0..h {
            right.push((FaceId::new(x, y), FaceId::new((x + 1) % w, y)));
            top.push((FaceId::new(x, y), FaceId::new(x, (y + 1) % h)));
        }
    }
    FiniteSurface::from_permutations(&format!("torus-{w}x{h}"), &right, &top).expect("torus gluings")
}

/// A billiard region given by its cells; shared sides are glued, the rest
/// are walls.
pub fn region(name: &str, cells: &[(i64, i64)]) -> FiniteSurface {
    let faces: Vec<FaceId> = cells.iter().map(|&(x, y)| FaceId::new(x, y)).collect();
    let set: std::collections::HashSet<FaceId> = faces.iter().copied().collect();
    let mut pairs = Vec::new();
    for &f in &faces {
        if set.contains(&f.offset(1, 0)) {
            pairs.push(((f, Side::R), (f.offset(1, 0), Side::L)));
        }
        if set.contains(&f.offset(0, 1)) {
            pairs.push(((f, Side::T), (f.offset(0, 1), Side::B)));
        }
    }
    FiniteSurface::from_gluings(name, faces, &pairs).expect("region gluings")
}

/// The unit square as a billiard table.
pub fn square_region() -> FiniteSurface {
    region("square", &[(0, 0)])
}

/// The six-cell staircase billiard whose unfolding is the snake-cross surface.
pub fn snake_region() -> FiniteSurface {
    region("snake", &[(0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (3, 2)])
}

/// The cube surface as a rotation surface.
pub fn cube() -> Polycube {
    Polycube::new(PolycubeShape::Cube, "cube")
}

/// A 13-square surface with gaps and walls whose horizontal streets have
/// lengths {1,1,2,3,3,3} and vertical streets {1,3,4,5}.
pub fn gap_wall_surface() -> FiniteSurface {
    let f = FaceId::new;
    let mut right = Vec::new();
    for y in 2..=4 {
        for x in 0..3 {
            right.push((f(x, y), f((x + 1) % 3, y)));
        }
    }
    right.push((f(0, 1), f(0, 1)));
    right.push((f(2, 1), f(2, 1)));
    right.push((f(0, 0), f(1, 0)));
    right.push((f(1, 0), f(0, 0)));
    let mut top = Vec::new();
    let cycles: [&[(i64, i64)]; 4] = [
        &[(0, 0), (0, 1), (0, 2), (0, 3), (0, 4)],
        &[(1, 0), (1, 2), (1, 3), (1, 4)],
        &[(2, 1), (2, 3), (2, 4)],
        &[(2, 2)],
    ];
    for c in cycles {
        for i in 0..c.len() {
            let a = c[i];
            let b = c[(i + 1) % c.len()];
            top.push((f(a.0, a.1), f(b.0, b.1)));
        }
    }
    FiniteSurface::from_permutations("gap-wall-13", &right, &top).expect("gap surface gluings")
}

/// Names accepted by [`build_named`].
pub fn named_list() -> Vec<&'static str> {
    vec![
        "L-surface",
        "torus",
        "square",
        "cube",
        "cube-4copy",
        "snake",
        "snake-cross",
        "gap-wall-13",
        "DS-L-surface",
        "shark",
        "down-staircase",
        "up-staircase",
        "maze3-holes",
        "plusminus-config",
        "pq-config",
        "tree-maze",
        "polycube-corridor",
        "corridor",
        "inf-L-strip",
        "inf-L-strip-4copy",
        "L-strip",
        "L-strip-4copy",
        "windtree",
        "windtree-4copy",
    ]
}

fn int_param(params: &Value, key: &str, default: i64) -> Result<i64> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v.as_i64().ok_or_else(|| Error::InvalidArgument(format!("parameter {key} must be an integer"))),
    }
}

/// Builds a surface or region by name.
///
/// Finite surfaces come back as explicit gluing tables; infinite families
/// are lazy providers from [`generators::provider`], keyed by `seed` where
/// they involve a choice function.
pub fn build_named(name: &str, params: &Value, seed: u64) -> Result<SurfaceRef> {
    Ok(match name {
        "L-surface" => Arc::new(l_surface()),
        "torus" => {
            let w = int_param(params, "w", 1)?;
            let h = int_param(params, "h", 1)?;
            if w < 1 || h < 1 {
                return Err(Error::InvalidArgument("torus needs w, h >= 1".into()));
            }
            Arc::new(torus(w, h))
        }
        "square" => Arc::new(square_region()),
        "cube" => Arc::new(cube()),
        "cube-4copy" => {
            let fc = four_copy(Arc::new(cube()));
            let faces = super::Surface::faces(&fc).expect("finite");
            Arc::new(FiniteSurface::snapshot(&fc, &faces)?.with_name("cube-4copy"))
        }
        "snake" => Arc::new(snake_region()),
        "snake-cross" => {
            let fc = four_copy(Arc::new(snake_region()));
            let faces = super::Surface::faces(&fc).expect("finite");
            Arc::new(FiniteSurface::snapshot(&fc, &faces)?.with_name("snake-cross"))
        }
        "gap-wall-13" => Arc::new(gap_wall_surface()),
        "DS-L-surface" => {
            let l: SurfaceRef = Arc::new(l_surface());
            let ds = crate::cylinders::subdivide(l, 1, 1)?;
            let faces = super::Surface::faces(&ds).expect("finite");
            Arc::new(FiniteSurface::snapshot(&ds, &faces)?.with_name("DS-L-surface"))
        }
        _ => generators::provider(name, params, seed)?,
    })
}
