//! JSON surface files.
//!
//! ```json
//! {"type":"finite","faces":["0:0","1:0"],"right":{"0:0":"1:0","1:0":"0:0"},
//!  "top":{"0:0":"0:0","1:0":"1:0"},"rotation":{},"labels":{"0:0/B":"h1"}}
//! {"type":"generator","name":"shark","params":{},"seed":7}
//! ```
//!
//! Rotation tags are keyed `face/side` and given in degrees; the listed side
//! is glued to the opposite side of the target rotated counterclockwise by the
//! tag. Sides absent from all maps are walls.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{build_named, gluing_rotation, FaceId, FiniteSurface, Side, Surface, SurfaceRef};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SurfaceFile {
    Finite {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        faces: Vec<FaceId>,
        right: BTreeMap<FaceId, FaceId>,
        top: BTreeMap<FaceId, FaceId>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        left: BTreeMap<FaceId, FaceId>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        bottom: BTreeMap<FaceId, FaceId>,
        #[serde(default)]
        rotation: BTreeMap<String, u32>,
        #[serde(default)]
        labels: BTreeMap<String, String>,
    },
    Generator {
        name: String,
        #[serde(default)]
        params: serde_json::Value,
        #[serde(default)]
        seed: u64,
    },
}

fn side_key(f: FaceId, s: Side) -> String {
    format!("{f}/{}", s.letter())
}

fn parse_side_key(k: &str) -> Result<(FaceId, Side)> {
    let bad = || Error::Schema(format!("bad face/side key {k:?}"));
    let (f, s) = k.rsplit_once('/').ok_or_else(bad)?;
    let mut cs = s.chars();
    let side = cs.next().and_then(Side::from_letter).ok_or_else(bad)?;
    if cs.next().is_some() {
        return Err(bad());
    }
    Ok((f.parse()?, side))
}

/// Serializes a finite surface.
pub fn surface_to_json(s: &dyn Surface) -> Result<String> {
    let faces = s.faces().ok_or_else(|| Error::Unsupported("lazy surfaces are saved as generator specs".into()))?;
    let mut maps: [BTreeMap<FaceId, FaceId>; 4] = Default::default();
    let mut rotation = BTreeMap::new();
    let mut labels = BTreeMap::new();
    let translation = s.is_translation();
    for &f in &faces {
        for side in Side::ALL {
            if let Some(l) = s.label(f, side) {
                labels.insert(side_key(f, side), l);
            }
            let Some((g, t)) = s.glue(f, side) else { continue };
            if translation && matches!(side, Side::L | Side::B) {
                continue;
            }
            maps[side.index() as usize].insert(f, g);
            let r = gluing_rotation(side, t);
            if r != 0 {
                rotation.insert(side_key(f, side), r as u32 * 90);
            }
        }
    }
    let [right, top, left, bottom] = maps;
    let file = SurfaceFile::Finite { name: Some(s.name()), faces, right, top, left, bottom, rotation, labels };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Schema(e.to_string()))
}

/// Parses a surface file into a surface.
pub fn surface_from_json(text: &str) -> Result<SurfaceRef> {
    let file: SurfaceFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    match file {
        SurfaceFile::Generator { name, params, seed } => build_named(&name, &params, seed),
        SurfaceFile::Finite { name, faces, right, top, left, bottom, rotation, labels } => {
            let mut rot = BTreeMap::new();
            for (k, deg) in rotation {
                if deg % 90 != 0 {
                    return Err(Error::Schema(format!("rotation {deg} is not a quarter turn")));
                }
                rot.insert(parse_side_key(&k)?, (deg / 90) as i32);
            }
            let mut pairs = Vec::new();
            for (side, map) in [(Side::R, &right), (Side::T, &top), (Side::L, &left), (Side::B, &bottom)] {
                for (&f, &g) in map {
                    let r = rot.get(&(f, side)).copied().unwrap_or(0);
                    pairs.push(((f, side), (g, side.opposite().rotate(r))));
                }
            }
            let mut lab = std::collections::HashMap::new();
            for (k, v) in labels {
                lab.insert(parse_side_key(&k)?, v);
            }
            let s = FiniteSurface::from_gluings(name.as_deref().unwrap_or("file"), faces, &pairs)?;
            Ok(Arc::new(s.with_labels(lab)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{cube, l_surface, street_lengths};

    #[test]
    fn round_trip_l_surface() {
        let l = l_surface();
        let text = surface_to_json(&l).unwrap();
        let back = surface_from_json(&text).unwrap();
        assert_eq!(street_lengths(back.as_ref(), None).unwrap(), street_lengths(&l, None).unwrap());
        assert_eq!(back.label(FaceId::new(0, 1), Side::T).as_deref(), Some("h1"));
        assert_eq!(surface_to_json(back.as_ref()).unwrap(), text);
    }

    #[test]
    fn round_trip_rotation_surface() {
        let c = cube();
        let text = surface_to_json(&c).unwrap();
        let back = surface_from_json(&text).unwrap();
        assert!(!back.is_translation());
        for f in c.faces().unwrap() {
            for s in Side::ALL {
                assert_eq!(back.glue(f, s), c.glue(f, s));
            }
        }
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(surface_from_json("{\"type\":\"bogus\"}"), Err(Error::Schema(_))));
        let gen = surface_from_json("{\"type\":\"generator\",\"name\":\"shark\"}").unwrap();
        assert_eq!(gen.name(), "shark");
    }
}
