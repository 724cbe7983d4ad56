//! Procedural part-labeled shape families with named keypoints.
//!
//! Every shape in a family is built from the same parts in the same frame,
//! so a keypoint name identifies corresponding locations across shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sdf::{Part, Primitive, Union, Vec3};
use crate::error::{Error, Result};
use crate::transfer::KeypointSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Two overlapping spheres: body and head.
    Sphere,
    /// Seat, back, four legs and optional arms.
    Chair,
    /// Top and four legs.
    Table,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sphere => "proc-sphere",
            Self::Chair => "proc-chair",
            Self::Table => "proc-table",
        }
    }

    pub fn parts(self) -> usize {
        match self {
            Self::Sphere | Self::Table => 2,
            Self::Chair => 4,
        }
    }

    pub fn part_names(self) -> &'static [&'static str] {
        match self {
            Self::Sphere => &["body", "head"],
            Self::Chair => &["seat", "back", "legs", "arms"],
            Self::Table => &["top", "legs"],
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proc-sphere" | "sphere" => Ok(Self::Sphere),
            "proc-chair" | "chair" => Ok(Self::Chair),
            "proc-table" | "table" => Ok(Self::Table),
            _ => Err(Error::config(format!(
                "unknown shape family {s:?} (proc-sphere|proc-chair|proc-table)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One synthetic shape: labeled primitives, the structural parameters that
/// produced them, and keypoints at part anchors.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub family: Option<Family>,
    pub parts: usize,
    pub union: Union,
    pub params: Vec<(&'static str, f64)>,
    pub keypoints: KeypointSet,
}

impl SynthSpec {
    /// A spec made of explicit primitives without keypoints.
    pub fn from_parts(parts: usize, union: Union) -> Result<Self> {
        let s = Self {
            family: None,
            parts,
            union,
            params: Vec::new(),
            keypoints: KeypointSet::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.union.parts.is_empty() {
            return Err(Error::domain("shape has no primitives"));
        }
        for p in &self.union.parts {
            if p.label >= self.parts {
                return Err(Error::domain(format!("part label {} out of range 0..{}", p.label, self.parts)));
            }
            let ok = match p.primitive {
                Primitive::Box { half, .. } => half.iter().all(|&h| h.is_finite() && h > 0.0),
                Primitive::Capsule { radius, a, b } => {
                    radius.is_finite() && radius > 0.0 && a.iter().chain(&b).all(|v| v.is_finite())
                }
            };
            if !ok {
                return Err(Error::domain(format!("degenerate primitive {:?}", p.primitive)));
            }
        }
        Ok(())
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }
}

fn part(primitive: Primitive, label: usize) -> Part {
    Part { primitive, label }
}

fn kp(k: &mut KeypointSet, name: &str, p: Vec3) {
    k.push(name, p).expect("keypoint names are unique per family");
}

/// Shape `index` of a family; deterministic in `(seed, index)`.
pub fn family_shape(family: Family, index: usize, seed: u64) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    match family {
        Family::Sphere => sphere(&mut rng),
        Family::Chair => chair(&mut rng),
        Family::Table => table(&mut rng),
    }
}

fn sphere(rng: &mut ChaCha8Rng) -> SynthSpec {
    let r0 = rng.random_range(0.35..0.48);
    let y0 = rng.random_range(-0.35..-0.25);
    let r1 = rng.random_range(0.2..0.3);
    let x1 = rng.random_range(-0.06..0.06);
    let y1 = y0 + r0 + 0.5 * r1;
    let union = Union {
        parts: vec![
            part(Primitive::sphere([0.0, y0, 0.0], r0), 0),
            part(Primitive::sphere([x1, y1, 0.0], r1), 1),
        ],
    };
    let mut k = KeypointSet::default();
    kp(&mut k, "base", [0.0, y0 - r0, 0.0]);
    kp(&mut k, "body_front", [0.0, y0, r0]);
    kp(&mut k, "body_back", [0.0, y0, -r0]);
    kp(&mut k, "body_left", [-r0, y0, 0.0]);
    kp(&mut k, "body_right", [r0, y0, 0.0]);
    kp(&mut k, "head_top", [x1, y1 + r1, 0.0]);
    kp(&mut k, "head_front", [x1, y1, r1]);
    SynthSpec {
        family: Some(Family::Sphere),
        parts: 2,
        union,
        params: vec![("body_radius", r0), ("body_y", y0), ("head_radius", r1), ("head_x", x1)],
        keypoints: k,
    }
}

/// Four capsule legs under a slab of half extents `(w, ·, d)` whose
/// underside is at `top`.
fn legs(rng: &mut ChaCha8Rng, w: f64, d: f64, top: f64, label: usize, parts: &mut Vec<Part>, k: &mut KeypointSet) {
    let r = rng.random_range(0.025..0.04);
    let inset = rng.random_range(0.05..0.08);
    for (name, sx, sz) in [("front_left", -1.0, 1.0), ("front_right", 1.0, 1.0), ("back_left", -1.0, -1.0), ("back_right", 1.0, -1.0)] {
        let x = sx * (w - inset);
        let z = sz * (d - inset);
        parts.push(part(
            Primitive::Capsule {
                a: [x, -0.9 + r, z],
                b: [x, top, z],
                radius: r,
            },
            label,
        ));
        kp(k, &format!("foot_{name}"), [x, -0.9, z]);
    }
}

fn chair(rng: &mut ChaCha8Rng) -> SynthSpec {
    let w = rng.random_range(0.32..0.46);
    let d = rng.random_range(0.3..0.42);
    let t = rng.random_range(0.035..0.055);
    let h = rng.random_range(-0.25..0.05);
    let tb = rng.random_range(0.03..0.045);
    let top = rng.random_range(0.6..0.85);
    let bw = w * rng.random_range(0.85..1.0);
    let arms = rng.random::<bool>();
    let ah = rng.random_range(0.18..0.26);

    let mut parts = vec![part(
        Primitive::Box {
            center: [0.0, h, 0.0],
            half: [w, t, d],
        },
        0,
    )];
    parts.push(part(
        Primitive::Box {
            center: [0.0, 0.5 * (h + top), -d + tb],
            half: [bw, 0.5 * (top - h), tb],
        },
        1,
    ));
    let mut k = KeypointSet::default();
    for (name, sx, sz) in [("front_left", -1.0, 1.0), ("front_right", 1.0, 1.0), ("back_left", -1.0, -1.0), ("back_right", 1.0, -1.0)] {
        kp(&mut k, &format!("seat_{name}"), [sx * w, h + t, sz * d]);
    }
    kp(&mut k, "back_top_left", [-bw, top, -d + tb]);
    kp(&mut k, "back_top_right", [bw, top, -d + tb]);
    legs(rng, w, d, h - 0.2 * t, 2, &mut parts, &mut k);
    if arms {
        let half = [0.035, 0.025, 0.8 * d];
        for (name, sx) in [("left", -1.0), ("right", 1.0)] {
            let x = sx * (w - half[0]);
            parts.push(part(
                Primitive::Box {
                    center: [x, h + ah, 0.0],
                    half,
                },
                3,
            ));
            parts.push(part(
                Primitive::Capsule {
                    a: [x, h, 0.7 * d],
                    b: [x, h + ah, 0.7 * d],
                    radius: 0.02,
                },
                3,
            ));
            kp(&mut k, &format!("arm_front_{name}"), [x, h + ah + half[1], half[2]]);
        }
    }
    SynthSpec {
        family: Some(Family::Chair),
        parts: 4,
        union: Union { parts },
        params: vec![
            ("seat_half_width", w),
            ("seat_half_depth", d),
            ("seat_height", h),
            ("back_top", top),
            ("arms", if arms { 1.0 } else { 0.0 }),
            ("arm_height", if arms { ah } else { 0.0 }),
        ],
        keypoints: k,
    }
}

fn table(rng: &mut ChaCha8Rng) -> SynthSpec {
    let w = rng.random_range(0.5..0.8);
    let d = rng.random_range(0.35..0.6);
    let t = rng.random_range(0.03..0.05);
    let h = rng.random_range(0.1..0.4);
    let mut parts = vec![part(
        Primitive::Box {
            center: [0.0, h, 0.0],
            half: [w, t, d],
        },
        0,
    )];
    let mut k = KeypointSet::default();
    for (name, sx, sz) in [("front_left", -1.0, 1.0), ("front_right", 1.0, 1.0), ("back_left", -1.0, -1.0), ("back_right", 1.0, -1.0)] {
        kp(&mut k, &format!("top_{name}"), [sx * w, h + t, sz * d]);
    }
    legs(rng, w, d, h - 0.2 * t, 1, &mut parts, &mut k);
    SynthSpec {
        family: Some(Family::Table),
        parts: 2,
        union: Union { parts },
        params: vec![("top_half_width", w), ("top_half_depth", d), ("top_height", h)],
        keypoints: k,
    }
}
