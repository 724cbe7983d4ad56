//! Text shape files.
//!
//! ```text
//! pdc-shape 1 k=<k>
//! S x y z nx ny nz o1 … ok [label]
//! Q x y z s o1 … ok
//! ```

use std::path::Path;

use super::files::{parse_f64, read_text, write_atomic};
use super::format::fmt_g9;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::geometry::sample::ShapeSample;

pub const SHAPE_HEADER: &str = "pdc-shape 1";

pub fn format_shape(s: &ShapeSample) -> String {
    let mut out = format!("{SHAPE_HEADER} k={}\n", s.parts);
    let push = |out: &mut String, vals: &mut dyn Iterator<Item = f64>| {
        for v in vals {
            out.push(' ');
            out.push_str(&fmt_g9(v));
        }
    };
    for (r, (p, n)) in s.surface.iter().zip(&s.normals).enumerate() {
        out.push('S');
        push(&mut out, &mut p.iter().chain(n).chain(s.surface_features.row(r)).copied());
        if let Some(l) = &s.labels {
            out.push_str(&format!(" {}", l[r]));
        }
        out.push('\n');
    }
    for (r, (p, d)) in s.query.iter().zip(&s.sdf).enumerate() {
        out.push('Q');
        push(&mut out, &mut p.iter().chain(std::iter::once(d)).chain(s.query_features.row(r)).copied());
        out.push('\n');
    }
    out
}

pub fn parse_shape(text: &str, path: &Path) -> Result<ShapeSample> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| err(1, "empty shape file".into()))?;
    let k = head
        .strip_prefix(SHAPE_HEADER)
        .and_then(|r| r.trim().strip_prefix("k="))
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&k| k > 0)
        .ok_or_else(|| err(1, format!("expected header `{SHAPE_HEADER} k=<parts>`, found {head:?}")))?;
    let mut surface = Vec::new();
    let mut normals = Vec::new();
    let mut sfeat = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut labeled: Option<bool> = None;
    let mut query = Vec::new();
    let mut sdf = Vec::new();
    let mut qfeat = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let nums = |from: usize, count: usize| -> Result<Vec<f64>> {
            tok[from..from + count].iter().map(|t| parse_f64(t, path, ln)).collect()
        };
        match tok[0] {
            "S" => {
                let base = 1 + 6 + k;
                let has_label = match tok.len() {
                    n if n == base => false,
                    n if n == base + 1 => true,
                    n => return Err(err(ln, format!("surface line needs {} or {} fields, found {n}", base, base + 1))),
                };
                if *labeled.get_or_insert(has_label) != has_label {
                    return Err(err(ln, "labels must be given for all surface points or none".into()));
                }
                let v = nums(1, 6 + k)?;
                surface.push([v[0], v[1], v[2]]);
                normals.push([v[3], v[4], v[5]]);
                sfeat.extend_from_slice(&v[6..]);
                if has_label {
                    let l: usize = tok[base].parse().map_err(|_| err(ln, format!("bad label {:?}", tok[base])))?;
                    if l >= k {
                        return Err(err(ln, format!("label {l} out of range 0..{k}")));
                    }
                    labels.push(l);
                }
            }
            "Q" => {
                if tok.len() != 1 + 4 + k {
                    return Err(err(ln, format!("query line needs {} fields, found {}", 1 + 4 + k, tok.len())));
                }
                let v = nums(1, 4 + k)?;
                query.push([v[0], v[1], v[2]]);
                sdf.push(v[3]);
                qfeat.extend_from_slice(&v[4..]);
            }
            t => return Err(err(ln, format!("unknown record type {t:?} (S|Q)"))),
        }
    }
    let s = ShapeSample {
        parts: k,
        surface_features: Tensor::from_vec(surface.len(), k, sfeat),
        surface,
        normals,
        labels: labeled.unwrap_or(false).then_some(labels),
        query_features: Tensor::from_vec(query.len(), k, qfeat),
        query,
        sdf,
    };
    s.validate()?;
    Ok(s)
}

pub fn load_shape(path: &Path) -> Result<ShapeSample> {
    parse_shape(&read_text(path)?, path)
}

pub fn save_shape(path: &Path, s: &ShapeSample) -> Result<()> {
    write_atomic(path, format_shape(s).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample::sample_shape;
    use crate::geometry::synth::{family_shape, Family};
    use proptest::prelude::*;

    #[test]
    fn example_file() {
        let text = "pdc-shape 1 k=2\nS 0.5 0 0 1 0 0 5 0 0\nQ 0 0 0 -0.5 2.5 2.5\n";
        let s = parse_shape(text, Path::new("x.shape")).unwrap();
        assert_eq!(s.surface, vec![[0.5, 0.0, 0.0]]);
        assert_eq!(s.labels, Some(vec![0]));
        assert_eq!(s.sdf, vec![-0.5]);
        assert_eq!(format_shape(&s), text);
    }

    #[test]
    fn malformed_files() {
        let p = Path::new("bad.shape");
        for (text, line) in [
            ("pdc-shape 2 k=2\n", 1),
            ("pdc-shape 1 k=2\nS 0 0 0 1 0 0 1\n", 2),
            ("pdc-shape 1 k=2\nS 0 0 0 1 0 0 1 0 0\nS 0 0 0 1 0 0 1 0\n", 3),
            ("pdc-shape 1 k=2\nQ 0 0 0 x 1 0\n", 2),
            ("pdc-shape 1 k=2\nS 0 0 0 1 0 0 1 0 7\n", 2),
            ("pdc-shape 1 k=2\nX 1\n", 2),
        ] {
            match parse_shape(text, p) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample_shape(&family_shape(Family::Table, 1, 2), 50, 50, 3).unwrap();
        let p = dir.path().join("t.shape");
        save_shape(&p, &s).unwrap();
        assert_eq!(load_shape(&p).unwrap(), s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn generated_samples_round_trip(fam in 0usize..3, index in 0usize..50, seed in 0u64..1000) {
            let family = [Family::Sphere, Family::Chair, Family::Table][fam];
            let s = sample_shape(&family_shape(family, index, seed), 40, 40, seed).unwrap();
            let back = parse_shape(&format_shape(&s), Path::new("p")).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
