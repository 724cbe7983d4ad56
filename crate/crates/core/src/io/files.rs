//! File helpers: atomic writes, keypoint and label files.

use std::path::Path;

use super::format::fmt_g9;
use crate::error::{Error, Result};
use crate::transfer::KeypointSet;

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
        path: path.into(),
        line,
        msg: format!("expected a finite number, found {tok:?}"),
    })
}

fn skip(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

/// Lines `name x y z`.
pub fn format_keypoints(k: &KeypointSet) -> String {
    let mut s = String::new();
    for (name, p) in k.iter() {
        s.push_str(&format!("{name} {} {} {}\n", fmt_g9(p[0]), fmt_g9(p[1]), fmt_g9(p[2])));
    }
    s
}

pub fn parse_keypoints(text: &str, path: &Path) -> Result<KeypointSet> {
    let mut k = KeypointSet::default();
    for (i, line) in text.lines().enumerate() {
        if skip(line) {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| Error::Parse {
            path: path.into(),
            line: i + 1,
            msg,
        };
        if tok.len() != 4 {
            return Err(err(format!("expected `name x y z`, found {} fields", tok.len())));
        }
        let mut p = [0.0; 3];
        for j in 0..3 {
            p[j] = parse_f64(tok[j + 1], path, i + 1)?;
        }
        k.push(tok[0], p).map_err(|e| err(e.to_string()))?;
    }
    Ok(k)
}

/// One label per line.
pub fn format_labels(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !skip(l))
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                path: path.into(),
                line: i + 1,
                msg: format!("expected a non-negative integer label, found {:?}", l.trim()),
            })
        })
        .collect()
}

pub fn load_keypoints(path: &Path) -> Result<KeypointSet> {
    parse_keypoints(&read_text(path)?, path)
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keypoint_round_trip() {
        let k = KeypointSet::new(vec![("seat_front_left".into(), [0.125, -0.5, 1e-7]), ("top".into(), [0.0, 0.75, 0.333333333])]).unwrap();
        let back = parse_keypoints(&format_keypoints(&k), Path::new("k.txt")).unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn keypoint_errors_carry_line() {
        let e = parse_keypoints("# c\na 1 2 3\nb 1 2\n", Path::new("k.txt")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let e = parse_keypoints("a 1 2 3\na 0 0 0\n", Path::new("k.txt")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = parse_keypoints("a 1 nan 3\n", Path::new("k.txt")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn labels_round_trip() {
        let l = vec![0, 3, 1, 1, 2];
        assert_eq!(parse_labels(&format_labels(&l), Path::new("l")).unwrap(), l);
        assert!(matches!(parse_labels("1\n-1\n", Path::new("l")), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(read_text(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(matches!(read_text(&dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
