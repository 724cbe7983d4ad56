//! Line-oriented `key = value` configuration with `#` comments.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Entries in file order, with their line numbers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    pub path: PathBuf,
    pub entries: Vec<(String, String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: path.into(),
                line: i + 1,
                msg,
            };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(err(format!("invalid key {k:?}")));
            }
            if entries.iter().any(|e| e.0 == k) {
                return Err(err(format!("duplicate key {k:?}")));
            }
            entries.push((k.to_string(), v.to_string(), i + 1));
        }
        Ok(Self {
            path: path.into(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&super::files::read_text(path)?, path)
    }

    /// Reject any key not in `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        for (k, _, line) in &self.entries {
            if !known.contains(&k.as_str()) {
                return Err(Error::Parse {
                    path: self.path.clone(),
                    line: *line,
                    msg: format!("unknown key {k:?}"),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.iter().find(|e| e.0 == key).map(|e| (e.1.as_str(), e.2))
    }

    /// Parse `key` into `T` if present.
    pub fn value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e: T::Err| Error::Parse {
                path: self.path.clone(),
                line,
                msg: format!("bad value {v:?} for {key}: {e}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let kv = KeyValues::parse("# run\nlr = 1e-3  # step\n\nseed=4\nname = a b\n", Path::new("c")).unwrap();
        assert_eq!(kv.value::<f64>("lr").unwrap(), Some(1e-3));
        assert_eq!(kv.value::<u64>("seed").unwrap(), Some(4));
        assert_eq!(kv.get("name"), Some(("a b", 5)));
        assert_eq!(kv.value::<u64>("missing").unwrap(), None);
        assert!(kv.check_known(&["lr", "seed", "name"]).is_ok());
        assert!(matches!(kv.check_known(&["lr", "seed"]), Err(Error::Parse { line: 5, .. })));
        assert!(matches!(kv.value::<u64>("lr"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn rejects_malformed_lines() {
        for text in ["lr 1", "= 3", "a b = 1", "x = 1\nx = 2"] {
            assert!(matches!(KeyValues::parse(text, Path::new("c")), Err(Error::Parse { .. })), "{text}");
        }
    }
}
