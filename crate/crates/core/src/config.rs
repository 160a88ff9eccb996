//! Flat, sectioned `key = value` text used by the parameter and scenario files.
//!
//! Every lookup consumes its key; [`Fields::finish`] rejects whatever is left so
//! that a typo in a file is reported instead of silently ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}:{line}: unknown key `{key}` in [{section}]")]
    UnknownKey { path: String, section: String, key: String, line: usize },
    #[error("{path}:{line}: unknown section [{section}]")]
    UnknownSection { path: String, section: String, line: usize },
    #[error("{path}: missing required field `{key}` in [{section}]")]
    Missing { path: String, section: String, key: String },
    #[error("{path}:{line}: invalid value for `{key}`: {msg}")]
    Invalid { path: String, key: String, line: usize, msg: String },
    #[error("{path}: referenced file `{target}` does not exist")]
    DanglingReference { path: String, target: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl ConfigError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ConfigError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// One `[section]` worth of entries.
#[derive(Debug, Clone)]
pub struct Fields {
    origin: String,
    section: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// A parsed document: ordered sections. Keys before any header live in the
/// unnamed section `""`.
#[derive(Debug, Clone)]
pub struct Document {
    origin: String,
    base_dir: PathBuf,
    sections: Vec<Fields>,
}

impl Document {
    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut sections = vec![Fields::empty(origin, "", 0)];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                    path: origin.to_string(),
                    line: line_no,
                    msg: format!("unterminated section header `{line}`"),
                })?;
                let name = name.trim();
                if sections.iter().any(|s| s.section == name) {
                    return Err(ConfigError::Parse {
                        path: origin.to_string(),
                        line: line_no,
                        msg: format!("duplicate section [{name}]"),
                    });
                }
                sections.push(Fields::empty(origin, name, line_no));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                path: origin.to_string(),
                line: line_no,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Parse { path: origin.to_string(), line: line_no, msg: "empty key".into() });
            }
            let current = sections.last_mut().expect("at least the root section");
            if current.entries.contains_key(key) {
                return Err(ConfigError::Parse {
                    path: origin.to_string(),
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            current.entries.insert(key.to_string(), Entry { value: value.trim().to_string(), line: line_no });
        }
        Ok(Document { origin: origin.to_string(), base_dir: base_dir.to_path_buf(), sections })
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// Sets or replaces a value, creating the section if needed. Overrides
    /// report line 0.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        let idx = match self.sections.iter().position(|s| s.section == section) {
            Some(i) => i,
            None => {
                self.sections.push(Fields::empty(&self.origin, section, 0));
                self.sections.len() - 1
            }
        };
        self.sections[idx].entries.insert(key.to_string(), Entry { value: value.trim().to_string(), line: 0 });
    }

    /// Removes and returns a section; `None` if the file does not have it.
    pub fn take(&mut self, name: &str) -> Option<Fields> {
        let idx = self.sections.iter().position(|s| s.section == name)?;
        Some(self.sections.remove(idx))
    }

    /// Errors on the first section that was never taken (ignoring an empty root).
    pub fn finish(self) -> Result<(), ConfigError> {
        for s in self.sections {
            if s.section.is_empty() {
                s.finish()?;
            } else {
                return Err(ConfigError::UnknownSection { path: self.origin, section: s.section, line: s.line });
            }
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

impl Fields {
    fn empty(origin: &str, section: &str, line: usize) -> Self {
        Fields { origin: origin.to_string(), section: section.to_string(), line, entries: BTreeMap::new() }
    }

    pub fn section(&self) -> &str {
        &self.section
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn invalid(&self, key: &str, line: usize, msg: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { path: self.origin.clone(), key: key.to_string(), line, msg: msg.into() }
    }

    pub fn missing(&self, key: &str) -> ConfigError {
        ConfigError::Missing { path: self.origin.clone(), section: self.section.clone(), key: key.to_string() }
    }

    /// Raw string value with its line number.
    pub fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key).map(|e| (e.value, e.line))
    }

    pub fn string(&mut self, key: &str) -> Option<String> {
        self.raw(key).map(|(v, _)| v)
    }

    pub fn f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => {
                let x: f64 = v.parse().map_err(|_| self.invalid(key, line, format!("`{v}` is not a number")))?;
                if !x.is_finite() {
                    return Err(self.invalid(key, line, "value must be finite"));
                }
                Ok(Some(x))
            }
        }
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn req_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.f64(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => {
                v.parse().map(Some).map_err(|_| self.invalid(key, line, format!("`{v}` is not an unsigned integer")))
            }
        }
    }

    pub fn bool(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => match v.as_str() {
                "true" | "yes" | "on" | "1" => Ok(Some(true)),
                "false" | "no" | "off" | "0" => Ok(Some(false)),
                _ => Err(self.invalid(key, line, format!("`{v}` is not a boolean"))),
            },
        }
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => {
                if v.is_empty() {
                    return Ok(Some(Vec::new()));
                }
                v.split(',')
                    .map(|t| {
                        let t = t.trim();
                        t.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| self.invalid(key, line, format!("`{t}` is not a number")))
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(Some)
            }
        }
    }

    /// Piecewise-linear series written as `t:value, t:value, ...`.
    pub fn series(&mut self, key: &str) -> Result<Option<Vec<(f64, f64)>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => {
                let mut out = Vec::new();
                for tok in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    let (a, b) =
                        tok.split_once(':').ok_or_else(|| self.invalid(key, line, format!("`{tok}` is not `a:b`")))?;
                    let a: f64 =
                        a.trim().parse().map_err(|_| self.invalid(key, line, format!("bad number in `{tok}`")))?;
                    let b: f64 =
                        b.trim().parse().map_err(|_| self.invalid(key, line, format!("bad number in `{tok}`")))?;
                    if !a.is_finite() || !b.is_finite() {
                        return Err(self.invalid(key, line, "values must be finite"));
                    }
                    out.push((a, b));
                }
                Ok(Some(out))
            }
        }
    }

    /// Reports the first unconsumed key as unknown.
    pub fn finish(self) -> Result<(), ConfigError> {
        if let Some((key, e)) = self.entries.into_iter().next() {
            return Err(ConfigError::UnknownKey { path: self.origin, section: self.section, key, line: e.line });
        }
        Ok(())
    }

    /// Builds an `Invalid` error for a key that parsed but failed a range check.
    pub fn reject(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        self.invalid(key, 0, msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Result<Document, ConfigError> {
        Document::parse(text, "test.ini", Path::new("."))
    }

    #[test]
    fn sections_and_comments() {
        let mut d = doc("a = 1\n# note\n[s]\nb = 2.5 # trailing\nc = x\n").unwrap();
        let mut root = d.take("").unwrap();
        assert_eq!(root.req_f64("a").unwrap(), 1.0);
        root.finish().unwrap();
        let mut s = d.take("s").unwrap();
        assert_eq!(s.f64("b").unwrap(), Some(2.5));
        assert_eq!(s.string("c").as_deref(), Some("x"));
        s.finish().unwrap();
        d.finish().unwrap();
    }

    #[test]
    fn set_overrides_and_creates() {
        let mut d = doc("[s]\nb = 1\n").unwrap();
        d.set("s", "b", "2");
        d.set("t", "c", "3");
        assert_eq!(d.take("s").unwrap().req_f64("b").unwrap(), 2.0);
        assert_eq!(d.take("t").unwrap().req_f64("c").unwrap(), 3.0);
    }

    #[test]
    fn leftover_key_is_named() {
        let mut d = doc("[s]\nspeeed = 3\n").unwrap();
        let s = d.take("s").unwrap();
        let err = s.finish().unwrap_err().to_string();
        assert!(err.contains("speeed"), "{err}");
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn parse_error_has_line() {
        let err = doc("[s]\nx = 1\nnot a pair\n").unwrap_err().to_string();
        assert!(err.contains("test.ini:3"), "{err}");
    }

    #[test]
    fn unknown_section_rejected() {
        let d = doc("[bogus]\nx = 1\n").unwrap();
        assert!(matches!(d.finish(), Err(ConfigError::UnknownSection { .. })));
    }

    #[test]
    fn series_and_lists() {
        let mut d = doc("[s]\np = 0:10, 5:10, 7:15\nl = 1, 2,3\n").unwrap();
        let mut s = d.take("s").unwrap();
        assert_eq!(s.series("p").unwrap().unwrap(), vec![(0.0, 10.0), (5.0, 10.0), (7.0, 15.0)]);
        assert_eq!(s.f64_list("l").unwrap().unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn non_numeric_value_rejected() {
        let mut d = doc("[s]\nx = abc\n").unwrap();
        let mut s = d.take("s").unwrap();
        assert!(matches!(s.f64("x"), Err(ConfigError::Invalid { .. })));
    }
}
