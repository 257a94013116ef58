use std::fmt;
use std::path::Path;

use assembly_core::graph::PartId;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub struct Ctx {
    pub json: bool,
    pub seed: Option<u64>,
}

impl Ctx {
    pub fn seed_or(&self, fallback: u64) -> u64 {
        self.seed.unwrap_or(fallback)
    }
}

/// Bad flags, unreadable inputs or configuration problems (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl fmt::Display) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.to_string()))
}

pub trait OrUsage<T> {
    fn or_usage(self, what: impl fmt::Display) -> anyhow::Result<T>;
}

impl<T, E: fmt::Display> OrUsage<T> for Result<T, E> {
    fn or_usage(self, what: impl fmt::Display) -> anyhow::Result<T> {
        self.map_err(|e| usage(format!("{what}: {e}")))
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).or_usage(format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).or_usage(format!("bad JSON in {}", path.display()))
}

pub fn print_json<T: Serialize>(v: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v).expect("output serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Parses `0-1,2-3` (also `0=1`, `0:1`).
pub fn parse_pairs(text: &str) -> anyhow::Result<Vec<(PartId, PartId)>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let (a, b) = s
                .split_once(['-', '=', ':'])
                .ok_or_else(|| usage(format!("bad pair `{s}`, expected a-b")))?;
            let n = |x: &str| {
                x.trim()
                    .parse::<u32>()
                    .map(PartId)
                    .or_usage(format!("bad part id in `{s}`"))
            };
            Ok((n(a)?, n(b)?))
        })
        .collect()
}

/// Parses `key=value,key=value` into pairs of key and number.
pub fn parse_assignments(text: &str) -> anyhow::Result<Vec<(String, f64)>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| usage(format!("bad setting `{s}`, expected key=value")))?;
            let v: f64 = v.trim().parse().or_usage(format!("bad number in `{s}`"))?;
            if !v.is_finite() || v < 0.0 {
                return Err(usage(format!("`{s}` must be a non-negative number")));
            }
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

pub fn join<T: fmt::Display>(v: impl IntoIterator<Item = T>, sep: &str) -> String {
    v.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}
