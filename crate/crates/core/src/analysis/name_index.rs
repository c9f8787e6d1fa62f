//! Known-identifier index built by enumerating environment constants.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Duration;

use crate::repl::{Oracle, OracleError, OracleRequest, Severity};

const VERSION_PREFIX: &str = "# lean-version: ";

/// Sorted constant names plus every dotted suffix, so names used under an
/// opened namespace (`add_comm` for `Nat.add_comm`) are also known.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameIndex {
    pub version: String,
    pub names: BTreeSet<String>,
    suffixes: BTreeSet<String>,
}

impl NameIndex {
    pub fn from_names<I, S>(version: &str, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        let mut suffixes = BTreeSet::new();
        for n in &names {
            for (i, c) in n.char_indices() {
                if c == '.' {
                    suffixes.insert(n[i + 1..].to_string());
                }
            }
        }
        Self {
            version: version.to_string(),
            names,
            suffixes,
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name) || self.suffixes.contains(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Version stamp line, then one name per line in sorted order.
    pub fn to_text(&self) -> String {
        let mut out = format!("{VERSION_PREFIX}{}\n", self.version);
        for n in &self.names {
            out.push_str(n);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Self {
        let mut version = String::new();
        let mut names = Vec::new();
        for line in text.lines() {
            if let Some(v) = line.strip_prefix(VERSION_PREFIX) {
                version = v.trim().to_string();
            } else if !line.trim().is_empty() {
                names.push(line.trim().to_string());
            }
        }
        Self::from_names(&version, names)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        crate::dataset::write_atomic(path, self.to_text().as_bytes()).map_err(std::io::Error::other)
    }

    /// Loads an index, warning when its stamp differs from `expected_version`.
    pub fn load(path: &Path, expected_version: Option<&str>) -> std::io::Result<Self> {
        let index = Self::parse(&std::fs::read_to_string(path)?);
        if let Some(v) = expected_version {
            if !v.is_empty() && v != index.version {
                tracing::warn!(
                    "name index {} was built for Lean {} but the toolchain is {v}; hallucination labels may be stale",
                    path.display(),
                    index.version
                );
            }
        }
        Ok(index)
    }
}

/// Lean command printing every constant in the environment.
pub const ENUMERATE_CONSTANTS: &str =
    "open Lean in\n#eval show CoreM Unit from do\n  for (n, _) in (← getEnv).constants.toList do IO.println n\n";

/// Enumerates the constants visible after `preamble` through the oracle.
pub fn build_name_index(
    oracle: &dyn Oracle,
    preamble: &str,
    version: &str,
    timeout: Duration,
) -> Result<NameIndex, OracleError> {
    let mut source = preamble.to_string();
    if !source.is_empty() && !source.ends_with('\n') {
        source.push('\n');
    }
    source.push('\n');
    source.push_str(ENUMERATE_CONSTANTS);
    let result = oracle.verify(&OracleRequest::verify(source, timeout))?;
    let names: Vec<String> = result
        .messages
        .iter()
        .filter(|d| d.severity == Severity::Info)
        .flat_map(|d| {
            d.text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .collect();
    if names.is_empty() {
        let detail = result
            .errors()
            .map(|d| d.text.clone())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(OracleError::ToolchainUnavailable(format!(
            "constant enumeration printed nothing: {detail}"
        )));
    }
    Ok(NameIndex::from_names(version, names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::LocalOracle;

    #[test]
    fn round_trip_and_suffixes() {
        let idx = NameIndex::from_names("4.17.0", ["Nat.add_comm", "mul_comm"]);
        assert!(
            idx.contains("add_comm")
                && idx.contains("Nat.add_comm")
                && !idx.contains("Nat.mul_comm")
        );
        let text = idx.to_text();
        assert!(text.starts_with("# lean-version: 4.17.0\nNat.add_comm\nmul_comm\n"));
        assert_eq!(NameIndex::parse(&text), idx);
    }

    #[test]
    fn built_through_oracle() {
        let idx = build_name_index(
            &LocalOracle::new(),
            "import Mathlib",
            "sim",
            Duration::from_secs(5),
        )
        .unwrap();
        assert!(idx.contains("Nat.add_comm"));
        assert!(!idx.contains("Nat.fabricated_lemma"));
    }
}
