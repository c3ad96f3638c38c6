//! `.prov` sidecars tying each output file to the configuration that made it.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub kind: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64, kind: impl Into<String>) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
            kind: kind.into(),
        }
    }

    fn render(&self) -> String {
        format!(
            "config_hash = {}\nseed = {}\nkind = {}\n",
            self.config_hash, self.seed, self.kind
        )
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut hash = None;
        let mut seed = None;
        let mut kind = None;
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let perr = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: msg.into(),
            };
            let (key, value) = line.split_once('=').ok_or_else(|| perr("expected key = value"))?;
            let value = value.trim().to_string();
            match key.trim() {
                "config_hash" => hash = Some(value),
                "seed" => seed = Some(value.parse().map_err(|_| perr("bad seed"))?),
                "kind" => kind = Some(value),
                _ => return Err(perr("unknown key")),
            }
        }
        match (hash, seed, kind) {
            (Some(config_hash), Some(seed), Some(kind)) => Ok(Self { config_hash, seed, kind }),
            _ => Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: "incomplete provenance record".into(),
            }),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".prov");
    PathBuf::from(s)
}

/// Writes `bytes` to `path` and the provenance record next to it.
pub fn write_with_provenance(path: &Path, bytes: &[u8], prov: &Provenance) -> Result<()> {
    write_atomic(path, bytes)?;
    write_atomic(&sidecar_path(path), prov.render().as_bytes())
}

pub fn read_provenance(path: &Path) -> Result<Provenance> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    Provenance::parse(&text, &side)
}

/// Refuses `path` unless its sidecar carries `expected_hash`.
pub fn check_provenance(path: &Path, expected_hash: &str) -> Result<Provenance> {
    let prov = read_provenance(path)?;
    if prov.config_hash != expected_hash {
        return Err(Error::Provenance {
            expected: expected_hash.to_string(),
            found: prov.config_hash,
            path: path.to_path_buf(),
        });
    }
    Ok(prov)
}
