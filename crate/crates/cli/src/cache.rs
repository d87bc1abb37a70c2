//! Content-addressed result cache with atomic writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use mzgames::game::GameSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// What a command produces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    /// Written to `--out` or standard output.
    pub output: Vec<u8>,
    /// Written to standard error.
    pub summary: String,
    /// False when a checked invariant failed.
    pub ok: bool,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    summary: String,
    ok: bool,
}

fn hash_floats(h: &mut Sha256, xs: &[f64]) {
    h.update((xs.len() as u64).to_le_bytes());
    for x in xs {
        h.update(x.to_bits().to_le_bytes());
    }
}

fn hash_labels(h: &mut Sha256, xs: &[String]) {
    h.update((xs.len() as u64).to_le_bytes());
    for x in xs {
        h.update((x.len() as u64).to_le_bytes());
        h.update(x.as_bytes());
    }
}

/// Hex SHA-256 of the game content and every option that affects output.
pub fn cache_key(spec: &GameSpec, config: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(concat!("mzgames-cache/", env!("CARGO_PKG_VERSION"), "\n").as_bytes());
    h.update(config.command.name().as_bytes());
    for labels in [&spec.states_k, &spec.states_l, &spec.actions_i, &spec.actions_j] {
        hash_labels(&mut h, labels);
    }
    hash_floats(&mut h, spec.payoff_flat());
    hash_floats(&mut h, spec.m().as_flat());
    hash_floats(&mut h, spec.n().as_flat());
    hash_floats(&mut h, &spec.p0);
    hash_floats(&mut h, &spec.q0);
    for n in [config.horizon, config.resolution, config.runs, config.block_length] {
        h.update((n as u64).to_le_bytes());
    }
    h.update(config.seed.to_le_bytes());
    hash_floats(&mut h, &[config.tol, config.epsilon]);
    hex::encode(h.finalize())
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.out")), self.dir.join(format!("{key}.json")))
    }

    /// The cached outcome, if both of its files are present.
    pub fn get(&self, key: &str) -> Result<Option<Outcome>> {
        let (out, meta) = self.paths(key);
        let meta = match std::fs::read(&meta) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(meta, e)),
        };
        let output = match std::fs::read(&out) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(out, e)),
        };
        let meta: Meta = serde_json::from_slice(&meta).map_err(|e| Error::Cache(e.to_string()))?;
        Ok(Some(Outcome {
            output,
            summary: meta.summary,
            ok: meta.ok,
        }))
    }

    /// Writes the output, then the metadata that marks the entry complete.
    pub fn put(&self, key: &str, outcome: &Outcome) -> Result<()> {
        let (out, meta) = self.paths(key);
        self.write_atomic(&out, &outcome.output)?;
        let m = Meta {
            summary: outcome.summary.clone(),
            ok: outcome.ok,
        };
        let bytes = serde_json::to_vec(&m).map_err(|e| Error::Cache(e.to_string()))?;
        self.write_atomic(&meta, &bytes)
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }
}
