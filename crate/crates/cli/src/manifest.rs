//! Stage bookkeeping: content digests, on-disk cache and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageStatus {
    Done,
    Cached,
    Failed(String),
    Skipped,
}

impl StageStatus {
    fn label(&self) -> String {
        match self {
            StageStatus::Done => "done".into(),
            StageStatus::Cached => "cached".into(),
            StageStatus::Failed(e) => format!("failed: {e}"),
            StageStatus::Skipped => "skipped".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub input_digest: String,
    /// (file name, sha256)
    pub outputs: Vec<(String, String)>,
    pub wall_s: f64,
    pub warnings: Vec<String>,
}

/// Scalar results a stage hands to later stages, stored as `result.toml`.
pub type Results = BTreeMap<String, f64>;

/// What a stage body reports back besides its files.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub results: Results,
    pub warnings: Vec<String>,
}

pub struct Runner {
    pub out: PathBuf,
    pub config_toml: String,
    pub stages: Vec<StageRecord>,
    halted: bool,
}

/// Output (file, sha256) pairs and warnings of a reusable stage.
type CachedStage = (Vec<(String, String)>, Vec<String>);

const DIGEST_FILE: &str = ".input_sha256";
const OUTPUTS_FILE: &str = ".outputs";
const WARNINGS_FILE: &str = ".warnings";
const RESULT_FILE: &str = "result.toml";

impl Runner {
    pub fn new(out: &Path, config_toml: String) -> Result<Self, CliError> {
        fs::create_dir_all(out)?;
        Ok(Self {
            out: out.to_path_buf(),
            config_toml,
            stages: Vec::new(),
            halted: false,
        })
    }

    pub fn stage_dir(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Results of a completed stage from this run or an earlier one.
    pub fn results(&self, name: &str) -> Option<Results> {
        let text = fs::read_to_string(self.stage_dir(name).join(RESULT_FILE)).ok()?;
        toml::from_str(&text).ok()
    }

    pub fn digest_of(&self, name: &str) -> Option<String> {
        fs::read_to_string(self.stage_dir(name).join(DIGEST_FILE)).ok()
    }

    fn cached(&self, dir: &Path, digest: &str) -> Option<CachedStage> {
        if fs::read_to_string(dir.join(DIGEST_FILE)).ok()? != digest {
            return None;
        }
        let listed = fs::read_to_string(dir.join(OUTPUTS_FILE)).ok()?;
        let mut outputs = Vec::new();
        for line in listed.lines() {
            let (hash, file) = line.split_once("  ")?;
            if sha256_hex(&fs::read(dir.join(file)).ok()?) != hash {
                return None;
            }
            outputs.push((file.to_string(), hash.to_string()));
        }
        let warnings = fs::read_to_string(dir.join(WARNINGS_FILE))
            .unwrap_or_default()
            .lines()
            .map(str::to_string)
            .collect();
        Some((outputs, warnings))
    }

    /// Runs `body` in `out/name/` unless a previous run with the same input
    /// digest left intact outputs. After a failure every later stage is
    /// recorded as skipped. Returns Ok(false) when the stage did not complete.
    pub fn stage<F>(&mut self, name: &str, inputs: &[&str], body: F) -> Result<bool, CliError>
    where
        F: FnOnce(&Path) -> Result<StageOutput, CliError>,
    {
        let mut h = String::from(name);
        for i in inputs {
            h.push('\n');
            h.push_str(i);
        }
        let digest = sha256_hex(h.as_bytes());
        let mut rec = StageRecord {
            name: name.to_string(),
            status: StageStatus::Skipped,
            input_digest: digest.clone(),
            outputs: Vec::new(),
            wall_s: 0.0,
            warnings: Vec::new(),
        };
        if self.halted {
            self.stages.push(rec);
            return Ok(false);
        }
        let dir = self.stage_dir(name);
        if let Some((outputs, warnings)) = self.cached(&dir, &digest) {
            rec.status = StageStatus::Cached;
            rec.outputs = outputs;
            rec.warnings = warnings;
            self.stages.push(rec);
            return Ok(true);
        }
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        let t0 = Instant::now();
        let out = body(&dir);
        rec.wall_s = t0.elapsed().as_secs_f64();
        match out {
            Ok(out) => {
                fs::write(dir.join(RESULT_FILE), toml::to_string(&out.results).expect("plain table"))?;
                let mut files: Vec<String> = fs::read_dir(&dir)?
                    .filter_map(|e| e.ok())
                    .map(|e| e.file_name().to_string_lossy().into_owned())
                    .filter(|f| !f.starts_with('.'))
                    .collect();
                files.sort();
                let mut listing = String::new();
                for f in files {
                    let hash = sha256_hex(&fs::read(dir.join(&f))?);
                    let _ = writeln!(listing, "{hash}  {f}");
                    rec.outputs.push((f, hash));
                }
                fs::write(dir.join(OUTPUTS_FILE), listing)?;
                fs::write(dir.join(WARNINGS_FILE), out.warnings.join("\n"))?;
                fs::write(dir.join(DIGEST_FILE), &digest)?;
                rec.warnings = out.warnings;
                rec.status = StageStatus::Done;
                self.stages.push(rec);
                Ok(true)
            }
            Err(e) => {
                rec.status = StageStatus::Failed(e.to_string());
                self.stages.push(rec);
                self.halted = true;
                Err(e)
            }
        }
    }

    pub fn manifest_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vortex run manifest");
        let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "config_sha256 = {}", sha256_hex(self.config_toml.as_bytes()));
        for st in &self.stages {
            let _ = writeln!(s, "\n[stage {}]", st.name);
            let _ = writeln!(s, "status = {}", st.status.label());
            let _ = writeln!(s, "input_sha256 = {}", st.input_digest);
            let _ = writeln!(s, "wall_s = {:.3}", st.wall_s);
            for (f, h) in &st.outputs {
                let _ = writeln!(s, "output {f} {h}");
            }
            for w in &st.warnings {
                let _ = writeln!(s, "warning {w}");
            }
        }
        let _ = writeln!(s, "\n--- resolved config ---");
        s.push_str(&self.config_toml);
        s
    }

    pub fn write_manifest(&self) -> Result<PathBuf, CliError> {
        let p = self.out.join("manifest.txt");
        fs::write(&p, self.manifest_text())?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn cache_hit_and_halt() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Runner::new(dir.path(), "x = 1\n".into()).unwrap();
        let body = |d: &Path| {
            fs::write(d.join("a.csv"), "h\n1\n")?;
            Ok(StageOutput::default())
        };
        assert!(r.stage("one", &["cfg"], body).unwrap());
        assert!(r.stage("one", &["cfg"], body).unwrap());
        assert_eq!(r.stages[1].status, StageStatus::Cached);
        assert_eq!(r.stages[0].outputs, r.stages[1].outputs);
        // a changed input reruns
        r.stage("one", &["cfg2"], body).unwrap();
        assert_eq!(r.stages[2].status, StageStatus::Done);
        // tampered output reruns
        fs::write(dir.path().join("one/a.csv"), "h\n2\n").unwrap();
        r.stage("one", &["cfg2"], body).unwrap();
        assert_eq!(r.stages[3].status, StageStatus::Done);
        assert!(r.stage("two", &[], |_| Err(CliError::Config("boom".into()))).is_err());
        assert!(!r.stage("three", &[], body).unwrap());
        assert_eq!(r.stages[5].status, StageStatus::Skipped);
        assert!(r.manifest_text().contains("status = skipped"));
    }
}
