//! JSON-lines dataset manifests.
//!
//! One record per line:
//! `{"path": "...", "class": "walking", "angle_deg": 30, "origin": "real"}`.
//! Relative paths resolve against the manifest's directory. Optional fields
//! (`raw`, `defect`, `rule1`..`overall`) are omitted when absent.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinrules::{RuleOutcome, RuleVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Real,
    Synthetic,
    Defect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub path: String,
    pub class: String,
    pub angle_deg: f64,
    pub origin: Origin,
    /// Raw baseband sidecar (SGIQ), when the record was simulated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    /// Defect kind name for fabricated records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule1: Option<RuleOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule2: Option<RuleOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule3: Option<RuleOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall: Option<RuleOutcome>,
}

impl Record {
    pub fn new(path: impl Into<String>, class: impl Into<String>, angle_deg: f64, origin: Origin) -> Self {
        Record {
            path: path.into(),
            class: class.into(),
            angle_deg,
            origin,
            raw: None,
            defect: None,
            rule1: None,
            rule2: None,
            rule3: None,
            overall: None,
        }
    }

    pub fn set_verdict(&mut self, v: &RuleVerdict) {
        self.rule1 = Some(v.rule1_periodic);
        self.rule2 = Some(v.rule2_torso_below_legs);
        self.rule3 = Some(v.rule3_sign_consistency);
        self.overall = Some(v.overall);
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    /// Directory that relative record paths are resolved against.
    pub base_dir: PathBuf,
    pub records: Vec<Record>,
}

impl Manifest {
    pub fn new(base_dir: impl Into<PathBuf>, records: Vec<Record>) -> Self {
        Manifest {
            base_dir: base_dir.into(),
            records,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line).map_err(|e| Error::Manifest {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            records.push(rec);
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Manifest { base_dir, records })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::sigcore::io::write_bytes(path, self.to_jsonl().as_bytes())
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn path_of(&self, rec: &Record) -> PathBuf {
        self.resolve(&rec.path)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sorted, de-duplicated class names.
    pub fn classes(&self) -> Vec<String> {
        let mut c: Vec<String> = self.records.iter().map(|r| r.class.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    /// Copy of this manifest with paths made absolute, so records from
    /// different manifests can be mixed.
    pub fn absolutized(&self) -> Manifest {
        let base = std::path::absolute(&self.base_dir).unwrap_or_else(|_| self.base_dir.clone());
        let this = Manifest::new(base, Vec::new());
        let records = self
            .records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.path = this.resolve(&r.path).to_string_lossy().into_owned();
                if let Some(raw) = &r.raw {
                    r.raw = Some(this.resolve(raw).to_string_lossy().into_owned());
                }
                r
            })
            .collect();
        Manifest::new(this.base_dir, records)
    }

    pub fn filter(&self, keep: impl Fn(&Record) -> bool) -> Manifest {
        Manifest::new(
            self.base_dir.clone(),
            self.records.iter().filter(|r| keep(r)).cloned().collect(),
        )
    }
}
