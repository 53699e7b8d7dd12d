//! Result records and deterministic file output.
//!
//! Records serialize to JSON with BTreeMap key order and roundtrip-exact
//! floats, so rerunning a suite with an identical config produces
//! byte-identical `records.json`. Wall time lives in a separate
//! `run_info.json`, outside the determinism guarantee.

use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub suite: String,
    pub seed: u64,
    /// Named measurement scalars; every verdict is recomputable from these.
    pub scalars: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
}

impl ResultRecord {
    pub fn new(suite: &str, seed: u64) -> Self {
        ResultRecord {
            suite: suite.to_string(),
            seed,
            scalars: BTreeMap::new(),
            verdicts: BTreeMap::new(),
        }
    }

    pub fn scalar(&mut self, name: &str, value: f64) -> &mut Self {
        self.scalars.insert(name.to_string(), value);
        self
    }

    pub fn verdict(&mut self, name: &str, pass: bool) -> &mut Self {
        self.verdicts.insert(name.to_string(), pass);
        self
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }
}

/// Everything one suite run over one seed produces.
#[derive(Debug, Default)]
pub struct SeedOutput {
    pub records: Vec<ResultRecord>,
    /// (file name, CSV content) pairs written into the seed directory.
    pub curves: Vec<(String, String)>,
}

impl SeedOutput {
    pub fn push_curve(&mut self, name: &str, header: &str, rows: &[Vec<f64>]) {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.curves.push((name.to_string(), text));
    }
}

/// Layout: `<out>/<suite>/manifest.json`, `<out>/<suite>/run_info.json`,
/// and per seed `<out>/<suite>/<seed>/records.json` plus curve CSVs.
pub struct RunWriter {
    suite_dir: PathBuf,
}

impl RunWriter {
    pub fn create(out_dir: &Path, suite: &str) -> std::io::Result<Self> {
        let suite_dir = out_dir.join(suite);
        std::fs::create_dir_all(&suite_dir)?;
        Ok(RunWriter { suite_dir })
    }

    pub fn write_manifest<T: Serialize>(&self, resolved: &T) -> std::io::Result<()> {
        write_json(&self.suite_dir.join("manifest.json"), resolved)
    }

    pub fn write_run_info(&self, wall_seconds: f64, all_pass: bool) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct RunInfo {
            wall_seconds: f64,
            all_pass: bool,
        }
        write_json(
            &self.suite_dir.join("run_info.json"),
            &RunInfo {
                wall_seconds,
                all_pass,
            },
        )
    }

    pub fn write_seed(&self, seed: u64, output: &SeedOutput) -> std::io::Result<()> {
        let seed_dir = self.suite_dir.join(seed.to_string());
        std::fs::create_dir_all(&seed_dir)?;
        write_json(&seed_dir.join("records.json"), &output.records)?;
        for (name, content) in &output.curves {
            let mut f = std::fs::File::create(seed_dir.join(name))?;
            f.write_all(content.as_bytes())?;
        }
        Ok(())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_recomputable_from_scalars() {
        let mut r = ResultRecord::new("demo", 1);
        r.scalar("lhs", 0.4).scalar("rhs", 0.5);
        r.verdict("bound", 0.4 <= 0.5);
        assert!(r.all_pass());
        assert_eq!(r.scalars["lhs"], 0.4);
    }

    #[test]
    fn csv_rows_are_plain_decimal() {
        let mut out = SeedOutput::default();
        out.push_curve("c.csv", "a,b", &[vec![0.5, 1.0], vec![0.25, 2.0]]);
        assert_eq!(out.curves[0].1, "a,b\n0.5,1\n0.25,2\n");
    }
}
