//! Run configuration, affine matrix files and optimizer trace CSVs.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowmap::AffineMap;
use crate::optimize::{IterationRecord, StageConfig, TraceRow};

/// Affine matrices of the mesh pipeline, all optional (identity when absent).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinePaths {
    pub input: Option<PathBuf>,
    pub registration: Option<PathBuf>,
    pub target: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    pub target: PathBuf,
    #[serde(default)]
    pub affines: AffinePaths,
    pub stages: Vec<StageConfig<f64>>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Crop both images to their joint bounding box plus padding.
    #[serde(default = "default_true")]
    pub crop: bool,
    /// Percentile pair for intensity normalization.
    #[serde(default)]
    pub normalize: Option<[f64; 2]>,
}

impl RunConfig {
    /// Parses and validates a config; relative paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input);
        fix(&mut self.target);
        fix(&mut self.output_dir);
        for p in [
            &mut self.affines.input,
            &mut self.affines.registration,
            &mut self.affines.target,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::invalid("config needs at least one stage"));
        }
        for (i, s) in self.stages.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::invalid(format!("stage {}: {e}", i + 1)))?;
        }
        let files = [Some(&self.input), Some(&self.target)].into_iter().chain(
            [
                &self.affines.input,
                &self.affines.registration,
                &self.affines.target,
            ]
            .map(|p| p.as_ref()),
        );
        for p in files.flatten() {
            if !p.is_file() {
                return Err(Error::invalid(format!(
                    "referenced file {} does not exist",
                    p.display()
                )));
            }
        }
        if let Some([lo, hi]) = self.normalize {
            if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
                return Err(Error::invalid(
                    "normalize needs percentiles 0 <= lo < hi <= 100",
                ));
            }
        }
        Ok(())
    }
}

pub fn read_affine(path: &Path) -> Result<AffineMap<f64>> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&fs::read_to_string(path)?)?;
    AffineMap::from_homogeneous(&rows)
}

pub fn write_affine(path: &Path, map: &AffineMap<f64>) -> Result<()> {
    fs::write(path, serde_json::to_string(&map.to_homogeneous())? + "\n")?;
    Ok(())
}

pub const TRACE_COLUMNS: [&str; 9] = [
    "stage",
    "iteration",
    "objective",
    "l2_discrepancy",
    "grad_norm",
    "step_length",
    "step_norm",
    "evaluations",
    "wolfe_ok",
];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    stage: usize,
    iteration: usize,
    objective: f64,
    l2_discrepancy: Option<f64>,
    grad_norm: f64,
    step_length: f64,
    step_norm: f64,
    evaluations: usize,
    wolfe_ok: bool,
}

/// One row per accepted optimizer iteration.
pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRow<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(TRACE_COLUMNS).map_err(csv_err)?;
    for r in rows {
        let rec = &r.record;
        w.serialize(CsvRow {
            stage: r.stage,
            iteration: rec.iteration,
            objective: rec.objective,
            l2_discrepancy: rec.tracking,
            grad_norm: rec.grad_norm,
            step_length: rec.step_length,
            step_norm: rec.step_norm,
            evaluations: rec.evaluations,
            wolfe_ok: rec.wolfe_ok,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(TRACE_COLUMNS) {
        return Err(Error::Format(format!(
            "unexpected trace columns {headers:?}"
        )));
    }
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(csv_err)?;
            Ok(TraceRow {
                stage: row.stage,
                record: IterationRecord {
                    iteration: row.iteration,
                    objective: row.objective,
                    tracking: row.l2_discrepancy,
                    grad_norm: row.grad_norm,
                    step_length: row.step_length,
                    step_norm: row.step_norm,
                    evaluations: row.evaluations,
                    wolfe_ok: row.wolfe_ok,
                },
            })
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("trace csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = AffineMap::new(
            3,
            vec![1.0, 0.1, 0.0, 0.0, 2.0, 1.0 / 3.0, 0.0, 0.0, 1.0],
            vec![-4.5, 2.0, 7.0],
        )
        .unwrap();
        let p = dir.path().join("a.json");
        write_affine(&p, &a).unwrap();
        assert_eq!(read_affine(&p).unwrap(), a);
        fs::write(&p, "[[1, 0], [0, 1]]").unwrap();
        assert!(read_affine(&p).is_err());
    }

    #[test]
    fn trace_round_trip() {
        let rows: Vec<TraceRow<f64>> = (1..4)
            .map(|i| TraceRow {
                stage: 1 + i / 3,
                record: IterationRecord {
                    iteration: i,
                    objective: 1.0 / i as f64,
                    tracking: if i == 2 { None } else { Some(0.1 * i as f64) },
                    grad_norm: 1e-3 / 7.0,
                    step_length: 1.0,
                    step_norm: 0.3,
                    evaluations: 2,
                    wolfe_ok: i != 3,
                },
            })
            .collect();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("stage,iteration,objective,l2_discrepancy"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn config_resolution_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.json"), "{}").unwrap();
        fs::write(dir.path().join("b.json"), "{}").unwrap();
        let cfg = dir.path().join("run.json");
        fs::write(
            &cfg,
            r#"{"input": "a.json", "target": "b.json", "output_dir": "out", "stages": [{"max_iters": 3}]}"#,
        )
        .unwrap();
        let rc = RunConfig::load(&cfg).unwrap();
        assert_eq!(rc.input, dir.path().join("a.json"));
        assert!(rc.crop);
        assert_eq!(rc.stages[0].max_iters, 3);
        fs::write(
            &cfg,
            r#"{"input": "a.json", "target": "b.json", "output_dir": "o", "stages": []}"#,
        )
        .unwrap();
        assert!(matches!(
            RunConfig::load(&cfg),
            Err(Error::InvalidArgument(_))
        ));
        fs::write(
            &cfg,
            r#"{"input": "zz.json", "target": "b.json", "output_dir": "o", "stages": [{}]}"#,
        )
        .unwrap();
        assert!(RunConfig::load(&cfg).is_err());
        fs::write(&cfg, r#"{"input": "a.json", "target": "b.json", "output_dir": "o", "stages": [{"alpah": 1}]}"#).unwrap();
        assert!(matches!(RunConfig::load(&cfg), Err(Error::Json(_))));
    }
}
