//! Run records and their on-disk layout (`config.json`, `timeseries.csv`, `summary.json`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classify::{classify_run, Classification};
use super::config::{RunConfig, Thresholds};
use super::fit::{fit_asymptotics, Fits};
use crate::error::{Error, Result};
use crate::profile::TemplateKind;

pub const CONFIG_FILE: &str = "config.json";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// One sampled time. Soliton columns are NaN once the tracker has lost the solitons.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeseriesRow {
    pub t: f64,
    pub z: Vec<f64>,
    pub ell: Vec<f64>,
    /// Distance to the `K`-soliton family; for `K = 0` the energy norm of `(u, ∂t u)`.
    pub n: f64,
    pub f_minus: f64,
    pub f_plus: f64,
    pub b: f64,
    pub e: f64,
    pub dtu_l2: f64,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
}

impl TimeseriesRow {
    pub fn k(&self) -> usize {
        self.z.len()
    }

    pub fn is_tracked(&self) -> bool {
        self.z.iter().all(|z| z.is_finite())
    }
}

/// CSV header for `k` solitons.
pub fn timeseries_header(k: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=k).map(|i| format!("z_{i}")));
    h.extend((1..=k).map(|i| format!("ell_{i}")));
    h.extend(["N", "F_minus", "F_plus", "b", "E", "dtu_L2"].map(String::from));
    h.extend((1..=k).map(|i| format!("a_plus_{i}")));
    h.extend((1..=k).map(|i| format!("a_minus_{i}")));
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowUp { t: f64 },
    TubeExit { t: f64 },
}

/// Outcome of one bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionReport {
    /// Index of the bisected coordinate.
    pub coordinate: usize,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
    /// Trials evaluated, as `(amplitude, sign of departing a⁺)`.
    pub history: Vec<(f64, i8)>,
    /// Classification is monotone across the final bracket over the last five trials.
    pub monotone_last5: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub t_start: f64,
    /// Perturbation coefficients applied at the segment start.
    pub coefficients: Vec<f64>,
    pub bisections: Vec<BisectionReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootReport {
    /// Threshold amplitude of the first segment (the shooting parameter proper).
    pub a_star: Vec<f64>,
    pub segments: Vec<SegmentReport>,
    /// Classifications of full runs from the final bracket endpoints, `(lo, hi)`.
    pub endpoints: Option<(Classification, Classification)>,
}

/// Facts about a run that are not recoverable from the sampled rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFacts {
    pub termination: Termination,
    /// Energy norm of the final state; absent for runs without a field.
    pub terminal_energy_norm: Option<f64>,
    pub energy_norm_decaying: bool,
    pub shooting: Option<ShootReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsUsed {
    #[serde(rename = "c_Q")]
    pub c_q: f64,
    pub c_1: f64,
    pub kappa: f64,
    #[serde(rename = "E_Q")]
    pub e_q: f64,
    pub nu0: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub beta: f64,
    pub mu: f64,
    pub template: TemplateKind,
    pub thresholds: Thresholds,
    pub theta_fit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub classification: Classification,
    /// `None` when the rows do not admit the fits (too few samples).
    pub fits: Option<Fits>,
    pub run: RunFacts,
    pub constants: ConstantsUsed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: RunConfig,
    pub rows: Vec<TimeseriesRow>,
    pub summary: Summary,
}

impl RunRecord {
    /// Assemble a record, deriving classification and fits from the rows.
    pub fn assemble(config: RunConfig, rows: Vec<TimeseriesRow>, run: RunFacts, constants: ConstantsUsed) -> Self {
        let fits = fit_asymptotics(&rows, &config).ok();
        let classification = classify_run(&rows, &run, &config);
        Self { config, rows, summary: Summary { classification, fits, run, constants } }
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    /// Column `name` of the time series, if present.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let header = timeseries_header(self.k());
        let idx = header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| row_values(r)[idx]).collect())
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(CONFIG_FILE), serde_json::to_string_pretty(&self.config)?)?;
        write_timeseries(&dir.join(TIMESERIES_FILE), self.k(), &self.rows)?;
        fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&self.summary)?)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(&fs::read_to_string(dir.join(CONFIG_FILE))?)?;
        let rows = read_timeseries(&dir.join(TIMESERIES_FILE), config.k)?;
        let summary: Summary = serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_FILE))?)?;
        Ok(Self { config, rows, summary })
    }
}

fn row_values(r: &TimeseriesRow) -> Vec<f64> {
    let mut v = vec![r.t];
    v.extend(&r.z);
    v.extend(&r.ell);
    v.extend([r.n, r.f_minus, r.f_plus, r.b, r.e, r.dtu_l2]);
    v.extend(&r.a_plus);
    v.extend(&r.a_minus);
    v
}

/// Shortest text that parses back to the same `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_timeseries(path: &Path, k: usize, rows: &[TimeseriesRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(timeseries_header(k))?;
    for r in rows {
        if r.k() != k {
            return Err(Error::Schema(format!("row at t = {} has {} solitons, expected {k}", r.t, r.k())));
        }
        w.write_record(row_values(r).into_iter().map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_timeseries(path: &Path, k: usize) -> Result<Vec<TimeseriesRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header != timeseries_header(k) {
        return Err(Error::Schema(format!("unexpected timeseries header {header:?} for K = {k}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Schema(format!("bad number {s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != header.len() {
            return Err(Error::Schema(format!("row has {} fields, header {}", vals.len(), header.len())));
        }
        let mut it = vals.into_iter();
        let mut take = |m: usize| -> Vec<f64> { it.by_ref().take(m).collect() };
        let t = take(1)[0];
        let z = take(k);
        let ell = take(k);
        let s = take(6);
        let a_plus = take(k);
        let a_minus = take(k);
        rows.push(TimeseriesRow {
            t,
            z,
            ell,
            n: s[0],
            f_minus: s[1],
            f_plus: s[2],
            b: s[3],
            e: s[4],
            dtu_l2: s[5],
            a_plus,
            a_minus,
        });
    }
    Ok(rows)
}

/// Schema checks plus bit-identical recomputation of the derived summary fields.
pub fn validate_record_dir(dir: &Path) -> Result<RunRecord> {
    let rec = RunRecord::read_dir(dir)?;
    rec.config.validate()?;
    if !rec.rows.windows(2).all(|w| w[1].t > w[0].t) {
        return Err(Error::Schema("rows are not strictly time-ordered".into()));
    }
    let fits = fit_asymptotics(&rec.rows, &rec.config).ok();
    if fits != rec.summary.fits {
        return Err(Error::Schema("summary fits do not recompute from the rows".into()));
    }
    let class = classify_run(&rec.rows, &rec.summary.run, &rec.config);
    if class != rec.summary.classification {
        return Err(Error::Schema(format!(
            "summary classification {:?} does not recompute ({class:?})",
            rec.summary.classification
        )));
    }
    Ok(rec)
}
