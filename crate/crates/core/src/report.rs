//! Residual reports: per-point records, per-check summaries and verdicts,
//! serialized deterministically as JSON and CSV.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tolerances::Tolerances;

/// Whether a quantity must stay below or above its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// One residual at one sample.
#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub point: Vec<f64>,
    pub name: String,
    pub raw: f64,
    pub scaled: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_scaled: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_scaled: Option<f64>,
    pub tolerance: f64,
    pub bound: Bound,
    /// Diagnostics are reported but do not enter the overall verdict.
    pub diagnostic: bool,
    pub verdict: Verdict,
}

impl CheckSummary {
    pub fn worst_scaled(&self) -> f64 {
        self.max_scaled.or(self.min_scaled).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub suite: String,
    pub verdict: Verdict,
    pub checks: Vec<CheckSummary>,
    /// Samples skipped, e.g. because they hit the singular set of a map.
    pub excluded: usize,
    pub notes: Vec<String>,
    pub provenance: Provenance,
    /// The configuration text as given.
    pub config: String,
    #[serde(skip)]
    pub records: Vec<Record>,
}

struct Acc {
    name: String,
    tolerance: f64,
    bound: Bound,
    diagnostic: bool,
    count: usize,
    worst_raw: f64,
    worst_scaled: f64,
    failed: bool,
}

/// Accumulates records; summaries keep the order in which checks first
/// appear, so reports are reproducible.
pub struct ReportBuilder {
    suite: String,
    checks: Vec<Acc>,
    records: Vec<Record>,
    excluded: usize,
    notes: Vec<String>,
}

impl ReportBuilder {
    pub fn new(suite: &str) -> Self {
        ReportBuilder { suite: suite.into(), checks: Vec::new(), records: Vec::new(), excluded: 0, notes: Vec::new() }
    }

    /// Declares a check; records of undeclared checks are rejected.
    pub fn check(&mut self, name: &str, tolerance: f64, bound: Bound, diagnostic: bool) -> &mut Self {
        if !self.checks.iter().any(|c| c.name == name) {
            let init = match bound {
                Bound::Upper => f64::NEG_INFINITY,
                Bound::Lower => f64::INFINITY,
            };
            self.checks.push(Acc {
                name: name.into(),
                tolerance,
                bound,
                diagnostic,
                count: 0,
                worst_raw: init,
                worst_scaled: init,
                failed: false,
            });
        }
        self
    }

    pub fn record(&mut self, point: &[f64], name: &str, raw: f64, scaled: f64) {
        let acc = self
            .checks
            .iter_mut()
            .find(|c| c.name == name)
            .unwrap_or_else(|| panic!("undeclared check {name}"));
        let ok = match acc.bound {
            Bound::Upper => scaled <= acc.tolerance,
            Bound::Lower => scaled >= acc.tolerance,
        };
        acc.count += 1;
        acc.failed |= !ok;
        let worse = |a: f64, b: f64| match acc.bound {
            Bound::Upper => a.max(b),
            Bound::Lower => a.min(b),
        };
        if raw.is_nan() || scaled.is_nan() {
            acc.worst_raw = f64::NAN;
            acc.worst_scaled = f64::NAN;
        } else if !acc.worst_scaled.is_nan() {
            acc.worst_raw = worse(acc.worst_raw, raw.abs());
            acc.worst_scaled = worse(acc.worst_scaled, scaled);
        }
        self.records.push(Record {
            point: point.to_vec(),
            name: name.into(),
            raw,
            scaled,
            verdict: Verdict::from_bool(ok),
        });
    }

    pub fn exclude(&mut self, n: usize) {
        self.excluded += n;
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn finish(self, config_text: &str, tolerances: &Tolerances) -> ResidualReport {
        let checks: Vec<CheckSummary> = self
            .checks
            .into_iter()
            .map(|a| {
                let seen = a.count > 0;
                let (raw, scaled) = (seen.then_some(a.worst_raw), seen.then_some(a.worst_scaled));
                let upper = a.bound == Bound::Upper;
                CheckSummary {
                    name: a.name,
                    count: a.count,
                    max_raw: if upper { raw } else { None },
                    max_scaled: if upper { scaled } else { None },
                    min_raw: if upper { None } else { raw },
                    min_scaled: if upper { None } else { scaled },
                    tolerance: a.tolerance,
                    bound: a.bound,
                    diagnostic: a.diagnostic,
                    // a check without samples certifies nothing
                    verdict: Verdict::from_bool(seen && !a.failed),
                }
            })
            .collect();
        let verdict = Verdict::from_bool(checks.iter().all(|c| c.diagnostic || c.verdict == Verdict::Pass));
        ResidualReport {
            suite: self.suite,
            verdict,
            checks,
            excluded: self.excluded,
            notes: self.notes,
            provenance: Provenance {
                config_hash: crate::config::config_hash(config_text),
                code_version: env!("CARGO_PKG_VERSION").to_string(),
                tolerances: tolerances.clone(),
            },
            config: config_text.to_string(),
            records: self.records,
        }
    }
}

impl ResidualReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn check(&self, name: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Columns: point coordinates, residual name, raw, scaled, verdict.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.records.first().map_or(3, |r| r.point.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
        header.extend(["residual", "raw", "scaled", "verdict"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row: Vec<String> = r.point.iter().map(|x| x.to_string()).collect();
            row.push(r.name.clone());
            row.push(r.raw.to_string());
            row.push(r.scaled.to_string());
            row.push(match r.verdict {
                Verdict::Pass => "pass".into(),
                Verdict::Fail => "fail".into(),
            });
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResidualReport {
        let mut b = ReportBuilder::new("demo");
        b.check("cotton", 1e-6, Bound::Upper, false).check("gap", 1e-4, Bound::Lower, false);
        b.check("codazzi_unnormalized", 1e-6, Bound::Upper, true);
        b.record(&[0.0, 0.0, 0.0], "cotton", 3e-9, 1e-9);
        b.record(&[0.0, 0.0, 0.1], "cotton", -6e-9, 2e-9);
        b.record(&[0.0, 0.0, 0.1], "gap", 0.3, 0.3);
        b.record(&[0.0, 0.0, 0.1], "codazzi_unnormalized", 0.5, 0.5);
        b.finish("{}", &Tolerances::default())
    }

    #[test]
    fn summaries_and_verdicts() {
        let r = sample();
        assert!(r.passed());
        let c = r.check("cotton").unwrap();
        assert_eq!(c.count, 2);
        assert_eq!(c.max_raw, Some(6e-9));
        assert_eq!(c.max_scaled, Some(2e-9));
        assert_eq!(r.check("gap").unwrap().min_scaled, Some(0.3));
        assert_eq!(r.check("codazzi_unnormalized").unwrap().verdict, Verdict::Fail);
        let mut b = ReportBuilder::new("x");
        b.check("gap", 1e-4, Bound::Lower, false);
        b.record(&[0.0; 3], "gap", 1e-5, 1e-5);
        assert!(!b.finish("{}", &Tolerances::default()).passed());
        let mut b = ReportBuilder::new("x");
        b.check("nan", 1.0, Bound::Upper, false);
        b.record(&[0.0; 3], "nan", f64::NAN, f64::NAN);
        assert!(!b.finish("{}", &Tolerances::default()).passed());
        let mut b = ReportBuilder::new("x");
        b.check("empty", 1.0, Bound::Upper, false);
        assert!(!b.finish("{}", &Tolerances::default()).passed());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,x3,residual,raw,scaled,verdict");
        assert_eq!(lines[1], "0,0,0,cotton,0.000000003,0.000000001,pass");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn json_is_reproducible() {
        assert_eq!(sample().to_json(), sample().to_json());
        let v: serde_json::Value = serde_json::from_str(&sample().to_json()).unwrap();
        assert_eq!(v["checks"][0]["verdict"], "pass");
        assert_eq!(v["config"], "{}");
        assert!(v["provenance"]["config_hash"].as_str().unwrap().len() == 64);
    }
}
