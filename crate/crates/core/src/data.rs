//! Dataset files: `id,left,right,<covariates...>` with literal `-inf` and
//! `inf` for unbounded endpoints.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classify, ObservationRecord};
use crate::simulate::Cohort;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub id: String,
    pub left: f64,
    pub right: f64,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariate_names: Vec<String>,
    pub rows: Vec<DatasetRow>,
}

/// Which dataset columns enter the assignment (`mix`) and incidence (`inc`)
/// models. The assignment intercept is implicit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CovariateRoles {
    #[serde(default)]
    pub mix: Vec<String>,
    #[serde(default)]
    pub inc: Vec<String>,
}

/// Column means subtracted from each covariate, by name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Centering {
    pub names: Vec<String>,
    pub offsets: Vec<f64>,
}

impl Centering {
    pub fn offset(&self, name: &str) -> f64 {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.offsets[k])
            .unwrap_or(0.0)
    }
}

pub fn format_time(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".into()
    } else if t == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        t.to_string()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_number(cell: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = match cell.trim() {
        "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        other => other
            .parse()
            .map_err(|_| parse_err(line, format!("column `{column}`: `{other}` is not a number")))?,
    };
    if v.is_nan() {
        return Err(parse_err(line, format!("column `{column}`: NaN is not allowed")));
    }
    Ok(v)
}

impl Dataset {
    /// Parses CSV text. Line numbers in errors count the header as line 1.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_checked(text, |l, r| classify(l, r).map(|_| ()))
    }

    /// Like [`Dataset::parse`] but also accepts exactly observed times
    /// (`left == right`), which only the nonparametric estimator handles.
    pub fn parse_intervals(text: &str) -> Result<Self> {
        Self::parse_checked(text, |l, r| {
            if l == r && l.is_finite() {
                Ok(())
            } else {
                classify(l, r).map(|_| ())
            }
        })
    }

    fn parse_checked(text: &str, check: impl Fn(f64, f64) -> Result<()>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        let header = records.next().ok_or_else(|| parse_err(1, "missing header"))??;
        let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
        if header.len() < 3 || header[0] != "id" || header[1] != "left" || header[2] != "right" {
            return Err(parse_err(1, "header must start with `id,left,right`"));
        }
        let covariate_names = header[3..].to_vec();
        let mut seen = HashSet::new();
        for name in &covariate_names {
            if !seen.insert(name) {
                return Err(parse_err(1, format!("duplicate column `{name}`")));
            }
        }
        let mut rows = Vec::new();
        let mut ids = HashSet::new();
        for (k, rec) in records.enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            if rec.len() != header.len() {
                return Err(parse_err(
                    line,
                    format!("expected {} fields, got {}", header.len(), rec.len()),
                ));
            }
            let id = rec[0].trim().to_string();
            if id.is_empty() {
                return Err(parse_err(line, "empty id"));
            }
            if !ids.insert(id.clone()) {
                return Err(parse_err(line, format!("duplicate id `{id}`")));
            }
            let left = parse_number(&rec[1], line, "left")?;
            let right = parse_number(&rec[2], line, "right")?;
            check(left, right).map_err(|e| parse_err(line, e.to_string()))?;
            let covariates = (3..header.len())
                .map(|j| {
                    let v = parse_number(&rec[j], line, &header[j])?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(parse_err(line, format!("column `{}` must be finite", header[j])))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(DatasetRow {
                id,
                left,
                right,
                covariates,
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { covariate_names, rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,left,right");
        for n in &self.covariate_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{}", r.id, format_time(r.left), format_time(r.right));
            for v in &r.covariates {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.covariate_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidConfig(format!("covariate column `{name}` not found in dataset")))
    }

    /// Column means of every covariate named in `roles`.
    pub fn centering(&self, roles: &CovariateRoles) -> Result<Centering> {
        let mut names: Vec<String> = Vec::new();
        for n in roles.mix.iter().chain(&roles.inc) {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
        let mut offsets = Vec::with_capacity(names.len());
        for n in &names {
            let j = self.column(n)?;
            let mut vals: Vec<f64> = self.rows.iter().map(|r| r.covariates[j]).collect();
            vals.sort_by(f64::total_cmp);
            offsets.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
        Ok(Centering { names, offsets })
    }

    /// Model records under `roles`, with covariates shifted by `centering`.
    pub fn to_records(&self, roles: &CovariateRoles, centering: &Centering) -> Result<Vec<ObservationRecord>> {
        let mix: Vec<(usize, f64)> = roles
            .mix
            .iter()
            .map(|n| Ok((self.column(n)?, centering.offset(n))))
            .collect::<Result<_>>()?;
        let inc: Vec<(usize, f64)> = roles
            .inc
            .iter()
            .map(|n| Ok((self.column(n)?, centering.offset(n))))
            .collect::<Result<_>>()?;
        self.rows
            .iter()
            .map(|r| {
                let mut x_mix = vec![1.0];
                x_mix.extend(mix.iter().map(|(j, c)| r.covariates[*j] - c));
                let x_inc = inc.iter().map(|(j, c)| r.covariates[*j] - c).collect();
                ObservationRecord::new(r.id.clone(), r.left, r.right, x_mix, x_inc)
            })
            .collect()
    }

    /// Intervals only, for the nonparametric estimator.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.left, r.right)).collect()
    }
}

/// Column name of the strain indicator in simulated cohorts.
pub const STRAIN_COLUMN: &str = "strain18";

/// A simulated cohort as a dataset with a single `strain18` column.
pub fn cohort_dataset(cohort: &Cohort) -> Dataset {
    Dataset {
        covariate_names: vec![STRAIN_COLUMN.to_string()],
        rows: cohort
            .records
            .iter()
            .map(|r| DatasetRow {
                id: r.id.clone(),
                left: r.left,
                right: r.right,
                covariates: vec![r.x_inc[0]],
            })
            .collect(),
    }
}
