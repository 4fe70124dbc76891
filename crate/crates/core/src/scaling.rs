//! Quantum-to-classical ratios, exponential fits of `1/L_{d,N}` against the
//! number of observers, and the subadditivity comparison for composite
//! dimensions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{closed_form_l, MCEstimate};

/// Significance (in standard deviations) required for a subadditivity verdict.
pub const SIGNIFICANCE: f64 = 3.0;

/// `QCR = (1/d) / L`: the quantum self-overlap `1/d` over the classical overlap.
pub fn qcr(d: usize, l: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidOverlap(l));
    }
    Ok(1.0 / (d as f64 * l))
}

/// One row of an overlap table. Column order is the CSV schema:
/// `d,N,L,stderr,points,qcr,log_qcr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub d: usize,
    #[serde(rename = "N")]
    pub parties: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub stderr: f64,
    pub points: u64,
    pub qcr: f64,
    pub log_qcr: f64,
}

impl TableRow {
    pub fn new(d: usize, parties: usize, l: f64, stderr: f64, points: u64) -> Result<Self> {
        let q = qcr(d, l)?;
        Ok(Self {
            d,
            parties,
            l,
            stderr,
            points,
            qcr: q,
            log_qcr: q.ln(),
        })
    }

    pub fn from_estimate(est: &MCEstimate) -> Result<Self> {
        Self::new(est.d, est.parties, est.mean, est.stderr, est.points)
    }

    /// Exact row for `d` in {2, 3}; zero uncertainty and zero points.
    pub fn closed_form(d: usize, parties: usize) -> Result<Self> {
        Self::new(d, parties, closed_form_l(d, parties)?, 0.0, 0)
    }

    /// First-order uncertainty of `log_qcr`: `stderr / L`.
    pub fn log_qcr_err(&self) -> f64 {
        self.stderr / self.l
    }
}

pub fn write_table<W: std::io::Write>(rows: &[TableRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(|e| Error::Usage(e.to_string()))?;
    }
    out.flush().map_err(|e| Error::Usage(e.to_string()))
}

/// Reads a table; `qcr` and `log_qcr` columns are recomputed from `L`.
pub fn read_table<R: std::io::Read>(r: R) -> Result<Vec<TableRow>> {
    #[derive(Deserialize)]
    struct Raw {
        d: usize,
        #[serde(rename = "N")]
        parties: usize,
        #[serde(rename = "L")]
        l: f64,
        #[serde(default)]
        stderr: f64,
        #[serde(default)]
        points: u64,
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    rdr.deserialize::<Raw>()
        .map(|raw| {
            let raw = raw.map_err(|e| Error::Usage(format!("bad table row: {e}")))?;
            TableRow::new(raw.d, raw.parties, raw.l, raw.stderr, raw.points)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `1/L = a^N b`
    TwoParam,
    /// `1/L = a^N`
    OneParam,
}

/// One `(N, L, weight)` input of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub parties: usize,
    pub l: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub d: Option<usize>,
    pub model: FitModel,
    pub a: f64,
    pub b: f64,
    /// Weighted RMS residual of `ln(1/L)`.
    pub residual: f64,
    pub weights: Vec<f64>,
}

/// Weighted least squares of `ln(1/L)` against `N`.
///
/// The slope is `ln a` and, for the two-parameter model, the intercept is
/// `ln b`. Records are sorted before summation so the result does not
/// depend on input order.
pub fn fit_scaling(records: &[FitPoint], model: FitModel) -> Result<ScalingFit> {
    match model {
        FitModel::TwoParam => fit_two_param(records),
        FitModel::OneParam => fit_fixed_intercept(records, 1.0),
    }
}

fn prepared(records: &[FitPoint], min: usize) -> Result<Vec<FitPoint>> {
    if records.len() < min {
        return Err(Error::Underdetermined(records.len()));
    }
    for r in records {
        if !(r.l > 0.0) {
            return Err(Error::InvalidOverlap(r.l));
        }
        if !(r.weight > 0.0) || !r.weight.is_finite() {
            return Err(Error::Usage(format!("fit weight must be positive, got {}", r.weight)));
        }
    }
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| {
        (a.parties, a.l, a.weight)
            .partial_cmp(&(b.parties, b.l, b.weight))
            .expect("finite fit inputs")
    });
    Ok(sorted)
}

fn residual(points: &[FitPoint], slope: f64, intercept: f64) -> f64 {
    let wsum: f64 = points.iter().map(|p| p.weight).sum();
    let ss: f64 = points
        .iter()
        .map(|p| {
            let r = -p.l.ln() - (slope * p.parties as f64 + intercept);
            p.weight * r * r
        })
        .sum();
    (ss / wsum).sqrt()
}

fn fit_two_param(records: &[FitPoint]) -> Result<ScalingFit> {
    let pts = prepared(records, 2)?;
    let wsum: f64 = pts.iter().map(|p| p.weight).sum();
    let xbar = pts.iter().map(|p| p.weight * p.parties as f64).sum::<f64>() / wsum;
    let ybar = pts.iter().map(|p| p.weight * -p.l.ln()).sum::<f64>() / wsum;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in &pts {
        let dx = p.parties as f64 - xbar;
        sxy += p.weight * dx * (-p.l.ln() - ybar);
        sxx += p.weight * dx * dx;
    }
    if sxx <= 0.0 {
        // every record at the same N
        return Err(Error::Underdetermined(1));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    Ok(ScalingFit {
        d: None,
        model: FitModel::TwoParam,
        a: slope.exp(),
        b: intercept.exp(),
        residual: residual(&pts, slope, intercept),
        weights: records.iter().map(|p| p.weight).collect(),
    })
}

/// Fit of `ln(1/L) = N ln a + ln b` with `b` held fixed.
pub fn fit_fixed_intercept(records: &[FitPoint], b: f64) -> Result<ScalingFit> {
    let pts = prepared(records, 2)?;
    let lb = b.ln();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in &pts {
        let x = p.parties as f64;
        sxy += p.weight * x * (-p.l.ln() - lb);
        sxx += p.weight * x * x;
    }
    let slope = sxy / sxx;
    Ok(ScalingFit {
        d: None,
        model: FitModel::OneParam,
        a: slope.exp(),
        b,
        residual: residual(&pts, slope, lb),
        weights: records.iter().map(|p| p.weight).collect(),
    })
}

/// Fit the rows of one dimension, weighting by Monte Carlo point counts.
pub fn fit_table(rows: &[TableRow], d: usize, model: FitModel) -> Result<ScalingFit> {
    let pts: Vec<FitPoint> = rows
        .iter()
        .filter(|r| r.d == d)
        .map(|r| FitPoint {
            parties: r.parties,
            l: r.l,
            weight: r.points as f64,
        })
        .collect();
    let mut fit = fit_scaling(&pts, model)?;
    fit.d = Some(d);
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Subadditive,
    Superadditive,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityRow {
    #[serde(rename = "N")]
    pub parties: usize,
    /// `log QCR(d1) + log QCR(d2) - log QCR(d1 d2)`
    pub delta: f64,
    pub sigma: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub d1: usize,
    pub d2: usize,
    pub rows: Vec<SubadditivityRow>,
}

/// Compares split and joint violation for each `N` in `parties`.
///
/// When `d1 == d2` the same estimate enters twice, so its uncertainty is
/// doubled rather than added in quadrature.
pub fn subadditivity_report(
    d1: usize,
    d2: usize,
    parties: &[usize],
    rows: &[TableRow],
) -> Result<SubadditivityReport> {
    let index: BTreeMap<(usize, usize), &TableRow> =
        rows.iter().map(|r| ((r.d, r.parties), r)).collect();
    let find = |d: usize, n: usize| {
        index
            .get(&(d, n))
            .copied()
            .ok_or_else(|| Error::IncompleteInput(format!("no estimate for d={d}, N={n}")))
    };
    let mut out = Vec::with_capacity(parties.len());
    for &n in parties {
        let r1 = find(d1, n)?;
        let r2 = find(d2, n)?;
        let rj = find(d1 * d2, n)?;
        let delta = r1.log_qcr + r2.log_qcr - rj.log_qcr;
        let split_var = if d1 == d2 {
            (2.0 * r1.log_qcr_err()).powi(2)
        } else {
            r1.log_qcr_err().powi(2) + r2.log_qcr_err().powi(2)
        };
        let sigma = (split_var + rj.log_qcr_err().powi(2)).sqrt();
        // rounding slack so exactly equal ratios stay inconclusive
        let margin = SIGNIFICANCE * sigma + 1e-12;
        let verdict = if delta > margin {
            Verdict::Subadditive
        } else if delta < -margin {
            Verdict::Superadditive
        } else {
            Verdict::Inconclusive
        };
        out.push(SubadditivityRow {
            parties: n,
            delta,
            sigma,
            verdict,
        });
    }
    Ok(SubadditivityReport { d1, d2, rows: out })
}
