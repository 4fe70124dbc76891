//! Bell scenarios with finitely many settings per observer.
//!
//! With `M` settings per observer the correlation function becomes an
//! `M^N` tensor of correlation vectors. A deterministic local strategy
//! assigns a label to every setting of every observer, and its classical
//! overlap with the tensor bounds the discrete inequality.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::rng::block_rng;
use crate::optim::PatternSearch;
use crate::qcorr::{dot, Correlator, OutcomeFrame, Scenario, SettingVector};

/// Largest tensor (cells times vector length) [`build_scenario`] will allocate.
pub const TENSOR_CAP: usize = 1 << 24;
/// Largest number of joint strategies [`classical_opt_exact`] will enumerate.
pub const EXACT_CAP: u128 = 10_000_000;
/// Restart count used whenever the heuristic stands in for exact enumeration.
pub const AUTHORITATIVE_RESTARTS: usize = 32;

/// Settings of every observer together with the quantum correlation tensor.
#[derive(Debug, Clone)]
pub struct DiscreteScenario {
    scenario: Scenario,
    frame: OutcomeFrame,
    settings: Vec<Vec<SettingVector>>,
    counts: Vec<usize>,
    // cells in mixed radix, observer 0 most significant; each cell holds dim reals
    tensor: Vec<f64>,
    // projections dot(T_cell, v_j), d per cell
    proj: Vec<f64>,
}

/// Labels for every setting of every observer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub labels: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOptimum {
    pub strategy: DeterministicStrategy,
    pub overlap: f64,
    pub exact: bool,
}

/// Evaluates the correlation tensor on every setting combination.
pub fn build_scenario(
    scenario: Scenario,
    frame: &OutcomeFrame,
    settings: Vec<Vec<SettingVector>>,
) -> Result<DiscreteScenario> {
    let d = scenario.d();
    if frame.d() != d {
        return Err(Error::InvalidDimension(frame.d()));
    }
    if settings.len() != scenario.parties() {
        return Err(Error::ComponentCount {
            expected: scenario.parties(),
            got: settings.len(),
        });
    }
    let counts: Vec<usize> = settings.iter().map(Vec::len).collect();
    if counts.contains(&0) {
        return Err(Error::Usage("every observer needs at least one setting".into()));
    }
    for s in settings.iter().flatten() {
        if s.len() != d - 1 {
            return Err(Error::ComponentCount {
                expected: d - 1,
                got: s.len(),
            });
        }
    }
    let cells = counts
        .iter()
        .try_fold(1usize, |acc, &m| acc.checked_mul(m))
        .filter(|c| c.saturating_mul(frame.dim()) <= TENSOR_CAP)
        .ok_or_else(|| Error::ResourceLimit(format!("tensor exceeds {TENSOR_CAP} entries")))?;

    let dim = frame.dim();
    let corr = Correlator::new(d)?;
    let mut tensor = vec![0.0; cells * dim];
    let mut proj = vec![0.0; cells * d];
    let mut probs = vec![0.0; d];
    let mut x = vec![0.0; d - 1];
    let mut idx = vec![0usize; counts.len()];
    for cell in 0..cells {
        decode(cell, &counts, &mut idx);
        x.iter_mut().for_each(|v| *v = 0.0);
        for (obs, &k) in idx.iter().enumerate() {
            for (v, p) in x.iter_mut().zip(settings[obs][k].phases()) {
                *v += p;
            }
        }
        corr.probabilities_into(&x, &mut probs);
        let t = &mut tensor[cell * dim..(cell + 1) * dim];
        frame.combine_into(&probs, t);
        for (j, v) in frame.vectors().enumerate() {
            proj[cell * d + j] = dot(t, v);
        }
    }
    Ok(DiscreteScenario {
        scenario,
        frame: frame.clone(),
        settings,
        counts,
        tensor,
        proj,
    })
}

fn decode(mut cell: usize, counts: &[usize], idx: &mut [usize]) {
    for (i, &m) in counts.iter().enumerate().rev() {
        idx[i] = cell % m;
        cell /= m;
    }
}

impl DiscreteScenario {
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn settings(&self) -> &[Vec<SettingVector>] {
        &self.settings
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn cells(&self) -> usize {
        self.proj.len() / self.scenario.d()
    }

    /// Correlation vector of one cell, indexed by each observer's setting.
    pub fn cell(&self, idx: &[usize]) -> &[f64] {
        let dim = self.frame.dim();
        let c = idx.iter().zip(&self.counts).fold(0, |acc, (&i, &m)| acc * m + i);
        &self.tensor[c * dim..(c + 1) * dim]
    }

    /// `sum |T_cell|^2`, the quantum value of the discrete inequality.
    pub fn self_overlap(&self) -> f64 {
        self.tensor.iter().map(|v| v * v).sum()
    }

    /// Classical overlap `sum_cells T_cell · v_{sum of labels}`.
    pub fn overlap(&self, strategy: &DeterministicStrategy) -> f64 {
        let d = self.scenario.d();
        let mut idx = vec![0; self.counts.len()];
        (0..self.cells())
            .map(|cell| {
                decode(cell, &self.counts, &mut idx);
                let label: usize = idx
                    .iter()
                    .zip(&strategy.labels)
                    .map(|(&k, l)| l[k])
                    .sum();
                self.proj[cell * d + label % d]
            })
            .sum()
    }

    /// Number of joint deterministic strategies, `d^(sum of M)`.
    pub fn strategy_count(&self) -> u128 {
        let total: usize = self.counts.iter().sum();
        (self.scenario.d() as u128)
            .checked_pow(total as u32)
            .unwrap_or(u128::MAX)
    }

    /// Best labels for observer `obs`, all other labels fixed.
    ///
    /// Each setting of `obs` is optimised independently since the overlap
    /// is a sum over cells. Ties keep the current label.
    fn best_response(&self, obs: usize, labels: &mut [Vec<usize>]) -> bool {
        let d = self.scenario.d();
        let m = self.counts[obs];
        let mut score = vec![0.0; m * d];
        let mut idx = vec![0; self.counts.len()];
        for cell in 0..self.cells() {
            decode(cell, &self.counts, &mut idx);
            let rest: usize = idx
                .iter()
                .enumerate()
                .filter(|&(o, _)| o != obs)
                .map(|(o, &k)| labels[o][k])
                .sum();
            let k = idx[obs];
            for l in 0..d {
                score[k * d + l] += self.proj[cell * d + (rest + l) % d];
            }
        }
        let mut changed = false;
        for k in 0..m {
            let row = &score[k * d..(k + 1) * d];
            let cur = labels[obs][k];
            let mut best = cur;
            for l in 0..d {
                if row[l] > row[best] + 1e-12 {
                    best = l;
                }
            }
            if best != cur {
                labels[obs][k] = best;
                changed = true;
            }
        }
        changed
    }
}

/// Maximum classical overlap by enumeration.
///
/// All label tables of observers `0..N-1` are enumerated; for each, the last
/// observer's labels are chosen setting by setting, which is exact because
/// the overlap separates over that observer's settings.
pub fn classical_opt_exact(ds: &DiscreteScenario) -> Result<ClassicalOptimum> {
    let count = ds.strategy_count();
    if count > EXACT_CAP {
        return Err(Error::UseHeuristic(count));
    }
    let d = ds.scenario.d();
    let n = ds.counts.len();
    let last = n - 1;
    let m_last = ds.counts[last];
    let prefix_cells = ds.cells() / m_last;
    let free: usize = ds.counts[..last].iter().sum();
    let enumerated = d.pow(free as u32);

    let mut best_overlap = f64::NEG_INFINITY;
    let mut best_labels = Vec::new();
    let mut labels: Vec<Vec<usize>> = ds.counts.iter().map(|&m| vec![0; m]).collect();
    let mut idx = vec![0; n];
    let mut score = vec![0.0; m_last * d];
    for code in 0..enumerated {
        // odometer over the first N-1 observers' labels
        let mut rest = code;
        for l in labels[..last].iter_mut().flatten() {
            *l = rest % d;
            rest /= d;
        }
        score.iter_mut().for_each(|s| *s = 0.0);
        for prefix in 0..prefix_cells {
            let base = prefix * m_last;
            decode(base, &ds.counts, &mut idx);
            let partial: usize = (0..last).map(|o| labels[o][idx[o]]).sum();
            for k in 0..m_last {
                let cell = base + k;
                for l in 0..d {
                    score[k * d + l] += ds.proj[cell * d + (partial + l) % d];
                }
            }
        }
        let mut total = 0.0;
        for k in 0..m_last {
            let row = &score[k * d..(k + 1) * d];
            let mut arg = 0;
            for l in 1..d {
                if row[l] > row[arg] {
                    arg = l;
                }
            }
            labels[last][k] = arg;
            total += row[arg];
        }
        if total > best_overlap {
            best_overlap = total;
            best_labels = labels.clone();
        }
    }
    Ok(ClassicalOptimum {
        strategy: DeterministicStrategy {
            labels: best_labels,
        },
        overlap: best_overlap,
        exact: true,
    })
}

/// Coordinate ascent over observers from `restarts` random label tables.
///
/// Deterministic in `(seed, restarts)`; earlier restarts win ties.
pub fn classical_opt_heuristic(
    ds: &DiscreteScenario,
    restarts: usize,
    seed: u64,
) -> Result<ClassicalOptimum> {
    if restarts == 0 {
        return Err(Error::Usage("heuristic needs at least one restart".into()));
    }
    let d = ds.scenario.d();
    let runs: Vec<(f64, Vec<Vec<usize>>)> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = block_rng(seed, r);
            let mut labels: Vec<Vec<usize>> = ds
                .counts
                .iter()
                .map(|&m| (0..m).map(|_| rng.random_range(0..d)).collect())
                .collect();
            for _sweep in 0..1000 {
                let mut changed = false;
                for obs in 0..ds.counts.len() {
                    changed |= ds.best_response(obs, &mut labels);
                }
                if !changed {
                    break;
                }
            }
            let strategy = DeterministicStrategy { labels };
            (ds.overlap(&strategy), strategy.labels)
        })
        .collect();
    let (overlap, labels) = runs
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one restart");
    Ok(ClassicalOptimum {
        strategy: DeterministicStrategy { labels },
        overlap,
        exact: false,
    })
}

/// Exact optimum when enumerable, otherwise the heuristic with
/// [`AUTHORITATIVE_RESTARTS`] restarts.
pub fn classical_opt(ds: &DiscreteScenario, seed: u64) -> Result<ClassicalOptimum> {
    match classical_opt_exact(ds) {
        Err(Error::UseHeuristic(_)) => classical_opt_heuristic(ds, AUTHORITATIVE_RESTARTS, seed),
        other => other,
    }
}

/// Quantum-to-classical ratio of the discrete inequality.
pub fn discrete_qcr(ds: &DiscreteScenario, seed: u64) -> Result<f64> {
    let c = classical_opt(ds, seed)?;
    if !(c.overlap > 0.0) {
        return Err(Error::Numerical("non-positive classical overlap".into()));
    }
    Ok(ds.self_overlap() / c.overlap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    #[serde(rename = "M")]
    pub settings_per_observer: usize,
    pub qcr: f64,
    pub settings: Vec<Vec<SettingVector>>,
}

/// Options for [`optimize_settings`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingsSearch {
    pub search: PatternSearch,
    /// Extra random starting points per `M`, besides the warm start and the
    /// evenly spread one.
    pub random_starts: usize,
}

impl Default for SettingsSearch {
    fn default() -> Self {
        Self {
            search: PatternSearch {
                initial_step: 0.02,
                min_step: 1e-4,
                shrink: 0.5,
                max_evals: 20_000,
            },
            random_starts: 1,
        }
    }
}

// Flat parameter vector layout: observer-major, setting, phase. The first
// setting of observers 0..N-1 is pinned to zero because adding c to one
// observer and subtracting it from another leaves the tensor unchanged.
fn unflatten(params: &[f64], n: usize, m: usize, phases: usize) -> Vec<Vec<SettingVector>> {
    let mut it = params.iter().copied();
    (0..n)
        .map(|obs| {
            (0..m)
                .map(|k| {
                    if obs + 1 < n && k == 0 {
                        SettingVector::zeros(phases)
                    } else {
                        SettingVector::new(it.by_ref().take(phases).collect::<Vec<_>>())
                    }
                })
                .collect()
        })
        .collect()
}

fn flatten(settings: &[Vec<SettingVector>]) -> Vec<f64> {
    let n = settings.len();
    let mut out = Vec::new();
    for (obs, list) in settings.iter().enumerate() {
        for (k, s) in list.iter().enumerate() {
            if !(obs + 1 < n && k == 0) {
                out.extend_from_slice(s.phases());
            }
        }
    }
    out
}

fn spread_start(n: usize, m: usize, d: usize) -> Vec<Vec<SettingVector>> {
    // settings (k + j/N)/(dM) for observer j along the diagonal direction of
    // the phase torus; the stagger puts the qubit case at its optimum
    (0..n)
        .map(|j| {
            (0..m)
                .map(|k| {
                    let t = (k as f64 + j as f64 / n as f64) / (d * m) as f64;
                    SettingVector::new((1..d).map(|i| i as f64 * t))
                })
                .collect()
        })
        .collect()
}

/// Maximises the discrete QCR for `M = 2..=m_max` settings per observer.
///
/// Each `M` starts from the previous optimum with one extra setting per
/// observer, an evenly spread configuration, and `random_starts` random
/// ones, and keeps the best pattern-search result.
pub fn optimize_settings(
    scenario: Scenario,
    frame: &OutcomeFrame,
    m_max: usize,
    seed: u64,
    opts: SettingsSearch,
) -> Result<Vec<TrajectoryPoint>> {
    if m_max < 2 {
        return Err(Error::Usage("m_max must be at least 2".into()));
    }
    let n = scenario.parties();
    let d = scenario.d();
    let phases = d - 1;
    let mut trajectory: Vec<TrajectoryPoint> = Vec::new();
    let mut rng = block_rng(seed, u64::MAX);

    for m in 2..=m_max {
        let objective = |params: &[f64]| -> f64 {
            let settings = unflatten(params, n, m, phases);
            build_scenario(scenario, frame, settings)
                .and_then(|ds| discrete_qcr(&ds, seed))
                .unwrap_or(f64::NEG_INFINITY)
        };

        let mut starts: Vec<Vec<Vec<SettingVector>>> = Vec::new();
        if let Some(prev) = trajectory.last() {
            let mut warm = prev.settings.clone();
            for list in warm.iter_mut() {
                list.push(SettingVector::new((0..phases).map(|_| rng.random::<f64>())));
            }
            starts.push(warm);
        }
        starts.push(spread_start(n, m, d));
        for _ in 0..opts.random_starts {
            starts.push(
                (0..n)
                    .map(|_| {
                        (0..m)
                            .map(|_| SettingVector::new((0..phases).map(|_| rng.random::<f64>())))
                            .collect()
                    })
                    .collect(),
            );
        }

        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in starts {
            // re-pin the gauge so the first settings of observers 0..N-1 are zero
            let mut start = start;
            for obs in 0..n.saturating_sub(1) {
                let shift: Vec<f64> = start[obs][0].phases().iter().map(|p| -p).collect();
                let back: Vec<f64> = shift.iter().map(|p| -p).collect();
                for s in start[obs].iter_mut() {
                    *s = s.shifted(&shift);
                }
                for s in start[n - 1].iter_mut() {
                    *s = s.shifted(&back);
                }
            }
            let opt = opts.search.maximize(flatten(&start), &objective);
            if best.as_ref().is_none_or(|(v, _)| opt.value > *v) {
                best = Some((opt.value, opt.x));
            }
        }
        let (qcr, params) = best.expect("at least one start");
        if !qcr.is_finite() {
            return Err(Error::Numerical(format!("settings search failed at M={m}")));
        }
        trajectory.push(TrajectoryPoint {
            settings_per_observer: m,
            qcr,
            settings: unflatten(&params, n, m, phases),
        });
    }
    Ok(trajectory)
}
