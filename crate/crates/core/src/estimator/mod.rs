//! Integration engine for the classical-quantum overlap `L_{d,N}`.
//!
//! [`mc_overlap`] samples all observers' settings uniformly on the
//! `(d-1)N`-dimensional torus. Low-dimensional integrals (norms,
//! contraction factors) go through [`quadrature`].

pub mod quadrature;
pub mod rng;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcorr::{dot, Correlator, FrameKind, OutcomeFrame, Scenario};

/// Smallest accepted Monte Carlo budget.
pub const MIN_POINTS: u64 = 1_000;

/// A Monte Carlo estimate of an overlap integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub d: usize,
    pub parties: usize,
    pub frame: FrameKind,
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    pub points: u64,
    pub seed: u64,
}

impl MCEstimate {
    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(self.d, self.parties)
    }

    pub fn relative_error(&self) -> f64 {
        self.stderr / self.mean.abs()
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// Per-worker evaluation state for the overlap integrand.
///
/// Uses `E · v_l = (d P(l) - 1) / (d - 1)` for unit vectors with equal
/// pairwise angles, so only the probability of the predicted outcome is
/// needed. Phase factors of the summed settings are products of the
/// per-observer factors.
struct OverlapIntegrand {
    d: usize,
    parties: usize,
    corr: Correlator,
    local: Vec<Complex64>,
    joint: Vec<Complex64>,
}

impl OverlapIntegrand {
    fn new(d: usize, parties: usize) -> Result<Self> {
        Ok(Self {
            d,
            parties,
            corr: Correlator::new(d)?,
            local: vec![Complex64::new(1.0, 0.0); d],
            joint: vec![Complex64::new(1.0, 0.0); d],
        })
    }

    /// `E_d(sum of settings) · v_{sum of labels}` for one joint draw.
    fn sample(&mut self, rng: &mut impl Rng) -> f64 {
        let d = self.d;
        self.joint.iter_mut().for_each(|z| *z = Complex64::new(1.0, 0.0));
        let mut label_sum = 0;
        for _ in 0..self.parties {
            for (z, j) in self.local[1..].iter_mut().zip(self.joint[1..].iter_mut()) {
                let (s, c) = (TAU * rng.random::<f64>()).sin_cos();
                *z = Complex64::new(c, -s);
                *j *= *z;
            }
            // most probable local outcome, earliest on ties
            let mut best = 0;
            let mut best_p = f64::NEG_INFINITY;
            for m in 0..d {
                let p = self.corr.amplitude(&self.local, m).norm_sqr();
                if p > best_p {
                    best_p = p;
                    best = m;
                }
            }
            label_sum += best;
        }
        let p = self.corr.amplitude(&self.joint, label_sum % d).norm_sqr() / (d * d) as f64;
        (d as f64 * p - 1.0) / (d as f64 - 1.0)
    }
}

fn run_blocks(frame: &OutcomeFrame, parties: usize, points: u64, seed: u64) -> Result<Moments> {
    let per_block: Vec<Result<Moments>> = rng::blocks(points)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(block, len)| {
            let mut integrand = OverlapIntegrand::new(frame.d(), parties)?;
            let mut r = rng::block_rng(seed, block);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(integrand.sample(&mut r));
            }
            Ok(m)
        })
        .collect();
    // merge in block order so the result does not depend on scheduling
    per_block
        .into_iter()
        .try_fold(Moments::default(), |acc, m| Ok(acc.merge(m?)))
}

/// Runs `f` on a pool of `threads` workers, or the global pool when 0.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ResourceLimit(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Monte Carlo estimate of `L_{d,N}`, the overlap of the quantum correlation
/// vector with the greedy local-realistic prediction.
///
/// Deterministic in `(seed, points)`; `threads = 0` uses the global pool.
pub fn mc_overlap(
    scenario: &Scenario,
    frame: &OutcomeFrame,
    points: u64,
    seed: u64,
    threads: usize,
) -> Result<MCEstimate> {
    if points < MIN_POINTS {
        return Err(Error::TooFewPoints {
            got: points,
            min: MIN_POINTS,
        });
    }
    if frame.d() != scenario.d() {
        return Err(Error::InvalidDimension(frame.d()));
    }
    let moments = with_threads(threads, || run_blocks(frame, scenario.parties(), points, seed))??;
    if !moments.mean.is_finite() {
        return Err(Error::Numerical("non-finite Monte Carlo mean".into()));
    }
    Ok(MCEstimate {
        d: scenario.d(),
        parties: scenario.parties(),
        frame: frame.kind(),
        mean: moments.mean,
        stderr: moments.stderr(),
        points,
        seed,
    })
}

/// Per-observer overlap of the self-replicating cases: `2/π` for qubits and
/// `(9 + 2 sqrt(3) π) / (4 π^2)` for qutrits.
pub fn closed_form_factor(d: usize) -> Result<f64> {
    match d {
        2 => Ok(2.0 / PI),
        3 => Ok((9.0 + 2.0 * 3f64.sqrt() * PI) / (4.0 * PI * PI)),
        _ => Err(Error::NoClosedForm(d)),
    }
}

/// `L_{d,N}` in closed form for `d` in {2, 3}.
pub fn closed_form_l(d: usize, parties: usize) -> Result<f64> {
    Ok(closed_form_factor(d)?.powi(parties as i32))
}

/// Norm `∫ |E_d(x)|^2 dx` over `[0,1)^{d-1}` by refined midpoint quadrature.
pub fn norm_quadrature(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if d > 6 {
        return Err(Error::UseMonteCarlo(d));
    }
    let frame = OutcomeFrame::recursive(d)?;
    let corr = Correlator::new(d)?;
    let mut probs = vec![0.0; d];
    let mut e = vec![0.0; frame.dim()];
    quadrature::refined_midpoint_torus(d - 1, 1e-7, 1 << 26, |x| {
        corr.probabilities_into(x, &mut probs);
        frame.combine_into(&probs, &mut e);
        dot(&e, &e)
    })
    .ok_or_else(|| Error::Numerical("norm quadrature did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((closed_form_l(3, 1).unwrap() - 0.503637).abs() < 1e-6);
        assert!((closed_form_l(3, 2).unwrap() - 0.253650).abs() < 1e-6);
        assert!((closed_form_l(2, 2).unwrap() - 0.405285).abs() < 1e-6);
        assert_eq!(closed_form_l(4, 2), Err(Error::NoClosedForm(4)));
    }

    #[test]
    fn norms() {
        assert!((norm_quadrature(2).unwrap() - 0.5).abs() < 1e-9);
        assert!((norm_quadrature(3).unwrap() - 1.0 / 3.0).abs() < 1e-9);
        assert!((norm_quadrature(5).unwrap() - 0.2).abs() < 1e-6);
        assert_eq!(norm_quadrature(7), Err(Error::UseMonteCarlo(7)));
    }

    #[test]
    fn too_few_points() {
        let s = Scenario::new(3, 2).unwrap();
        let f = OutcomeFrame::recursive(3).unwrap();
        assert_eq!(
            mc_overlap(&s, &f, 999, 1, 0),
            Err(Error::TooFewPoints { got: 999, min: 1000 })
        );
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (a, b) = xs.split_at(333);
        let mut ma = Moments::default();
        let mut mb = Moments::default();
        a.iter().for_each(|&x| ma.push(x));
        b.iter().for_each(|&x| mb.push(x));
        let merged = ma.merge(mb);
        assert_eq!(merged.n, all.n);
        assert!((merged.mean - all.mean).abs() < 1e-12);
        assert!((merged.m2 - all.m2).abs() < 1e-8 * all.m2);
    }

    #[test]
    fn qutrit_two_party_estimate() {
        let s = Scenario::new(3, 2).unwrap();
        let f = OutcomeFrame::recursive(3).unwrap();
        let est = mc_overlap(&s, &f, 200_000, 3, 0).unwrap();
        let exact = closed_form_l(3, 2).unwrap();
        assert!((est.mean - exact).abs() < 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn integrand_matches_frame_route() {
        use crate::lrmodel::GreedyModel;
        for (d, n) in [(2, 3), (3, 2), (4, 2), (6, 3), (7, 2)] {
            let frame = OutcomeFrame::recursive(d).unwrap();
            let corr = Correlator::new(d).unwrap();
            let mut labels = GreedyModel::new(d).unwrap();
            let mut fast = OverlapIntegrand::new(d, n).unwrap();
            let mut r1 = rng::block_rng(5, 0);
            let mut r2 = rng::block_rng(5, 0);
            for _ in 0..2000 {
                let got = fast.sample(&mut r1);
                let mut sum = vec![0.0; d - 1];
                let mut label_sum = 0;
                for _ in 0..n {
                    let y: Vec<f64> = (0..d - 1).map(|_| r2.random::<f64>()).collect();
                    sum.iter_mut().zip(&y).for_each(|(s, v)| *s += v);
                    label_sum += labels.label(&y);
                }
                let mut e = vec![0.0; frame.dim()];
                frame.combine_into(&corr.probabilities(&sum), &mut e);
                let want = dot(&e, frame.vector(label_sum % d));
                assert!((got - want).abs() < 1e-12, "d={d} N={n}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let s = Scenario::new(4, 2).unwrap();
        let f = OutcomeFrame::recursive(4).unwrap();
        let one = mc_overlap(&s, &f, 50_000, 9, 1).unwrap();
        let four = mc_overlap(&s, &f, 50_000, 9, 4).unwrap();
        assert_eq!(one.mean.to_bits(), four.mean.to_bits());
        assert_eq!(one.stderr.to_bits(), four.stderr.to_bits());
    }
}
