//! Local-realistic side: deterministic label assignments and the classical
//! correlation vector they induce.
//!
//! The classical model gives each observer a label in `Z_d` for every local
//! setting: the outcome vector nearest to the single-observer correlation
//! vector at that setting. The joint prediction is the outcome vector of
//! the sum of labels modulo `d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::quadrature::{gauss_legendre, triangle_rule};
use crate::qcorr::{dot, wrap_unit, Correlator, OutcomeFrame, PhaseSum, SettingVector};

/// Label of the outcome vector nearest to `E_d(y)`; ties go to the smaller label.
pub fn greedy_label(frame: &OutcomeFrame, y: &SettingVector) -> Result<usize> {
    let e = crate::qcorr::corr_reduced(frame, &PhaseSum::new(y.phases().iter().copied()))?;
    Ok(frame.nearest(&e))
}

/// Phase translation that raises every greedy label by `m` modulo `d`.
///
/// Component `i` is `-i*m/d` modulo 1. For `d = 3` and `m = 1` this is
/// `(2/3, 1/3)`; the translation `(1/3, 2/3)` lowers the label by one.
pub fn label_translation(d: usize, m: usize) -> Vec<f64> {
    (1..d)
        .map(|i| ((d - (i * m) % d) % d) as f64 / d as f64)
        .collect()
}

// Region centres of the qutrit model, indexed by label.
const QUTRIT_CENTRES: [[f64; 2]; 3] = [[0.0, 0.0], [2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
const BAND: f64 = 1.0 / 3.0;

#[inline]
fn centred(x: f64) -> f64 {
    wrap_unit(x + 0.5) - 0.5
}

/// How far `(u1, u2)`, measured from a region centre, lies outside the three
/// bands `[-1/3, 1/3)`. Zero when inside.
fn band_excess(u1: f64, u2: f64) -> f64 {
    let excess = |v: f64| {
        if v < -BAND {
            -BAND - v
        } else if v >= BAND {
            v - BAND
        } else {
            0.0
        }
    };
    excess(u1).max(excess(u2)).max(excess(centred(u1 - u2)))
}

/// Label of the explicit hexagonal qutrit model.
///
/// Label `m` is assigned when the offsets `u = y - c_m - shift` (modulo 1)
/// satisfy `-1/3 <= u1 < 1/3`, `-1/3 <= u2 < 1/3` and
/// `-1/3 <= u1 - u2 < 1/3`. Points whose rounding puts them on no band
/// fall back to the nearest region within `1e-9`.
pub fn region_label_qutrit(y: &SettingVector, shifts: &SettingVector) -> Result<usize> {
    if y.len() != 2 || shifts.len() != 2 {
        return Err(Error::UnsupportedDimension {
            required: "3",
            got: y.len().max(shifts.len()) + 1,
        });
    }
    let (p, s) = (y.phases(), shifts.phases());
    let mut best = (f64::INFINITY, 0);
    for (m, c) in QUTRIT_CENTRES.iter().enumerate() {
        let u1 = centred(p[0] - c[0] - s[0]);
        let u2 = centred(p[1] - c[1] - s[1]);
        let ex = band_excess(u1, u2);
        if ex == 0.0 {
            return Ok(m);
        }
        if ex < best.0 {
            best = (ex, m);
        }
    }
    if best.0 < 1e-9 {
        Ok(best.1)
    } else {
        Err(Error::RegionMiss(p[0], p[1]))
    }
}

/// Number of qutrit model regions containing `y` under the strict band
/// conditions, without the boundary fallback. Used to check tiling.
pub fn qutrit_region_hits(y: &SettingVector) -> usize {
    let p = y.phases();
    QUTRIT_CENTRES
        .iter()
        .filter(|c| band_excess(centred(p[0] - c[0]), centred(p[1] - c[1])) == 0.0)
        .count()
}

/// Classical prediction `v_{(sum_k label_k) mod d}`.
pub fn classical_corr(frame: &OutcomeFrame, settings: &[SettingVector]) -> Result<Vec<f64>> {
    let d = frame.d();
    let mut total = 0;
    for s in settings {
        total += greedy_label(frame, s)?;
    }
    Ok(frame.vector(total % d).to_vec())
}

/// Greedy labels without going through the outcome frame: with equal
/// pairwise angles the nearest vector is the most probable outcome.
#[derive(Debug, Clone)]
pub struct GreedyModel {
    corr: Correlator,
    probs: Vec<f64>,
}

impl GreedyModel {
    pub fn new(d: usize) -> Result<Self> {
        Ok(Self {
            corr: Correlator::new(d)?,
            probs: vec![0.0; d],
        })
    }

    pub fn label(&mut self, y: &[f64]) -> usize {
        self.corr.probabilities_into(y, &mut self.probs);
        self.corr.most_likely(&self.probs)
    }
}

/// Integration region standing in for the indicator in [`contraction_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ContractionRegion {
    /// Settings assigned label 0 by the qutrit model with zero shifts.
    #[default]
    LabelZero,
    /// The whole torus.
    FullTorus,
}

const HEXAGON: [[f64; 2]; 6] = [
    [BAND, 0.0],
    [BAND, BAND],
    [0.0, BAND],
    [-BAND, 0.0],
    [-BAND, -BAND],
    [0.0, -BAND],
];

/// Proportionality factor `k` in `∫ E_3(x + y) λ(y) dy = k E_3(x)`.
///
/// The label-0 region is the hexagon `|y1|, |y2|, |y1 - y2| < 1/3`; it is
/// integrated as six triangles with a collapsed Gauss rule, so the smooth
/// integrand is resolved to machine precision.
pub fn contraction_check(x: &PhaseSum, region: ContractionRegion) -> Result<f64> {
    let c = x.components();
    if c.len() != 2 {
        return Err(Error::UnsupportedDimension {
            required: "3",
            got: c.len() + 1,
        });
    }
    let frame = OutcomeFrame::recursive(3)?;
    let corr = Correlator::new(3)?;
    let target = crate::qcorr::corr_reduced(&frame, x)?;
    let norm2 = dot(&target, &target);
    if norm2.sqrt() < 1e-6 {
        return Err(Error::DegenerateDirection(norm2.sqrt()));
    }

    let mut probs = [0.0; 3];
    let mut e = [0.0; 2];
    let mut acc = [0.0; 2];
    let mut eval = |y1: f64, y2: f64, w: f64, acc: &mut [f64; 2]| {
        corr.probabilities_into(&[c[0] + y1, c[1] + y2], &mut probs);
        frame.combine_into(&probs, &mut e);
        acc[0] += w * e[0];
        acc[1] += w * e[1];
    };

    match region {
        ContractionRegion::LabelZero => {
            let rule = triangle_rule(20);
            for k in 0..6 {
                let a = HEXAGON[k];
                let b = HEXAGON[(k + 1) % 6];
                // area of triangle (0, a, b)
                let area = 0.5 * (a[0] * b[1] - a[1] * b[0]).abs();
                for &(s, t, w) in &rule {
                    let y1 = s * a[0] + t * b[0];
                    let y2 = s * a[1] + t * b[1];
                    eval(y1, y2, w * area, &mut acc);
                }
            }
        }
        ContractionRegion::FullTorus => {
            let (nodes, weights) = gauss_legendre(16);
            for (u, wu) in nodes.iter().zip(&weights) {
                for (v, wv) in nodes.iter().zip(&weights) {
                    eval(0.5 * (u + 1.0), 0.5 * (v + 1.0), 0.25 * wu * wv, &mut acc);
                }
            }
        }
    }
    Ok(dot(&acc, &target) / norm2)
}

/// `(9 + 2 sqrt(3) π) / (12 π^2)`, the per-observer qutrit contraction factor.
pub fn qutrit_contraction_factor() -> f64 {
    use std::f64::consts::PI;
    (9.0 + 2.0 * 3f64.sqrt() * PI) / (12.0 * PI * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sv(p: &[f64]) -> SettingVector {
        SettingVector::new(p.iter().copied())
    }

    #[test]
    fn greedy_examples() {
        let f3 = OutcomeFrame::recursive(3).unwrap();
        assert_eq!(greedy_label(&f3, &sv(&[0.0, 0.0])).unwrap(), 0);
        assert_eq!(greedy_label(&f3, &sv(&[1.0 / 3.0, 2.0 / 3.0])).unwrap(), 2);
        let f2 = OutcomeFrame::recursive(2).unwrap();
        assert_eq!(greedy_label(&f2, &sv(&[0.6])).unwrap(), 1);
    }

    #[test]
    fn greedy_model_matches_frame_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 2..=6 {
            let frame = OutcomeFrame::recursive(d).unwrap();
            let mut fast = GreedyModel::new(d).unwrap();
            for _ in 0..500 {
                let y: Vec<f64> = (0..d - 1).map(|_| rng.random()).collect();
                assert_eq!(fast.label(&y), greedy_label(&frame, &sv(&y)).unwrap());
            }
        }
    }

    #[test]
    fn covariance_of_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..=5 {
            let frame = OutcomeFrame::recursive(d).unwrap();
            for m in 1..d {
                let delta = label_translation(d, m);
                for _ in 0..10_000 {
                    let y = sv(&(0..d - 1).map(|_| rng.random()).collect::<Vec<f64>>());
                    let base = greedy_label(&frame, &y).unwrap();
                    let moved = greedy_label(&frame, &y.shifted(&delta)).unwrap();
                    // labels can disagree only at ties, which have measure zero
                    assert_eq!(moved, (base + m) % d, "d={d} m={m} y={y:?}");
                }
            }
        }
    }

    #[test]
    fn qutrit_translation_direction() {
        assert_eq!(label_translation(3, 1), vec![2.0 / 3.0, 1.0 / 3.0]);
        let f3 = OutcomeFrame::recursive(3).unwrap();
        let y = sv(&[0.05, 0.02]);
        let up = y.shifted(&[1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(greedy_label(&f3, &up).unwrap(), 2);
    }

    #[test]
    fn region_examples() {
        let zero = SettingVector::zeros(2);
        assert_eq!(region_label_qutrit(&sv(&[0.0, 0.0]), &zero).unwrap(), 0);
        assert_eq!(
            region_label_qutrit(&sv(&[1.0 / 3.0, 2.0 / 3.0]), &zero).unwrap(),
            2
        );
        assert!(region_label_qutrit(&sv(&[0.1]), &zero).is_err());
    }

    #[test]
    fn region_shift_moves_model() {
        let shift = sv(&[0.1, 0.25]);
        assert_eq!(region_label_qutrit(&sv(&[0.1, 0.25]), &shift).unwrap(), 0);
        assert_eq!(
            region_label_qutrit(&sv(&[0.1 + 2.0 / 3.0, 0.25 + 1.0 / 3.0]), &shift).unwrap(),
            1
        );
    }

    #[test]
    fn classical_corr_examples() {
        let f3 = OutcomeFrame::recursive(3).unwrap();
        let c = classical_corr(&f3, &[SettingVector::zeros(2), SettingVector::zeros(2)]).unwrap();
        assert_eq!(c, vec![1.0, 0.0]);
        let s = sv(&[1.0 / 3.0, 2.0 / 3.0]);
        let c = classical_corr(&f3, &[s.clone(), s]).unwrap();
        assert_eq!(c, f3.vector(1).to_vec());

        let f2 = OutcomeFrame::recursive(2).unwrap();
        let s = sv(&[0.6]);
        let c = classical_corr(&f2, &[s.clone(), s.clone(), s]).unwrap();
        assert_eq!(c, vec![-1.0]);
    }

    #[test]
    fn contraction_examples() {
        let k = qutrit_contraction_factor();
        assert!((k - 0.167879).abs() < 1e-6);
        let at0 = contraction_check(&PhaseSum::new([0.0, 0.0]), ContractionRegion::LabelZero).unwrap();
        assert!((at0 - 0.167879).abs() < 1e-4);
        let off = contraction_check(&PhaseSum::new([0.2, 0.05]), ContractionRegion::LabelZero).unwrap();
        assert!((off - 0.167879).abs() < 1e-4);
        let full = contraction_check(&PhaseSum::new([0.2, 0.05]), ContractionRegion::FullTorus).unwrap();
        assert!(full.abs() < 1e-12);
    }

    #[test]
    fn contraction_degenerate_direction() {
        let x = PhaseSum::new([1.0 / 3.0, 0.0]);
        // (e^{-2πi/3} + e^{2πi/3} + 1)/3 = 0
        assert!(crate::qcorr::corr_complex3(&x).unwrap().norm() < 1e-12);
        assert!(matches!(
            contraction_check(&x, ContractionRegion::LabelZero),
            Err(Error::DegenerateDirection(_))
        ));
    }
}
