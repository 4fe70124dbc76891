//! Quantum side of the geometric Bell inequalities.
//!
//! Every observer measures a qudit of the `d`-dimensional GHZ state in a
//! basis unbiased to the computational one, parametrised by `d - 1` phases.
//! The local results are added modulo `d` and the sum is mapped onto one of
//! `d` unit vectors (the outcome frame). For GHZ states the resulting
//! correlation vector depends only on the component-wise sum of all
//! observers' phases, which is what [`corr_reduced`] evaluates. The dense
//! state-vector route in [`corr_oracle`] rebuilds the same quantity from
//! scratch and serves as its independent check.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `d^N` for the dense state-vector oracle.
pub const DEFAULT_ORACLE_CAP: usize = 1 << 20;

/// Reduces a phase to `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x.floor() can round so that r == 1.0 for tiny negative x
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Local dimension and number of observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    d: usize,
    parties: usize,
}

impl Scenario {
    pub fn new(d: usize, parties: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if parties < 1 {
            return Err(Error::InvalidParties(parties));
        }
        Ok(Self { d, parties })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    /// Number of phase parameters per observer.
    pub fn phases(&self) -> usize {
        self.d - 1
    }

    /// `d^N`, or `None` on overflow.
    pub fn hilbert_dim(&self) -> Option<usize> {
        let mut acc: usize = 1;
        for _ in 0..self.parties {
            acc = acc.checked_mul(self.d)?;
        }
        Some(acc)
    }
}

/// Choice of outcome frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    /// Simplex built by the recursion `v_{d,i} = (-1/(d-1), sqrt(1-1/(d-1)^2) v_{d-1,i-1})`.
    #[default]
    Recursive,
    /// The `d = 4` frame with `±1/sqrt(3)` coordinates.
    Tetrahedral,
}

/// The `d` outcome vectors, vertices of a regular simplex centred at the
/// origin in `max(d-1, 1)` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeFrame {
    d: usize,
    kind: FrameKind,
    // row-major, d rows of length dim
    coords: Vec<f64>,
    dim: usize,
}

impl OutcomeFrame {
    pub fn new(d: usize, kind: FrameKind) -> Result<Self> {
        match kind {
            FrameKind::Recursive => Self::recursive(d),
            FrameKind::Tetrahedral if d == 4 => Ok(Self::tetrahedral()),
            FrameKind::Tetrahedral => Err(Error::UnsupportedDimension {
                required: "4",
                got: d,
            }),
        }
    }

    pub fn recursive(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let mut rows: Vec<Vec<f64>> = vec![vec![1.0], vec![-1.0]];
        for k in 3..=d {
            let inv = 1.0 / (k - 1) as f64;
            let scale = (1.0 - inv * inv).sqrt();
            let mut next = Vec::with_capacity(k);
            let mut first = vec![0.0; k - 1];
            first[0] = 1.0;
            next.push(first);
            for prev in &rows {
                let mut v = Vec::with_capacity(k - 1);
                v.push(-inv);
                v.extend(prev.iter().map(|c| scale * c));
                next.push(v);
            }
            rows = next;
        }
        let dim = (d - 1).max(1);
        Ok(Self {
            d,
            kind: FrameKind::Recursive,
            coords: rows.into_iter().flatten().collect(),
            dim,
        })
    }

    pub fn tetrahedral() -> Self {
        let s = 1.0 / 3f64.sqrt();
        #[rustfmt::skip]
        let coords = vec![
             s,  s,  s,
             s, -s, -s,
            -s,  s, -s,
            -s, -s,  s,
        ];
        Self {
            d: 4,
            kind: FrameKind::Tetrahedral,
            coords,
            dim: 3,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    /// Length of each outcome vector.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, m: usize) -> &[f64] {
        &self.coords[m * self.dim..(m + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// `sum_m weights[m] * v_m` written into `out`.
    pub fn combine_into(&self, weights: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (w, v) in weights.iter().zip(self.vectors()) {
            for (o, c) in out.iter_mut().zip(v) {
                *o += w * c;
            }
        }
    }

    /// Index of the outcome vector with the largest overlap with `e`;
    /// smallest index wins ties.
    pub fn nearest(&self, e: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (m, v) in self.vectors().enumerate() {
            let dot = dot(v, e);
            if dot > best_dot {
                best_dot = dot;
                best = m;
            }
        }
        best
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Phases of one observer's local measurement, each stored in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingVector(Vec<f64>);

impl SettingVector {
    pub fn new(phases: impl IntoIterator<Item = f64>) -> Self {
        Self(phases.into_iter().map(wrap_unit).collect())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn phases(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Component-wise sum with `other`, reduced modulo 1.
    pub fn shifted(&self, other: &[f64]) -> Self {
        Self::new(self.0.iter().zip(other).map(|(a, b)| a + b))
    }
}

/// Sum of all observers' setting vectors modulo 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSum(Vec<f64>);

impl PhaseSum {
    pub fn new(components: impl IntoIterator<Item = f64>) -> Self {
        Self(components.into_iter().map(wrap_unit).collect())
    }

    pub fn from_settings(settings: &[SettingVector]) -> Result<Self> {
        let len = settings.first().map(SettingVector::len).unwrap_or(0);
        let mut acc = vec![0.0; len];
        for s in settings {
            if s.len() != len {
                return Err(Error::ComponentCount {
                    expected: len,
                    got: s.len(),
                });
            }
            for (a, p) in acc.iter_mut().zip(s.phases()) {
                *a += p;
            }
        }
        Ok(Self::new(acc))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }
}

/// Evaluates outcome distributions of the summed local results.
///
/// Holds the powers of `ω_d^{-1}` so repeated calls allocate nothing.
#[derive(Debug, Clone)]
pub struct Correlator {
    d: usize,
    roots: Vec<Complex64>,
}

impl Correlator {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let roots = (0..d)
            .map(|k| Complex64::from_polar(1.0, -TAU * k as f64 / d as f64))
            .collect();
        Ok(Self { d, roots })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `P(m) = |sum_i ω^{-im} exp(-2πi x_i)|^2 / d^2` for all `m`, with `x_0 = 0`.
    ///
    /// `x` holds `d - 1` components; `out` holds `d` probabilities.
    pub fn probabilities_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        debug_assert_eq!(x.len(), d - 1);
        debug_assert_eq!(out.len(), d);
        let norm = 1.0 / (d * d) as f64;
        // small stack buffer for the phase factors; heap only for very large d
        let mut stack = [Complex64::new(0.0, 0.0); 16];
        let mut heap;
        let z: &mut [Complex64] = if d <= 16 {
            &mut stack[..d]
        } else {
            heap = vec![Complex64::new(0.0, 0.0); d];
            &mut heap
        };
        z[0] = Complex64::new(1.0, 0.0);
        for (zi, xi) in z[1..].iter_mut().zip(x) {
            let (s, c) = (TAU * xi).sin_cos();
            *zi = Complex64::new(c, -s);
        }
        for (m, o) in out.iter_mut().enumerate() {
            *o = self.amplitude(z, m).norm_sqr() * norm;
        }
    }

    /// `sum_i ω^{-im} z_i` for phase factors `z` (`d` entries, `z_0 = 1`).
    #[inline]
    pub fn amplitude(&self, z: &[Complex64], m: usize) -> Complex64 {
        let d = self.d;
        let mut acc = Complex64::new(0.0, 0.0);
        // index i*m mod d, advanced without integer division
        let mut idx = 0;
        for zi in z {
            acc += self.roots[idx] * zi;
            idx += m;
            if idx >= d {
                idx -= d;
            }
        }
        acc
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.probabilities_into(x, &mut out);
        out
    }

    /// Most probable outcome, which is also the outcome vector nearest to the
    /// correlation vector (any frame with equal pairwise angles).
    pub fn most_likely(&self, probs: &[f64]) -> usize {
        let mut best = 0;
        for (m, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = m;
            }
        }
        best
    }
}

fn check_components(d: usize, x: &[f64]) -> Result<()> {
    if x.len() != d - 1 {
        return Err(Error::ComponentCount {
            expected: d - 1,
            got: x.len(),
        });
    }
    Ok(())
}

/// Probability that the local results sum to `m` modulo `d`.
pub fn prob_outcome(scenario: &Scenario, x: &PhaseSum, m: usize) -> Result<f64> {
    let d = scenario.d();
    if m >= d {
        return Err(Error::OutcomeOutOfRange { m, d });
    }
    check_components(d, x.components())?;
    Ok(Correlator::new(d)?.probabilities(x.components())[m])
}

/// Correlation vector `E_d(x) = sum_m P(m) v_{d,m}` from the reduced formula.
pub fn corr_reduced(frame: &OutcomeFrame, x: &PhaseSum) -> Result<Vec<f64>> {
    let d = frame.d();
    check_components(d, x.components())?;
    let probs = Correlator::new(d)?.probabilities(x.components());
    let mut out = vec![0.0; frame.dim()];
    frame.combine_into(&probs, &mut out);
    Ok(out)
}

/// Correlation vector built from the full `d^N` GHZ state vector.
///
/// Each observer's measurement basis is applied as a local unitary, joint
/// outcome probabilities are binned by the sum of results modulo `d`, and
/// the bins weight the outcome frame.
pub fn corr_oracle(
    scenario: &Scenario,
    frame: &OutcomeFrame,
    settings: &[SettingVector],
    cap: usize,
) -> Result<Vec<f64>> {
    let d = scenario.d();
    let n = scenario.parties();
    if frame.d() != d {
        return Err(Error::InvalidDimension(frame.d()));
    }
    if settings.len() != n {
        return Err(Error::ComponentCount {
            expected: n,
            got: settings.len(),
        });
    }
    for s in settings {
        check_components(d, s.phases())?;
    }
    let dim = scenario
        .hilbert_dim()
        .filter(|&v| v <= cap)
        .ok_or_else(|| Error::ResourceLimit(format!("d^N exceeds oracle cap {cap}")))?;

    // |GHZ> = d^{-1/2} sum_j |j...j>
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    let diag_step: usize = (0..n).map(|p| d.pow(p as u32)).sum();
    let amp = 1.0 / (d as f64).sqrt();
    for j in 0..d {
        psi[j * diag_step] = Complex64::new(amp, 0.0);
    }

    // basis vectors |psi_j(a)>_k = d^{-1/2} ω^{jk} e^{2πi a_k}; apply the
    // adjoint, rows conj(psi_j)
    let omega = |k: usize| Complex64::from_polar(1.0, TAU * (k % d) as f64 / d as f64);
    let mut scratch = vec![Complex64::new(0.0, 0.0); d];
    for (party, setting) in settings.iter().enumerate() {
        let mut basis = vec![Complex64::new(0.0, 0.0); d * d];
        for j in 0..d {
            for k in 0..d {
                let phase = if k == 0 { 0.0 } else { setting.phases()[k - 1] };
                let entry = omega(j * k) * Complex64::from_polar(1.0, TAU * phase) * amp;
                basis[j * d + k] = entry.conj();
            }
        }
        // party 0 is the most significant digit
        let stride = d.pow((n - 1 - party) as u32);
        let block = stride * d;
        for outer in (0..dim).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, s) in scratch.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..d {
                        acc += basis[j * d + k] * psi[base + k * stride];
                    }
                    *s = acc;
                }
                for (j, s) in scratch.iter().enumerate() {
                    psi[base + j * stride] = *s;
                }
            }
        }
    }

    let mut bins = vec![0.0; d];
    for (index, a) in psi.iter().enumerate() {
        let mut rest = index;
        let mut sum = 0;
        for _ in 0..n {
            sum += rest % d;
            rest /= d;
        }
        bins[sum % d] += a.norm_sqr();
    }
    let mut out = vec![0.0; frame.dim()];
    frame.combine_into(&bins, &mut out);
    Ok(out)
}

/// The qutrit correlation as a complex number, outcome `m` read as `ω_3^m`:
/// `(e^{-2πi x1} + e^{2πi (x1 - x2)} + e^{2πi x2}) / 3`.
pub fn corr_complex3(x: &PhaseSum) -> Result<Complex64> {
    let c = x.components();
    if c.len() != 2 {
        return Err(Error::UnsupportedDimension {
            required: "3",
            got: c.len() + 1,
        });
    }
    let (x1, x2) = (c[0], c[1]);
    let e = |t: f64| Complex64::from_polar(1.0, 2.0 * PI * t);
    Ok((e(-x1) + e(x1 - x2) + e(x2)) / 3.0)
}
