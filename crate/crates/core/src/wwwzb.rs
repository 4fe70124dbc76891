//! Two-party CHSH-like inequalities for qutrits with vector outcomes.
//!
//! Each observer has three observables, i.e. three pairs of phases of the
//! qutrit measurement basis. The joint observable `X_{k,l}` returns the
//! outcome vector of the summed local results, so its GHZ expectation is the
//! bipartite qutrit correlation vector. Sign factors of the qubit
//! construction become powers of the rotation `U` that cycles the three
//! outcome vectors, and the inequality is indexed by a 3x3 matrix `S` over
//! `Z_3`:
//!
//! ```text
//! Q_{m,n} = sum_{k,l} U^{s^{m,n}_{k,l}} X_{k,l}
//! B       = (1,0) · sum_{m,n} U^{S_{m,n}} Q_{m,n}
//! ```
//!
//! With `w_1 = (0,0,0)`, `w_2 = (0,1,2)`, `w_3 = (0,2,1)` the default
//! exponent is `s^{m,n}_{k,l} = w_m[k] + w_n[l]` ([`ExponentRule::Sum`]).

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::rng::block_rng;
use crate::optim::PatternSearch;
use crate::qcorr::{corr_reduced, OutcomeFrame, PhaseSum};

/// A 3x3 matrix over `Z_3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignMatrix([[u8; 3]; 3]);

/// Number of distinct sign matrices.
pub const SIGN_MATRIX_COUNT: u32 = 19_683;

impl SignMatrix {
    pub fn new(entries: [[u8; 3]; 3]) -> Result<Self> {
        if entries.iter().flatten().any(|&e| e > 2) {
            return Err(Error::Usage("sign matrix entries must lie in {0,1,2}".into()));
        }
        Ok(Self(entries))
    }

    pub fn zero() -> Self {
        Self([[0; 3]; 3])
    }

    /// Row-major base-3 digits of `index`, most significant first.
    pub fn from_index(index: u32) -> Result<Self> {
        if index >= SIGN_MATRIX_COUNT {
            return Err(Error::Usage(format!("sign matrix index {index} out of range")));
        }
        let mut e = [[0u8; 3]; 3];
        let mut rest = index;
        for k in (0..9).rev() {
            e[k / 3][k % 3] = (rest % 3) as u8;
            rest /= 3;
        }
        Ok(Self(e))
    }

    pub fn index(&self) -> u32 {
        self.0.iter().flatten().fold(0, |acc, &e| acc * 3 + e as u32)
    }

    pub fn entries(&self) -> [[u8; 3]; 3] {
        self.0
    }

    pub fn get(&self, m: usize, n: usize) -> u8 {
        self.0[m][n]
    }

    pub fn transpose(&self) -> Self {
        let mut t = [[0u8; 3]; 3];
        for (m, row) in self.0.iter().enumerate() {
            for (n, &e) in row.iter().enumerate() {
                t[n][m] = e;
            }
        }
        Self(t)
    }

    /// Adds `t` to every entry.
    pub fn offset(&self, t: u8) -> Self {
        Self(self.0.map(|row| row.map(|e| (e + t) % 3)))
    }

    /// All images under the transformations that leave the quantum and
    /// classical maxima unchanged (sum exponent rule): affine relabelings
    /// `m -> a m + b` of rows and columns, adding `t1 m + t2 n + g`,
    /// transposition, and negation.
    pub fn orbit(&self) -> BTreeSet<SignMatrix> {
        let mut out = BTreeSet::new();
        for a1 in 1..3usize {
            for b1 in 0..3usize {
                for a2 in 1..3usize {
                    for b2 in 0..3usize {
                        let mut base = [[0u8; 3]; 3];
                        for (m, row) in base.iter_mut().enumerate() {
                            for (n, e) in row.iter_mut().enumerate() {
                                *e = self.0[(a1 * m + b1) % 3][(a2 * n + b2) % 3];
                            }
                        }
                        for t1 in 0..3usize {
                            for t2 in 0..3usize {
                                for g in 0..3usize {
                                    let mut t = [[0u8; 3]; 3];
                                    for (m, row) in t.iter_mut().enumerate() {
                                        for (n, e) in row.iter_mut().enumerate() {
                                            *e = ((base[m][n] as usize + t1 * m + t2 * n + g) % 3) as u8;
                                        }
                                    }
                                    let s = SignMatrix(t);
                                    for v in [s, s.transpose()] {
                                        out.insert(v);
                                        out.insert(SignMatrix(v.0.map(|r| r.map(|e| (3 - e) % 3))));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Smallest member of the orbit.
    pub fn canonical(&self) -> Self {
        *self.orbit().iter().next().expect("orbit contains self")
    }
}

impl fmt::Display for SignMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .0
            .iter()
            .map(|r| format!("{},{},{}", r[0], r[1], r[2]))
            .collect();
        write!(f, "{}", rows.join(";"))
    }
}

impl std::str::FromStr for SignMatrix {
    type Err = Error;

    /// Parses `"a,b,c;d,e,f;g,h,i"`.
    fn from_str(s: &str) -> Result<Self> {
        let rows: Vec<&str> = s.split(';').collect();
        if rows.len() != 3 {
            return Err(Error::Usage(format!("expected 3 rows in {s:?}")));
        }
        let mut e = [[0u8; 3]; 3];
        for (m, row) in rows.iter().enumerate() {
            let vals: Vec<&str> = row.split(',').collect();
            if vals.len() != 3 {
                return Err(Error::Usage(format!("expected 3 entries in row {row:?}")));
            }
            for (n, v) in vals.iter().enumerate() {
                e[m][n] = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Usage(format!("bad entry {v:?}")))?;
            }
        }
        Self::new(e)
    }
}

/// How `w_m` and `w_n` combine into the exponent matrix `s^{m,n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentRule {
    /// `s^{m,n}_{k,l} = w_m[k] + w_n[l]`, the analogue of multiplying the
    /// qubit sign factors of the two observers.
    #[default]
    Sum,
    /// `s^{m,n}_{k,l} = w_m[k] w_n[l]`.
    Product,
}

/// `w_1 = (0,0,0)`, `w_2 = (0,1,2)`, `w_3 = (0,2,1)`; `m` is 1-based.
pub fn w_vector(m: usize) -> Result<[u8; 3]> {
    match m {
        1 => Ok([0, 0, 0]),
        2 => Ok([0, 1, 2]),
        3 => Ok([0, 2, 1]),
        _ => Err(Error::Usage(format!("w index {m} outside 1..=3"))),
    }
}

/// Exponent matrix `s^{m,n}` for 1-based `m`, `n`.
pub fn s_matrix(m: usize, n: usize, rule: ExponentRule) -> Result<SignMatrix> {
    let (wm, wn) = (w_vector(m)?, w_vector(n)?);
    let mut e = [[0u8; 3]; 3];
    for k in 0..3 {
        for l in 0..3 {
            e[k][l] = match rule {
                ExponentRule::Sum => (wm[k] + wn[l]) % 3,
                ExponentRule::Product => (wm[k] * wn[l]) % 3,
            };
        }
    }
    Ok(SignMatrix(e))
}

/// Rotation by `2π/3` in the outcome plane: `U v_m = v_{m+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationU;

impl RotationU {
    pub fn matrix(power: u8) -> [[f64; 2]; 2] {
        let angle = std::f64::consts::TAU * (power % 3) as f64 / 3.0;
        let (s, c) = angle.sin_cos();
        [[c, -s], [s, c]]
    }

    pub fn apply(power: u8, v: [f64; 2]) -> [f64; 2] {
        let r = Self::matrix(power);
        [r[0][0] * v[0] + r[0][1] * v[1], r[1][0] * v[0] + r[1][1] * v[1]]
    }
}

/// Phases of the three observables of both observers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellPhases {
    pub alice: [[f64; 2]; 3],
    pub bob: [[f64; 2]; 3],
}

impl BellPhases {
    pub fn zeros() -> Self {
        Self {
            alice: [[0.0; 2]; 3],
            bob: [[0.0; 2]; 3],
        }
    }

    pub fn from_flat(p: &[f64]) -> Result<Self> {
        if p.len() != 12 {
            return Err(Error::ComponentCount {
                expected: 12,
                got: p.len(),
            });
        }
        let mut out = Self::zeros();
        for k in 0..3 {
            out.alice[k] = [p[2 * k], p[2 * k + 1]];
            out.bob[k] = [p[6 + 2 * k], p[6 + 2 * k + 1]];
        }
        Ok(out)
    }

    pub fn to_flat(&self) -> [f64; 12] {
        let mut p = [0.0; 12];
        for k in 0..3 {
            p[2 * k..2 * k + 2].copy_from_slice(&self.alice[k]);
            p[6 + 2 * k..6 + 2 * k + 2].copy_from_slice(&self.bob[k]);
        }
        p
    }
}

/// `B` evaluated term by term with 2-vectors and rotation matrices.
pub fn bell_quantum(s: &SignMatrix, phases: &BellPhases, rule: ExponentRule) -> Result<f64> {
    let frame = OutcomeFrame::recursive(3)?;
    let mut x = [[[0.0; 2]; 3]; 3];
    for k in 0..3 {
        for l in 0..3 {
            let sum = PhaseSum::new([
                phases.alice[k][0] + phases.bob[l][0],
                phases.alice[k][1] + phases.bob[l][1],
            ]);
            let e = corr_reduced(&frame, &sum)?;
            x[k][l] = [e[0], e[1]];
        }
    }
    Ok(bell_from_vectors(s, rule, |k, l| x[k][l]))
}

/// `B` with every `<X_{k,l}>` replaced by `v_{(alice[k] + bob[l]) mod 3}`.
pub fn bell_classical_value(
    s: &SignMatrix,
    rule: ExponentRule,
    alice: [u8; 3],
    bob: [u8; 3],
) -> f64 {
    let frame = OutcomeFrame::recursive(3).expect("d = 3");
    bell_from_vectors(s, rule, |k, l| {
        let v = frame.vector(((alice[k] + bob[l]) % 3) as usize);
        [v[0], v[1]]
    })
}

fn bell_from_vectors(s: &SignMatrix, rule: ExponentRule, x: impl Fn(usize, usize) -> [f64; 2]) -> f64 {
    let mut total = [0.0; 2];
    for m in 0..3 {
        for n in 0..3 {
            let sm = s_matrix(m + 1, n + 1, rule).expect("valid indices");
            let mut q = [0.0; 2];
            for k in 0..3 {
                for l in 0..3 {
                    let r = RotationU::apply(sm.get(k, l), x(k, l));
                    q[0] += r[0];
                    q[1] += r[1];
                }
            }
            let r = RotationU::apply(s.get(m, n), q);
            total[0] += r[0];
            total[1] += r[1];
        }
    }
    total[0]
}

/// `B = Re sum_{k,l} c_{k,l} E(a_k + b_l)` with complex coefficients
/// `c_{k,l} = sum_{m,n} ω^{S_{m,n} + s^{m,n}_{k,l}}`, outcome vectors read
/// as powers of `ω = e^{2πi/3}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellExpression {
    coeffs: [[Complex64; 3]; 3],
}

fn omega_pow(p: usize) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * (p % 3) as f64 / 3.0)
}

impl BellExpression {
    pub fn new(s: &SignMatrix, rule: ExponentRule) -> Self {
        let mut coeffs = [[Complex64::new(0.0, 0.0); 3]; 3];
        for m in 0..3 {
            for n in 0..3 {
                let sm = s_matrix(m + 1, n + 1, rule).expect("valid indices");
                for (k, row) in coeffs.iter_mut().enumerate() {
                    for (l, c) in row.iter_mut().enumerate() {
                        *c += omega_pow((s.get(m, n) + sm.get(k, l)) as usize);
                    }
                }
            }
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[[Complex64; 3]; 3] {
        &self.coeffs
    }

    /// Quantum value; uses `E(a + b) = (1/3) sum_r u_r(a) u_r(b)` with
    /// `u = (e^{-2πi p1}, e^{2πi (p1 - p2)}, e^{2πi p2})`.
    pub fn quantum_value(&self, phases: &BellPhases) -> f64 {
        let u = |p: &[f64; 2]| {
            let z0 = Complex64::from_polar(1.0, -std::f64::consts::TAU * p[0]);
            let z2 = Complex64::from_polar(1.0, std::f64::consts::TAU * p[1]);
            [z0, (z0 * z2).conj(), z2]
        };
        let ua = phases.alice.map(|p| u(&p));
        let ub = phases.bob.map(|p| u(&p));
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..3 {
            for l in 0..3 {
                let e = ua[k][0] * ub[l][0] + ua[k][1] * ub[l][1] + ua[k][2] * ub[l][2];
                acc += self.coeffs[k][l] * e;
            }
        }
        acc.re / 3.0
    }

    pub fn classical_value(&self, alice: [u8; 3], bob: [u8; 3]) -> f64 {
        let mut acc = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                acc += (self.coeffs[k][l] * omega_pow((alice[k] + bob[l]) as usize)).re;
            }
        }
        acc
    }

    /// Exact classical maximum over all 729 joint label tables.
    pub fn classical_max(&self) -> ClassicalBell {
        let tables: Vec<[u8; 3]> = (0..27u8).map(|c| [c / 9, (c / 3) % 3, c % 3]).collect();
        let mut best = ClassicalBell {
            value: f64::NEG_INFINITY,
            alice: [0; 3],
            bob: [0; 3],
        };
        for a in &tables {
            for b in &tables {
                let v = self.classical_value(*a, *b);
                if v > best.value {
                    best = ClassicalBell {
                        value: v,
                        alice: *a,
                        bob: *b,
                    };
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBell {
    pub value: f64,
    pub alice: [u8; 3],
    pub bob: [u8; 3],
}

pub fn bell_classical_max(s: &SignMatrix, rule: ExponentRule) -> ClassicalBell {
    BellExpression::new(s, rule).classical_max()
}

/// Budget for maximising the quantum value over the twelve phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumBudget {
    /// Best coarse-grid points refined by pattern search.
    pub starts: usize,
    /// Grid points per free phase.
    pub grid_per_axis: usize,
    /// Additional uniformly random starting points.
    pub random_starts: usize,
    pub min_step: f64,
}

impl Default for QuantumBudget {
    fn default() -> Self {
        Self {
            starts: 24,
            grid_per_axis: 3,
            random_starts: 8,
            min_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumBell {
    pub value: f64,
    pub phases: BellPhases,
}

/// Best quantum value found by grid-seeded multi-start pattern search.
///
/// Alice's first observable is pinned to zero phases: shifting Alice by `c`
/// and Bob by `-c` leaves every `X_{k,l}` unchanged.
pub fn bell_quantum_max(expr: &BellExpression, budget: &QuantumBudget, seed: u64) -> QuantumBell {
    const FREE: usize = 10;
    let to_phases = |p: &[f64]| {
        let mut flat = [0.0; 12];
        flat[2..].copy_from_slice(p);
        BellPhases::from_flat(&flat).expect("12 phases")
    };
    let f = |p: &[f64]| expr.quantum_value(&to_phases(p));

    let g = budget.grid_per_axis.max(1);
    let total = g.pow(FREE as u32);
    let mut point = [0.0; FREE];
    let mut scored: Vec<(f64, usize)> = (0..total)
        .map(|code| {
            let mut rest = code;
            for p in point.iter_mut() {
                *p = ((rest % g) as f64 + 0.5) / g as f64;
                rest /= g;
            }
            (f(&point), code)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut starts: Vec<Vec<f64>> = scored
        .iter()
        .take(budget.starts)
        .map(|&(_, code)| {
            let mut rest = code;
            (0..FREE)
                .map(|_| {
                    let v = ((rest % g) as f64 + 0.5) / g as f64;
                    rest /= g;
                    v
                })
                .collect()
        })
        .collect();
    let mut rng = block_rng(seed, 0);
    for _ in 0..budget.random_starts {
        starts.push((0..FREE).map(|_| rng.random::<f64>()).collect());
    }

    let search = PatternSearch {
        initial_step: 0.05,
        min_step: budget.min_step,
        shrink: 0.5,
        max_evals: 100_000,
    };
    let mut best = QuantumBell {
        value: f64::NEG_INFINITY,
        phases: BellPhases::zeros(),
    };
    for start in starts {
        let opt = search.maximize(start, f);
        if opt.value > best.value {
            let mut phases = to_phases(&opt.x);
            for p in phases.alice.iter_mut().chain(phases.bob.iter_mut()) {
                *p = p.map(crate::qcorr::wrap_unit);
            }
            best = QuantumBell {
                value: opt.value,
                phases,
            };
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub s: SignMatrix,
    /// Number of sign matrices represented by this entry.
    pub class_size: usize,
    pub classical: f64,
    pub quantum: f64,
    pub qcr: f64,
    pub phases: BellPhases,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub rule: ExponentRule,
    pub pruned: bool,
    pub best: SignMatrix,
    pub best_qcr: f64,
    /// Members of the best-scoring equivalence class.
    pub top_class: Vec<SignMatrix>,
    /// Distinct sign matrices with QCR above 1.
    pub above_one: usize,
    pub ranking: Vec<RankEntry>,
}

impl SearchResult {
    pub fn in_top_class(&self, s: &SignMatrix) -> bool {
        self.top_class.contains(s)
    }
}

/// Relative slack for counting a QCR as above 1 and for grouping
/// unpruned entries with the best one.
pub const QCR_TOL: f64 = 1e-6;

/// Evaluates every sign matrix, or one representative per symmetry class
/// when `prune` is set (sum exponent rule only).
pub fn search_all_s(
    budget: &QuantumBudget,
    seed: u64,
    prune: bool,
    rule: ExponentRule,
) -> Result<SearchResult> {
    if prune && rule != ExponentRule::Sum {
        return Err(Error::Usage(
            "symmetry pruning assumes the sum exponent rule; use --no-prune".into(),
        ));
    }
    let candidates: Vec<(SignMatrix, usize)> = if prune {
        let mut seen = vec![false; SIGN_MATRIX_COUNT as usize];
        let mut reps = Vec::new();
        for i in 0..SIGN_MATRIX_COUNT {
            if seen[i as usize] {
                continue;
            }
            let orbit = SignMatrix::from_index(i)?.orbit();
            for m in &orbit {
                seen[m.index() as usize] = true;
            }
            // i is the smallest unseen index, hence the orbit minimum
            reps.push((SignMatrix::from_index(i)?, orbit.len()));
        }
        reps
    } else {
        (0..SIGN_MATRIX_COUNT)
            .map(|i| SignMatrix::from_index(i).map(|s| (s, 1)))
            .collect::<Result<_>>()?
    };

    let mut ranking: Vec<RankEntry> = candidates
        .par_iter()
        .map(|&(s, class_size)| {
            let expr = BellExpression::new(&s, rule);
            let classical = expr.classical_max().value;
            let q = bell_quantum_max(&expr, budget, seed ^ s.index() as u64);
            RankEntry {
                s,
                class_size,
                classical,
                quantum: q.value,
                qcr: q.value / classical,
                phases: q.phases,
            }
        })
        .collect();
    if ranking.iter().any(|r| !(r.classical > 0.0)) {
        return Err(Error::Numerical("non-positive classical maximum".into()));
    }
    ranking.sort_by(|a, b| b.qcr.total_cmp(&a.qcr).then(a.s.index().cmp(&b.s.index())));

    let top = ranking[0].clone();
    let top_class: Vec<SignMatrix> = if prune {
        top.s.orbit().into_iter().collect()
    } else {
        ranking
            .iter()
            .take_while(|r| r.qcr >= top.qcr * (1.0 - 1e-4))
            .map(|r| r.s)
            .collect()
    };
    let above_one = ranking
        .iter()
        .filter(|r| r.qcr > 1.0 + QCR_TOL)
        .map(|r| r.class_size)
        .sum();
    Ok(SearchResult {
        rule,
        pruned: prune,
        best: top.s,
        best_qcr: top.qcr,
        top_class,
        above_one,
        ranking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_s() -> SignMatrix {
        SignMatrix::new([[0, 0, 2], [1, 0, 2], [2, 2, 1]]).unwrap()
    }

    #[test]
    fn product_rule_matrices() {
        for n in 1..=3 {
            assert_eq!(s_matrix(1, n, ExponentRule::Product).unwrap(), SignMatrix::zero());
        }
        assert_eq!(
            s_matrix(2, 2, ExponentRule::Product).unwrap().entries(),
            [[0, 0, 0], [0, 1, 2], [0, 2, 1]]
        );
        assert_eq!(
            s_matrix(2, 3, ExponentRule::Product).unwrap().entries(),
            [[0, 0, 0], [0, 2, 1], [0, 1, 2]]
        );
    }

    #[test]
    fn sum_rule_matrices() {
        assert_eq!(
            s_matrix(1, 1, ExponentRule::Sum).unwrap(),
            SignMatrix::zero()
        );
        assert_eq!(
            s_matrix(2, 3, ExponentRule::Sum).unwrap().entries(),
            [[0, 2, 1], [1, 0, 2], [2, 1, 0]]
        );
        assert!(s_matrix(0, 1, ExponentRule::Sum).is_err());
    }

    #[test]
    fn rotation_cycles_frame() {
        let frame = OutcomeFrame::recursive(3).unwrap();
        for m in 0..3 {
            let v = frame.vector(m);
            let next = frame.vector((m + 1) % 3);
            let r = RotationU::apply(1, [v[0], v[1]]);
            assert!((r[0] - next[0]).abs() < 1e-12 && (r[1] - next[1]).abs() < 1e-12);
        }
        let mut v = [0.3, -0.7];
        for _ in 0..3 {
            v = RotationU::apply(1, v);
        }
        assert!((v[0] - 0.3).abs() < 1e-12 && (v[1] + 0.7).abs() < 1e-12);
    }

    #[test]
    fn index_roundtrip_and_parse() {
        for i in [0, 1, 5000, SIGN_MATRIX_COUNT - 1] {
            assert_eq!(SignMatrix::from_index(i).unwrap().index(), i);
        }
        let s: SignMatrix = "0,0,2;1,0,2;2,2,1".parse().unwrap();
        assert_eq!(s, paper_s());
        assert_eq!(s.to_string(), "0,0,2;1,0,2;2,2,1");
        assert!("0,0,3;1,0,2;2,2,1".parse::<SignMatrix>().is_err());
        assert!(SignMatrix::from_index(SIGN_MATRIX_COUNT).is_err());
    }

    #[test]
    fn fast_route_matches_vector_route() {
        let mut rng = block_rng(17, 0);
        for rule in [ExponentRule::Sum, ExponentRule::Product] {
            for _ in 0..20 {
                let s = SignMatrix::from_index(rng.random_range(0..SIGN_MATRIX_COUNT)).unwrap();
                let expr = BellExpression::new(&s, rule);
                let flat: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
                let ph = BellPhases::from_flat(&flat).unwrap();
                let slow = bell_quantum(&s, &ph, rule).unwrap();
                assert!((slow - expr.quantum_value(&ph)).abs() < 1e-10);
                let a = [rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3)];
                let b = [rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3)];
                let slow = bell_classical_value(&s, rule, a, b);
                assert!((slow - expr.classical_value(a, b)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_phases_bounded() {
        let b = bell_quantum(&SignMatrix::zero(), &BellPhases::zeros(), ExponentRule::Sum).unwrap();
        assert!(b.is_finite() && b.abs() <= 81.0);
    }

    #[test]
    fn shifting_alice_rotates_outcomes() {
        // E(x + (1/3, 2/3)) = U^2 E(x), so the shift equals adding 2 to S
        let mut rng = block_rng(23, 0);
        for _ in 0..10 {
            let s = SignMatrix::from_index(rng.random_range(0..SIGN_MATRIX_COUNT)).unwrap();
            let flat: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
            let ph = BellPhases::from_flat(&flat).unwrap();
            let mut moved = ph;
            for p in moved.alice.iter_mut() {
                p[0] += 1.0 / 3.0;
                p[1] += 2.0 / 3.0;
            }
            let lhs = bell_quantum(&s, &moved, ExponentRule::Sum).unwrap();
            let rhs = bell_quantum(&s.offset(2), &ph, ExponentRule::Sum).unwrap();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn classical_max_relabel_invariant() {
        let s = SignMatrix::new([[1, 1, 1], [1, 1, 1], [1, 1, 1]]).unwrap();
        let expr = BellExpression::new(&s, ExponentRule::Sum);
        let best = expr.classical_max();
        // shifting both tables by one maps strategies onto strategies
        let mut relabeled = f64::NEG_INFINITY;
        for a in 0..27u8 {
            for b in 0..27u8 {
                let ta = [(a / 9 + 1) % 3, ((a / 3) % 3 + 1) % 3, (a % 3 + 1) % 3];
                let tb = [(b / 9 + 1) % 3, ((b / 3) % 3 + 1) % 3, (b % 3 + 1) % 3];
                relabeled = relabeled.max(expr.classical_value(ta, tb));
            }
        }
        assert!((relabeled - best.value).abs() < 1e-12);
        assert!((expr.classical_value(best.alice, best.bob) - best.value).abs() < 1e-12);
    }

    #[test]
    fn all_zero_s_has_no_violation() {
        let expr = BellExpression::new(&SignMatrix::zero(), ExponentRule::Sum);
        let c = expr.classical_max().value;
        let q = bell_quantum_max(&expr, &QuantumBudget::default(), 1).value;
        assert!(q / c <= 1.0 + 1e-6, "{q} / {c}");
    }

    #[test]
    fn paper_matrix_ratio() {
        let expr = BellExpression::new(&paper_s(), ExponentRule::Sum);
        let c = expr.classical_max().value;
        let q = bell_quantum_max(&expr, &QuantumBudget::default(), 1).value;
        assert!((c - 13.5).abs() < 1e-9);
        assert!((q / c - 1.1408).abs() < 2e-3, "{}", q / c);
    }

    #[test]
    fn orbit_contains_self_and_is_closed() {
        let s = paper_s();
        let orbit = s.orbit();
        assert!(orbit.contains(&s));
        for m in orbit.iter().take(20) {
            assert_eq!(m.canonical(), s.canonical());
        }
    }

    #[test]
    fn prune_needs_sum_rule() {
        assert!(search_all_s(&QuantumBudget::default(), 1, true, ExponentRule::Product).is_err());
    }
}
