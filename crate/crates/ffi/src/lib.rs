//! C ABI over the `gbi` library.
//!
//! Every fallible function returns a [`GbiStatus`]; on failure the message is
//! available from [`gbi_last_error`] until the next call on the same thread.
//! Results are written through out-pointers. Objects are opaque handles that
//! must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gbi::discrete::{build_scenario, classical_opt, DiscreteScenario};
use gbi::error::Error;
use gbi::estimator::{closed_form_l, mc_overlap};
use gbi::qcorr::{corr_reduced, prob_outcome, FrameKind, OutcomeFrame, PhaseSum, Scenario, SettingVector};
use gbi::scaling::{fit_scaling, qcr, FitModel, FitPoint};
use gbi::wwwzb::{
    bell_classical_max, search_all_s, BellExpression, BellPhases, ExponentRule, QuantumBudget, SearchResult,
    SignMatrix,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GbiStatus {
    Ok = 0,
    InvalidArgument = 2,
    ResourceLimit = 3,
    Numerical = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GbiFrameKind {
    Recursive = 0,
    Tetrahedral = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GbiFitModel {
    TwoParam = 0,
    OneParam = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GbiExponentRule {
    Sum = 0,
    Product = 1,
}

/// Monte Carlo overlap estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GbiEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub points: u64,
    pub seed: u64,
}

/// `1/L = a^N b`; `b` is 1 for the one-parameter model.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GbiFit {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

/// One entry of a sign-matrix search ranking.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GbiRankEntry {
    /// Row-major entries in {0,1,2}.
    pub s: [u8; 9],
    pub class_size: usize,
    pub classical: f64,
    pub quantum: f64,
    pub qcr: f64,
}

/// Outcome frame handle.
pub struct GbiFrame(OutcomeFrame);

/// Finished sign-matrix search.
pub struct GbiSearch(SearchResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GbiStatus {
    match e.exit_code() {
        3 => GbiStatus::ResourceLimit,
        4 => GbiStatus::Numerical,
        _ => GbiStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GbiStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GbiStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GbiStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            GbiStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic".into());
            GbiStatus::Panic
        }
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn frame_kind(kind: GbiFrameKind) -> FrameKind {
    match kind {
        GbiFrameKind::Recursive => FrameKind::Recursive,
        GbiFrameKind::Tetrahedral => FrameKind::Tetrahedral,
    }
}

fn rule(r: GbiExponentRule) -> ExponentRule {
    match r {
        GbiExponentRule::Sum => ExponentRule::Sum,
        GbiExponentRule::Product => ExponentRule::Product,
    }
}

fn sign_matrix(s: &[u8]) -> Result<SignMatrix, Fail> {
    let mut e = [[0u8; 3]; 3];
    for (k, v) in s.iter().enumerate() {
        e[k / 3][k % 3] = *v;
    }
    Ok(SignMatrix::new(e)?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gbi_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn gbi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates the outcome frame for dimension `d`.
///
/// # Safety
/// `out_frame` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gbi_frame_new(d: usize, kind: GbiFrameKind, out_frame: *mut *mut GbiFrame) -> GbiStatus {
    guard(|| {
        let slot = out(out_frame, "out_frame")?;
        let frame = OutcomeFrame::new(d, frame_kind(kind))?;
        *slot = Box::into_raw(Box::new(GbiFrame(frame)));
        Ok(())
    })
}

/// Releases a frame; NULL is ignored.
///
/// # Safety
/// `frame` must come from [`gbi_frame_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gbi_frame_free(frame: *mut GbiFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// Dimension of the vectors of `frame`.
///
/// # Safety
/// `frame` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gbi_frame_dim(frame: *const GbiFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.0.dim())
}

/// Copies outcome vector `m` into `out_vec` (`len` must equal the frame dimension).
///
/// # Safety
/// `frame` must be a live handle and `out_vec` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gbi_frame_vector(
    frame: *const GbiFrame,
    m: usize,
    out_vec: *mut f64,
    len: usize,
) -> GbiStatus {
    guard(|| {
        let f = &frame.as_ref().ok_or(Fail::Null("frame"))?.0;
        if m >= f.d() {
            return Err(Error::OutcomeOutOfRange { m, d: f.d() }.into());
        }
        if len != f.dim() {
            return Err(Fail::Arg(format!("buffer length {len}, frame dimension {}", f.dim())));
        }
        slice_mut(out_vec, len, "out_vec")?.copy_from_slice(f.vector(m));
        Ok(())
    })
}

/// Correlation vector at the phase sum `x` (`d - 1` entries).
///
/// # Safety
/// `frame` must be a live handle, `x` must hold `x_len` doubles and
/// `out_vec` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gbi_corr_reduced(
    frame: *const GbiFrame,
    x: *const f64,
    x_len: usize,
    out_vec: *mut f64,
    out_len: usize,
) -> GbiStatus {
    guard(|| {
        let f = &frame.as_ref().ok_or(Fail::Null("frame"))?.0;
        let x = slice(x, x_len, "x")?;
        let e = corr_reduced(f, &PhaseSum::new(x.iter().copied()))?;
        if out_len != e.len() {
            return Err(Fail::Arg(format!("buffer length {out_len}, need {}", e.len())));
        }
        slice_mut(out_vec, out_len, "out_vec")?.copy_from_slice(&e);
        Ok(())
    })
}

/// Probabilities of the `d` joint outcomes at the phase sum `x`.
///
/// # Safety
/// `x` must hold `d - 1` doubles and `out_probs` must hold `d` doubles.
#[no_mangle]
pub unsafe extern "C" fn gbi_prob_outcomes(d: usize, x: *const f64, out_probs: *mut f64) -> GbiStatus {
    guard(|| {
        let scenario = Scenario::new(d, 1)?;
        let x = PhaseSum::new(slice(x, d - 1, "x")?.iter().copied());
        let probs = slice_mut(out_probs, d, "out_probs")?;
        for (m, p) in probs.iter_mut().enumerate() {
            *p = prob_outcome(&scenario, &x, m)?;
        }
        Ok(())
    })
}

/// Monte Carlo estimate of `L_{d,N}`; `threads = 0` uses all cores.
///
/// # Safety
/// `frame` must be a live handle and `out_est` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gbi_mc_overlap(
    frame: *const GbiFrame,
    parties: usize,
    points: u64,
    seed: u64,
    threads: usize,
    out_est: *mut GbiEstimate,
) -> GbiStatus {
    guard(|| {
        let f = &frame.as_ref().ok_or(Fail::Null("frame"))?.0;
        let slot = out(out_est, "out_est")?;
        let est = mc_overlap(&Scenario::new(f.d(), parties)?, f, points, seed, threads)?;
        *slot = GbiEstimate {
            mean: est.mean,
            std_error: est.stderr,
            points: est.points,
            seed: est.seed,
        };
        Ok(())
    })
}

/// Exact `L_{d,N}` for `d` in {2, 3}.
///
/// # Safety
/// `out_l` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gbi_closed_form_l(d: usize, parties: usize, out_l: *mut f64) -> GbiStatus {
    guard(|| {
        let slot = out(out_l, "out_l")?;
        *slot = closed_form_l(d, parties)?;
        Ok(())
    })
}

/// `(1/d) / L`.
///
/// # Safety
/// `out_qcr` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gbi_qcr(d: usize, l: f64, out_qcr: *mut f64) -> GbiStatus {
    guard(|| {
        let slot = out(out_qcr, "out_qcr")?;
        *slot = qcr(d, l)?;
        Ok(())
    })
}

/// Weighted log-domain fit of `1/L` against `N` over `len` records.
///
/// # Safety
/// `parties`, `l` and `weights` must each hold `len` elements; `out_fit`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gbi_fit_scaling(
    parties: *const usize,
    l: *const f64,
    weights: *const f64,
    len: usize,
    model: GbiFitModel,
    out_fit: *mut GbiFit,
) -> GbiStatus {
    guard(|| {
        let slot = out(out_fit, "out_fit")?;
        let (n, l, w) = (
            slice(parties, len, "parties")?,
            slice(l, len, "l")?,
            slice(weights, len, "weights")?,
        );
        let records: Vec<FitPoint> = (0..len)
            .map(|i| FitPoint {
                parties: n[i],
                l: l[i],
                weight: w[i],
            })
            .collect();
        let model = match model {
            GbiFitModel::TwoParam => FitModel::TwoParam,
            GbiFitModel::OneParam => FitModel::OneParam,
        };
        let fit = fit_scaling(&records, model)?;
        *slot = GbiFit {
            a: fit.a,
            b: fit.b,
            residual: fit.residual,
        };
        Ok(())
    })
}

/// Best deterministic overlap for the given settings.
///
/// `settings` lists, observer by observer, `counts[i]` settings of `d - 1`
/// phases each. `out_overlap` receives the classical optimum and
/// `out_self_overlap` the quantum self-overlap of the tensor.
///
/// # Safety
/// `counts` must hold `parties` elements, `settings` must hold
/// `sum(counts) * (d - 1)` doubles and both out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gbi_discrete_classical(
    d: usize,
    parties: usize,
    counts: *const usize,
    settings: *const f64,
    seed: u64,
    out_overlap: *mut f64,
    out_self_overlap: *mut f64,
) -> GbiStatus {
    guard(|| {
        let scenario = Scenario::new(d, parties)?;
        let counts = slice(counts, parties, "counts")?;
        let total: usize = counts.iter().sum();
        let flat = slice(settings, total * (d - 1), "settings")?;
        let mut chunks = flat.chunks(d - 1);
        let lists: Vec<Vec<SettingVector>> = counts
            .iter()
            .map(|&c| (0..c).map(|_| SettingVector::new(chunks.next().unwrap_or(&[]).iter().copied())).collect())
            .collect();
        let frame = OutcomeFrame::recursive(d)?;
        let ds: DiscreteScenario = build_scenario(scenario, &frame, lists)?;
        let best = classical_opt(&ds, seed)?;
        *out(out_overlap, "out_overlap")? = best.overlap;
        *out(out_self_overlap, "out_self_overlap")? = ds.self_overlap();
        Ok(())
    })
}

/// Exact classical maximum of the qutrit inequality with sign matrix `s`.
///
/// # Safety
/// `s` must hold 9 bytes (row-major) and `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gbi_bell_classical_max(s: *const u8, r: GbiExponentRule, out_value: *mut f64) -> GbiStatus {
    guard(|| {
        let m = sign_matrix(slice(s, 9, "s")?)?;
        *out(out_value, "out_value")? = bell_classical_max(&m, rule(r)).value;
        Ok(())
    })
}

/// Quantum value of the qutrit inequality at the given phases: Alice's three
/// observables (6 doubles) followed by Bob's (6 doubles).
///
/// # Safety
/// `s` must hold 9 bytes, `phases` 12 doubles, and `out_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gbi_bell_quantum(
    s: *const u8,
    r: GbiExponentRule,
    phases: *const f64,
    out_value: *mut f64,
) -> GbiStatus {
    guard(|| {
        let m = sign_matrix(slice(s, 9, "s")?)?;
        let ph = BellPhases::from_flat(slice(phases, 12, "phases")?)?;
        *out(out_value, "out_value")? = BellExpression::new(&m, rule(r)).quantum_value(&ph);
        Ok(())
    })
}

/// Runs the sign-matrix search with the default optimiser budget.
///
/// # Safety
/// `out_search` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gbi_search_run(
    seed: u64,
    prune: bool,
    r: GbiExponentRule,
    out_search: *mut *mut GbiSearch,
) -> GbiStatus {
    guard(|| {
        let slot = out(out_search, "out_search")?;
        let result = search_all_s(&QuantumBudget::default(), seed, prune, rule(r))?;
        *slot = Box::into_raw(Box::new(GbiSearch(result)));
        Ok(())
    })
}

/// Number of ranking entries; 0 for NULL.
///
/// # Safety
/// `search` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gbi_search_len(search: *const GbiSearch) -> usize {
    search.as_ref().map_or(0, |s| s.0.ranking.len())
}

/// Ranking entry `index`, best first.
///
/// # Safety
/// `search` must be a live handle and `out_entry` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gbi_search_entry(
    search: *const GbiSearch,
    index: usize,
    out_entry: *mut GbiRankEntry,
) -> GbiStatus {
    guard(|| {
        let s = &search.as_ref().ok_or(Fail::Null("search"))?.0;
        let slot = out(out_entry, "out_entry")?;
        let e = s
            .ranking
            .get(index)
            .ok_or_else(|| Fail::Arg(format!("index {index} past {} entries", s.ranking.len())))?;
        let mut flat = [0u8; 9];
        for (k, v) in e.s.entries().iter().flatten().enumerate() {
            flat[k] = *v;
        }
        *slot = GbiRankEntry {
            s: flat,
            class_size: e.class_size,
            classical: e.classical,
            quantum: e.quantum,
            qcr: e.qcr,
        };
        Ok(())
    })
}

/// Whether `s` belongs to the best-scoring class of a finished search.
///
/// # Safety
/// `search` must be a live handle, `s` must hold 9 bytes and `out_flag`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn gbi_search_in_top_class(
    search: *const GbiSearch,
    s: *const u8,
    out_flag: *mut bool,
) -> GbiStatus {
    guard(|| {
        let res = &search.as_ref().ok_or(Fail::Null("search"))?.0;
        let m = sign_matrix(slice(s, 9, "s")?)?;
        *out(out_flag, "out_flag")? = res.in_top_class(&m);
        Ok(())
    })
}

/// Number of sign matrices with a ratio above 1.
///
/// # Safety
/// `search` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gbi_search_above_one(search: *const GbiSearch) -> usize {
    search.as_ref().map_or(0, |s| s.0.above_one)
}

/// Releases a search; NULL is ignored.
///
/// # Safety
/// `search` must come from [`gbi_search_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gbi_search_free(search: *mut GbiSearch) {
    if !search.is_null() {
        drop(Box::from_raw(search));
    }
}
