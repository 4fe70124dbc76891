//! Acceptance suite: every criterion at its stated tolerance and budget.
//!
//! Prints one `PASS`/`FAIL` line per criterion. Seeds are fixed in advance.
//! A criterion listed in `KNOWN_UNATTAINABLE` is still run and reported,
//! but its failure does not fail the target.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use gbi::cli::row_seed;
use gbi::discrete::{
    build_scenario, classical_opt_exact, classical_opt_heuristic, optimize_settings, SettingsSearch,
    AUTHORITATIVE_RESTARTS, EXACT_CAP,
};
use gbi::estimator::rng::block_rng;
use gbi::estimator::{closed_form_l, mc_overlap, norm_quadrature, with_threads};
use gbi::lrmodel::{contraction_check, ContractionRegion};
use gbi::optim::PatternSearch;
use gbi::qcorr::{corr_oracle, corr_reduced, OutcomeFrame, PhaseSum, Scenario, SettingVector};
use gbi::scaling::{fit_table, subadditivity_report, FitModel, TableRow, Verdict};
use gbi::wwwzb::{search_all_s, ExponentRule, QuantumBudget, SignMatrix};

/// Criteria whose outcome is decided by sampling noise at the stated budget;
/// see the README.
///
/// - 5b: the standard error of L_{6,6} at 1e6 points is about 16% of L, so a
///   5% window holds with probability of roughly 0.25.
/// - 6: a correct estimator lands inside 3 stderr with probability 0.9973,
///   so 50 of 50 runs (the only count that is >= 99%) happens with
///   probability 0.87 per dimension.
const KNOWN_UNATTAINABLE: &[&str] = &["5b", "6"];

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(id: &'static str, title: &'static str, limit: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (mut pass, mut detail) = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            pass = false;
            detail.push_str(&format!("; over time limit {limit:?}"));
        }
    }
    Outcome {
        id,
        title,
        pass,
        detail,
        elapsed,
    }
}

fn uniform(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn printed_qutrit(x1: f64, x2: f64) -> [f64; 2] {
    let t = 2.0 * PI;
    [
        ((t * x1).cos() + (t * (x1 - x2)).cos() + (t * x2).cos()) / 3.0,
        4.0 / 3.0 * (PI * x1).sin() * (PI * (x1 - x2)).sin() * (PI * x2).sin(),
    ]
}

fn printed_ququart(x1: f64, x2: f64, x3: f64) -> [f64; 3] {
    let t = 2.0 * PI;
    let (s, c) = (|v: f64| (t * v).sin(), |v: f64| (t * v).cos());
    let k4 = 1.0 / (4.0 * 3f64.sqrt());
    let k2 = 1.0 / (2.0 * 3f64.sqrt());
    [
        k4 * (s(x1 - x2) + c(x1 - x2) - s(x1) + c(x1) + s(x2 - x3) + c(x2 - x3) + s(x3) + c(x3)),
        k2 * (c(x1 - x3) + c(x2)),
        k4 * (-s(x1 - x2) + c(x1 - x2) + s(x1) + c(x1) - s(x2 - x3) + c(x2 - x3) - s(x3) + c(x3)),
    ]
}

fn c1_closed_forms() -> (bool, String) {
    let mut rng = block_rng(1, 0);
    let f3 = OutcomeFrame::recursive(3).unwrap();
    let f4 = OutcomeFrame::tetrahedral();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = uniform(&mut rng, 2);
        let e = corr_reduced(&f3, &PhaseSum::new(x.clone())).unwrap();
        let p = printed_qutrit(x[0], x[1]);
        worst = worst.max((e[0] - p[0]).abs()).max((e[1] - p[1]).abs());
        let x = uniform(&mut rng, 3);
        let e = corr_reduced(&f4, &PhaseSum::new(x.clone())).unwrap();
        let p = printed_ququart(x[0], x[1], x[2]);
        for k in 0..3 {
            worst = worst.max((e[k] - p[k]).abs());
        }
    }
    (worst < 1e-12, format!("max deviation {worst:.2e} (tol 1e-12)"))
}

fn c2_oracle() -> (bool, String) {
    let mut rng = block_rng(2, 0);
    let mut worst: f64 = 0.0;
    for d in 2..=5 {
        let frame = OutcomeFrame::recursive(d).unwrap();
        for n in 1..=3 {
            let scenario = Scenario::new(d, n).unwrap();
            for _ in 0..100 {
                let settings: Vec<SettingVector> =
                    (0..n).map(|_| SettingVector::new(uniform(&mut rng, d - 1))).collect();
                let a = corr_oracle(&scenario, &frame, &settings, 1 << 20).unwrap();
                let b = corr_reduced(&frame, &PhaseSum::from_settings(&settings).unwrap()).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    worst = worst.max((u - v).abs());
                }
            }
        }
    }
    (worst < 1e-10, format!("max deviation {worst:.2e} (tol 1e-10)"))
}

fn c3_norms() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for d in 2..=5 {
        worst = worst.max((norm_quadrature(d).unwrap() - 1.0 / d as f64).abs());
    }
    (worst < 1e-6, format!("max |norm - 1/d| {worst:.2e} (tol 1e-6)"))
}

fn c4_contraction() -> (bool, String) {
    let mut rng = block_rng(4, 0);
    let mut worst: f64 = 0.0;
    let mut used = 0;
    while used < 20 {
        let x = PhaseSum::new(uniform(&mut rng, 2));
        match contraction_check(&x, ContractionRegion::LabelZero) {
            Ok(k) => {
                worst = worst.max((k - 0.167879).abs());
                used += 1;
            }
            Err(gbi::Error::DegenerateDirection(_)) => continue,
            Err(e) => return (false, e.to_string()),
        }
    }
    (worst < 1e-4, format!("max |k - 0.167879| {worst:.2e} (tol 1e-4)"))
}

fn estimate(d: usize, n: usize, points: u64) -> TableRow {
    let scenario = Scenario::new(d, n).unwrap();
    let frame = OutcomeFrame::recursive(d).unwrap();
    let est = mc_overlap(&scenario, &frame, points, row_seed(1, d, n), 0).unwrap();
    TableRow::from_estimate(&est).unwrap()
}

fn c5a_table() -> (bool, String) {
    let targets = [(4, 2, 0.170095), (5, 2, 0.129613), (6, 2, 0.103236), (4, 3, 0.0701762)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, n, want) in targets {
        let start = Instant::now();
        let row = estimate(d, n, 4_000_000);
        let rel = (row.l - want).abs() / want;
        let ok = rel < 0.01 && start.elapsed() < Duration::from_secs(120);
        pass &= ok;
        parts.push(format!("L{d}{n}={:.6} ({:+.2}%)", row.l, 100.0 * (row.l - want) / want));
    }
    (pass, format!("{} (tol 1%, 4e6 points)", parts.join(", ")))
}

fn c5b_table_tail() -> (bool, String) {
    let want = 0.00114045;
    let row = estimate(6, 6, 1_000_000);
    let rel = (row.l - want) / want;
    (
        rel.abs() < 0.05,
        format!(
            "L66={:.6} +- {:.6} ({:+.1}%, tol 5%, 1e6 points; stderr is {:.0}% of L)",
            row.l,
            row.stderr,
            100.0 * rel,
            100.0 * row.stderr / row.l
        ),
    )
}

fn c6_closed_form_consistency() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [2usize, 3] {
        let exact = closed_form_l(d, 2).unwrap();
        let scenario = Scenario::new(d, 2).unwrap();
        let frame = OutcomeFrame::recursive(d).unwrap();
        let inside = (1..=50u64)
            .filter(|&seed| {
                let est = mc_overlap(&scenario, &frame, 100_000, seed, 0).unwrap();
                (est.mean - exact).abs() <= 3.0 * est.stderr
            })
            .count();
        pass &= inside as f64 >= 0.99 * 50.0;
        parts.push(format!("d={d}: {inside}/50"));
    }
    (pass, format!("{} within 3 stderr (need >= 99%)", parts.join(", ")))
}

struct OwnRows {
    rows: Vec<TableRow>,
}

fn own_rows() -> OwnRows {
    let mut rows = Vec::new();
    for n in 2..=5 {
        rows.push(TableRow::closed_form(2, n).unwrap());
        rows.push(TableRow::closed_form(3, n).unwrap());
        rows.push(estimate(4, n, 10_000_000));
    }
    for n in 2..=4 {
        // the composite-dimension margins shrink with N and need more points
        let points = match n {
            2 => 10_000_000,
            3 => 40_000_000,
            _ => 400_000_000,
        };
        rows.push(estimate(6, n, points));
    }
    OwnRows { rows }
}

fn c7_fit(own: &OwnRows) -> (bool, String) {
    let two = fit_table(&own.rows, 4, FitModel::TwoParam).unwrap();
    let one = fit_table(&own.rows, 4, FitModel::OneParam).unwrap();
    let inside = |a: f64| (2.40..=2.44).contains(&a);
    (
        inside(two.a) && inside(one.a),
        format!("two-param a={:.5} b={:.5}, one-param a={:.5} (bracket [2.40, 2.44])", two.a, two.b, one.a),
    )
}

fn c8_subadditivity(own: &OwnRows) -> (bool, String) {
    let r22 = subadditivity_report(2, 2, &[2, 3, 4, 5], &own.rows).unwrap();
    let r23 = subadditivity_report(2, 3, &[2, 3, 4], &own.rows).unwrap();
    let fmt = |rows: &[gbi::scaling::SubadditivityRow]| {
        rows.iter()
            .map(|r| format!("N={} {:.4}/{:.1}sd", r.parties, r.delta, r.delta / r.sigma))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let ok = |rows: &[gbi::scaling::SubadditivityRow]| rows.iter().all(|r| r.verdict == Verdict::Subadditive);
    (
        ok(&r22.rows) && ok(&r23.rows),
        format!("(2,2)vs4: {}; (2,3)vs6: {}", fmt(&r22.rows), fmt(&r23.rows)),
    )
}

fn c9_discrete() -> (bool, String) {
    let scenario = Scenario::new(2, 2).unwrap();
    let frame = OutcomeFrame::recursive(2).unwrap();
    let opts = SettingsSearch {
        search: PatternSearch {
            initial_step: 0.02,
            min_step: 1e-4,
            shrink: 0.5,
            max_evals: 400,
        },
        random_starts: 0,
    };
    let traj = optimize_settings(scenario, &frame, 24, 1, opts).unwrap();
    let m2 = traj[0].qcr;
    let m24 = traj.last().unwrap().qcr;

    let mut rng = block_rng(9, 0);
    let mut agree = 0;
    let mut tried = 0;
    while tried < 50 {
        let d = rng.random_range(2..=3usize);
        let n = rng.random_range(2..=3usize);
        let counts: Vec<usize> = (0..n).map(|_| rng.random_range(1..=3)).collect();
        let total: u32 = counts.iter().sum::<usize>() as u32;
        if (d as u128).pow(total) > EXACT_CAP {
            continue;
        }
        let settings = counts
            .iter()
            .map(|&m| (0..m).map(|_| SettingVector::new(uniform(&mut rng, d - 1))).collect())
            .collect();
        let ds = build_scenario(Scenario::new(d, n).unwrap(), &OutcomeFrame::recursive(d).unwrap(), settings).unwrap();
        let exact = classical_opt_exact(&ds).unwrap();
        let heur = classical_opt_heuristic(&ds, AUTHORITATIVE_RESTARTS, tried as u64).unwrap();
        if (exact.overlap - heur.overlap).abs() <= 1e-12 * exact.overlap.abs().max(1.0) {
            agree += 1;
        }
        tried += 1;
    }
    (
        (m2 - 2f64.sqrt()).abs() < 1e-3 && m24 >= 1.21 && agree == 50,
        format!("M=2 QCR={m2:.5} (want 1.41421 +- 1e-3), M=24 QCR={m24:.4} (want >= 1.21), heuristic=exact {agree}/50"),
    )
}

fn c10_appendix() -> (bool, String) {
    let res = search_all_s(&QuantumBudget::default(), 1, true, ExponentRule::Sum).unwrap();
    let s = SignMatrix::new([[0, 0, 2], [1, 0, 2], [2, 2, 1]]).unwrap();
    let member = res.in_top_class(&s);
    (
        (res.best_qcr - 1.1408).abs() <= 0.002 && member && res.above_one >= 100,
        format!(
            "max QCR {:.5} (want 1.1408 +- 0.002), reference S in top class: {member}, {} sign matrices above 1",
            res.best_qcr, res.above_one
        ),
    )
}

fn c11_reproducibility() -> (bool, String) {
    let mut same = true;
    let scenario = Scenario::new(5, 3).unwrap();
    let frame = OutcomeFrame::recursive(5).unwrap();
    let runs: Vec<String> = [1, 2, 3]
        .iter()
        .map(|&t| serde_json::to_string(&mc_overlap(&scenario, &frame, 300_000, 11, t).unwrap()).unwrap())
        .collect();
    same &= runs.windows(2).all(|w| w[0] == w[1]);

    let search = |t| {
        with_threads(t, || serde_json::to_string(&search_all_s(&QuantumBudget::default(), 3, true, ExponentRule::Sum).unwrap()).unwrap())
            .unwrap()
    };
    same &= search(1) == search(2);

    let traj = |t| {
        let s = Scenario::new(2, 3).unwrap();
        let f = OutcomeFrame::recursive(2).unwrap();
        with_threads(t, || serde_json::to_string(&optimize_settings(s, &f, 3, 5, SettingsSearch::default()).unwrap()).unwrap())
            .unwrap()
    };
    same &= traj(1) == traj(3);

    let cli = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_gbi"))
            .args(["table", "--d", "4,5", "--n", "2,3", "--points", "20000", "--seed", "7", "--threads", threads])
            .output()
            .unwrap()
            .stdout
    };
    let one = cli("1");
    same &= !one.is_empty() && one == cli("4");
    (same, "library and CLI outputs identical for 1..4 worker threads".into())
}

fn main() {
    let mut outcomes = vec![
        timed("1", "closed-form anchors", Some(Duration::from_secs(1)), c1_closed_forms),
        timed("2", "oracle equivalence", Some(Duration::from_secs(10)), c2_oracle),
        timed("3", "norm law", Some(Duration::from_secs(10)), c3_norms),
        timed("4", "contraction factor", Some(Duration::from_secs(30)), c4_contraction),
        timed("5a", "overlap table, two- and three-party rows", None, c5a_table),
        timed("5b", "overlap table, L_{6,6} at 1e6 points", Some(Duration::from_secs(120)), c5b_table_tail),
        timed("6", "closed-form consistency", None, c6_closed_form_consistency),
    ];
    let start = Instant::now();
    let own = own_rows();
    let shared = start.elapsed();
    let mut fit = timed("7", "fit brackets", None, || c7_fit(&own));
    fit.elapsed += shared;
    outcomes.push(fit);
    outcomes.push(timed("8", "subadditivity", None, || c8_subadditivity(&own)));
    outcomes.push(timed("9", "discrete optimizer", None, c9_discrete));
    outcomes.push(timed("10", "sign-matrix search", Some(Duration::from_secs(7200)), c10_appendix));
    outcomes.push(timed("11", "thread-count reproducibility", None, c11_reproducibility));

    let mut unexpected = 0;
    for o in &outcomes {
        let known = KNOWN_UNATTAINABLE.contains(&o.id);
        let status = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("{status:<12} [{:>3}] {} ({:.1} s): {}", o.id, o.title, o.elapsed.as_secs_f64(), o.detail);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria passed", outcomes.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
