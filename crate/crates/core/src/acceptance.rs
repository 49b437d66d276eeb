//! The acceptance criteria, runnable from tests and from the command line.
//!
//! Criteria 1–4 take the log-gamma implementation as a parameter so that a
//! corrupted coefficient table can be shown to fail exactly those criteria.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::expr::LatticeExpr;
use crate::free_norm::{self, Budget};
use crate::hilbert;
use crate::projectivity;
use crate::qlat::{self, CoordinateLattice};
use crate::seed;
use crate::stable::{self, LogGamma, StableSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub group: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn(&LogGamma) -> Result<(bool, String)>;

struct Criterion {
    id: u8,
    name: &'static str,
    group: &'static str,
    /// Wall-clock limit in seconds, if any.
    limit: Option<f64>,
    check: Check,
}

const CRITERIA: [Criterion; 12] = [
    Criterion {
        id: 1,
        name: "half moment of the Cauchy law",
        group: "stable",
        limit: Some(5.0),
        check: c01_cauchy_half_moment,
    },
    Criterion {
        id: 2,
        name: "first moment of the Gaussian law",
        group: "stable",
        limit: None,
        check: c02_gaussian_first_moment,
    },
    Criterion {
        id: 3,
        name: "small-p limit",
        group: "stable",
        limit: None,
        check: c03_limit,
    },
    Criterion {
        id: 4,
        name: "uniform boundedness scan",
        group: "stable",
        limit: None,
        check: c04_scan,
    },
    Criterion {
        id: 5,
        name: "F_n minima",
        group: "hilbert",
        limit: None,
        check: c05_minima,
    },
    Criterion {
        id: 6,
        name: "F_n structural lemma",
        group: "hilbert",
        limit: None,
        check: c06_lemma,
    },
    Criterion {
        id: 7,
        name: "weak-L1 divergence",
        group: "hilbert",
        limit: Some(10.0),
        check: c07_weak_l1,
    },
    Criterion {
        id: 8,
        name: "delta isometry",
        group: "free-norm",
        limit: None,
        check: c08_delta_isometry,
    },
    Criterion {
        id: 9,
        name: "exact bracket closure",
        group: "free-norm",
        limit: None,
        check: c09_exact_brackets,
    },
    Criterion {
        id: 10,
        name: "convexity constants",
        group: "convexity",
        limit: None,
        check: c10_convexity,
    },
    Criterion {
        id: 11,
        name: "projectivity suite",
        group: "projectivity",
        limit: Some(60.0),
        check: c11_projectivity,
    },
    Criterion {
        id: 12,
        name: "property suites",
        group: "properties",
        limit: None,
        check: c12_properties,
    },
];

/// `(id, name, group)` of every criterion.
pub fn list() -> Vec<(u8, &'static str, &'static str)> {
    CRITERIA.iter().map(|c| (c.id, c.name, c.group)).collect()
}

fn matches(c: &Criterion, filter: &str) -> bool {
    let f = filter.to_ascii_lowercase();
    c.group.contains(&f) || c.name.to_ascii_lowercase().contains(&f) || c.id.to_string() == f
}

fn run_criterion(c: &Criterion, lg: &LogGamma) -> CriterionResult {
    let start = Instant::now();
    let (mut passed, mut detail) = match (c.check)(lg) {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    if let Some(limit) = c.limit {
        if seconds >= limit {
            passed = false;
            detail.push_str(&format!("; runtime {seconds:.2}s exceeds {limit}s"));
        }
    }
    CriterionResult {
        id: c.id,
        name: c.name,
        group: c.group,
        passed,
        detail,
        seconds,
    }
}

/// Runs the criteria whose group, name or id matches `filter` (all when `None`).
pub fn run(lg: &LogGamma, filter: Option<&str>) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|c| filter.map_or(true, |f| matches(c, f)))
        .map(|c| run_criterion(c, lg))
        .collect()
}

/// Runs one criterion by id.
pub fn run_one(id: u8, lg: &LogGamma) -> Option<CriterionResult> {
    CRITERIA
        .iter()
        .find(|c| c.id == id)
        .map(|c| run_criterion(c, lg))
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<32} {:>8.3}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

const MC_SAMPLES: usize = 1_000_000;
const MC_SEED: u64 = 7;

fn moment_check(lg: &LogGamma, p: f64, q: f64, exact: f64) -> Result<(bool, String)> {
    let closed = stable::a_pq_with(lg, p, q)?;
    let mc = stable::a_pq_monte_carlo(p, &StableSpec::new(q, MC_SEED, MC_SAMPLES)?)?;
    let closed_ok = (closed - exact).abs() <= 1e-9;
    let mc_ok = (mc.estimate - exact).abs() <= 4.0 * mc.stderr
        && (mc.estimate - closed).abs() <= 4.0 * mc.stderr;
    Ok((
        closed_ok && mc_ok,
        format!(
            "closed {closed:.12} (exact {exact:.12}), monte carlo {:.6} ± {:.6}",
            mc.estimate, mc.stderr
        ),
    ))
}

fn c01_cauchy_half_moment(lg: &LogGamma) -> Result<(bool, String)> {
    moment_check(lg, 0.5, 1.0, 2.0)
}

fn c02_gaussian_first_moment(lg: &LogGamma) -> Result<(bool, String)> {
    moment_check(lg, 1.0, 2.0, 2.0 / PI.sqrt())
}

fn c03_limit(lg: &LogGamma) -> Result<(bool, String)> {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for q in [0.5, 1.0, 1.5] {
        let gap = (stable::a_pq_with(lg, 1e-3, q)? - stable::a_pq_limit(q)?).abs();
        worst = worst.max(gap);
        ok &= gap <= 1e-2;
    }
    Ok((ok, format!("max |A(1e-3, q) - limit(q)| = {worst:.3e}")))
}

fn c04_scan(lg: &LogGamma) -> Result<(bool, String)> {
    let grid = stable::linear_grid(1e-4, 0.499, 200);
    let s = stable::uniform_bound_scan_with(lg, 0.5, 1.0, &grid)?;
    let end = s.rows[0].ratio;
    let ok = s.max_ratio.is_finite() && s.max_ratio <= 2.2 && (end / 2.0 - 1.0).abs() <= 0.01;
    Ok((
        ok,
        format!(
            "max ratio {:.6} at p={:.4}, ratio at p=1e-4 {end:.6}",
            s.max_ratio, s.argmax_p
        ),
    ))
}

const HILBERT_CELLS: usize = 10_001;
const HILBERT_NS: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

fn c05_minima(_: &LogGamma) -> Result<(bool, String)> {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut at_64 = 0.0;
    for n in HILBERT_NS {
        let m = hilbert::adaptive_minimum(n, HILBERT_CELLS)?;
        let gap = (m.value - ((2 * n - 1) as f64).ln()).abs();
        worst = worst.max(gap);
        ok &= gap <= 1e-3;
        if n == 64 {
            at_64 = m.value;
        }
    }
    ok &= at_64 > 4.84;
    Ok((
        ok,
        format!("max |min F_n - log(2n-1)| = {worst:.2e}, min F_64 = {at_64:.6}"),
    ))
}

fn c06_lemma(_: &LogGamma) -> Result<(bool, String)> {
    let mut failed = Vec::new();
    for n in 1..=64 {
        if !hilbert::f_n_lemma_check(n)?.all_pass() {
            failed.push(n);
        }
    }
    Ok((
        failed.is_empty(),
        format!("n = 1..64, failures: {failed:?}"),
    ))
}

fn c07_weak_l1(_: &LogGamma) -> Result<(bool, String)> {
    let mut prev = f64::NEG_INFINITY;
    let mut ok = true;
    let mut cols = Vec::new();
    for n in [2, 4, 8, 16, 32, 64] {
        let w = hilbert::weak_l1_norm(&hilbert::f_n_grid(n, HILBERT_CELLS)?)?;
        ok &= w >= ((2 * n - 1) as f64).ln() - 0.01 && w > prev;
        prev = w;
        cols.push(format!("{w:.4}"));
    }
    Ok((ok, format!("weak-L1 column [{}]", cols.join(", "))))
}

fn c08_delta_isometry(_: &LogGamma) -> Result<(bool, String)> {
    let mut failures = 0;
    let mut worst_lower: f64 = 1.0;
    for spec in ["lp:1:3", "lp:2:3", "lp:inf:3"] {
        let space = CoordinateLattice::parse(spec)?;
        for p in [0.5, 1.0] {
            for k in 0..50 {
                let mut rng = seed::stream(8, spec, k);
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-10.0..10.0)).collect();
                let norm = space.quasi_norm(&x)?;
                let f = LatticeExpr::linear(&x);
                let b = free_norm::norm_bracket(&f, &space, p, Budget::default(), k, None)?;
                worst_lower = worst_lower.min(b.lower / norm);
                if !(b.contains(norm, 1e-9) && b.lower >= 0.99 * norm && b.upper == norm) {
                    failures += 1;
                }
            }
        }
    }
    Ok((
        failures == 0,
        format!("300 brackets, {failures} failures, min lower/‖x‖ = {worst_lower:.12}"),
    ))
}

fn c09_exact_brackets(_: &LogGamma) -> Result<(bool, String)> {
    let f = crate::expr::parse("(add (abs (gen 0)) (abs (gen 1)))")?;
    let a = free_norm::norm_bracket(
        &f,
        &CoordinateLattice::parse("lp:1:2")?,
        1.0,
        Budget::default(),
        9,
        None,
    )?;
    let n = 8;
    let avg = LatticeExpr::sum((0..n).map(|k| LatticeExpr::gen(k).abs().scaled(1.0 / n as f64)))
        .expect("nonempty");
    let b = free_norm::norm_bracket(
        &avg,
        &CoordinateLattice::weighted_lr(1.0, n)?,
        1.0,
        Budget::default(),
        9,
        None,
    )?;
    let ok = (a.lower - 2.0).abs() <= 1e-6
        && (a.upper - 2.0).abs() <= 1e-6
        && (b.lower - 1.0).abs() <= 1e-6
        && (b.upper - 1.0).abs() <= 1e-6;
    Ok((
        ok,
        format!(
            "[{:.9}, {:.9}] and [{:.9}, {:.9}]",
            a.lower, a.upper, b.lower, b.upper
        ),
    ))
}

fn c10_convexity(_: &LogGamma) -> Result<(bool, String)> {
    let mut ok = true;
    let mut bounds = Vec::new();
    for p in [0.25, 0.5, 1.0] {
        let l = CoordinateLattice::lp_grid(p, 16)?;
        let r = qlat::p_convexity_lower_bound(&l, p, 2000, 10)?;
        ok &= (r.bound - 1.0).abs() <= 1e-9;
        bounds.push(format!("{:.12}", r.bound));
    }
    let small = CoordinateLattice::weighted_lr(0.5, 4)?;
    let basis: Vec<Vec<f64>> = (0..4)
        .map(|j| (0..4).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let ratio = qlat::convexity_ratio(&small, 1.0, &basis).unwrap_or(f64::NAN);
    ok &= (ratio - 4.0).abs() <= 1e-9;
    let scan = qlat::convexity_monotonicity_scan(&small, &[0.25, 0.5, 0.75, 1.0], 2000, 10)?;
    let monotone = scan.windows(2).all(|w| w[1].bound >= w[0].bound);
    ok &= monotone;
    Ok((
        ok,
        format!(
            "grid bounds [{}], basis ratio {ratio:.12}, scan monotone {monotone}",
            bounds.join(", ")
        ),
    ))
}

fn c11_projectivity(_: &LogGamma) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [0.5, 1.0] {
        let r = projectivity::projectivity_suite(12, p, 10_000, 20, 11)?;
        ok &= r.passed();
        parts.push(format!(
            "p={p}: β∘α={} disjoint {}/{} norm≤1 {} gap {:.2e} balls {}",
            r.beta_alpha_identity,
            r.disjointness.violations,
            r.disjointness.trials,
            r.norm_bound.all_at_most_one,
            r.max_relative_gap,
            r.ball_family.violations
                + r.ball_family.criterion_violations
                + r.ball_family.disjoint_pairs_in_ball
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// Number of randomized cases per property.
pub const PROPERTY_CASES: usize = 10_000;
const PROPERTY_RTOL: f64 = 1e-12;

/// Random expression over generators `0..arity`.
pub fn random_expr(rng: &mut impl Rng, arity: usize, depth: usize) -> LatticeExpr {
    if depth == 0 || rng.gen_bool(0.25) {
        return LatticeExpr::gen(rng.gen_range(0..arity));
    }
    let sub = |rng: &mut _| random_expr(rng, arity, depth - 1);
    match rng.gen_range(0..7) {
        0 => sub(rng).scaled(rng.gen_range(-3.0..3.0)),
        1 => sub(rng).add(sub(rng)),
        2 => sub(rng).max(sub(rng)),
        3 => sub(rng).min(sub(rng)),
        4 => sub(rng).abs(),
        5 => sub(rng).pos(),
        _ => {
            let s = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0][rng.gen_range(0..6)];
            let k = rng.gen_range(1..=3);
            LatticeExpr::power_sum(s, (0..k).map(|_| sub(rng)).collect())
        }
    }
}

fn random_lattice(rng: &mut impl Rng) -> CoordinateLattice {
    let d = rng.gen_range(1..=8);
    let r = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, f64::INFINITY][rng.gen_range(0..8)];
    let w = (0..d).map(|_| rng.gen_range(0.1..2.0)).collect();
    CoordinateLattice::new(r, w).expect("valid lattice")
}

fn random_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect()
}

fn leq(a: f64, b: f64) -> bool {
    a <= b + PROPERTY_RTOL * a.abs().max(b.abs())
}

/// Violation counts of the five lattice properties over `cases` seeded cases.
pub fn property_suites(cases: usize, seed: u64) -> Result<[(&'static str, usize); 5]> {
    let mut p_ineq = 0;
    let mut mono = 0;
    let mut disj = 0;
    let mut krivine = 0;
    let mut homog = 0;
    for i in 0..cases as u64 {
        let mut rng = seed::stream(seed, "quasi-norm", i);
        let l = random_lattice(&mut rng);
        let d = l.dim();
        let (x, y) = (random_vec(&mut rng, d), random_vec(&mut rng, d));
        let m = l.exponent().min(1.0);
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let lhs = l.quasi_norm(&s)?.powf(m);
        if !leq(lhs, l.quasi_norm(&x)?.powf(m) + l.quasi_norm(&y)?.powf(m)) {
            p_ineq += 1;
        }

        let mut rng = seed::stream(seed, "monotonicity", i);
        let l = random_lattice(&mut rng);
        let y = random_vec(&mut rng, l.dim());
        let x: Vec<f64> = y.iter().map(|v| v * rng.gen_range(-1.0..=1.0)).collect();
        if !leq(l.quasi_norm(&x)?, l.quasi_norm(&y)?) {
            mono += 1;
        }

        let mut rng = seed::stream(seed, "disjointness", i);
        let l = random_lattice(&mut rng);
        let d = l.dim();
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        for j in 0..d {
            let v = rng.gen_range(0.0..5.0);
            if rng.gen::<bool>() {
                x[j] = v;
            } else {
                y[j] = v;
            }
        }
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        if !(qlat::disjointness_criterion(&l, &x, &y)?
            && leq(l.quasi_norm(&x)?, l.quasi_norm(&diff)?))
        {
            disj += 1;
        }

        let mut rng = seed::stream(seed, "krivine", i);
        let arity = rng.gen_range(1..=4);
        let f = random_expr(&mut rng, arity, 4);
        let l = random_lattice(&mut rng);
        let elems: Vec<Vec<f64>> = (0..arity).map(|_| random_vec(&mut rng, l.dim())).collect();
        let column_values = l.evaluate(&f, &elems)?;
        let pointwise_ok = (0..l.dim()).all(|j| {
            let col: Vec<f64> = elems.iter().map(|e| e[j]).collect();
            let v = f.evaluate_scalar(&col[..]).expect("assigned");
            (v - column_values[j]).abs() <= PROPERTY_RTOL * v.abs()
        });
        if !pointwise_ok {
            krivine += 1;
        }

        let mut rng = seed::stream(seed, "homogeneity", i);
        let arity = rng.gen_range(1..=4);
        let f = random_expr(&mut rng, arity, 4);
        let x = random_vec(&mut rng, arity);
        let lambda = 10f64.powf(rng.gen_range(-3.0..3.0));
        let fx = f.evaluate_scalar(&x[..])?;
        let xs: Vec<f64> = x.iter().map(|v| lambda * v).collect();
        let fl = f.evaluate_scalar(&xs[..])?;
        let scale = lambda * magnitude(&f, &x);
        if (fl - lambda * fx).abs() > PROPERTY_RTOL * scale {
            homog += 1;
        }
    }
    Ok([
        ("quasi-norm p-inequality", p_ineq),
        ("lattice monotonicity", mono),
        ("disjointness criterion", disj),
        ("Krivine pointwise evaluation", krivine),
        ("expression homogeneity", homog),
    ])
}

/// `Σ_j c_j |x_j|`, an upper bound for `|f(x)|`.
pub fn magnitude(f: &LatticeExpr, x: &[f64]) -> f64 {
    crate::free_norm::coefficient_bounds(f, x.len())
        .iter()
        .zip(x)
        .map(|(c, v)| c * v.abs())
        .sum()
}

fn c12_properties(_: &LogGamma) -> Result<(bool, String)> {
    let counts = property_suites(PROPERTY_CASES, 12)?;
    let ok = counts.iter().all(|(_, c)| *c == 0);
    let detail = counts
        .iter()
        .map(|(n, c)| format!("{n}: {c}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((
        ok,
        format!("{PROPERTY_CASES} cases each; violations {detail}"),
    ))
}
