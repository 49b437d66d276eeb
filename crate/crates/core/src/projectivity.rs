//! The embedding `α(e_n) = f_n` of `ℓ_p` into its free lattice, the lattice
//! projection `β` evaluating at coordinate functionals, and the ball family
//! behind the countable chain condition.
//!
//! With `N` generators (0-based index `n-1` for `e_n`),
//! `f_n = [ |δ_{e_n}| - 4^n ( Σ_{j<n} |δ_{e_j}| + Σ_{n<j≤N} 2^{-j} |δ_{e_j}| ) ]₊`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{power, LatticeExpr};
use crate::free_norm::{self, Budget, NormBracket};
use crate::qlat::{disjointness_criterion, CoordinateLattice};
use crate::seed;

const DISJOINT_TOL: f64 = 1e-12;
/// Cells of the `L_p` grid used for the ball family.
pub const BALL_GRID_CELLS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaFamily {
    n: usize,
    p: f64,
    exprs: Vec<LatticeExpr>,
}

fn abs_gen(j: usize) -> LatticeExpr {
    LatticeExpr::gen(j - 1).abs()
}

fn alpha_expr(n: usize, big_n: usize) -> LatticeExpr {
    let head = (1..n).map(abs_gen);
    let tail = (n + 1..=big_n).map(|j| abs_gen(j).scaled(0.5f64.powi(j as i32)));
    match LatticeExpr::sum(head.chain(tail)) {
        Some(mass) => abs_gen(n).sub(mass.scaled(4f64.powi(n as i32))).pos(),
        None => abs_gen(n).pos(),
    }
}

fn coordinate(n: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[j] = 1.0;
    e
}

/// `(f(e_1^*), ..., f(e_N^*))`.
pub fn beta_eval(f: &LatticeExpr, n: usize) -> Result<Vec<f64>> {
    if f.arity() > n {
        return Err(Error::Dimension {
            expected: n,
            found: f.arity(),
        });
    }
    (0..n)
        .map(|j| f.evaluate_scalar(&coordinate(n, j)[..]))
        .collect()
}

impl AlphaFamily {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("N must be at least 1"));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::param(format!("p must lie in (0,1], got {p}")));
        }
        let exprs: Vec<LatticeExpr> = (1..=n).map(|k| alpha_expr(k, n)).collect();
        for (k, f) in exprs.iter().enumerate() {
            if beta_eval(f, n)? != coordinate(n, k) {
                return Err(Error::Contract(format!(
                    "β(f_{}) is not e_{}",
                    k + 1,
                    k + 1
                )));
            }
        }
        Ok(Self { n, p, exprs })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `f_n` for `n` in `1..=N`.
    pub fn f(&self, n: usize) -> &LatticeExpr {
        &self.exprs[n - 1]
    }

    pub fn exprs(&self) -> &[LatticeExpr] {
        &self.exprs
    }

    /// `ℓ_p^N`, the space whose free lattice holds the family.
    pub fn space(&self) -> CoordinateLattice {
        CoordinateLattice::weighted_lr(self.p, self.n).expect("validated exponent")
    }

    /// `Σ_n a_n f_n`.
    pub fn combination(&self, a: &[f64]) -> Result<LatticeExpr> {
        if a.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: a.len(),
            });
        }
        Ok(LatticeExpr::sum(
            a.iter()
                .zip(&self.exprs)
                .filter(|(c, _)| **c != 0.0)
                .map(|(c, f)| f.clone().scaled(*c)),
        )
        .unwrap_or_else(LatticeExpr::zero))
    }
}

pub fn build_alpha(n: usize, p: f64) -> Result<AlphaFamily> {
    AlphaFamily::new(n, p)
}

/// `β(f_n) = e_n` for every `n`.
pub fn beta_alpha_identity(fam: &AlphaFamily) -> Result<bool> {
    for (k, f) in fam.exprs.iter().enumerate() {
        if beta_eval(f, fam.n)? != coordinate(fam.n, k) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisjointnessReport {
    pub trials: usize,
    pub violations: usize,
    pub first_witness: Option<Vec<f64>>,
}

impl DisjointnessReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Coordinates `±10^{U(-12,12)}`, a quarter of them zero.
fn wide_functional(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.25) {
                0.0
            } else {
                let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                s * 10f64.powf(rng.gen_range(-12.0..12.0))
            }
        })
        .collect()
}

/// `min(f_n(x^*), f_m(x^*)) = 0` for all `n < m` at `trials` random functionals.
pub fn alpha_disjointness(
    fam: &AlphaFamily,
    trials: usize,
    seed: u64,
) -> Result<DisjointnessReport> {
    if fam.n < 2 {
        return Err(Error::param("disjointness needs N ≥ 2"));
    }
    let bad: Vec<Option<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(seed, "alpha-disjointness", t as u64);
            let x = wide_functional(fam.n, &mut rng);
            let vals: Vec<f64> = fam
                .exprs
                .iter()
                .map(|f| f.evaluate_scalar(&x[..]))
                .collect::<Result<_>>()?;
            let tol = DISJOINT_TOL * x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let overlap = (0..fam.n).any(|i| (i + 1..fam.n).any(|j| vals[i].min(vals[j]) > tol));
            Ok(overlap.then_some(x))
        })
        .collect::<Result<_>>()?;
    let violations = bad.iter().filter(|b| b.is_some()).count();
    Ok(DisjointnessReport {
        trials,
        violations,
        first_witness: bad.into_iter().flatten().next(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormBoundReport {
    /// Every `f_n` has a verified certificate `[e_n]` of value 1.
    pub all_at_most_one: bool,
    pub probes: usize,
}

/// `|f_n| ≤ |δ_{e_n}|` at `check_points` random probes per `n`.
pub fn alpha_norm_bound(
    fam: &AlphaFamily,
    check_points: usize,
    seed: u64,
) -> Result<NormBoundReport> {
    let space = fam.space();
    let mut probes = 0;
    let mut ok = true;
    for k in 1..=fam.n {
        let cert = vec![coordinate(fam.n, k - 1)];
        let u = free_norm::fpbl_upper(fam.f(k), &space, fam.p, &cert, check_points, seed)?;
        probes += u.probes;
        ok &= u.value == 1.0;
    }
    Ok(NormBoundReport {
        all_at_most_one: ok,
        probes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub coefficients: Vec<f64>,
    /// `(Σ|a_n|^p)^{1/p}`.
    pub target: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// `(upper - lower) / upper`, zero when both vanish.
    pub relative_gap: f64,
    pub bracket: NormBracket,
}

/// Brackets `‖Σ a_n f_n‖` over `ℓ_p^N` against `(Σ|a_n|^p)^{1/p}`; the upper side
/// uses the certificate `[a_n e_n]`.
pub fn alpha_norm_sandwich(
    fam: &AlphaFamily,
    a: &[f64],
    budget: Budget,
    seed: u64,
) -> Result<SandwichReport> {
    let g = fam.combination(a)?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("coefficients must be finite"));
    }
    let p = fam.p;
    let target = power(a.iter().map(|x| power(x.abs(), p)).sum(), 1.0 / p);
    let cert: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, c)| {
            let mut e = vec![0.0; fam.n];
            e[j] = *c;
            e
        })
        .collect();
    let budget = Budget {
        n_max: budget.n_max.max(fam.n),
        ..budget
    };
    let user = (!cert.is_empty()).then_some(&cert[..]);
    let bracket = free_norm::norm_bracket(&g, &fam.space(), p, budget, seed, user)?;
    let tol = 1e-9 * target.max(1.0);
    Ok(SandwichReport {
        coefficients: a.to_vec(),
        target,
        lower: bracket.lower,
        upper: bracket.upper,
        lower_ok: bracket.lower >= target - tol,
        upper_ok: bracket.upper <= target + tol,
        relative_gap: if bracket.upper > 0.0 {
            (bracket.upper - bracket.lower) / bracket.upper
        } else {
            0.0
        },
        bracket,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallFamilyReport {
    pub p: f64,
    pub trials: usize,
    /// Disjoint positive pairs found inside one ball `B(b, ‖b‖/4^n)`.
    pub violations: usize,
    /// Trials where `‖x - y‖ < ‖x‖` held yet `x ∧ y = 0`.
    pub criterion_violations: usize,
    /// Trials in which `‖x - y‖ < ‖x‖` applied.
    pub criterion_applicable: usize,
    /// Random disjoint pairs that fit in the ball around their sum.
    pub disjoint_pairs_in_ball: usize,
}

impl BallFamilyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.criterion_violations == 0 && self.disjoint_pairs_in_ball == 0
    }
}

fn random_positive_step(cells: usize, rng: &mut impl Rng) -> Vec<f64> {
    let pieces = rng.gen_range(1..=cells);
    let mut cuts: Vec<usize> = (0..pieces - 1).map(|_| rng.gen_range(1..cells)).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(cells);
    let mut level = rng.gen_range(0.01..2.0);
    let mut next = cuts.iter().peekable();
    for i in 0..cells {
        while next.peek().is_some_and(|&&c| c == i) {
            next.next();
            level = rng.gen_range(0.01..2.0);
        }
        out.push(level);
    }
    out
}

/// A positive point within distance `radius` of `b`: either `b` with a
/// low-mass set of cells removed, or `b` plus a scaled random perturbation,
/// clipped at zero.
fn point_in_ball(l: &CoordinateLattice, b: &[f64], radius: f64, rng: &mut impl Rng) -> Vec<f64> {
    let d = b.len();
    if rng.gen::<bool>() {
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| b[i].total_cmp(&b[j]));
        let mut x = b.to_vec();
        let k = rng.gen_range(1..=d);
        for &i in &order[..k] {
            let keep = x[i];
            x[i] = 0.0;
            if !in_ball(l, &x, b, radius) {
                x[i] = keep;
                break;
            }
        }
        return x;
    }
    let h: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nh = l.norm_of(&h);
    let s = radius * rng.gen::<f64>().powf(0.25) * (1.0 - 1e-12) / nh;
    b.iter()
        .zip(&h)
        .map(|(u, v)| (u + s * v).max(0.0))
        .collect()
}

fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// `‖x - b‖ < radius`, with a relative margin so that boundary ties are
/// never decided by rounding.
fn in_ball(l: &CoordinateLattice, x: &[f64], b: &[f64], radius: f64) -> bool {
    l.norm_of(&sub(x, b)) < radius * (1.0 - 1e-12)
}

/// Property (iii) of the ball family on the `L_p` grid: two positive points
/// of one ball `B(b, ‖b‖/4^n)`, `n ∈ {1,2,3}`, are never disjoint.
pub fn ball_family_check(p: f64, trials: usize, seed: u64) -> Result<BallFamilyReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param(format!("p must lie in (0,1], got {p}")));
    }
    let l = CoordinateLattice::lp_grid(p, BALL_GRID_CELLS)?;
    let d = BALL_GRID_CELLS;
    let per_trial: Vec<[bool; 4]> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(seed, "ball-family", t as u64);
            let b = random_positive_step(d, &mut rng);
            let n = 1 + t % 3;
            let radius = l.norm_of(&b) / 4f64.powi(n as i32);
            let x = point_in_ball(&l, &b, radius, &mut rng);
            let y = point_in_ball(&l, &b, radius, &mut rng);
            let inside = in_ball(&l, &x, &b, radius) && in_ball(&l, &y, &b, radius);
            let disjoint = disjointness_criterion(&l, &x, &y)?;
            let applicable = l.norm_of(&sub(&x, &y)) < l.norm_of(&x);

            // disjoint pair with b = x + y
            let mask: Vec<bool> = (0..d).map(|_| rng.gen::<bool>()).collect();
            let u = random_positive_step(d, &mut rng);
            let dx: Vec<f64> = (0..d).map(|i| if mask[i] { u[i] } else { 0.0 }).collect();
            let dy: Vec<f64> = (0..d).map(|i| if mask[i] { 0.0 } else { u[i] }).collect();
            let r2 = l.norm_of(&u) / 4f64.powi(n as i32);
            let pair_inside = in_ball(&l, &dx, &u, r2) && in_ball(&l, &dy, &u, r2);
            Ok([
                inside && disjoint,
                applicable,
                applicable && disjoint,
                pair_inside,
            ])
        })
        .collect::<Result<_>>()?;
    let count = |k: usize| per_trial.iter().filter(|r| r[k]).count();
    Ok(BallFamilyReport {
        p,
        trials,
        violations: count(0),
        criterion_applicable: count(1),
        criterion_violations: count(2),
        disjoint_pairs_in_ball: count(3),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectivityReport {
    pub n: usize,
    pub p: f64,
    pub beta_alpha_identity: bool,
    pub disjointness: DisjointnessReport,
    pub norm_bound: NormBoundReport,
    pub sandwich: Vec<SandwichReport>,
    pub sandwich_ok: bool,
    pub max_relative_gap: f64,
    pub ball_family: BallFamilyReport,
}

impl ProjectivityReport {
    pub fn passed(&self) -> bool {
        self.beta_alpha_identity
            && self.disjointness.passed()
            && self.norm_bound.all_at_most_one
            && self.sandwich_ok
            && self.ball_family.passed()
    }
}

/// Maximum relative gap accepted in the norm sandwich.
pub const SANDWICH_GAP: f64 = 0.05;

/// Random coefficient vectors for the sandwich: heavy-tailed entries, some
/// zero.
pub fn sandwich_coefficients(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let mut rng = seed::stream(seed, "sandwich-coefficients", k as u64);
            (0..n)
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        0.0
                    } else {
                        crate::qlat::heavy_tailed(&mut rng)
                    }
                })
                .collect()
        })
        .collect()
}

/// All five checks for one `(N, p)`.
pub fn projectivity_suite(
    n: usize,
    p: f64,
    trials: usize,
    sandwich_vectors: usize,
    seed: u64,
) -> Result<ProjectivityReport> {
    let fam = build_alpha(n, p)?;
    let disjointness = if n >= 2 {
        alpha_disjointness(&fam, trials, seed)?
    } else {
        DisjointnessReport {
            trials: 0,
            violations: 0,
            first_witness: None,
        }
    };
    let norm_bound = alpha_norm_bound(&fam, 1000, seed)?;
    let sandwich = sandwich_coefficients(n, sandwich_vectors, seed)
        .iter()
        .map(|a| alpha_norm_sandwich(&fam, a, Budget::default(), seed))
        .collect::<Result<Vec<_>>>()?;
    let max_relative_gap = sandwich.iter().map(|s| s.relative_gap).fold(0.0, f64::max);
    let sandwich_ok = sandwich.iter().all(|s| {
        s.lower_ok
            && s.upper_ok
            && s.upper - s.lower >= -1e-9
            && s.upper - s.lower <= SANDWICH_GAP * s.upper
    });
    Ok(ProjectivityReport {
        n,
        p,
        beta_alpha_identity: beta_alpha_identity(&fam)?,
        disjointness,
        norm_bound,
        sandwich,
        sandwich_ok,
        max_relative_gap,
        ball_family: ball_family_check(p, trials, seed)?,
    })
}
