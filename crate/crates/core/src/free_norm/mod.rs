//! Two-sided estimates of the free `p`-convex lattice norm
//!
//! ```text
//! ‖f‖ = sup { (Σ_i |f(x_i^*)|^p)^{1/p} : sup_{x ∈ B_E} Σ_i |x_i^*(x)|^p ≤ 1 }
//! ```
//!
//! over a finite-dimensional coordinate space `E`. Lower bounds come from
//! explicit admissible tuples; upper bounds from domination certificates
//! `|f| ≤ Σ_k |δ_{e_k}|`, worth `(Σ_k ‖e_k‖^p)^{1/p}`.

mod admissible;
mod certificate;

use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{power, LatticeExpr, Scaled};
use crate::qlat::{heavy_tailed, CoordinateLattice};
use crate::seed;

pub use admissible::{
    admissibility, dual_norm, norming_functional, norming_point, Admissibility, Method,
    MAX_PATTERN_ROWS, MAX_VERTEX_DIM,
};
pub use certificate::{
    certificate_value, check_domination, coefficient_bounds, default_certificate, fpbl_upper,
    merge_parallel, Route, UpperBound,
};

use admissible::{admissibility_estimate, check_p, check_tuple};

pub type FunctionalTuple = Vec<Vec<f64>>;

/// Default number of random probes for domination checks.
pub const DEFAULT_CHECK_POINTS: usize = 256;
const MAX_SIGN_CANDIDATE_DIM: usize = 12;
const IMPROVEMENT_RTOL: f64 = 1e-12;
const STEP_TOL: f64 = 1e-8;
const BRACKET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budget {
    /// Largest tuple length searched.
    pub n_max: usize,
    pub restarts: usize,
    /// Ascent sweeps per restart.
    pub iters: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            n_max: 8,
            restarts: 8,
            iters: 50,
        }
    }
}

impl FromStr for Budget {
    type Err = Error;

    /// `n=8,restarts=64,iters=50`; omitted keys keep their defaults.
    fn from_str(s: &str) -> Result<Self> {
        let mut b = Budget::default();
        for part in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::param(format!("budget entry `{part}` is not key=value")))?;
            let v: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("budget value `{v}` is not an integer")))?;
            match k.trim() {
                "n" | "n_max" => b.n_max = v,
                "restarts" => b.restarts = v,
                "iters" => b.iters = v,
                other => return Err(Error::param(format!("unknown budget key `{other}`"))),
            }
        }
        Ok(b)
    }
}

impl Budget {
    fn check(&self) -> Result<()> {
        if self.n_max == 0 || self.restarts == 0 || self.iters == 0 {
            return Err(Error::param(format!(
                "budget must be positive in every entry, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBound {
    /// `(Σ_i |f(x_i^*)|^p)^{1/p}` at `tuple`.
    pub value: f64,
    /// Normalized so that its admissibility upper bound is 1.
    pub tuple: FunctionalTuple,
    pub admissibility: Admissibility,
    /// `false` when the admissibility of `tuple` is only a numeric estimate.
    pub certified: bool,
    pub restarts_run: usize,
}

fn objective_sum(f: &LatticeExpr, t: &[Vec<f64>], p: f64) -> Result<f64> {
    let mut s = 0.0;
    for row in t {
        s += power(f.evaluate_scalar(&row[..])?.abs(), p);
    }
    Ok(s)
}

/// `(Σ|f(t_i)|^p / adm(t))^{1/p}`, invariant under scaling `t`.
fn objective(
    f: &LatticeExpr,
    space: &CoordinateLattice,
    p: f64,
    t: &[Vec<f64>],
    warm: &mut Vec<f64>,
) -> Result<f64> {
    let a = admissibility_estimate(t, space, p, warm);
    if !(a > 0.0) {
        return Ok(0.0);
    }
    Ok(power(objective_sum(f, t, p)? / a, 1.0 / p))
}

fn scaled_tuple(t: &[Vec<f64>], c: f64) -> FunctionalTuple {
    t.iter()
        .map(|row| row.iter().map(|x| c * x).collect())
        .collect()
}

fn unit(d: usize, j: usize, s: f64) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[j] = s;
    e
}

/// Norming functional for linear `f`, `±e_j^*`, sign vectors and the
/// coordinate tuple.
fn structured_candidates(
    f: &LatticeExpr,
    space: &CoordinateLattice,
    n_max: usize,
) -> Vec<FunctionalTuple> {
    let d = space.dim();
    let mut out = Vec::new();
    if let Some(mut v) = f.linear_coefficients() {
        v.resize(d, 0.0);
        if v.iter().any(|c| *c != 0.0) {
            out.push(vec![norming_functional(space, &v)]);
        }
    }
    for j in 0..d {
        out.push(vec![unit(d, j, 1.0)]);
        out.push(vec![unit(d, j, -1.0)]);
    }
    if d <= MAX_SIGN_CANDIDATE_DIM {
        for m in 0u32..(1 << d) {
            out.push(vec![(0..d)
                .map(|j| if m & (1 << j) != 0 { -1.0 } else { 1.0 })
                .collect()]);
        }
    }
    if d >= 2 && d <= n_max {
        out.push((0..d).map(|j| unit(d, j, 1.0)).collect());
    }
    out
}

fn random_tuple(d: usize, n: usize, rng: &mut impl Rng) -> FunctionalTuple {
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn better(v: f64, incumbent: f64) -> bool {
    v > incumbent * (1.0 + IMPROVEMENT_RTOL) && v > incumbent
}

/// Coordinate-wise ascent with one random direction per sweep; the tuple is
/// renormalized after every sweep.
fn ascend(
    f: &LatticeExpr,
    space: &CoordinateLattice,
    p: f64,
    t0: FunctionalTuple,
    iters: usize,
    rng: &mut impl Rng,
) -> Result<(f64, FunctionalTuple)> {
    let mut warm = norming_point(space, &t0[0]);
    let mut t = t0;
    let mut best = objective(f, space, p, &t, &mut warm)?;
    let mut step = 0.5;
    for _ in 0..iters {
        let a = admissibility_estimate(&t, space, p, &mut warm);
        if !(a > 0.0) {
            break;
        }
        t = scaled_tuple(&t, power(a, -1.0 / p));
        let mut improved = false;
        for i in 0..t.len() {
            let scale = t[i].iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-3);
            for j in 0..t[i].len() {
                for s in [1.0, -1.0] {
                    let mut cand = t.clone();
                    cand[i][j] += s * step * scale;
                    let v = objective(f, space, p, &cand, &mut warm)?;
                    if better(v, best) {
                        t = cand;
                        best = v;
                        improved = true;
                        break;
                    }
                }
            }
        }
        let dir = random_tuple(space.dim(), t.len(), rng);
        for s in [1.0, -1.0] {
            let cand: FunctionalTuple = t
                .iter()
                .zip(&dir)
                .map(|(r, d)| r.iter().zip(d).map(|(x, y)| x + s * step * y).collect())
                .collect();
            let v = objective(f, space, p, &cand, &mut warm)?;
            if better(v, best) {
                t = cand;
                best = v;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
            if step < STEP_TOL {
                break;
            }
        }
    }
    Ok((best, t))
}

/// Spot check of `f(λx^*) = λ f(x^*)`.
fn check_homogeneity(f: &LatticeExpr, d: usize, seed: u64) -> Result<()> {
    let coef = coefficient_bounds(f, d);
    let mut rng = seed::stream(seed, "homogeneity", 0);
    for k in 0..4 {
        let x: Vec<f64> = (0..d).map(|_| heavy_tailed(&mut rng)).collect();
        let fx = f.evaluate_scalar(&x[..])?;
        let mag: f64 = coef.iter().zip(&x).map(|(c, v)| c * v.abs()).sum();
        let lambda = [0.5, 3.0, 1e-3, 17.0][k];
        let flx = f.evaluate_scalar(&Scaled {
            inner: &x[..],
            factor: lambda,
        })?;
        if (flx - lambda * fx).abs() > 1e-9 * lambda * mag.max(f64::MIN_POSITIVE) {
            return Err(Error::Contract(format!(
                "expression is not positively homogeneous: f({lambda}·x) = {flx}, {lambda}·f(x) = {}",
                lambda * fx
            )));
        }
    }
    Ok(())
}

fn search(
    f: &LatticeExpr,
    space: &CoordinateLattice,
    p: f64,
    budget: Budget,
    seed: u64,
    target: Option<f64>,
) -> Result<LowerBound> {
    check_p(p)?;
    budget.check()?;
    let d = space.dim();
    if f.arity() > d {
        return Err(Error::Dimension {
            expected: d,
            found: f.arity(),
        });
    }
    check_homogeneity(f, d, seed)?;

    let reached = |v: f64| target.is_some_and(|t| v >= t * (1.0 - IMPROVEMENT_RTOL));
    let structured = structured_candidates(f, space, budget.n_max);
    let values: Vec<f64> = structured
        .par_iter()
        .map(|t| objective(f, space, p, t, &mut norming_point(space, &t[0])))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..structured.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut best = (values[order[0]], structured[order[0]].clone());

    let mut restarts_run = 0;
    if !reached(best.0) {
        let from_structured = budget.restarts.div_ceil(2).min(order.len());
        let starts: Vec<FunctionalTuple> = (0..budget.restarts)
            .map(|r| {
                if r < from_structured {
                    structured[order[r]].clone()
                } else {
                    let mut rng = seed::stream(seed, "fbl-start", r as u64);
                    random_tuple(d, 1 + r % budget.n_max, &mut rng)
                }
            })
            .collect();
        let results: Vec<(f64, FunctionalTuple)> = starts
            .into_par_iter()
            .enumerate()
            .map(|(r, t0)| {
                let mut rng = seed::stream(seed, "fbl-ascent", r as u64);
                ascend(f, space, p, t0, budget.iters, &mut rng)
            })
            .collect::<Result<_>>()?;
        restarts_run = results.len();
        for (v, t) in results {
            if better(v, best.0) {
                best = (v, t);
            }
        }
    }

    let pre = admissibility(&best.1, space, p)?;
    let tuple = if pre.upper > 0.0 {
        scaled_tuple(&best.1, power(pre.upper, -1.0 / p))
    } else {
        best.1
    };
    let adm = admissibility(&tuple, space, p)?;
    let raw = power(objective_sum(f, &tuple, p)?, 1.0 / p);
    // guard against rounding in the normalization
    let value = if adm.upper > 1.0 {
        raw / power(adm.upper, 1.0 / p)
    } else {
        raw
    };
    Ok(LowerBound {
        value,
        certified: pre.exact && adm.exact,
        tuple,
        admissibility: adm,
        restarts_run,
    })
}

/// Best `(Σ_i |f(x_i^*)|^p)^{1/p}` over normalized tuples of length at most
/// `budget.n_max`. A valid lower bound whenever `certified` is set.
pub fn fbl_lower(
    f: &LatticeExpr,
    space: &CoordinateLattice,
    p: f64,
    budget: Budget,
    seed: u64,
) -> Result<LowerBound> {
    search(f, space, p, budget, seed, None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketFlags {
    pub admissibility_exact: bool,
    pub admissibility_method: Method,
    /// Tuples longer than this were not searched.
    pub n_max: usize,
    pub upper_route: Route,
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
    pub lower_certificate: FunctionalTuple,
    pub upper_certificate: Vec<Vec<f64>>,
    pub p: f64,
    pub flags: BracketFlags,
}

impl NormBracket {
    pub fn contains(&self, v: f64, rtol: f64) -> bool {
        let slack = rtol * v.abs().max(1.0);
        self.lower <= v + slack && v <= self.upper + slack
    }
}

/// Lower bound from [`fbl_lower`] and upper bound from the cheaper of the
/// default certificate and `user_certificate`. The search stops early once the
/// lower bound meets the upper one.
pub fn norm_bracket(
    f: &LatticeExpr,
    space: &CoordinateLattice,
    p: f64,
    budget: Budget,
    seed: u64,
    user_certificate: Option<&[Vec<f64>]>,
) -> Result<NormBracket> {
    check_p(p)?;
    let d = space.dim();
    if let Some(c) = user_certificate {
        check_tuple(c, d)?;
    }
    let (auto, route) = default_certificate(f, space, p);
    let mut probes = check_domination(f, &auto, d, DEFAULT_CHECK_POINTS, seed)?;
    let mut upper = (certificate_value(space, &auto, p), auto, route);
    if let Some(c) = user_certificate {
        let u = fpbl_upper(f, space, p, c, DEFAULT_CHECK_POINTS, seed)?;
        probes += u.probes;
        if u.value < upper.0 {
            upper = (u.value, u.certificate, Route::User);
        }
    }
    let lower = search(f, space, p, budget, seed, Some(upper.0))?;
    if lower.value > upper.0 + BRACKET_TOL * upper.0.max(1.0) {
        return Err(Error::BracketInverted {
            lower: lower.value,
            upper: upper.0,
        });
    }
    Ok(NormBracket {
        lower: lower.value,
        upper: upper.0,
        lower_certificate: lower.tuple,
        upper_certificate: upper.1,
        p,
        flags: BracketFlags {
            admissibility_exact: lower.certified,
            admissibility_method: lower.admissibility.method,
            n_max: budget.n_max,
            upper_route: upper.2,
            probes,
        },
    })
}
