//! Moment constants of symmetric `q`-stable laws.
//!
//! `A_{p,q}` is the `L_p`-norm of a random variable with characteristic function
//! `e^{-|t|^q}`. It has the closed form
//! `[2Γ(p)Γ(1-p/q) / (Γ(p/2)Γ(1-p/2))]^{1/p}` for `0 < p < q`, tends to
//! `e^{γ(1/q-1)}` as `p → 0⁺`, and controls the Maurey–Nikishin factorization
//! constant through the ratio `A_{r,q}/A_{p,q}`.
//!
//! The closed form is also accepted at `q = 2` (Gaussian with variance 2).

mod gamma;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::seed;

pub use gamma::{log_gamma, LogGamma, EULER_GAMMA};

const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableSpec {
    pub q: f64,
    pub seed: u64,
    pub samples: usize,
}

impl StableSpec {
    pub fn new(q: f64, seed: u64, samples: usize) -> Result<Self> {
        check_q(q)?;
        if samples == 0 {
            return Err(Error::param("sample count must be at least 1"));
        }
        Ok(Self { q, seed, samples })
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q <= 2.0) {
        return Err(Error::domain(format!(
            "stability index q must lie in (0,2], got {q}"
        )));
    }
    Ok(())
}

fn check_moment(p: f64, q: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!(
            "moment order p must be positive, got {p}"
        )));
    }
    check_q(q)?;
    if p >= q {
        return Err(Error::Divergent { p, q });
    }
    Ok(())
}

/// Closed-form `A_{p,q}` with a caller-supplied log-gamma.
pub fn a_pq_with(lg: &LogGamma, p: f64, q: f64) -> Result<f64> {
    check_moment(p, q)?;
    let log_bracket = std::f64::consts::LN_2 + lg.eval(p)? + lg.eval(1.0 - p / q)?
        - lg.eval(p / 2.0)?
        - lg.eval(1.0 - p / 2.0)?;
    Ok((log_bracket / p).exp())
}

/// `A_{p,q}` for `0 < p < q ≤ 2`, evaluated in log space.
pub fn a_pq(p: f64, q: f64) -> Result<f64> {
    a_pq_with(&LogGamma::default(), p, q)
}

/// `lim_{p→0⁺} A_{p,q} = e^{γ(1/q - 1)}`.
pub fn a_pq_limit(q: f64) -> Result<f64> {
    check_q(q)?;
    Ok((EULER_GAMMA * (1.0 / q - 1.0)).exp())
}

/// One draw of the symmetric `q`-stable law with characteristic function
/// `e^{-|t|^q}` from two uniforms (Chambers–Mallows–Stuck).
fn stable_draw(q: f64, rng: &mut impl Rng) -> f64 {
    let mut u: f64 = rng.gen();
    while u == 0.0 {
        u = rng.gen();
    }
    let v = PI * (u - 0.5);
    if q == 1.0 {
        return v.tan();
    }
    let w = -(1.0 - rng.gen::<f64>()).ln();
    let a = (q * v).sin() / v.cos().powf(1.0 / q);
    let b = (((1.0 - q) * v).cos() / w).powf((1.0 - q) / q);
    a * b
}

fn chunk_count(n: usize) -> usize {
    n.div_ceil(CHUNK)
}

fn chunk_len(n: usize, c: usize) -> usize {
    CHUNK.min(n - c * CHUNK)
}

/// `spec.samples` i.i.d. draws. Chunk `c` of 65536 draws uses its own stream
/// derived from `(seed, c)`, so the output is independent of thread count.
pub fn sample_stable(spec: &StableSpec) -> Result<Vec<f64>> {
    check_q(spec.q)?;
    let chunks: Vec<Vec<f64>> = (0..chunk_count(spec.samples))
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::stream(spec.seed, "stable", c as u64);
            (0..chunk_len(spec.samples, c))
                .map(|_| stable_draw(spec.q, &mut rng))
                .collect()
        })
        .collect();
    Ok(chunks.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    /// Delta-method standard error of the `p`-th root.
    pub stderr: f64,
    pub samples: usize,
    /// `2p ≥ q`: `|X|^p` has infinite variance and `stderr` is not reliable.
    pub heavy_tail: bool,
}

/// `((1/N) Σ |X_i|^p)^{1/p}` over draws of `spec`.
pub fn a_pq_monte_carlo(p: f64, spec: &StableSpec) -> Result<MonteCarloEstimate> {
    check_moment(p, spec.q)?;
    if spec.samples == 0 {
        return Err(Error::param("sample count must be at least 1"));
    }
    let partial: Vec<(f64, f64)> = (0..chunk_count(spec.samples))
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::stream(spec.seed, "stable", c as u64);
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for _ in 0..chunk_len(spec.samples, c) {
                let m = stable_draw(spec.q, &mut rng).abs().powf(p);
                s1 += m;
                s2 += m * m;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = spec.samples as f64;
    let mean = s1 / n;
    let var = if spec.samples > 1 {
        ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let se_mean = (var / n).sqrt();
    let estimate = mean.powf(1.0 / p);
    let stderr = estimate / (p * mean) * se_mean;
    Ok(MonteCarloEstimate {
        estimate,
        stderr,
        samples: spec.samples,
        heavy_tail: 2.0 * p >= spec.q,
    })
}

/// Bound `C_{p,r}(E) ≤ T_q(E)·A_{r,q}/A_{p,q}` with the factorization exponent
/// `s` given by `1/p = 1/r + 1/s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MnBound {
    pub p: f64,
    pub r: f64,
    pub q: f64,
    pub type_constant: f64,
    pub ratio: f64,
    pub bound: f64,
    pub s: f64,
}

pub fn mn_constant_bound_with(
    lg: &LogGamma,
    p: f64,
    r: f64,
    q: f64,
    type_constant: f64,
) -> Result<MnBound> {
    if !(0.0 < p && p < r && r < q && q <= 2.0) {
        return Err(Error::param(format!(
            "need 0 < p < r < q ≤ 2, got p={p}, r={r}, q={q}"
        )));
    }
    if !(type_constant >= 1.0 && type_constant.is_finite()) {
        return Err(Error::param(format!(
            "type constant must be ≥ 1, got {type_constant}"
        )));
    }
    let ratio = a_pq_with(lg, r, q)? / a_pq_with(lg, p, q)?;
    Ok(MnBound {
        p,
        r,
        q,
        type_constant,
        ratio,
        bound: type_constant * ratio,
        s: 1.0 / (1.0 / p - 1.0 / r),
    })
}

pub fn mn_constant_bound(p: f64, r: f64, q: f64, type_constant: f64) -> Result<MnBound> {
    mn_constant_bound_with(&LogGamma::default(), p, r, q, type_constant)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub p: f64,
    pub a_pq: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBoundScan {
    pub r: f64,
    pub q: f64,
    pub a_rq: f64,
    pub rows: Vec<ScanRow>,
    pub max_ratio: f64,
    pub argmax_p: f64,
    /// `A_{r,q} / lim_{p→0⁺} A_{p,q}`, the value the ratio approaches at the
    /// small end of the grid.
    pub limit_ratio: f64,
}

pub fn uniform_bound_scan_with(
    lg: &LogGamma,
    r: f64,
    q: f64,
    grid: &[f64],
) -> Result<UniformBoundScan> {
    if grid.is_empty() {
        return Err(Error::Empty("p grid"));
    }
    if let Some(p) = grid.iter().find(|&&p| !(p > 0.0 && p < r)) {
        return Err(Error::param(format!(
            "grid point {p} is outside (0, r={r})"
        )));
    }
    let a_rq = a_pq_with(lg, r, q)?;
    let rows = grid
        .iter()
        .map(|&p| {
            let a = a_pq_with(lg, p, q)?;
            Ok(ScanRow {
                p,
                a_pq: a,
                ratio: a_rq / a,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = rows
        .iter()
        .fold(&rows[0], |b, row| if row.ratio > b.ratio { row } else { b });
    Ok(UniformBoundScan {
        r,
        q,
        a_rq,
        max_ratio: best.ratio,
        argmax_p: best.p,
        limit_ratio: a_rq / a_pq_limit(q)?,
        rows,
    })
}

/// `max_p A_{r,q}/A_{p,q}` over `grid ⊂ (0, r)`.
pub fn uniform_bound_scan(r: f64, q: f64, grid: &[f64]) -> Result<UniformBoundScan> {
    uniform_bound_scan_with(&LogGamma::default(), r, q, grid)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `E|X|` for the Gaussian case `q = 2`: variance 2, so `2/√π`.
pub const GAUSSIAN_MEAN_ABS: f64 = 1.128_379_167_095_512_6;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        assert!((a_pq(1.0, 2.0).unwrap() - 2.0 / PI.sqrt()).abs() < 1e-12);
        assert!((a_pq(0.5, 1.0).unwrap() - 2.0).abs() < 1e-12);
        // Cauchy quarter moment: ((2/π)∫₀^∞ x^{1/4}/(1+x²) dx)^4, 40-digit reference
        assert!((a_pq(0.25, 1.0).unwrap() - 1.372_583_002_030_479_2).abs() < 1e-12);
        assert!((a_pq(0.3, 0.7).unwrap() - 2.703_030_774_127_702_9).abs() < 1e-11);
    }

    #[test]
    fn pole_approach_stays_finite() {
        let v = a_pq(1.0 - 1e-9, 1.0).unwrap();
        assert!(v.is_finite() && v > 1e6);
        let mut p = 1e-6;
        while p < 1.0 - 1e-6 {
            let v = a_pq(p, 1.0).unwrap();
            assert!(v.is_finite() && v > 0.0, "p={p}");
            p += 0.0137;
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(a_pq(1.0, 1.0), Err(Error::Divergent { .. })));
        assert!(matches!(a_pq(1.5, 1.0), Err(Error::Divergent { .. })));
        assert!(matches!(a_pq(0.5, 2.5), Err(Error::Domain(_))));
        assert!(matches!(a_pq(0.0, 1.0), Err(Error::Domain(_))));
        assert!(a_pq_limit(0.0).is_err());
    }

    #[test]
    fn limit_examples() {
        assert_eq!(a_pq_limit(1.0).unwrap(), 1.0);
        assert!((a_pq_limit(2.0).unwrap() - 0.749_306_001_288_449).abs() < 1e-12);
        assert!((a_pq(1e-4, 2.0).unwrap() - a_pq_limit(2.0).unwrap()).abs() < 1e-3);
        // frozen reference at p = 1e-3
        assert!((a_pq(1e-3, 0.5).unwrap() - 1.787_681_584_076_432_2).abs() < 1e-10);
        assert!((a_pq(1e-3, 1.5).unwrap() - 0.825_613_337_979_157_6).abs() < 1e-10);
    }

    #[test]
    fn increasing_near_pole() {
        for q in [0.5, 1.0, 1.5] {
            let mut prev = a_pq(q - 0.1, q).unwrap();
            for i in 1..50 {
                let p = q - 0.1 + 0.1 * i as f64 / 50.0;
                let v = a_pq(p, q).unwrap();
                assert!(v > prev, "q={q} p={p}");
                prev = v;
            }
        }
    }

    #[test]
    fn sampler_symmetry_and_reproducibility() {
        let spec = StableSpec::new(0.8, 3, 100_000).unwrap();
        let xs = sample_stable(&spec).unwrap();
        assert_eq!(xs.len(), 100_000);
        assert_eq!(xs, sample_stable(&spec).unwrap());
        let neg = xs.iter().filter(|x| **x < 0.0).count() as f64 / xs.len() as f64;
        assert!((neg - 0.5).abs() < 4.0 / (2.0 * (xs.len() as f64).sqrt()));
        assert!(StableSpec::new(2.5, 0, 10).is_err());
        assert!(StableSpec::new(1.0, 0, 0).is_err());
    }

    #[test]
    fn cauchy_median() {
        let n = 200_000;
        let mut xs: Vec<f64> = sample_stable(&StableSpec::new(1.0, 5, n).unwrap())
            .unwrap()
            .into_iter()
            .map(f64::abs)
            .collect();
        xs.sort_by(f64::total_cmp);
        let med = 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
        assert!((med - 1.0).abs() < 4.0 * 1.2533 / (n as f64).sqrt());
    }

    #[test]
    fn monte_carlo_near_pole_is_flagged() {
        let spec = StableSpec::new(1.0, 1, 10_000).unwrap();
        let mc = a_pq_monte_carlo(0.9, &spec).unwrap();
        assert!(mc.estimate.is_finite() && mc.heavy_tail);
        assert!(matches!(
            a_pq_monte_carlo(1.0, &spec),
            Err(Error::Divergent { .. })
        ));
    }

    #[test]
    fn mn_bound_examples() {
        let b = mn_constant_bound(0.5 - 1e-9, 0.5, 1.0, 3.0).unwrap();
        assert!((b.bound - 3.0).abs() < 1e-6);
        let b = mn_constant_bound(0.25, 0.5, 1.0, 1.0).unwrap();
        assert!((b.bound - 2.0 / 1.372_583_002_030_479_2).abs() < 1e-12);
        assert!((b.s - 0.5).abs() < 1e-15);
        assert!(mn_constant_bound(0.5, 0.25, 1.0, 1.0).is_err());
        assert!(mn_constant_bound(0.25, 0.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn scan_examples() {
        let grid = linear_grid(1e-4, 0.499, 200);
        let s = uniform_bound_scan(0.5, 1.0, &grid).unwrap();
        assert!(s.max_ratio.is_finite() && s.max_ratio < 10.0);
        assert!((s.rows[0].ratio / s.limit_ratio - 1.0).abs() < 0.01);
        let one = uniform_bound_scan(0.5, 1.0, &[0.25]).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert!(uniform_bound_scan(0.5, 1.0, &[]).is_err());
        assert!(uniform_bound_scan(0.5, 1.0, &[0.6]).is_err());
    }
}
