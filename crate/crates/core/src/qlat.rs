//! Finite-dimensional quasi-Banach lattices.
//!
//! A [`CoordinateLattice`] is `ℝ^d` with the coordinatewise order and the
//! weighted quasi-norm `‖x‖ = (Σ_j w_j |x_j|^r)^{1/r}` (`max_j |x_j|` for
//! `r = ∞`). The grid discretization of `L_r[0,1]` on `n` cells is the instance
//! with `w_j = 1/n`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{power, ElementValues, LatticeExpr};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateLattice {
    exponent: f64,
    weights: Vec<f64>,
}

impl CoordinateLattice {
    /// `exponent` may be `f64::INFINITY`; weights must be positive and finite.
    pub fn new(exponent: f64, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("lattice dimension must be at least 1"));
        }
        if !(exponent > 0.0) || exponent.is_nan() {
            return Err(Error::param(format!(
                "lattice exponent must lie in (0, ∞], got {exponent}"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::param(format!("weights must be positive, got {w}")));
        }
        Ok(Self { exponent, weights })
    }

    /// `ℓ_r^d` with unit weights.
    pub fn weighted_lr(exponent: f64, dim: usize) -> Result<Self> {
        Self::new(exponent, vec![1.0; dim])
    }

    /// `L_p[0,1]` sampled on `cells` equal cells.
    pub fn lp_grid(exponent: f64, cells: usize) -> Result<Self> {
        Self::new(exponent, vec![1.0 / cells as f64; cells])
    }

    /// Parses `lpgrid:<p>:<n>`, `weightedlr:<r>:<d>[:w1,...,wd]` or `lp:<r>:<d>`.
    /// Exponents accept `inf`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || Error::param(format!("unrecognized lattice spec `{spec}`"));
        let exponent = |s: &str| -> Result<f64> {
            match s {
                "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
                _ => s.parse::<f64>().map_err(|_| bad()),
            }
        };
        let count = |s: &str| s.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["lpgrid", p, n] => Self::lp_grid(exponent(p)?, count(n)?),
            ["lp", r, d] | ["weightedlr", r, d] => Self::weighted_lr(exponent(r)?, count(d)?),
            ["weightedlr", r, d, ws] => {
                let d = count(d)?;
                let weights = parse_vector(ws)?;
                if weights.len() != d {
                    return Err(Error::Dimension {
                        expected: d,
                        found: weights.len(),
                    });
                }
                Self::new(exponent(r)?, weights)
            }
            _ => Err(bad()),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quasi-triangle constant `Δ = 2^{1/min(r,1) - 1}`.
    pub fn modulus(&self) -> f64 {
        2f64.powf(1.0 / self.exponent.min(1.0) - 1.0)
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn quasi_norm(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.norm_of(x))
    }

    /// Quasi-norm without the dimension check.
    pub(crate) fn norm_of(&self, x: &[f64]) -> f64 {
        let r = self.exponent;
        if r.is_infinite() {
            return x.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        let s: f64 = x
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * power(v.abs(), r))
            .sum();
        power(s, 1.0 / r)
    }

    /// Yudin–Krivine evaluation of `expr` on elements of this lattice.
    pub fn evaluate<E: ElementValues + ?Sized>(
        &self,
        expr: &LatticeExpr,
        elements: &E,
    ) -> Result<Vec<f64>> {
        for i in expr.generators() {
            if let Some(x) = elements.element(i) {
                self.check_dim(x)?;
            }
        }
        expr.evaluate_lattice(elements)
    }
}

/// Comma-separated decimals.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::param(format!("not a finite decimal: `{t}`")))
        })
        .collect()
}

/// Outcome of a `p`-convexity constant search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub exponent: f64,
    /// Lower bound for `M^(p)`; equals the ratio of `witness` at `witness_exponent`.
    pub bound: f64,
    pub witness: Vec<Vec<f64>>,
    /// Exponent at which the witness was scored. A scan may carry a witness
    /// forward from a smaller exponent, since `M^(r) ≤ M^(p)` for `r < p`.
    pub witness_exponent: f64,
    pub trials: usize,
}

impl ConvexityReport {
    pub fn recompute(&self, lattice: &CoordinateLattice) -> Option<f64> {
        convexity_ratio(lattice, self.witness_exponent, &self.witness)
    }
}

/// `‖(Σ_k |x_k|^p)^{1/p}‖ / (Σ_k ‖x_k‖^p)^{1/p}`; `None` for an all-zero tuple.
pub fn convexity_ratio(lattice: &CoordinateLattice, p: f64, tuple: &[Vec<f64>]) -> Option<f64> {
    let d = lattice.dim();
    let mut combined = vec![0.0; d];
    let mut denom = 0.0;
    for x in tuple {
        for (c, v) in combined.iter_mut().zip(x) {
            *c += power(v.abs(), p);
        }
        denom += power(lattice.norm_of(x), p);
    }
    if denom == 0.0 {
        return None;
    }
    combined.iter_mut().for_each(|c| *c = power(*c, 1.0 / p));
    Some(lattice.norm_of(&combined) / power(denom, 1.0 / p))
}

pub(crate) fn heavy_tailed(rng: &mut impl Rng) -> f64 {
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    if rng.gen::<bool>() {
        sign * rng.gen::<f64>()
    } else {
        // reciprocal of a uniform on (0, 1]
        sign / (1.0 - rng.gen::<f64>())
    }
}

/// Canonical candidates (a single basis vector, the full basis tuple) followed
/// by `trials` random tuples whose sizes cycle through `{2, 4, 8, d}`.
fn tuple_pool(lattice: &CoordinateLattice, trials: usize, root: u64) -> Vec<Vec<Vec<f64>>> {
    let d = lattice.dim();
    let basis: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            e
        })
        .collect();
    let sizes = [2, 4, 8, d];
    let random: Vec<Vec<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(root, "convexity-tuple", t as u64);
            let n = sizes[t % sizes.len()];
            (0..n)
                .map(|_| (0..d).map(|_| heavy_tailed(&mut rng)).collect())
                .collect()
        })
        .collect();
    let mut pool = Vec::with_capacity(trials + 2);
    pool.push(vec![basis[0].clone()]);
    pool.push(basis);
    pool.extend(random);
    pool
}

fn best_in_pool(lattice: &CoordinateLattice, p: f64, pool: &[Vec<Vec<f64>>]) -> (f64, usize) {
    let ratios: Vec<Option<f64>> = pool
        .par_iter()
        .map(|t| convexity_ratio(lattice, p, t))
        .collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, r) in ratios.into_iter().enumerate() {
        if let Some(r) = r {
            if r > best.0 {
                best = (r, i);
            }
        }
    }
    best
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param(format!(
            "convexity exponent must be a positive real, got {p}"
        )));
    }
    Ok(())
}

/// Lower bound for the `p`-convexity constant by sampling.
pub fn p_convexity_lower_bound(
    lattice: &CoordinateLattice,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    check_exponent(p)?;
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let pool = tuple_pool(lattice, trials, seed);
    let (bound, at) = best_in_pool(lattice, p, &pool);
    Ok(ConvexityReport {
        exponent: p,
        bound,
        witness: pool[at].clone(),
        witness_exponent: p,
        trials,
    })
}

/// Convexity lower bounds for ascending exponents from one shared tuple pool.
///
/// The per-tuple ratio is not monotone in `p`, so a bound found at a smaller
/// exponent is carried forward when it beats the pool maximum at a larger one.
pub fn convexity_monotonicity_scan(
    lattice: &CoordinateLattice,
    exponents: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<ConvexityReport>> {
    if exponents.is_empty() {
        return Err(Error::Empty("exponent list"));
    }
    for &p in exponents {
        check_exponent(p)?;
    }
    if exponents.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("exponent list must be sorted ascending"));
    }
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let pool = tuple_pool(lattice, trials, seed);
    let mut reports: Vec<ConvexityReport> = Vec::with_capacity(exponents.len());
    for &p in exponents {
        let (bound, at) = best_in_pool(lattice, p, &pool);
        let report = match reports.last() {
            Some(prev) if prev.bound > bound => ConvexityReport {
                exponent: p,
                trials,
                ..prev.clone()
            },
            _ => ConvexityReport {
                exponent: p,
                bound,
                witness: pool[at].clone(),
                witness_exponent: p,
                trials,
            },
        };
        reports.push(report);
    }
    Ok(reports)
}

/// True iff `xs` witnesses failure of the L-convexity condition at `epsilon`:
/// the average dominates `(1-ε)u` while every `‖x_k‖ < ε`.
pub fn l_convexity_violation(
    lattice: &CoordinateLattice,
    u: &[f64],
    xs: &[Vec<f64>],
    epsilon: f64,
) -> Result<bool> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(format!("ε must lie in (0,1), got {epsilon}")));
    }
    lattice.check_dim(u)?;
    if u.iter().any(|&v| v < 0.0) || u.iter().all(|&v| v == 0.0) {
        return Err(Error::param("u must be a nonzero positive vector"));
    }
    let nu = lattice.norm_of(u);
    if (nu - 1.0).abs() > 1e-9 {
        return Err(Error::param(format!("u must have norm 1, got {nu}")));
    }
    if xs.is_empty() {
        return Err(Error::Empty("family"));
    }
    for x in xs {
        lattice.check_dim(x)?;
        if x.iter().zip(u).any(|(v, b)| *v < 0.0 || v > b) {
            return Err(Error::param(
                "every x_k must lie in the order interval [0, u]",
            ));
        }
    }
    let n = xs.len() as f64;
    let dominated = (0..u.len()).all(|j| {
        let avg = xs.iter().map(|x| x[j]).sum::<f64>() / n;
        avg >= (1.0 - epsilon) * u[j]
    });
    let max_norm = xs.iter().map(|x| lattice.norm_of(x)).fold(0.0, f64::max);
    Ok(dominated && max_norm < epsilon)
}

fn check_convexification(p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param(format!(
            "p must be positive and finite, got {p}"
        )));
    }
    Ok(())
}

/// `x ⊕ y = (x^{1/p} + y^{1/p})^p` on positive vectors.
pub fn convexify_oplus(
    lattice: &CoordinateLattice,
    x: &[f64],
    y: &[f64],
    p: f64,
) -> Result<Vec<f64>> {
    check_convexification(p)?;
    lattice.check_dim(x)?;
    lattice.check_dim(y)?;
    if x.iter().chain(y).any(|&v| v < 0.0) {
        return Err(Error::param("⊕ is defined on positive vectors only"));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| power(power(*a, 1.0 / p) + power(*b, 1.0 / p), p))
        .collect())
}

/// `‖x‖_{(p)} = ‖x‖^{1/p}`.
pub fn convexify_norm(lattice: &CoordinateLattice, x: &[f64], p: f64) -> Result<f64> {
    check_convexification(p)?;
    Ok(power(lattice.quasi_norm(x)?, 1.0 / p))
}

/// `x ∧ y = 0` for positive `x, y`. Disjoint pairs satisfy `‖x - y‖ ≥ ‖x‖`.
pub fn disjointness_criterion(lattice: &CoordinateLattice, x: &[f64], y: &[f64]) -> Result<bool> {
    lattice.check_dim(x)?;
    lattice.check_dim(y)?;
    if x.iter().chain(y).any(|&v| v < 0.0) {
        return Err(Error::param(
            "disjointness is checked on positive vectors only",
        ));
    }
    Ok(x.iter().zip(y).all(|(a, b)| a.min(*b) == 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quasi_norm_examples() {
        let l2 = CoordinateLattice::weighted_lr(2.0, 3).unwrap();
        assert_eq!(l2.quasi_norm(&[3.0, 4.0, 0.0]).unwrap(), 5.0);
        let half = CoordinateLattice::lp_grid(0.5, 2).unwrap();
        assert_eq!(half.quasi_norm(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(half.quasi_norm(&[0.0, 0.0]).unwrap(), 0.0);
        let linf = CoordinateLattice::weighted_lr(f64::INFINITY, 3).unwrap();
        assert_eq!(linf.quasi_norm(&[1.0, -7.0, 2.0]).unwrap(), 7.0);
        assert!(matches!(
            l2.quasi_norm(&[1.0]),
            Err(Error::Dimension {
                expected: 3,
                found: 1
            })
        ));
    }

    #[test]
    fn parse_specs() {
        let l = CoordinateLattice::parse("lpgrid:0.5:4").unwrap();
        assert_eq!(l.dim(), 4);
        assert_eq!(l.weights()[0], 0.25);
        let l = CoordinateLattice::parse("weightedlr:2:3:1,2,3").unwrap();
        assert_eq!(l.weights(), &[1.0, 2.0, 3.0]);
        let l = CoordinateLattice::parse("lp:inf:2").unwrap();
        assert!(l.exponent().is_infinite());
        assert!(CoordinateLattice::parse("weightedlr:2:3:1,2").is_err());
        assert!(CoordinateLattice::parse("lpgrid:-1:3").is_err());
        assert!(CoordinateLattice::parse("nonsense").is_err());
        assert!(CoordinateLattice::parse("weightedlr:1:2:1,0").is_err());
    }

    #[test]
    fn modulus_matches_p_norm_constant() {
        assert_eq!(CoordinateLattice::lp_grid(0.5, 2).unwrap().modulus(), 2.0);
        assert_eq!(CoordinateLattice::lp_grid(2.0, 2).unwrap().modulus(), 1.0);
    }

    #[test]
    fn convexity_on_lp_grid_is_one() {
        for p in [0.25, 0.5, 1.0] {
            let l = CoordinateLattice::lp_grid(p, 6).unwrap();
            let r = p_convexity_lower_bound(&l, p, 500, 3).unwrap();
            assert!((r.bound - 1.0).abs() < 1e-9, "p={p}: {}", r.bound);
            assert_eq!(r.recompute(&l), Some(r.bound));
        }
    }

    #[test]
    fn convexity_on_linf_is_one() {
        let l = CoordinateLattice::weighted_lr(f64::INFINITY, 5).unwrap();
        let r = p_convexity_lower_bound(&l, 0.7, 2000, 11).unwrap();
        assert!((r.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn basis_tuple_ratio_on_small_lr() {
        let l = CoordinateLattice::weighted_lr(0.5, 4).unwrap();
        let basis: Vec<Vec<f64>> = (0..4)
            .map(|j| (0..4).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        assert_relative_eq!(
            convexity_ratio(&l, 1.0, &basis).unwrap(),
            4.0,
            epsilon = 1e-12
        );
        let r = p_convexity_lower_bound(&l, 1.0, 200, 5).unwrap();
        assert_relative_eq!(r.bound, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn scan_examples() {
        let l1 = CoordinateLattice::lp_grid(1.0, 5).unwrap();
        let reps = convexity_monotonicity_scan(&l1, &[0.25, 0.5, 1.0], 300, 1).unwrap();
        for r in &reps {
            assert!((r.bound - 1.0).abs() < 1e-9);
        }
        let l = CoordinateLattice::weighted_lr(0.5, 4).unwrap();
        let reps = convexity_monotonicity_scan(&l, &[0.5, 1.0], 300, 1).unwrap();
        assert_relative_eq!(reps[0].bound, 1.0, epsilon = 1e-9);
        assert_relative_eq!(reps[1].bound, 4.0, epsilon = 1e-9);
        let single = convexity_monotonicity_scan(&l, &[0.7], 10, 1).unwrap();
        assert_eq!(single.len(), 1);
        assert!(convexity_monotonicity_scan(&l, &[], 10, 1).is_err());
        assert!(convexity_monotonicity_scan(&l, &[1.0, 0.5], 10, 1).is_err());
    }

    #[test]
    fn scan_is_monotone_with_recomputable_witnesses() {
        let l = CoordinateLattice::new(1.5, vec![0.3, 1.0, 2.0, 0.7]).unwrap();
        let ps = [0.2, 0.4, 0.8, 1.2, 2.0, 3.0];
        let reps = convexity_monotonicity_scan(&l, &ps, 400, 9).unwrap();
        for w in reps.windows(2) {
            assert!(w[1].bound >= w[0].bound);
        }
        for r in &reps {
            assert_eq!(r.recompute(&l), Some(r.bound));
            assert!(r.witness_exponent <= r.exponent);
        }
    }

    #[test]
    fn convexity_parameter_errors() {
        let l = CoordinateLattice::lp_grid(1.0, 3).unwrap();
        assert!(p_convexity_lower_bound(&l, 0.0, 10, 0).is_err());
        assert!(p_convexity_lower_bound(&l, 1.0, 0, 0).is_err());
    }

    #[test]
    fn l_convexity_examples() {
        let l = CoordinateLattice::lp_grid(1.0, 4).unwrap();
        let u = vec![1.0; 4];
        let xs = vec![u.clone(); 3];
        assert!(!l_convexity_violation(&l, &u, &xs, 0.9).unwrap());
        let small = vec![vec![0.1; 4]; 3];
        assert!(!l_convexity_violation(&l, &u, &small, 0.5).unwrap());
        // not normalized
        assert!(l_convexity_violation(&l, &[2.0; 4], &xs, 0.5).is_err());
        // outside [0, u]
        assert!(l_convexity_violation(&l, &u, &[vec![1.5, 0.0, 0.0, 0.0]], 0.5).is_err());
        assert!(l_convexity_violation(&l, &u, &xs, 1.0).is_err());
    }

    #[test]
    fn l_convexity_fails_in_small_exponent_grid() {
        // In L_r with tiny r, disjoint pieces of u have tiny quasi-norm.
        let n = 16;
        let l = CoordinateLattice::lp_grid(0.05, n).unwrap();
        let u = vec![1.0; n];
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|k| (0..n).map(|j| if j == k { 1.0 } else { 0.0 }).collect())
            .collect();
        // average is u/n, which only dominates (1-ε)u for ε close to 1
        assert!(!l_convexity_violation(&l, &u, &xs, 0.5).unwrap());
        let halves: Vec<Vec<f64>> = (0..2)
            .map(|k| (0..n).map(|j| if j % 2 == k { 1.0 } else { 0.0 }).collect())
            .collect();
        // ‖half‖ = (1/2)^{20} and the average is u/2
        assert!(l_convexity_violation(&l, &u, &halves, 0.5).unwrap());
    }

    #[test]
    fn convexify_examples() {
        let l = CoordinateLattice::lp_grid(0.5, 3).unwrap();
        let ones = vec![1.0; 3];
        // (1 + 1)^{1/2}
        for v in convexify_oplus(&l, &ones, &ones, 0.5).unwrap() {
            assert_relative_eq!(v, 2f64.sqrt(), max_relative = 1e-15);
        }
        let x = vec![2.0, 0.0, 1.0];
        let y = vec![0.5, 3.0, 0.0];
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        assert_eq!(convexify_oplus(&l, &x, &y, 1.0).unwrap(), s);
        let four = CoordinateLattice::weighted_lr(1.0, 1).unwrap();
        assert_eq!(convexify_norm(&four, &[4.0], 0.5).unwrap(), 16.0);
        assert_eq!(
            convexify_norm(&l, &x, 1.0).unwrap(),
            l.quasi_norm(&x).unwrap()
        );
        assert!(convexify_oplus(&l, &[-1.0, 0.0, 0.0], &ones, 0.5).is_err());
        assert!(convexify_oplus(&l, &ones, &ones, f64::INFINITY).is_err());
        assert!(convexify_norm(&l, &ones, 0.0).is_err());
        // (1 + 1)^2
        for v in convexify_oplus(&l, &ones, &ones, 2.0).unwrap() {
            assert_eq!(v, 4.0);
        }
        assert_eq!(convexify_norm(&four, &[4.0], 2.0).unwrap(), 2.0);
    }

    #[test]
    fn disjointness_examples() {
        let l = CoordinateLattice::weighted_lr(1.0, 2).unwrap();
        assert!(disjointness_criterion(&l, &[1.0, 0.0], &[0.0, 1.0]).unwrap());
        assert_eq!(l.quasi_norm(&[1.0, -1.0]).unwrap(), 2.0);
        assert!(!disjointness_criterion(&l, &[1.0, 1.0], &[1.0, 0.0]).unwrap());
        assert_eq!(l.quasi_norm(&[0.0, 1.0]).unwrap(), 1.0);
        assert!(disjointness_criterion(&l, &[0.0, 0.0], &[3.0, 2.0]).unwrap());
        assert!(disjointness_criterion(&l, &[-1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn krivine_evaluation_checks_dimension() {
        let l = CoordinateLattice::weighted_lr(1.0, 2).unwrap();
        let e = LatticeExpr::gen(0).max(LatticeExpr::gen(1));
        assert_eq!(
            l.evaluate(&e, &vec![vec![1.0, 0.0], vec![0.0, 1.0]])
                .unwrap(),
            vec![1.0, 1.0]
        );
        assert!(l
            .evaluate(&e, &vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]])
            .is_err());
    }
}
