//! Domination certificates `|f| ≤ Σ_k |δ_{e_k}|` and the upper bound
//! `(Σ_k ‖e_k‖^p)^{1/p}` they carry.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{power, LatticeExpr};
use crate::qlat::{heavy_tailed, CoordinateLattice};
use crate::seed;

use super::admissible::check_p;

const DOMINATION_RTOL: f64 = 1e-9;
const MAX_ENUMERATED_SIGNS: usize = 10;
const RANDOM_SIGN_PROBES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    NonNeg,
    NonPos,
    Any,
}

fn sign_of(e: &LatticeExpr) -> Sign {
    use LatticeExpr::*;
    match e {
        Gen(_) => Sign::Any,
        Scale(c, a) => match sign_of(a) {
            _ if *c == 0.0 => Sign::NonNeg,
            Sign::Any => Sign::Any,
            Sign::NonNeg if *c > 0.0 => Sign::NonNeg,
            Sign::NonPos if *c < 0.0 => Sign::NonNeg,
            _ => Sign::NonPos,
        },
        Add(a, b) => match (sign_of(a), sign_of(b)) {
            (Sign::NonNeg, Sign::NonNeg) => Sign::NonNeg,
            (Sign::NonPos, Sign::NonPos) => Sign::NonPos,
            _ => Sign::Any,
        },
        Max(a, b) => match (sign_of(a), sign_of(b)) {
            (Sign::NonNeg, _) | (_, Sign::NonNeg) => Sign::NonNeg,
            (Sign::NonPos, Sign::NonPos) => Sign::NonPos,
            _ => Sign::Any,
        },
        Min(a, b) => match (sign_of(a), sign_of(b)) {
            (Sign::NonPos, _) | (_, Sign::NonPos) => Sign::NonPos,
            (Sign::NonNeg, Sign::NonNeg) => Sign::NonNeg,
            _ => Sign::Any,
        },
        Abs(_) | Pos(_) | PowerSum { .. } => Sign::NonNeg,
    }
}

/// `(Σ_k ‖e_k‖^p)^{1/p}`; a single vector gives its norm exactly.
pub fn certificate_value(space: &CoordinateLattice, cert: &[Vec<f64>], p: f64) -> f64 {
    match cert {
        [] => 0.0,
        [e] => space.norm_of(e),
        _ => power(
            cert.iter().map(|e| power(space.norm_of(e), p)).sum(),
            1.0 / p,
        ),
    }
}

fn padded(mut v: Vec<f64>, d: usize) -> Vec<f64> {
    v.resize(d.max(v.len()), 0.0);
    v
}

fn scale_all(cert: Vec<Vec<f64>>, c: f64) -> Vec<Vec<f64>> {
    cert.into_iter()
        .map(|e| e.into_iter().map(|x| c * x).collect())
        .collect()
}

/// `|e| ≤ |a|` for the argument `a` of a positive part when the other summand
/// is nonpositive; `None` when no such summand exists.
fn pos_pruned(a: &LatticeExpr) -> Option<&LatticeExpr> {
    match a {
        LatticeExpr::Add(x, y) if sign_of(y) == Sign::NonPos => Some(x),
        LatticeExpr::Add(x, y) if sign_of(x) == Sign::NonPos => Some(y),
        _ => None,
    }
}

/// Certificate assembled along the expression tree.
fn tree_terms(e: &LatticeExpr, d: usize, cost: &dyn Fn(&[Vec<f64>]) -> f64) -> Vec<Vec<f64>> {
    use LatticeExpr::*;
    if let Some(v) = e.linear_coefficients() {
        return if v.iter().all(|c| *c == 0.0) {
            Vec::new()
        } else {
            vec![padded(v, d)]
        };
    }
    let cheaper = |a: Vec<Vec<f64>>, b: Vec<Vec<f64>>| if cost(&b) < cost(&a) { b } else { a };
    match e {
        Gen(_) => unreachable!("generators are linear"),
        Scale(c, a) => scale_all(tree_terms(a, d, cost), c.abs()),
        Min(a, b) if sign_of(a) == Sign::NonNeg && sign_of(b) == Sign::NonNeg => {
            cheaper(tree_terms(a, d, cost), tree_terms(b, d, cost))
        }
        Max(a, b) if sign_of(a) == Sign::NonPos && sign_of(b) == Sign::NonPos => {
            cheaper(tree_terms(a, d, cost), tree_terms(b, d, cost))
        }
        Add(a, b) | Max(a, b) | Min(a, b) => {
            let mut out = tree_terms(a, d, cost);
            out.extend(tree_terms(b, d, cost));
            out
        }
        Abs(a) => tree_terms(a, d, cost),
        Pos(a) if sign_of(a) == Sign::NonPos => Vec::new(),
        Pos(a) => tree_terms(pos_pruned(a).unwrap_or(a), d, cost),
        PowerSum { exponent, terms } => {
            // (Σ|t_i|^s)^{1/s} ≤ K^{1/s-1} Σ|t_i| for s < 1
            let k = terms.len() as f64;
            let factor = if *exponent < 1.0 {
                k.powf(1.0 / exponent - 1.0)
            } else {
                1.0
            };
            let all = terms.iter().flat_map(|t| tree_terms(t, d, cost)).collect();
            scale_all(all, factor)
        }
    }
}

/// Per-generator coefficient bounds `c` with `|f(x^*)| ≤ Σ_j c_j |x^*_j|`.
pub fn coefficient_bounds(e: &LatticeExpr, d: usize) -> Vec<f64> {
    use LatticeExpr::*;
    let add = |mut u: Vec<f64>, v: Vec<f64>| {
        u.iter_mut().zip(v).for_each(|(x, y)| *x += y);
        u
    };
    match e {
        Gen(i) => {
            let mut v = vec![0.0; d.max(i + 1)];
            v[*i] = 1.0;
            v
        }
        Scale(c, a) => coefficient_bounds(a, d)
            .into_iter()
            .map(|x| c.abs() * x)
            .collect(),
        Add(a, b) | Max(a, b) | Min(a, b) => {
            add(coefficient_bounds(a, d), coefficient_bounds(b, d))
        }
        Abs(a) => coefficient_bounds(a, d),
        Pos(a) => coefficient_bounds(pos_pruned(a).unwrap_or(a), d),
        PowerSum { exponent, terms } => {
            let k = terms.len() as f64;
            let factor = if *exponent < 1.0 {
                k.powf(1.0 / exponent - 1.0)
            } else {
                1.0
            };
            terms
                .iter()
                .map(|t| coefficient_bounds(t, d))
                .reduce(add)
                .unwrap_or_else(|| vec![0.0; d])
                .into_iter()
                .map(|x| factor * x)
                .collect()
        }
    }
}

/// Combines parallel vectors: `|δ_v| + |δ_{λv}| = |δ_{(1+|λ|)v}|`.
pub fn merge_parallel(cert: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    'next: for u in cert {
        let umax = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if umax == 0.0 {
            continue;
        }
        for v in out.iter_mut() {
            let j = (0..v.len()).fold(0, |b, i| if v[i].abs() > v[b].abs() { i } else { b });
            let lambda = u[j] / v[j];
            if u.iter()
                .zip(v.iter())
                .all(|(a, b)| (a - lambda * b).abs() <= 1e-14 * umax)
            {
                let c = 1.0 + lambda.abs();
                v.iter_mut().for_each(|x| *x *= c);
                continue 'next;
            }
        }
        out.push(u);
    }
    out
}

/// Route by which a certificate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Tree,
    Coefficients,
    User,
}

/// Cheapest of the tree and coefficient certificates for `f` on `E`.
pub fn default_certificate(
    f: &LatticeExpr,
    space: &CoordinateLattice,
    p: f64,
) -> (Vec<Vec<f64>>, Route) {
    let d = space.dim();
    let cost = |c: &[Vec<f64>]| certificate_value(space, c, p);
    let tree = merge_parallel(tree_terms(f, d, &cost));
    let coef: Vec<Vec<f64>> = coefficient_bounds(f, d)
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0.0)
        .map(|(j, c)| {
            let mut e = vec![0.0; d];
            e[j] = c;
            e
        })
        .collect();
    if cost(&coef) < cost(&tree) {
        (coef, Route::Coefficients)
    } else {
        (tree, Route::Tree)
    }
}

fn probe_functionals(d: usize, check_points: usize, root: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for j in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[j] = s;
            out.push(e);
        }
    }
    if d <= MAX_ENUMERATED_SIGNS {
        for m in 0u32..(1 << d) {
            out.push(
                (0..d)
                    .map(|j| if m & (1 << j) != 0 { -1.0 } else { 1.0 })
                    .collect(),
            );
        }
    } else {
        let mut rng = seed::stream(root, "domination-signs", 0);
        for _ in 0..RANDOM_SIGN_PROBES {
            out.push(
                (0..d)
                    .map(|_| {
                        if rand::Rng::gen::<bool>(&mut rng) {
                            1.0
                        } else {
                            -1.0
                        }
                    })
                    .collect(),
            );
        }
    }
    let random: Vec<Vec<f64>> = (0..check_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::stream(root, "domination-probe", i as u64);
            (0..d).map(|_| heavy_tailed(&mut rng)).collect()
        })
        .collect();
    out.extend(random);
    out
}

/// Checks `|f(x^*)| ≤ Σ_k |x^*(e_k)|` at coordinate functionals, sign patterns
/// and `check_points` random functionals. Returns the number of probes.
pub fn check_domination(
    f: &LatticeExpr,
    cert: &[Vec<f64>],
    d: usize,
    check_points: usize,
    seed: u64,
) -> Result<usize> {
    for e in cert {
        if e.len() != d {
            return Err(Error::Dimension {
                expected: d,
                found: e.len(),
            });
        }
    }
    if f.arity() > d {
        return Err(Error::Dimension {
            expected: d,
            found: f.arity(),
        });
    }
    let coef = coefficient_bounds(f, d);
    let cert_mass: f64 = cert.iter().flatten().map(|x| x.abs()).sum();
    let probes = probe_functionals(d, check_points, seed);
    let verdicts: Vec<Result<Option<(f64, f64)>>> = probes
        .par_iter()
        .map(|x| {
            let lhs = f.evaluate_scalar(&x[..])?.abs();
            let rhs: f64 = cert
                .iter()
                .map(|e| e.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().abs())
                .sum();
            let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale: f64 =
                coef.iter().zip(x).map(|(c, v)| c * v.abs()).sum::<f64>() + xmax * cert_mass;
            Ok((lhs > rhs + DOMINATION_RTOL * scale).then_some((lhs, rhs)))
        })
        .collect();
    for (x, v) in probes.iter().zip(verdicts) {
        if let Some((lhs, rhs)) = v? {
            return Err(Error::CertificateRejected {
                witness: x.clone(),
                lhs,
                rhs,
            });
        }
    }
    Ok(probes.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperBound {
    pub value: f64,
    pub certificate: Vec<Vec<f64>>,
    pub probes: usize,
    pub route: Route,
}

/// `|f|₀`-type upper bound from a user certificate, after probing domination.
pub fn fpbl_upper(
    f: &LatticeExpr,
    space: &CoordinateLattice,
    p: f64,
    certificate: &[Vec<f64>],
    check_points: usize,
    seed: u64,
) -> Result<UpperBound> {
    check_p(p)?;
    if certificate.is_empty() {
        return Err(Error::Empty("certificate"));
    }
    let probes = check_domination(f, certificate, space.dim(), check_points, seed)?;
    Ok(UpperBound {
        value: certificate_value(space, certificate, p),
        certificate: certificate.to_vec(),
        probes,
        route: Route::User,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn space(s: &str) -> CoordinateLattice {
        CoordinateLattice::parse(s).unwrap()
    }

    #[test]
    fn delta_certificate_is_the_vector() {
        let l2 = space("lp:2:3");
        let f = LatticeExpr::linear(&[3.0, 4.0, 0.0]);
        let (c, route) = default_certificate(&f, &l2, 0.5);
        assert_eq!(route, Route::Tree);
        assert_eq!(c, vec![vec![3.0, 4.0, 0.0]]);
        assert_eq!(certificate_value(&l2, &c, 0.5), 5.0);
        let u = fpbl_upper(&f, &l2, 0.5, &c, 100, 1).unwrap();
        assert_eq!(u.value, 5.0);
    }

    #[test]
    fn averaged_moduli() {
        let n = 8;
        let l1 = space(&format!("lp:1:{n}"));
        let f = LatticeExpr::sum((0..n).map(|k| LatticeExpr::gen(k).abs().scaled(1.0 / n as f64)))
            .unwrap();
        let cert: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let mut e = vec![0.0; n];
                e[k] = 1.0 / n as f64;
                e
            })
            .collect();
        assert_eq!(fpbl_upper(&f, &l1, 1.0, &cert, 200, 3).unwrap().value, 1.0);
        let (c, _) = default_certificate(&f, &l1, 1.0);
        assert_eq!(certificate_value(&l1, &c, 1.0), 1.0);
    }

    #[test]
    fn p_sum_formula() {
        let l1 = space("lp:1:2");
        let f = parse("(add (gen 0) (gen 1))").unwrap();
        let cert = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let u = fpbl_upper(&f, &l1, 0.5, &cert, 50, 0).unwrap();
        assert!((u.value - 4.0).abs() < 1e-15);
    }

    #[test]
    fn positive_part_drops_the_subtracted_mass() {
        let f = parse("(pos (sub (abs (gen 2)) (scale 16 (add (abs (gen 0)) (abs (gen 1))))))")
            .unwrap();
        let l1 = space("lp:1:3");
        let (c, _) = default_certificate(&f, &l1, 0.5);
        assert_eq!(c, vec![vec![0.0, 0.0, 1.0]]);
        check_domination(&f, &c, 3, 500, 9).unwrap();
    }

    #[test]
    fn rejection_carries_witness() {
        let f = parse("(abs (gen 0))").unwrap();
        let bad = vec![vec![0.5, 0.0]];
        match check_domination(&f, &bad, 2, 10, 0) {
            Err(Error::CertificateRejected { witness, lhs, rhs }) => {
                assert!(lhs > rhs);
                assert_eq!(witness.len(), 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(fpbl_upper(&f, &space("lp:1:2"), 1.0, &[], 10, 0).is_err());
    }

    #[test]
    fn parallel_vectors_merge() {
        let m = merge_parallel(vec![vec![1.0, 2.0], vec![-2.0, -4.0], vec![0.0, 1.0]]);
        assert_eq!(m, vec![vec![3.0, 6.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn power_sum_certificates_dominate() {
        let f = parse("(psum 0.5 (gen 0) (gen 1) (scale -2 (gen 2)))").unwrap();
        let l2 = space("lp:2:3");
        let (c, _) = default_certificate(&f, &l2, 0.5);
        check_domination(&f, &c, 3, 2000, 4).unwrap();
        let g = parse("(psum 3 (gen 0) (max (gen 1) (gen 2)))").unwrap();
        let (c, _) = default_certificate(&g, &l2, 1.0);
        check_domination(&g, &c, 3, 2000, 4).unwrap();
    }
}
