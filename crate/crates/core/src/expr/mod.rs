//! Lattice-linear expressions over formal generators.
//!
//! A [`LatticeExpr`] is a finite tree built from generators `δ_{e_i}` with
//! linear combinations, the lattice operations `∨`, `∧`, `|·|`, `[·]₊`, and the
//! power-sum node `(Σ|·|^s)^{1/s}`. Every such tree is positively homogeneous of
//! degree one, so it can be evaluated pointwise on real numbers (scalar mode) or
//! coordinatewise on vectors of a coordinate lattice (lattice mode), which is the
//! functional calculus of finite-dimensional vector lattices.

mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use parse::parse;

#[derive(Debug, Clone, PartialEq)]
pub enum LatticeExpr {
    /// The generator `δ_{e_i}`.
    Gen(usize),
    Scale(f64, Arc<LatticeExpr>),
    Add(Arc<LatticeExpr>, Arc<LatticeExpr>),
    Max(Arc<LatticeExpr>, Arc<LatticeExpr>),
    Min(Arc<LatticeExpr>, Arc<LatticeExpr>),
    Abs(Arc<LatticeExpr>),
    Pos(Arc<LatticeExpr>),
    /// `(Σ_k |term_k|^exponent)^{1/exponent}`.
    PowerSum {
        exponent: f64,
        terms: Arc<[LatticeExpr]>,
    },
}

/// Read access to the scalar value assigned to each generator.
pub trait GeneratorValues {
    fn value(&self, index: usize) -> Option<f64>;
}

impl GeneratorValues for [f64] {
    fn value(&self, index: usize) -> Option<f64> {
        self.get(index).copied()
    }
}

impl GeneratorValues for Vec<f64> {
    fn value(&self, index: usize) -> Option<f64> {
        self.get(index).copied()
    }
}

/// Read access to the lattice element assigned to each generator.
pub trait ElementValues {
    fn element(&self, index: usize) -> Option<&[f64]>;
}

impl ElementValues for [Vec<f64>] {
    fn element(&self, index: usize) -> Option<&[f64]> {
        self.get(index).map(Vec::as_slice)
    }
}

impl ElementValues for Vec<Vec<f64>> {
    fn element(&self, index: usize) -> Option<&[f64]> {
        self.get(index).map(Vec::as_slice)
    }
}

/// Sparse generator assignment, `index ↦ value`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment<T> {
    values: BTreeMap<usize, T>,
}

impl<T> Assignment<T> {
    pub fn new() -> Self {
        Self {
            values: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, index: usize, value: T) -> &mut Self {
        self.values.insert(index, value);
        self
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.values.get(&index)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<T> FromIterator<(usize, T)> for Assignment<T> {
    fn from_iter<I: IntoIterator<Item = (usize, T)>>(iter: I) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}

impl GeneratorValues for Assignment<f64> {
    fn value(&self, index: usize) -> Option<f64> {
        self.values.get(&index).copied()
    }
}

impl ElementValues for Assignment<Vec<f64>> {
    fn element(&self, index: usize) -> Option<&[f64]> {
        self.values.get(&index).map(Vec::as_slice)
    }
}

/// Column `j` of a lattice assignment, viewed as a scalar assignment.
struct Column<'a, E: ?Sized> {
    elements: &'a E,
    j: usize,
}

impl<E: ElementValues + ?Sized> GeneratorValues for Column<'_, E> {
    fn value(&self, index: usize) -> Option<f64> {
        self.elements.element(index).map(|x| x[self.j])
    }
}

/// Scalar `λ·a` applied to an assignment, used for homogeneity checks.
pub(crate) struct Scaled<'a, A: ?Sized> {
    pub inner: &'a A,
    pub factor: f64,
}

impl<A: GeneratorValues + ?Sized> GeneratorValues for Scaled<'_, A> {
    fn value(&self, index: usize) -> Option<f64> {
        self.inner.value(index).map(|v| self.factor * v)
    }
}

impl LatticeExpr {
    pub fn gen(index: usize) -> Self {
        LatticeExpr::Gen(index)
    }

    /// `δ_v = Σ_i v_i δ_{e_i}`; the zero vector gives the zero expression `0·δ_{e_0}`.
    pub fn linear(coeffs: &[f64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| {
                if c == 1.0 {
                    LatticeExpr::gen(i)
                } else {
                    LatticeExpr::gen(i).scaled(c)
                }
            });
        LatticeExpr::sum(terms).unwrap_or_else(LatticeExpr::zero)
    }

    pub fn zero() -> Self {
        LatticeExpr::gen(0).scaled(0.0)
    }

    /// Left-nested sum; `None` for an empty iterator.
    pub fn sum<I: IntoIterator<Item = LatticeExpr>>(terms: I) -> Option<Self> {
        terms.into_iter().reduce(|acc, t| acc.add(t))
    }

    /// Scalar multiple node. Unlike [`scale_expr`] any real factor is accepted.
    pub fn scaled(self, factor: f64) -> Self {
        LatticeExpr::Scale(factor, Arc::new(self))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: LatticeExpr) -> Self {
        LatticeExpr::Add(Arc::new(self), Arc::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: LatticeExpr) -> Self {
        self.add(other.scaled(-1.0))
    }

    pub fn max(self, other: LatticeExpr) -> Self {
        LatticeExpr::Max(Arc::new(self), Arc::new(other))
    }

    pub fn min(self, other: LatticeExpr) -> Self {
        LatticeExpr::Min(Arc::new(self), Arc::new(other))
    }

    pub fn abs(self) -> Self {
        LatticeExpr::Abs(Arc::new(self))
    }

    pub fn pos(self) -> Self {
        LatticeExpr::Pos(Arc::new(self))
    }

    pub fn power_sum(exponent: f64, terms: Vec<LatticeExpr>) -> Self {
        LatticeExpr::PowerSum {
            exponent,
            terms: terms.into(),
        }
    }

    /// Generator indices occurring in the tree.
    pub fn generators(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_generators(&mut out);
        out
    }

    fn collect_generators(&self, out: &mut BTreeSet<usize>) {
        match self {
            LatticeExpr::Gen(i) => {
                out.insert(*i);
            }
            LatticeExpr::Scale(_, a) | LatticeExpr::Abs(a) | LatticeExpr::Pos(a) => {
                a.collect_generators(out)
            }
            LatticeExpr::Add(a, b) | LatticeExpr::Max(a, b) | LatticeExpr::Min(a, b) => {
                a.collect_generators(out);
                b.collect_generators(out);
            }
            LatticeExpr::PowerSum { terms, .. } => {
                terms.iter().for_each(|t| t.collect_generators(out))
            }
        }
    }

    /// Number of generators needed to evaluate from a dense slice.
    pub fn arity(&self) -> usize {
        self.generators().last().map_or(0, |&i| i + 1)
    }

    pub fn node_count(&self) -> usize {
        match self {
            LatticeExpr::Gen(_) => 1,
            LatticeExpr::Scale(_, a) | LatticeExpr::Abs(a) | LatticeExpr::Pos(a) => {
                1 + a.node_count()
            }
            LatticeExpr::Add(a, b) | LatticeExpr::Max(a, b) | LatticeExpr::Min(a, b) => {
                1 + a.node_count() + b.node_count()
            }
            LatticeExpr::PowerSum { terms, .. } => {
                1 + terms.iter().map(LatticeExpr::node_count).sum::<usize>()
            }
        }
    }

    /// Coefficient vector `v` when the tree is purely linear (`f = δ_v`).
    pub fn linear_coefficients(&self) -> Option<Vec<f64>> {
        match self {
            LatticeExpr::Gen(i) => {
                let mut v = vec![0.0; i + 1];
                v[*i] = 1.0;
                Some(v)
            }
            LatticeExpr::Scale(c, a) => {
                let mut v = a.linear_coefficients()?;
                v.iter_mut().for_each(|x| *x *= c);
                Some(v)
            }
            LatticeExpr::Add(a, b) => {
                let mut u = a.linear_coefficients()?;
                let v = b.linear_coefficients()?;
                if u.len() < v.len() {
                    u.resize(v.len(), 0.0);
                }
                u.iter_mut().zip(&v).for_each(|(x, y)| *x += y);
                Some(u)
            }
            _ => None,
        }
    }

    /// Pointwise value with `∨ = max`, `∧ = min`, `[·]₊ = max(·, 0)`.
    pub fn evaluate_scalar<A: GeneratorValues + ?Sized>(&self, a: &A) -> Result<f64> {
        Ok(match self {
            LatticeExpr::Gen(i) => a.value(*i).ok_or(Error::UnassignedGenerator(*i))?,
            LatticeExpr::Scale(c, x) => c * x.evaluate_scalar(a)?,
            LatticeExpr::Add(x, y) => x.evaluate_scalar(a)? + y.evaluate_scalar(a)?,
            LatticeExpr::Max(x, y) => x.evaluate_scalar(a)?.max(y.evaluate_scalar(a)?),
            LatticeExpr::Min(x, y) => x.evaluate_scalar(a)?.min(y.evaluate_scalar(a)?),
            LatticeExpr::Abs(x) => x.evaluate_scalar(a)?.abs(),
            LatticeExpr::Pos(x) => x.evaluate_scalar(a)?.max(0.0),
            LatticeExpr::PowerSum { exponent, terms } => {
                let s = *exponent;
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::param(format!(
                        "power-sum exponent must be a positive real, got {s}"
                    )));
                }
                let mut acc = 0.0;
                for t in terms.iter() {
                    acc += power(t.evaluate_scalar(a)?.abs(), s);
                }
                power(acc, 1.0 / s)
            }
        })
    }

    /// Coordinatewise evaluation on lattice elements of a common dimension.
    ///
    /// Component `j` of the result is exactly `evaluate_scalar` on the `j`-th
    /// coordinates of the assigned elements.
    pub fn evaluate_lattice<E: ElementValues + ?Sized>(&self, elements: &E) -> Result<Vec<f64>> {
        let mut dim = None;
        for i in self.generators() {
            let x = elements.element(i).ok_or(Error::UnassignedGenerator(i))?;
            match dim {
                None => dim = Some(x.len()),
                Some(d) if d != x.len() => {
                    return Err(Error::Dimension {
                        expected: d,
                        found: x.len(),
                    })
                }
                _ => {}
            }
        }
        let dim = dim.unwrap_or(0);
        (0..dim)
            .map(|j| self.evaluate_scalar(&Column { elements, j }))
            .collect()
    }
}

/// `x^s` for `x ≥ 0`, with `0^s = 0` for every `s > 0`.
#[inline]
pub(crate) fn power(x: f64, s: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if s == 1.0 {
        x
    } else {
        x.powf(s)
    }
}

/// Returns an expression whose values are `λ` times those of `expr`.
pub fn scale_expr(expr: &LatticeExpr, lambda: f64) -> Result<LatticeExpr> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!(
            "scaling factor must be a finite nonnegative real, got {lambda}"
        )));
    }
    Ok(expr.clone().scaled(lambda))
}

impl fmt::Display for LatticeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeExpr::Gen(i) => write!(f, "(gen {i})"),
            LatticeExpr::Scale(c, a) => write!(f, "(scale {c:?} {a})"),
            LatticeExpr::Add(a, b) => write!(f, "(add {a} {b})"),
            LatticeExpr::Max(a, b) => write!(f, "(max {a} {b})"),
            LatticeExpr::Min(a, b) => write!(f, "(min {a} {b})"),
            LatticeExpr::Abs(a) => write!(f, "(abs {a})"),
            LatticeExpr::Pos(a) => write!(f, "(pos {a})"),
            LatticeExpr::PowerSum { exponent, terms } => {
                write!(f, "(psum {exponent:?}")?;
                for t in terms.iter() {
                    write!(f, " {t}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(i: usize) -> LatticeExpr {
        LatticeExpr::gen(i)
    }

    #[test]
    fn scalar_examples() {
        let e = g(0).max(g(1));
        assert_eq!(e.evaluate_scalar(&[3.0, 5.0][..]).unwrap(), 5.0);
        assert_eq!(g(0).abs().evaluate_scalar(&[-2.0][..]).unwrap(), 2.0);
        let ps = LatticeExpr::power_sum(0.5, vec![g(0), g(1)]);
        assert!((ps.evaluate_scalar(&[3.0, 0.0][..]).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_examples() {
        let e = g(0).max(g(1));
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(e.evaluate_lattice(&a).unwrap(), vec![1.0, 1.0]);

        let ps = LatticeExpr::power_sum(0.5, vec![g(0), g(1)]);
        let a = vec![vec![3.0, 0.0], vec![0.0, 4.0]];
        let v = ps.evaluate_lattice(&a).unwrap();
        assert!((v[0] - 3.0).abs() < 1e-12 && (v[1] - 4.0).abs() < 1e-12);

        let e = g(0).sub(g(1)).pos();
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        assert_eq!(e.evaluate_lattice(&a).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn lattice_dimension_mismatch() {
        let e = g(0).add(g(1));
        let a = vec![vec![1.0, 2.0], vec![1.0]];
        assert_eq!(
            e.evaluate_lattice(&a),
            Err(Error::Dimension {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn missing_generator_and_bad_exponent() {
        assert_eq!(
            g(2).evaluate_scalar(&[1.0][..]),
            Err(Error::UnassignedGenerator(2))
        );
        let mut a = Assignment::new();
        a.insert(0, 1.0);
        assert_eq!(g(1).evaluate_scalar(&a), Err(Error::UnassignedGenerator(1)));
        let bad = LatticeExpr::power_sum(0.0, vec![g(0)]);
        assert!(matches!(
            bad.evaluate_scalar(&[1.0][..]),
            Err(Error::Parameter(_))
        ));
        let bad = LatticeExpr::power_sum(-1.0, vec![g(0)]);
        assert!(matches!(
            bad.evaluate_scalar(&[1.0][..]),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn scale_expr_examples() {
        let zero = scale_expr(&g(0), 0.0).unwrap();
        assert_eq!(zero.evaluate_scalar(&[7.5][..]).unwrap(), 0.0);

        let e = scale_expr(&g(0).max(g(1)), 2.0).unwrap();
        assert_eq!(e.evaluate_scalar(&[1.0, 3.0][..]).unwrap(), 6.0);

        let id = scale_expr(&g(0).abs(), 1.0).unwrap();
        for v in [-3.0, 0.0, 2.5] {
            assert_eq!(
                id.evaluate_scalar(&[v][..]).unwrap(),
                g(0).abs().evaluate_scalar(&[v][..]).unwrap()
            );
        }
        assert!(scale_expr(&g(0), -1.0).is_err());
    }

    #[test]
    fn linear_coefficients_roundtrip() {
        let v = [3.0, 0.0, -4.5];
        let e = LatticeExpr::linear(&v);
        let c = e.linear_coefficients().unwrap();
        assert_eq!(c, vec![3.0, 0.0, -4.5]);
        assert!(g(0).abs().linear_coefficients().is_none());
        assert_eq!(
            LatticeExpr::linear(&[0.0, 0.0])
                .evaluate_scalar(&[1.0][..])
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn display_is_prefix_notation() {
        let e = g(2)
            .abs()
            .sub(g(0).abs().add(g(1).abs()).scaled(16.0))
            .pos();
        assert_eq!(
            e.to_string(),
            "(pos (add (abs (gen 2)) (scale -1.0 (scale 16.0 (add (abs (gen 0)) (abs (gen 1)))))))"
        );
    }
}
