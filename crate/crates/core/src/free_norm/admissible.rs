//! `sup_{x ∈ B_E} Σ_i |x_i^*(x)|^p` for a finite tuple of functionals on a
//! coordinate space `E`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::power;
use crate::qlat::CoordinateLattice;
use crate::seed;

/// Largest tuple for which sign patterns are enumerated.
pub const MAX_PATTERN_ROWS: usize = 16;
/// Largest dimension for which `ℓ_∞` vertices are enumerated.
pub const MAX_VERTEX_DIM: usize = 20;

const NUMERIC_RANDOM_STARTS: u64 = 4;
const EXACT_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Zero,
    SingleRow,
    /// `r ≤ p`: the maximum sits at a scaled basis vector.
    ColumnMax,
    /// `p = 1`: `max_σ ‖Σ σ_i x_i^*‖_{E^*}`.
    SignPatterns,
    /// `p = 1` on `ℓ_∞`: maximum over the cube vertices.
    Vertices,
    /// Compass search; `upper` from tangent majorants of `s ↦ s^p`.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    /// Attained value at `maximizer`.
    pub value: f64,
    /// Certified upper bound; equals `value` for the exact methods.
    pub upper: f64,
    pub exact: bool,
    pub method: Method,
    pub maximizer: Vec<f64>,
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param(format!("p must lie in (0,1], got {p}")));
    }
    Ok(())
}

pub(crate) fn check_tuple(t: &[Vec<f64>], d: usize) -> Result<()> {
    if t.is_empty() {
        return Err(Error::Empty("functional tuple"));
    }
    for row in t {
        if row.len() != d {
            return Err(Error::Dimension {
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("functional entries must be finite"));
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sup_{x ∈ B_E} |v·x|`.
pub fn dual_norm(space: &CoordinateLattice, v: &[f64]) -> f64 {
    let r = space.exponent();
    let w = space.weights();
    if r.is_infinite() {
        return v.iter().map(|x| x.abs()).sum();
    }
    if r <= 1.0 {
        // extreme points ±w_j^{-1/r} e_j
        return v
            .iter()
            .zip(w)
            .map(|(x, wj)| x.abs() * wj.powf(-1.0 / r))
            .fold(0.0, f64::max);
    }
    let rc = r / (r - 1.0);
    let s: f64 = v
        .iter()
        .zip(w)
        .map(|(x, wj)| power(x.abs() * wj.powf(-1.0 / r), rc))
        .sum();
    power(s, 1.0 / rc)
}

/// A point of `B_E` at which `v·x = dual_norm(v)`.
pub fn norming_point(space: &CoordinateLattice, v: &[f64]) -> Vec<f64> {
    let r = space.exponent();
    let w = space.weights();
    let d = v.len();
    if r.is_infinite() {
        return v
            .iter()
            .map(|x| if *x < 0.0 { -1.0 } else { 1.0 })
            .collect();
    }
    let u: Vec<f64> = v
        .iter()
        .zip(w)
        .map(|(x, wj)| x * wj.powf(-1.0 / r))
        .collect();
    let mut y = vec![0.0; d];
    if r <= 1.0 {
        let j = argmax_abs(&u);
        y[j] = if u[j] < 0.0 { -1.0 } else { 1.0 };
    } else {
        let rc = r / (r - 1.0);
        let nu = dual_norm(space, v);
        if nu == 0.0 {
            y[0] = 1.0;
        } else {
            for j in 0..d {
                y[j] = u[j].signum() * power(u[j].abs() / nu, rc - 1.0);
            }
        }
    }
    y.iter()
        .zip(w)
        .map(|(yj, wj)| yj * wj.powf(-1.0 / r))
        .collect()
}

/// A functional of dual norm at most 1 with `x^*(x) = ‖x‖` (for `r ≥ 1`).
pub fn norming_functional(space: &CoordinateLattice, x: &[f64]) -> Vec<f64> {
    let r = space.exponent();
    let w = space.weights();
    let d = x.len();
    let nx = space.norm_of(x);
    let mut out = vec![0.0; d];
    if nx == 0.0 {
        return out;
    }
    if r.is_infinite() {
        let j = argmax_abs(x);
        out[j] = x[j].signum();
        return out;
    }
    if r < 1.0 {
        let scaled: Vec<f64> = x
            .iter()
            .zip(w)
            .map(|(v, wj)| v * wj.powf(1.0 / r))
            .collect();
        let j = argmax_abs(&scaled);
        out[j] = x[j].signum() * w[j].powf(1.0 / r);
        return out;
    }
    for j in 0..d {
        out[j] = w[j] * x[j].signum() * power(x[j].abs() / nx, r - 1.0);
    }
    out
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..v.len() {
        if v[j].abs() > v[best].abs() {
            best = j;
        }
    }
    best
}

pub(crate) fn p_sum(t: &[Vec<f64>], x: &[f64], p: f64) -> f64 {
    t.iter().map(|row| power(dot(row, x).abs(), p)).sum()
}

/// `max_σ dual_norm(Σ_i σ_i a_i t_i)` with `σ_0 = +1`.
fn max_signed_combination(space: &CoordinateLattice, t: &[Vec<f64>], a: &[f64]) -> (f64, Vec<f64>) {
    let n = t.len();
    let d = t[0].len();
    let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
    let mut v = vec![0.0; d];
    for mask in 0u32..(1u32 << (n - 1)) {
        v.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in t.iter().enumerate() {
            let s = if i > 0 && mask & (1 << (i - 1)) != 0 {
                -a[i]
            } else {
                a[i]
            };
            for (vj, tj) in v.iter_mut().zip(row) {
                *vj += s * tj;
            }
        }
        let dn = dual_norm(space, &v);
        if dn > best.0 {
            best = (dn, v.clone());
        }
    }
    best
}

fn exact(value: f64, method: Method, maximizer: Vec<f64>) -> Admissibility {
    Admissibility {
        value,
        upper: value,
        exact: true,
        method,
        maximizer,
    }
}

/// Exact value when a closed route applies, else `None`.
fn exact_route(space: &CoordinateLattice, t: &[Vec<f64>], p: f64) -> Option<Admissibility> {
    let d = space.dim();
    let n = t.len();
    let r = space.exponent();
    if t.iter().all(|row| row.iter().all(|v| *v == 0.0)) {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        return Some(exact(0.0, Method::Zero, norming_point(space, &e)));
    }
    if n == 1 {
        let x = norming_point(space, &t[0]);
        return Some(exact(
            power(dual_norm(space, &t[0]), p),
            Method::SingleRow,
            x,
        ));
    }
    if r <= p {
        let w = space.weights();
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
        for j in 0..d {
            let c: f64 = t.iter().map(|row| power(row[j].abs(), p)).sum();
            let v = c * w[j].powf(-p / r);
            if v > best {
                best = v;
                arg = j;
            }
        }
        let mut x = vec![0.0; d];
        x[arg] = w[arg].powf(-1.0 / r);
        return Some(exact(best, Method::ColumnMax, x));
    }
    if p == 1.0 {
        let vertices = r.is_infinite() && d <= MAX_VERTEX_DIM && d < n;
        if n <= MAX_PATTERN_ROWS && !vertices {
            let ones = vec![1.0; n];
            let (value, v) = max_signed_combination(space, t, &ones);
            return Some(exact(value, Method::SignPatterns, norming_point(space, &v)));
        }
        if r.is_infinite() && d <= MAX_VERTEX_DIM {
            let mut best = (f64::NEG_INFINITY, 0u32);
            for mask in 0u32..(1u32 << (d - 1)) {
                let x = vertex(d, mask);
                let v = p_sum(t, &x, 1.0);
                if v > best.0 {
                    best = (v, mask);
                }
            }
            return Some(exact(best.0, Method::Vertices, vertex(d, best.1)));
        }
    }
    None
}

fn vertex(d: usize, mask: u32) -> Vec<f64> {
    (0..d)
        .map(|j| {
            if j > 0 && mask & (1 << (j - 1)) != 0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect()
}

fn ratio(t: &[Vec<f64>], space: &CoordinateLattice, x: &[f64], p: f64) -> f64 {
    let nx = space.norm_of(x);
    if nx == 0.0 || !nx.is_finite() {
        return f64::NEG_INFINITY;
    }
    p_sum(t, x, p) / power(nx, p)
}

/// Compass search of `Σ|t_i·x|^p / ‖x‖^p` from `x0`.
fn compass(space: &CoordinateLattice, t: &[Vec<f64>], p: f64, x0: &[f64]) -> (f64, Vec<f64>) {
    let d = x0.len();
    let nx = space.norm_of(x0);
    if nx == 0.0 {
        return (f64::NEG_INFINITY, x0.to_vec());
    }
    let mut x: Vec<f64> = x0.iter().map(|v| v / nx).collect();
    let mut best = ratio(t, space, &x, p);
    let mut step = 0.25;
    let mut passes = 0;
    while step > 1e-9 && passes < 4000 {
        passes += 1;
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut improved = false;
        for j in 0..d {
            for sgn in [1.0, -1.0] {
                let mut y = x.clone();
                y[j] += sgn * step * scale;
                let v = ratio(t, space, &y, p);
                if v > best {
                    let ny = space.norm_of(&y);
                    x = y.iter().map(|c| c / ny).collect();
                    best = v;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, x)
}

fn numeric_starts(
    space: &CoordinateLattice,
    t: &[Vec<f64>],
    warm: Option<&[f64]>,
) -> Vec<Vec<f64>> {
    let d = space.dim();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm {
        starts.push(w.to_vec());
    }
    starts.extend(t.iter().map(|row| norming_point(space, row)));
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        starts.push(e);
    }
    for k in 0..NUMERIC_RANDOM_STARTS {
        let mut rng = seed::stream(0, "admissibility-start", k);
        starts.push((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    starts
}

fn numeric_max(
    space: &CoordinateLattice,
    t: &[Vec<f64>],
    p: f64,
    starts: &[Vec<f64>],
) -> (f64, Vec<f64>) {
    let mut best = (f64::NEG_INFINITY, starts[0].clone());
    for s in starts {
        let (v, x) = compass(space, t, p, s);
        if v > best.0 {
            best = (v, x);
        }
    }
    best
}

/// `s^p ≤ (1-p)c^p + p c^{p-1} s` for every `c > 0`, so
/// `Σ|t_i·x|^p ≤ (1-p)Σc_i^p + p·max_σ ‖Σ σ_i c_i^{p-1} t_i‖_{E^*}` on `B_E`.
fn tangent_upper(space: &CoordinateLattice, t: &[Vec<f64>], p: f64, xhat: &[f64]) -> f64 {
    let trivial: f64 = t.iter().map(|row| power(dual_norm(space, row), p)).sum();
    if t.len() > MAX_PATTERN_ROWS {
        return trivial;
    }
    let c: Vec<f64> = t.iter().map(|row| dot(row, xhat).abs()).collect();
    let cmax = c.iter().copied().fold(0.0, f64::max);
    if cmax == 0.0 {
        return trivial;
    }
    let mut best = trivial;
    for floor in [1e-2, 1e-4, 1e-6] {
        let ci: Vec<f64> = c.iter().map(|v| v.max(floor * cmax)).collect();
        let a: Vec<f64> = ci.iter().map(|v| v.powf(p - 1.0)).collect();
        let base: f64 = ci.iter().map(|v| (1.0 - p) * v.powf(p)).sum();
        best = best.min(base + p * max_signed_combination(space, t, &a).0);
    }
    best
}

/// `sup_{x ∈ B_E} Σ_i |t_i·x|^p`.
///
/// Exact when one row, `r ≤ p`, or `p = 1`; otherwise a local maximum with a
/// certified upper bound, flagged exact when the two agree to `1e-9`.
pub fn admissibility(t: &[Vec<f64>], space: &CoordinateLattice, p: f64) -> Result<Admissibility> {
    check_p(p)?;
    check_tuple(t, space.dim())?;
    if let Some(a) = exact_route(space, t, p) {
        return Ok(a);
    }
    let (value, x) = numeric_max(space, t, p, &numeric_starts(space, t, None));
    let upper = tangent_upper(space, t, p, &x).max(value);
    Ok(Admissibility {
        value,
        upper,
        exact: upper - value <= EXACT_GAP * upper,
        method: Method::Numeric,
        maximizer: x,
    })
}

/// Search-time estimate: exact routes where available, otherwise a compass
/// search warm-started at `warm` (updated in place). No certificate.
pub(crate) fn admissibility_estimate(
    t: &[Vec<f64>],
    space: &CoordinateLattice,
    p: f64,
    warm: &mut Vec<f64>,
) -> f64 {
    if let Some(a) = exact_route(space, t, p) {
        return a.value;
    }
    let mut starts = vec![warm.clone()];
    starts.extend(t.iter().map(|row| norming_point(space, row)));
    let (v, x) = numeric_max(space, t, p, &starts);
    *warm = x;
    v
}
