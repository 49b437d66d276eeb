//! Hilbert transforms of interval indicators and the functions
//! `F_n = Σ_k |H[I_{[(k-1)/n, k/n]}]|` whose minima on `[0,1]` grow like
//! `log(2n-1)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// `H[I_{[a,b]}](x) = log|(x-a)/(x-b)|` (principal value of `∫_a^b dt/(x-t)`).
pub fn hilbert_indicator(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::param(format!("need a < b, got a={a}, b={b}")));
    }
    if x == a || x == b {
        return Err(Error::Singularity { x });
    }
    Ok(((x - a) / (x - b)).abs().ln())
}

/// Direct sum `Σ_{k=1}^n |log|x-(k-1)/n| - log|x-k/n||`. Infinite at `k/n`.
fn f_n_raw(n: usize, x: f64) -> f64 {
    let nf = n as f64;
    let mut prev = (x - 0.0).abs().ln();
    let mut sum = 0.0;
    for k in 1..=n {
        let cur = (x - k as f64 / nf).abs().ln();
        sum += (prev - cur).abs();
        prev = cur;
    }
    sum
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    Ok(())
}

/// `F_n(x)` by its defining sum.
pub fn f_n(n: usize, x: f64) -> Result<f64> {
    check_n(n)?;
    if !x.is_finite() {
        return Err(Error::param(format!("x must be finite, got {x}")));
    }
    let v = f_n_raw(n, x);
    if !v.is_finite() {
        return Err(Error::Singularity { x });
    }
    Ok(v)
}

/// Closed form valid for `x < 1/(2n)` (first branch) and `x ≥ (2n-1)/(2n)`
/// (last branch). `None` between them.
pub fn f_n_edge_branch(n: usize, x: f64) -> Option<f64> {
    let nf = n as f64;
    if x < 1.0 / (2.0 * nf) {
        Some(((1.0 - x) / x).abs().ln())
    } else if x >= (2.0 * nf - 1.0) / (2.0 * nf) {
        Some((x / (1.0 - x)).abs().ln())
    } else {
        None
    }
}

/// `x_{k,n} = (2k-1)/(2n)`, the local minimum inside the `k`-th cell.
pub fn local_minimum_point(n: usize, k: usize) -> f64 {
    (2 * k - 1) as f64 / (2 * n) as f64
}

/// Piecewise-constant function on `[lo, hi]` with equal cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

/// Where in each cell a function is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Midpoint,
    /// Right endpoint; a minorant for decreasing functions.
    Right,
}

impl GridFunction {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::param(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if values.is_empty() {
            return Err(Error::Empty("grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("grid values must be finite"));
        }
        Ok(Self { lo, hi, values })
    }

    pub fn sample(
        lo: f64,
        hi: f64,
        cells: usize,
        at: Sampling,
        f: impl Fn(f64) -> f64 + Sync,
    ) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Empty("grid"));
        }
        let w = (hi - lo) / cells as f64;
        let values = (0..cells)
            .into_par_iter()
            .map(|i| match at {
                Sampling::Midpoint => f(lo + (i as f64 + 0.5) * w),
                Sampling::Right => f(lo + (i + 1) as f64 * w),
            })
            .collect();
        Self::new(lo, hi, values)
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.values.len() as f64
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            lo: self.lo,
            hi: self.hi,
            values: self.values.iter().map(|v| lambda * v).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `sup_t t·μ{|f| > t}` of the step function: with values sorted
/// decreasingly, `max_j |v|_(j) · j · width`.
pub fn weak_l1_norm(f: &GridFunction) -> Result<f64> {
    if f.values.is_empty() {
        return Err(Error::Empty("grid"));
    }
    let mut v: Vec<f64> = f.values.iter().map(|x| x.abs()).collect();
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    let w = f.cell_width();
    Ok(v.iter()
        .enumerate()
        .map(|(j, x)| x * ((j + 1) as f64 * w))
        .fold(0.0, f64::max))
}

/// Midpoint samples of `F_n` on `[0,1]`.
///
/// A midpoint `(2i+1)/(2M)` equals some `k/n` exactly when
/// `n(2i+1) = 2Mk`; such a cell holds the smaller of its two quarter-point
/// values instead.
pub fn f_n_grid(n: usize, cells: usize) -> Result<GridFunction> {
    check_n(n)?;
    if cells == 0 {
        return Err(Error::Empty("grid"));
    }
    let m = cells as f64;
    let values = (0..cells)
        .into_par_iter()
        .map(|i| {
            let num = n as u128 * (2 * i as u128 + 1);
            let den = 2 * cells as u128;
            if num % den == 0 {
                let a = (4 * i + 1) as f64 / (4.0 * m);
                let b = (4 * i + 3) as f64 / (4.0 * m);
                f_n_raw(n, a).min(f_n_raw(n, b))
            } else {
                f_n_raw(n, (2 * i + 1) as f64 / (2.0 * m))
            }
        })
        .collect();
    GridFunction::new(0.0, 1.0, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMinimum {
    pub n: usize,
    pub value: f64,
    pub argmin: f64,
    /// Spacing of the refined grid.
    pub spacing: f64,
    /// Bound on `value - min F_n` from the slope `≤ 6n` near the minimum.
    pub grid_tolerance: f64,
}

/// Minimum of `F_n` on `[0,1]`: coarse midpoint grid, then a 100× finer grid
/// within `1/n` of the coarse argmin.
pub fn adaptive_minimum(n: usize, cells: usize) -> Result<GridMinimum> {
    let coarse = f_n_grid(n, cells)?;
    let (i_best, _) =
        coarse.values.iter().enumerate().fold(
            (0, f64::INFINITY),
            |b, (i, &v)| if v < b.1 { (i, v) } else { b },
        );
    let centre = (i_best as f64 + 0.5) / cells as f64;
    let lo = (centre - 1.0 / n as f64).max(0.0);
    let hi = (centre + 1.0 / n as f64).min(1.0);
    let h = 1.0 / (100.0 * cells as f64);
    let steps = ((hi - lo) / h).ceil() as usize;
    let (value, argmin) = (0..=steps)
        .into_par_iter()
        .map(|j| {
            let x = (lo + j as f64 * h).min(hi);
            (f_n_raw(n, x), x)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .filter(|(v, _)| v.is_finite())
        .fold((coarse.values[i_best], centre), |b, c| {
            if c.0 < b.0 {
                c
            } else {
                b
            }
        });
    Ok(GridMinimum {
        n,
        value,
        argmin,
        spacing: h,
        grid_tolerance: 6.0 * n as f64 * h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub n: usize,
    /// `F_n(x) = F_n(1-x)`.
    pub symmetry: bool,
    /// Decreasing then increasing about `(2k-1)/(2n)` inside each cell of `[0,1]`.
    pub unimodality: bool,
    /// `F_n(x_{k,n}) ≤ F_n(x_{k+1,n})` for `k ≤ n/2`.
    pub minima_ordering: bool,
    /// The closed forms on `x < 1/(2n)` and `x ≥ (2n-1)/(2n)` agree with the sum.
    pub edge_branches: bool,
    pub max_symmetry_error: f64,
    pub tolerance: f64,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        self.symmetry && self.unimodality && self.minima_ordering && self.edge_branches
    }
}

const LEMMA_TOL: f64 = 1e-10;
const SYMMETRY_POINTS: usize = 1000;
const HALF_CELL_SAMPLES: usize = 64;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= LEMMA_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Checks the structural properties of `F_n` by direct evaluation.
pub fn f_n_lemma_check(n: usize) -> Result<LemmaReport> {
    check_n(n)?;
    let nf = n as f64;
    let singular = |x: f64| {
        let t = x * nf;
        (t - t.round()).abs() < 1e-6
    };
    // Weyl sequence over (-1, 2), away from the singular points
    let phi = 0.618_033_988_749_894_9;
    let pts: Vec<f64> = (1..)
        .map(|i| -1.0 + 3.0 * ((i as f64 * phi) % 1.0))
        .filter(|&x| !singular(x) && !singular(1.0 - x))
        .take(SYMMETRY_POINTS)
        .collect();
    let mut max_symmetry_error: f64 = 0.0;
    let mut symmetry = true;
    for &x in &pts {
        let (a, b) = (f_n_raw(n, x), f_n_raw(n, 1.0 - x));
        max_symmetry_error = max_symmetry_error.max((a - b).abs());
        symmetry &= close(a, b);
    }

    let mut unimodality = true;
    for k in 1..=n {
        let left = (k - 1) as f64 / nf;
        let mid = local_minimum_point(n, k);
        let half = 0.5 / nf;
        let m = HALF_CELL_SAMPLES;
        let down: Vec<f64> = (1..=m)
            .map(|j| f_n_raw(n, left + half * j as f64 / m as f64))
            .collect();
        let up: Vec<f64> = (0..m)
            .map(|j| f_n_raw(n, mid + half * j as f64 / m as f64))
            .collect();
        let slack = |a: f64| LEMMA_TOL * a.abs().max(1.0);
        unimodality &= down.windows(2).all(|w| w[1] <= w[0] + slack(w[0]));
        unimodality &= up.windows(2).all(|w| w[1] >= w[0] - slack(w[0]));
    }

    let minima: Vec<f64> = (1..=n)
        .map(|k| f_n_raw(n, local_minimum_point(n, k)))
        .collect();
    let minima_ordering = (1..n)
        .filter(|&k| 2 * k <= n)
        .all(|k| minima[k - 1] <= minima[k] + LEMMA_TOL * minima[k].abs().max(1.0));

    let edge_branches = pts.iter().all(|&x| match f_n_edge_branch(n, x) {
        Some(v) => close(v, f_n_raw(n, x)),
        None => true,
    });

    Ok(LemmaReport {
        n,
        symmetry,
        unimodality,
        minima_ordering,
        edge_branches,
        max_symmetry_error,
        tolerance: LEMMA_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceRow {
    pub n: usize,
    pub grid_min: f64,
    pub log_2n_minus_1: f64,
    pub weak_l1_lb: f64,
    pub grid_tolerance: f64,
}

/// One row per `n`: refined minimum on `[0,1]`, `log(2n-1)`, and the weak-L1
/// quasi-norm of the midpoint grid.
pub fn divergence_table(n_list: &[usize], cells: usize) -> Result<Vec<DivergenceRow>> {
    let Some(&max_n) = n_list.iter().max() else {
        return Err(Error::Empty("n list"));
    };
    check_n(*n_list.iter().min().unwrap())?;
    if cells < 16 * max_n {
        return Err(Error::Resolution {
            cells,
            required: 16 * max_n,
        });
    }
    n_list
        .iter()
        .map(|&n| {
            let m = adaptive_minimum(n, cells)?;
            Ok(DivergenceRow {
                n,
                grid_min: m.value,
                log_2n_minus_1: ((2 * n - 1) as f64).ln(),
                weak_l1_lb: weak_l1_norm(&f_n_grid(n, cells)?)?,
                grid_tolerance: m.grid_tolerance,
            })
        })
        .collect()
}
