//! Scalar functions of the two-level tree recursion on the `(d, w)`-ary tree.
//!
//! `F(x) = λ(1 + α(1+x)^{-w})^{-d}` maps occupation ratios two levels down to
//! the root. The tuple is δ-unique when every fixpoint has `F′(x̂) ≤ 1 − δ`;
//! at a fixpoint this is equivalent to `T_δ(x̂) ≥ 0`. Powers `(1+x)^{±w}`
//! are evaluated as `exp(±w·ln(1+x))` so that branching numbers up to ~1e11
//! stay finite.

use serde::Serialize;
use thiserror::Error;

use crate::numeric::{bisect, golden_max};

/// Slack applied when comparing `F′(x̂)` against `1 − δ`. A fixpoint that
/// sits exactly on the critical manifold (e.g. `λ = α = 4, d = w = 2`)
/// otherwise flips on the last ulp.
pub const DECISION_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecursionError {
    #[error("invalid tree parameters: {0}")]
    InvalidParams(String),
    #[error("argument must be positive, got {0}")]
    NonPositive(f64),
}

/// `d` and `w` are the left/right branching numbers (`Δ − 1`, `W − 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeParams {
    pub d: f64,
    pub w: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl TreeParams {
    pub fn new(d: f64, w: f64, lambda: f64, alpha: f64, delta: f64) -> Result<Self, RecursionError> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(d) && pos(w) && pos(lambda) && pos(alpha)) {
            return Err(RecursionError::InvalidParams(format!(
                "need d, w, lambda, alpha > 0 (d={d}, w={w}, lambda={lambda}, alpha={alpha})"
            )));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(RecursionError::InvalidParams(format!(
                "need 0 <= delta < 1, got {delta}"
            )));
        }
        Ok(Self {
            d,
            w,
            lambda,
            alpha,
            delta,
        })
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn with_w(self, w: f64) -> Self {
        Self { w, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }
}

/// `α(1+x)^{-w}`.
fn q(x: f64, p: &TreeParams) -> f64 {
    p.alpha * (-p.w * x.ln_1p()).exp()
}

/// `(1+x)^w`.
fn pow_w(x: f64, w: f64) -> f64 {
    (w * x.ln_1p()).exp()
}

/// The tree recursion `F(x) = λ(1 + α(1+x)^{-w})^{-d}`.
pub fn f(x: f64, p: &TreeParams) -> f64 {
    p.lambda * (-p.d * q(x, p).ln_1p()).exp()
}

/// `F′(x) = αdw(x+1)^{-w-1}(1 + α(x+1)^{-w})^{-1} F(x)`.
pub fn df(x: f64, p: &TreeParams) -> f64 {
    let q = q(x, p);
    p.d * p.w * q / ((1.0 + x) * (1.0 + q)) * f(x, p)
}

/// `T_δ(x) = (1−δ)(x+1)(α + (1+x)^w) − αdwx`.
pub fn t_delta(x: f64, p: &TreeParams) -> f64 {
    let s = 1.0 - p.delta;
    s * (x + 1.0) * (p.alpha + pow_w(x, p.w)) - p.alpha * p.d * p.w * x
}

/// `T′_δ(x) = (1−δ)(1+w)(1+x)^w − α(dw − (1−δ))`.
pub fn dt_delta(x: f64, p: &TreeParams) -> f64 {
    let s = 1.0 - p.delta;
    s * (1.0 + p.w) * pow_w(x, p.w) - p.alpha * (p.d * p.w - s)
}

/// Magnitude of the two competing terms of `T_δ`, for scaled residuals.
pub fn t_delta_scale(x: f64, p: &TreeParams) -> f64 {
    let s = 1.0 - p.delta;
    s * (x + 1.0) * (p.alpha + pow_w(x, p.w)) + p.alpha * p.d * p.w * x
}

/// `M_δ(x) = w log(1+x)(αd − (1+x)^{w+1}) + δ(x+1)(α + (x+1)^w)`.
///
/// Evaluated as `αdwL − (1+x)^{w+1}(wL − δ) + δα(1+x)` with `L = log(1+x)`,
/// which avoids `∞ − ∞` once `(1+x)^{w+1}` overflows.
pub fn m_delta(x: f64, p: &TreeParams) -> f64 {
    let l = x.ln_1p();
    let big = ((p.w + 1.0) * l).exp();
    let mut v = p.alpha * p.d * p.w * l + p.delta * p.alpha * (1.0 + x);
    let tail = p.w * l - p.delta;
    if tail != 0.0 {
        v -= big * tail;
    }
    v
}

/// Magnitude of the terms of `M_δ`, for scaled residuals.
pub fn m_delta_scale(x: f64, p: &TreeParams) -> f64 {
    let l = x.ln_1p();
    let big = ((p.w + 1.0) * l).exp();
    p.alpha * p.d * p.w * l + big * (p.w * l + p.delta) + p.delta * p.alpha * (1.0 + x)
}

/// `λ(x) = x(1 + α(1+x)^{-w})^d`: the unique fugacity making `x` a fixpoint.
pub fn lambda_of_x(x: f64, p: &TreeParams) -> f64 {
    x * (p.d * q(x, p).ln_1p()).exp()
}

/// Unique minimizer `y` of the strictly convex `T_δ` on `x ≥ 0`, if it lies
/// there: `y = (α(dw−(1−δ))/((1−δ)(1+w)))^{1/w} − 1`.
pub fn t_delta_minimizer(p: &TreeParams) -> Option<f64> {
    let s = 1.0 - p.delta;
    let c = p.alpha * (p.d * p.w - s) / (s * (1.0 + p.w));
    if !(c >= 1.0) {
        return None;
    }
    let y = (c.ln() / p.w).exp_m1();
    Some(y)
}

/// Positive roots of `T_δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TRoots {
    None,
    Double { x: f64 },
    Two { x1: f64, x2: f64 },
}

impl TRoots {
    pub fn count(&self) -> usize {
        match self {
            TRoots::None => 0,
            TRoots::Double { .. } => 1,
            TRoots::Two { .. } => 2,
        }
    }

    pub fn roots(&self) -> Vec<f64> {
        match *self {
            TRoots::None => vec![],
            TRoots::Double { x } => vec![x],
            TRoots::Two { x1, x2 } => vec![x1, x2],
        }
    }
}

/// Roots of `T_δ` via its minimizer: none if the minimizer is missing or
/// `T_δ(y) > 0`, a double root if `T_δ(y)` vanishes to 1e-12 (relative to
/// the size of its terms), else one bisection on each side of `y`.
pub fn t_delta_roots(p: &TreeParams) -> TRoots {
    let Some(y) = t_delta_minimizer(p) else {
        return TRoots::None;
    };
    let ty = t_delta(y, p);
    if ty.abs() <= 1e-12 * t_delta_scale(y, p) {
        return TRoots::Double { x: y };
    }
    if ty > 0.0 {
        return TRoots::None;
    }
    let t = |x: f64| t_delta(x, p);
    let x1 = bisect(0.0, y, t);
    let mut hi = 2.0 * y + 1.0;
    while t(hi) <= 0.0 {
        hi *= 2.0;
    }
    let x2 = bisect(y, hi, t);
    TRoots::Two { x1, x2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fixpoint {
    pub x: f64,
    /// `F′(x̂)`.
    pub slope: f64,
    /// `|F(x̂) − x̂|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixpointReport {
    pub params: TreeParams,
    /// Ascending, one to three entries.
    pub fixpoints: Vec<Fixpoint>,
    /// `max F′(x̂) ≤ 1 − δ` (up to [`DECISION_SLACK`]).
    pub delta_unique: bool,
}

impl FixpointReport {
    pub fn max_slope(&self) -> f64 {
        self.fixpoints.iter().map(|f| f.slope).fold(0.0, f64::max)
    }
}

/// All positive fixpoints of `F`.
///
/// `λ(x)` is increasing, decreasing, increasing on the pieces cut by the
/// roots of `T_0`; on each piece `λ(x) = λ` has at most one solution, found
/// by bisection. `x̂ = 0` is never a fixpoint since `F(0) > 0`.
pub fn find_fixpoints(p: &TreeParams) -> FixpointReport {
    let lam = |x: f64| lambda_of_x(x, p) - p.lambda;
    let mut cuts = vec![0.0];
    cuts.extend(t_delta_roots(&p.with_delta(0.0)).roots());

    let mut xs: Vec<f64> = Vec::new();
    for (i, &a) in cuts.iter().enumerate() {
        let ga = lam(a);
        let (b, gb) = match cuts.get(i + 1) {
            Some(&b) => (b, lam(b)),
            None => {
                // λ(x) ≥ x, so the bracket closes by x = max(1, λ)
                let mut b = p.lambda.max(1.0).max(2.0 * a);
                while lam(b) < 0.0 {
                    b *= 2.0;
                }
                (b, lam(b))
            }
        };
        if ga == 0.0 && a > 0.0 {
            xs.push(a);
        } else if gb == 0.0 {
            xs.push(b);
        } else if (ga < 0.0) != (gb < 0.0) {
            xs.push(bisect(a, b, lam));
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|b, a| (*b - *a).abs() <= 1e-10 * a.abs().max(1e-300));

    let fixpoints: Vec<Fixpoint> = xs
        .into_iter()
        .map(|x| Fixpoint {
            x,
            slope: df(x, p),
            residual: (f(x, p) - x).abs(),
        })
        .collect();
    let delta_unique = fixpoints
        .iter()
        .all(|fp| fp.slope <= 1.0 - p.delta + DECISION_SLACK);
    FixpointReport {
        params: *p,
        fixpoints,
        delta_unique,
    }
}

/// `ψ(x) = x/((x+1) log(x+1))`.
pub fn psi(x: f64) -> Result<f64, RecursionError> {
    if !(x > 0.0) {
        return Err(RecursionError::NonPositive(x));
    }
    Ok(x / ((x + 1.0) * x.ln_1p()))
}

/// `φ(x) = ψ(x)/x = 1/((x+1) log(x+1))`.
pub fn phi(x: f64) -> Result<f64, RecursionError> {
    if !(x > 0.0) {
        return Err(RecursionError::NonPositive(x));
    }
    Ok(1.0 / ((x + 1.0) * x.ln_1p()))
}

/// `t/((1+t) log(1+t))`, continuous at 0 with value 1.
fn psi_ratio(t: f64) -> f64 {
    if t < 1e-12 {
        1.0 - t / 2.0
    } else {
        t / ((1.0 + t) * t.ln_1p())
    }
}

/// Potential-weighted contraction `H(x) = (φ(F(x))/φ(x))·F′(x)`, in the
/// expanded form `dw·F·log(1+x)·q/(1+q) / ((1+F) log(1+F))`, `q = α(1+x)^{-w}`.
pub fn h(x: f64, p: &TreeParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let q = q(x, p);
    let fx = p.lambda * (-p.d * q.ln_1p()).exp();
    p.d * p.w * x.ln_1p() * (q / (1.0 + q)) * psi_ratio(fx)
}

/// Symmetrized contraction
/// `U(z) = ψ̃(λz^{-d})·d·((z−1)/z)·log(α/(z−1))` on `[1, 1+α]`, where
/// `ψ̃(t) = t/((1+t)log(1+t))`. Zero at both endpoints.
pub fn u(z: f64, lambda: f64, d: f64, alpha: f64) -> f64 {
    let zm1 = z - 1.0;
    if zm1 < 1e-300 {
        return 0.0;
    }
    let t = lambda * (-d * z.ln()).exp();
    psi_ratio(t) * d * (zm1 / z) * (alpha / zm1).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionSup {
    pub sup: f64,
    pub argmax: f64,
}

/// `sup_{z∈[1,1+α]} U(z)` by a 2000-point grid scan followed by
/// golden-section refinement around the best grid point.
pub fn contraction_sup(lambda: f64, d: f64, alpha: f64) -> ContractionSup {
    const GRID: usize = 2000;
    let uu = |z: f64| u(z, lambda, d, alpha);
    let step = alpha / (GRID - 1) as f64;
    let (best, _) = (0..GRID)
        .map(|i| (i, uu(1.0 + step * i as f64)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let a = 1.0 + step * best.saturating_sub(1) as f64;
    let b = (1.0 + step * (best + 1) as f64).min(1.0 + alpha);
    let tol = 1e-12 * (1.0 + alpha).max(1.0);
    let (argmax, sup) = golden_max(a, b, tol, uu);
    let grid_best = uu(1.0 + step * best as f64);
    if grid_best > sup {
        ContractionSup {
            sup: grid_best,
            argmax: 1.0 + step * best as f64,
        }
    } else {
        ContractionSup { sup, argmax }
    }
}
