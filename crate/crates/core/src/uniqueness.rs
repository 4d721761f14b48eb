//! Critical thresholds of the bipartite hardcore model.
//!
//! For fixed `(d, α, δ)` the tuple `(λ, d, α)` is δ-unique for every right
//! branching number `w` iff `λ ≥ λ^δ_{2,c}`. When
//! `α ≤ ((1−δ)/d)·e^{1+(1−δ)/d}` the threshold is 0 by convention; otherwise
//! it is `λ(x_c)` at the unique positive solution `(x_c, w_c)` of
//! `T_δ(x) = 0, M_δ(x) = 0`. At `δ = 0` the system collapses onto the double
//! root of `T_0` at `w_0`, solved in closed form.

use serde::Serialize;
use thiserror::Error;

use crate::numeric::bisect;
use crate::recursion::{
    find_fixpoints, lambda_of_x, m_delta, m_delta_scale, t_delta,
    t_delta_minimizer, t_delta_roots, t_delta_scale, TRoots, TreeParams, DECISION_SLACK,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UniquenessError {
    #[error("need d·w > 1 − δ, got d = {d}, w = {w}, δ = {delta}")]
    Domain { d: f64, w: f64, delta: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(
        "α = {alpha} ≤ ((1−δ)/d)·e^(1+(1−δ)/d) = {bound}: every λ is δ-unique, w_δ does not exist"
    )]
    AlwaysUnique { alpha: f64, bound: f64 },
    #[error("no sign change of x₂ − x_M found for w up to {w_max:e} (w_δ = {w_delta}, x₂ = {x2}, x_M = {xm})")]
    Bracket {
        w_delta: f64,
        w_max: f64,
        x2: f64,
        xm: f64,
    },
}

fn check_common(d: f64, alpha: f64, delta: f64) -> Result<(), UniquenessError> {
    let pos = |x: f64| x.is_finite() && x > 0.0;
    if !(pos(d) && pos(alpha) && (0.0..1.0).contains(&delta)) {
        return Err(UniquenessError::InvalidParams(format!(
            "need d, α > 0 and 0 ≤ δ < 1 (d = {d}, α = {alpha}, δ = {delta})"
        )));
    }
    Ok(())
}

/// `log A(d, w, δ)`.
fn ln_a(d: f64, w: f64, delta: f64) -> f64 {
    let s = 1.0 - delta;
    s.ln() + w * d.ln() + (w + 1.0) * (w + 1.0).ln() - (w + 1.0) * (d * w - s).ln()
}

/// `A(d, w, δ) = (1−δ) d^w (w+1)^{w+1} / (dw − (1−δ))^{w+1}`.
pub fn a(d: f64, w: f64, delta: f64) -> Result<f64, UniquenessError> {
    if !(d * w > 1.0 - delta) || !(0.0..1.0).contains(&delta) {
        return Err(UniquenessError::Domain { d, w, delta });
    }
    // Direct evaluation keeps exact cases exact (A(2, 2, 0) = 4); the log
    // form covers the ranges where the powers overflow or underflow.
    let s = 1.0 - delta;
    let (num, den) = (d.powf(w) * (w + 1.0).powf(w + 1.0), (d * w - s).powf(w + 1.0));
    if num.is_normal() && den.is_normal() {
        let direct = s * num / den;
        if direct.is_normal() {
            return Ok(direct);
        }
    }
    Ok(ln_a(d, w, delta).exp())
}

/// `λ̂(d, w) = A(d, w, 0)`.
pub fn lambda_hat(d: f64, w: f64) -> Result<f64, UniquenessError> {
    a(d, w, 0.0)
}

/// `((1−δ)/d)·e^{1+(1−δ)/d}`: the infimum of `A(d, ·, δ)`. For `α` at or
/// below it every `λ` is δ-unique.
pub fn small_alpha_bound(d: f64, delta: f64) -> f64 {
    let r = (1.0 - delta) / d;
    r * (1.0 + r).exp()
}

/// `λ_c(Δ) = (Δ−1)^{Δ−1}/(Δ−2)^Δ`, the uniqueness threshold of the
/// `Δ`-regular tree.
pub fn lambda_c_regular(big_delta: u32) -> f64 {
    let d = big_delta as i32;
    ((d - 1) as f64).powi(d - 1) / ((d - 2) as f64).powi(d)
}

/// Thresholds for the `(d, w)` bi-regular tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormPair {
    pub d: f64,
    pub w: f64,
    /// `λ_c(d, w) = λ̂(w, d)`.
    pub lambda_c: f64,
    /// `α_c(d, w) = λ̂(d, w)`.
    pub alpha_c: f64,
}

pub fn closed_form_pair(d: f64, w: f64) -> Result<ClosedFormPair, UniquenessError> {
    if !(d >= 1.0 && d * w > 1.0 && w.is_finite() && d.is_finite()) {
        return Err(UniquenessError::InvalidParams(format!(
            "closed form needs d ≥ 1 and d·w > 1 (d = {d}, w = {w})"
        )));
    }
    Ok(ClosedFormPair {
        d,
        w,
        lambda_c: lambda_hat(w, d)?,
        alpha_c: lambda_hat(d, w)?,
    })
}

/// The unique `w_δ` with `A(d, w_δ, δ) = α`, by bisection on the strictly
/// decreasing `log A(d, ·, δ)`.
pub fn solve_w_delta(d: f64, alpha: f64, delta: f64) -> Result<f64, UniquenessError> {
    check_common(d, alpha, delta)?;
    let bound = small_alpha_bound(d, delta);
    if alpha <= bound {
        return Err(UniquenessError::AlwaysUnique { alpha, bound });
    }
    let target = alpha.ln();
    let h = |w: f64| ln_a(d, w, delta) - target;
    let mut lo = (1.0 - delta) / d;
    let mut hi = (2.0 * lo).max(1.0);
    while h(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            return Err(UniquenessError::AlwaysUnique { alpha, bound });
        }
    }
    Ok(bisect(lo, hi, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `α ≤ ((1−δ)/d)e^{1+(1−δ)/d}`: `λ_2c = 0`, all `λ` are δ-unique.
    AlwaysUnique,
    /// `δ = 0`: double root of `T_0` at `w_0`, closed form for `x_c`.
    DoubleRoot,
    /// `δ > 0`: crossing of `x₂^δ(w)` and `x_M^δ(w)`.
    Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub d: f64,
    pub alpha: f64,
    pub delta: f64,
    pub branch: Branch,
    /// `((1−δ)/d)e^{1+(1−δ)/d}`.
    pub alpha_bound: f64,
    pub w_delta: Option<f64>,
    pub x_c: Option<f64>,
    pub w_c: Option<f64>,
    pub lambda_2c: f64,
    /// `|T_δ(x_c; w_c)|` divided by `1 + |terms|`.
    pub residual_t: Option<f64>,
    /// `|M_δ(x_c; w_c)|` divided by `1 + |terms|`.
    pub residual_m: Option<f64>,
}

/// Larger root of `T_δ` at `w`; the minimizer when the two roots have
/// numerically merged just above `w_δ`.
fn x2_of(p: &TreeParams) -> Option<f64> {
    match t_delta_roots(p) {
        TRoots::Two { x2, .. } => Some(x2),
        TRoots::Double { x } => Some(x),
        TRoots::None => t_delta_minimizer(p),
    }
}

/// Unique root of the concave `M_δ` (`δ > 0`): `M_δ(0⁺) = (α+1)δ > 0`,
/// `M_δ → −∞`.
fn xm_of(p: &TreeParams) -> f64 {
    let lo = 1e-12;
    let mut hi = 1.0;
    while m_delta(hi, p) >= 0.0 {
        hi *= 2.0;
    }
    bisect(lo, hi, |x| m_delta(x, p))
}

/// Solves for `λ^δ_{2,c}(d, α)`.
pub fn solve_critical_system(
    d: f64,
    alpha: f64,
    delta: f64,
) -> Result<ThresholdReport, UniquenessError> {
    check_common(d, alpha, delta)?;
    let alpha_bound = small_alpha_bound(d, delta);
    let mut report = ThresholdReport {
        d,
        alpha,
        delta,
        branch: Branch::AlwaysUnique,
        alpha_bound,
        w_delta: None,
        x_c: None,
        w_c: None,
        lambda_2c: 0.0,
        residual_t: None,
        residual_m: None,
    };
    if alpha <= alpha_bound {
        return Ok(report);
    }
    let w_delta = solve_w_delta(d, alpha, delta)?;
    report.w_delta = Some(w_delta);
    // λ is irrelevant to T_δ and M_δ; any positive value will do.
    let at = |w: f64| TreeParams {
        d,
        w,
        lambda: 1.0,
        alpha,
        delta,
    };

    let (x_c, w_c) = if delta == 0.0 {
        report.branch = Branch::DoubleRoot;
        ((d + 1.0) / (d * w_delta - 1.0), w_delta)
    } else {
        report.branch = Branch::Crossing;
        let g = |w: f64| {
            let p = at(w);
            x2_of(&p).unwrap_or(0.0) - xm_of(&p)
        };
        let lo = w_delta * (1.0 + 1e-9);
        let mut hi = w_delta + w_delta.max(1.0);
        while g(hi) <= 0.0 {
            hi *= 2.0;
            if hi > 1e9 {
                let p = at(hi);
                return Err(UniquenessError::Bracket {
                    w_delta,
                    w_max: hi,
                    x2: x2_of(&p).unwrap_or(f64::NAN),
                    xm: xm_of(&p),
                });
            }
        }
        let w_c = bisect(lo, hi, g);
        (x2_of(&at(w_c)).unwrap_or(f64::NAN), w_c)
    };

    let p = at(w_c);
    report.x_c = Some(x_c);
    report.w_c = Some(w_c);
    report.lambda_2c = lambda_of_x(x_c, &p);
    report.residual_t = Some(t_delta(x_c, &p).abs() / (1.0 + t_delta_scale(x_c, &p)));
    report.residual_m = Some(m_delta(x_c, &p).abs() / (1.0 + m_delta_scale(x_c, &p)));
    Ok(report)
}

/// `(λ, d, α, w)` is δ-unique: every fixpoint of `F` has `F′ ≤ 1 − δ`.
pub fn is_delta_unique_tuple(
    lambda: f64,
    d: f64,
    alpha: f64,
    w: f64,
    delta: f64,
) -> Result<bool, UniquenessError> {
    let p = TreeParams::new(d, w, lambda, alpha, delta)
        .map_err(|e| UniquenessError::InvalidParams(e.to_string()))?;
    Ok(find_fixpoints(&p).delta_unique)
}

/// `(λ, d, α)` is δ-unique (for every `w > 0`) iff `λ ≥ λ^δ_{2,c}`.
///
/// The comparison allows a relative slack of [`DECISION_SLACK`] so that
/// `λ` exactly on the threshold (e.g. `λ = α = 4, d = 2, δ = 0`) is not
/// decided by rounding in the solver.
pub fn is_delta_unique(lambda: f64, d: f64, alpha: f64, delta: f64) -> Result<bool, UniquenessError> {
    let r = solve_critical_system(d, alpha, delta)?;
    Ok(lambda >= r.lambda_2c * (1.0 - DECISION_SLACK))
}

/// Equal fugacities on both sides: `is_delta_unique(λ, d, λ, δ)`.
pub fn is_delta_unique_pair(lambda: f64, d: f64, delta: f64) -> Result<bool, UniquenessError> {
    if !(d >= 1.0 - delta) {
        return Err(UniquenessError::InvalidParams(format!(
            "need d ≥ 1 − δ (d = {d}, δ = {delta})"
        )));
    }
    is_delta_unique(lambda, d, lambda, delta)
}

/// Largest gap `δ` for which `(λ, d, α)` is δ-unique, to within `1e-9`.
/// Returns the lower end of the final bracket, so the returned `δ` always
/// passes [`is_delta_unique`]. `None` if the triple is not even 0-unique.
pub fn certify_delta(lambda: f64, d: f64, alpha: f64) -> Result<Option<f64>, UniquenessError> {
    if !is_delta_unique(lambda, d, alpha, 0.0)? {
        return Ok(None);
    }
    let cap = 1.0 - 1e-9;
    let ok = |delta: f64| -> Result<bool, UniquenessError> {
        if d < 1.0 - delta {
            return Ok(false);
        }
        is_delta_unique(lambda, d, alpha, delta)
    };
    if ok(cap)? {
        return Ok(Some(cap));
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// [`certify_delta`] with equal fugacities; the returned `δ` passes
/// [`is_delta_unique_pair`].
pub fn certify_delta_pair(lambda: f64, d: f64) -> Result<Option<f64>, UniquenessError> {
    if !(d >= 1.0) {
        return Err(UniquenessError::InvalidParams(format!("need d ≥ 1, got {d}")));
    }
    certify_delta(lambda, d, lambda)
}

/// `λ_low = 3(d+1)(w+1)α_c(d, w) − 1`, the fugacity above which
/// low-temperature (polymer) methods apply.
pub fn low_temp_threshold(d: f64, w: f64) -> Result<f64, UniquenessError> {
    let pair = closed_form_pair(d, w)?;
    Ok(3.0 * (d + 1.0) * (w + 1.0) * pair.alpha_c - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseRow {
    pub w: f64,
    pub alpha_c: f64,
    pub lambda_c: f64,
    pub lambda_low: f64,
}

/// One row per `w`: `α_c(d, w)`, `λ_c(d, w)` and `λ_low`.
pub fn phase_table(d: f64, w_grid: &[f64]) -> Result<Vec<PhaseRow>, UniquenessError> {
    w_grid
        .iter()
        .map(|&w| {
            let pair = closed_form_pair(d, w)?;
            Ok(PhaseRow {
                w,
                alpha_c: pair.alpha_c,
                lambda_c: pair.lambda_c,
                lambda_low: 3.0 * (d + 1.0) * (w + 1.0) * pair.alpha_c - 1.0,
            })
        })
        .collect()
}

pub const PHASE_CSV_HEADER: &str = "w,alpha_c,lambda_c,lambda_low";

/// CSV with header `w,alpha_c,lambda_c,lambda_low`.
pub fn phase_csv(rows: &[PhaseRow]) -> String {
    let mut out = String::from(PHASE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{:?},{:?},{:?},{:?}\n", r.w, r.alpha_c, r.lambda_c, r.lambda_low));
    }
    out
}

/// Evenly spaced grid of `steps` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}
