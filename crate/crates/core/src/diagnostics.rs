//! Statistical and spectral checks: total variation distance, empirical
//! mixing curves and the spectral-independence bound.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exact::{max_eigenvalue, ExactDistribution, ExactError, Fugacities, Oracle, Pinning, Side};
use crate::graph::BipartiteGraph;
use crate::samplers::{ChainRunner, ChainSpec, SamplerError};
use crate::uniqueness::{is_delta_unique, UniquenessError};

/// Slack in the spectral-independence comparison `max eigenvalue ≤ η`.
pub const SI_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("distributions live on different universes ({0:?}/{1} bits vs {2:?}/{3} bits)")]
    Universe(Side, usize, Side, usize),
    #[error("time points must be strictly increasing")]
    Times,
    #[error("at least one replica is required")]
    NoReplicas,
    #[error("all-pinnings policy needs n_left ≤ {max}, got {n}")]
    TooManyPinnings { n: usize, max: usize },
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Uniqueness(#[from] UniquenessError),
}

/// `½ Σ_X |p(X) − q(X)|`, with configurations missing from a support
/// counted as probability zero.
pub fn tv_distance(p: &ExactDistribution, q: &ExactDistribution) -> Result<f64, DiagnosticsError> {
    if p.side() != q.side() || p.width() != q.width() {
        return Err(DiagnosticsError::Universe(p.side(), p.width(), q.side(), q.width()));
    }
    let (a, b) = (p.support(), q.support());
    let (pa, pb) = (p.probs(), q.probs());
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            sum += pa[i];
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            sum += pb[j];
            j += 1;
        } else {
            sum += (pa[i] - pb[j]).abs();
            i += 1;
            j += 1;
        }
    }
    Ok((0.5 * sum).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingPoint {
    pub t: u64,
    pub tv: f64,
    pub samples: u64,
}

/// Estimated `D_TV(P^t(−1, ·), ν)` on a grid of times, from the all-minus
/// start. This is the distance from one start, not the worst case over
/// starts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingCurve {
    pub chain: &'static str,
    pub start: &'static str,
    pub replicas: u64,
    pub seed: u64,
    pub points: Vec<MixingPoint>,
}

pub const MIXING_CSV_HEADER: &str = "t,tv,samples";

impl MixingCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(MIXING_CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            writeln!(s, "{},{:?},{}", p.t, p.tv, p.samples).unwrap();
        }
        s
    }
}

type Histogram = HashMap<u64, u64>;

/// Runs `replicas` independent copies of `spec` from the all-minus state and
/// compares the empirical law of the left configuration at each time in
/// `times` with `ν`.
///
/// Replica `r` uses the random streams of index `r` under `seed`; counts are
/// summed, so the result does not depend on the rayon thread count.
pub fn mixing_curve(
    spec: ChainSpec,
    g: &BipartiteGraph,
    f: Fugacities,
    times: &[u64],
    replicas: u64,
    seed: u64,
    oracle: Oracle,
) -> Result<MixingCurve, DiagnosticsError> {
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DiagnosticsError::Times);
    }
    if replicas == 0 {
        return Err(DiagnosticsError::NoReplicas);
    }
    let target = oracle.dist_side(g, f, Side::L)?;
    let k = times.len();

    // Validate the chain once so that errors surface before any work.
    ChainRunner::new(spec, g, f, times, oracle)?;
    let hists = (0..replicas)
        .into_par_iter()
        .try_fold(
            || (None::<ChainRunner>, vec![Histogram::new(); k]),
            |(runner, mut h), r| {
                let mut runner = match runner {
                    Some(runner) => runner,
                    None => ChainRunner::new(spec, g, f, times, oracle)?,
                };
                runner.run_replica(seed, r, |i, s| {
                    *h[i].entry(s.left_mask()).or_insert(0) += 1;
                })?;
                Ok::<_, SamplerError>((Some(runner), h))
            },
        )
        .map(|acc| acc.map(|(_, h)| h))
        .try_reduce(
            || vec![Histogram::new(); k],
            |mut a, b| {
                for (ha, hb) in a.iter_mut().zip(b) {
                    for (c, n) in hb {
                        *ha.entry(c).or_insert(0) += n;
                    }
                }
                Ok(a)
            },
        )?;

    let mut points = Vec::with_capacity(k);
    for (&t, h) in times.iter().zip(hists) {
        let emp = ExactDistribution::from_counts(Side::L, g.n_left(), h);
        points.push(MixingPoint {
            t,
            tv: tv_distance(&target, &emp)?,
            samples: replicas,
        });
    }
    Ok(MixingCurve {
        chain: spec.name(),
        start: "all-minus",
        replicas,
        seed,
        points,
    })
}

/// Which pinnings `τ` of `ν` the spectral check visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "policy", content = "k", rename_all = "kebab-case")]
pub enum PinningPolicy {
    /// Only the empty pinning.
    None,
    /// Every pinning with `|Λ| ≤ min(k, nL − 2)`.
    AllUpTo(usize),
}

/// Largest `nL` accepted by [`PinningPolicy::AllUpTo`].
pub const MAX_ALL_PINNINGS_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PinningEigen {
    /// Pinned vertices with their values (`true` = occupied).
    pub pinned: Vec<(usize, bool)>,
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SIReport {
    /// `max(2, max left degree)`.
    pub big_delta: usize,
    /// `Δ − 1`.
    pub d: usize,
    pub delta: f64,
    /// Whether `(λ, d, α)` is δ-unique, i.e. the bound applies.
    pub applicable: bool,
    /// `(Δ/d)(1+α)^Δ/δ`; `None` when the bound does not apply.
    pub eta: Option<f64>,
    pub pinnings: Vec<PinningEigen>,
    pub global_max: f64,
    /// Index into `pinnings` of the largest eigenvalue.
    pub worst: Option<usize>,
    /// `global_max ≤ η + 1e-9`; `None` when the bound does not apply.
    pub pass: Option<bool>,
}

/// `η = (Δ/d)(1+α)^Δ/δ`.
pub fn eta_bound(big_delta: usize, alpha: f64, delta: f64) -> f64 {
    let bd = big_delta as f64;
    bd / (bd - 1.0) * (1.0 + alpha).powi(big_delta as i32) / delta
}

/// Every pinning of at most `max_size` left vertices, smallest sets first,
/// then by vertex mask, then by value mask.
fn pinnings(n: usize, max_size: usize) -> Vec<Pinning> {
    let mut sets: Vec<u64> = (0..1u64 << n)
        .filter(|m| m.count_ones() as usize <= max_size)
        .collect();
    sets.sort_by_key(|m| (m.count_ones(), *m));
    let mut out = Vec::new();
    for set in sets {
        let mut plus = 0u64;
        loop {
            out.push(Pinning::from_pairs(
                &(0..n)
                    .filter(|&u| set >> u & 1 == 1)
                    .map(|u| (u, plus >> u & 1 == 1))
                    .collect::<Vec<_>>(),
            ));
            plus = plus.wrapping_sub(set) & set;
            if plus == 0 {
                break;
            }
        }
    }
    out
}

/// Largest influence eigenvalue over the pinnings selected by `policy`,
/// compared with `η` when `(λ, d, α)` is δ-unique for `d = Δ − 1`.
///
/// Every configuration of `L` has positive `ν`-probability (the right side
/// can always be empty), so every pinning is admissible.
pub fn si_check(
    g: &BipartiteGraph,
    f: Fugacities,
    delta: f64,
    policy: PinningPolicy,
    oracle: Oracle,
) -> Result<SIReport, DiagnosticsError> {
    let n = g.n_left();
    let big_delta = g.max_deg_left().max(2);
    let d = big_delta - 1;
    let applicable = delta > 0.0 && is_delta_unique(f.lambda, d as f64, f.alpha, delta)?;

    let max_size = match policy {
        PinningPolicy::None => 0,
        PinningPolicy::AllUpTo(k) => {
            if n > MAX_ALL_PINNINGS_N {
                return Err(DiagnosticsError::TooManyPinnings {
                    n,
                    max: MAX_ALL_PINNINGS_N,
                });
            }
            k.min(n.saturating_sub(2))
        }
    };
    let mut results = Vec::new();
    for pin in pinnings(n, max_size) {
        let m = oracle.influence_matrix(g, f, pin)?;
        results.push(PinningEigen {
            pinned: pin.pairs(),
            max_eigenvalue: max_eigenvalue(&m)?,
        });
    }
    let worst = results
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.max_eigenvalue.total_cmp(&b.1.max_eigenvalue))
        .map(|e| e.0);
    let global_max = worst.map_or(0.0, |i| results[i].max_eigenvalue);
    let eta = applicable.then(|| eta_bound(big_delta, f.alpha, delta));
    Ok(SIReport {
        big_delta,
        d,
        delta,
        applicable,
        eta,
        pinnings: results,
        global_max,
        worst,
        pass: eta.map(|e| global_max <= e + SI_SLACK),
    })
}
