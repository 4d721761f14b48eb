//! Brute-force ground truth for small instances.
//!
//! Everything here enumerates one side only. Given the left configuration
//! `S ⊆ L`, right spins are conditionally independent, so
//! `Z = Σ_{S⊆L} λ^{|S|} Π_{v∈R} (1 + α·1[Γ_v ∩ S = ∅])` costs `2^{nL}·|R|`.
//! Weights are accumulated in log space so strongly tilted fugacities
//! (`λ/θ` for small `θ`) cannot overflow.
//!
//! Configurations are `u64` bit masks: bit `u` is left vertex `u`; for full
//! configurations bit `nL + v` is right vertex `v`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on the number of enumerated vertices.
pub const DEFAULT_ENUM_CAP: usize = 20;
/// Environment variable overriding [`DEFAULT_ENUM_CAP`].
pub const ENUM_CAP_ENV: &str = "BIPHC_ENUM_CAP";

use crate::graph::BipartiteGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("enumeration over {n} vertices exceeds the cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("left vertex {0} is pinned")]
    Pinned(usize),
    #[error("left vertex {u} out of range (nL = {n_left})")]
    NoSuchVertex { u: usize, n_left: usize },
    #[error("fugacities must be positive and finite (lambda = {lambda}, alpha = {alpha})")]
    InvalidFugacity { lambda: f64, alpha: f64 },
    #[error("influence matrix needs at least two unpinned vertices, found {0}")]
    TooFewUnpinned(usize),
    #[error("matrix is not square ({rows} rows, row of length {len})")]
    NotSquare { rows: usize, len: usize },
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Fugacity `λ` on `L` and `α` on `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fugacities {
    pub lambda: f64,
    pub alpha: f64,
}

impl Fugacities {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self, ExactError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(lambda) && ok(alpha) {
            Ok(Self { lambda, alpha })
        } else {
            Err(ExactError::InvalidFugacity { lambda, alpha })
        }
    }

    /// Same fugacity on both sides.
    pub fn uniform(lambda: f64) -> Result<Self, ExactError> {
        Self::new(lambda, lambda)
    }

    /// Left fugacity multiplied by `factor` (the external-field tilt).
    pub fn tilt_left(self, factor: f64) -> Self {
        Self {
            lambda: self.lambda * factor,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    L,
    R,
    Full,
}

/// A partial assignment on `L` (bit masks over left vertices).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Pinning {
    mask: u64,
    plus: u64,
}

impl Pinning {
    pub fn none() -> Self {
        Self::default()
    }

    /// Pins `u` to occupied (`true`, spin +1) or unoccupied (`false`).
    pub fn with(mut self, u: usize, occupied: bool) -> Self {
        self.mask |= 1 << u;
        if occupied {
            self.plus |= 1 << u;
        } else {
            self.plus &= !(1 << u);
        }
        self
    }

    pub fn from_pairs(pairs: &[(usize, bool)]) -> Self {
        pairs
            .iter()
            .fold(Self::none(), |p, &(u, occ)| p.with(u, occ))
    }

    /// Pins every vertex in `mask` to unoccupied.
    pub fn all_minus(mask: u64) -> Self {
        Self { mask, plus: 0 }
    }

    pub fn is_pinned(&self, u: usize) -> bool {
        self.mask >> u & 1 == 1
    }

    pub fn value(&self, u: usize) -> Option<bool> {
        self.is_pinned(u).then(|| self.plus >> u & 1 == 1)
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn plus_mask(&self) -> u64 {
        self.plus
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn pairs(&self) -> Vec<(usize, bool)> {
        (0..64)
            .filter(|&u| self.is_pinned(u))
            .map(|u| (u, self.plus >> u & 1 == 1))
            .collect()
    }
}

/// An exact, normalized distribution over configurations of one side (or of
/// the whole graph). The support is sorted by configuration mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    side: Side,
    width: usize,
    support: Vec<u64>,
    probs: Vec<f64>,
}

impl ExactDistribution {
    /// Builds a distribution from unnormalized log weights.
    pub fn from_log_weights(side: Side, width: usize, entries: Vec<(u64, f64)>) -> Self {
        let max = entries
            .iter()
            .map(|e| e.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut entries: Vec<(u64, f64)> = entries
            .into_iter()
            .map(|(c, lw)| (c, (lw - max).exp()))
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        let total: f64 = entries.iter().map(|e| e.1).sum();
        let (support, probs) = entries.into_iter().map(|(c, w)| (c, w / total)).unzip();
        Self {
            side,
            width,
            support,
            probs,
        }
    }

    /// Empirical distribution of observed configurations.
    pub fn from_counts(side: Side, width: usize, counts: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut entries: Vec<(u64, u64)> = counts.into_iter().filter(|e| e.1 > 0).collect();
        entries.sort_unstable_by_key(|e| e.0);
        let total: u64 = entries.iter().map(|e| e.1).sum();
        let (support, probs) = entries
            .into_iter()
            .map(|(c, k)| (c, k as f64 / total as f64))
            .unzip();
        Self {
            side,
            width,
            support,
            probs,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Number of bits per configuration.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    /// Probability of a configuration; zero outside the support.
    pub fn prob(&self, config: u64) -> f64 {
        self.support
            .binary_search(&config)
            .map_or(0.0, |i| self.probs[i])
    }

    /// Per-bit occupation probabilities.
    pub fn marginals(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.width];
        for (c, p) in self.iter() {
            for (i, mi) in m.iter_mut().enumerate() {
                if c >> i & 1 == 1 {
                    *mi += p;
                }
            }
        }
        m
    }
}

/// Renders a configuration as a bit string, vertex 0 first.
pub fn config_string(config: u64, width: usize) -> String {
    (0..width)
        .map(|i| if config >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Square matrix `Ψ(i, j) = Pr[j | i] − Pr[j | ī]` over the unpinned left
/// vertices, together with their marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    vertices: Vec<usize>,
    n: usize,
    entries: Vec<f64>,
    marginals: Option<Vec<f64>>,
}

impl InfluenceMatrix {
    /// Wraps an arbitrary square matrix (rows indexed `0..n`).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ExactError> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(ExactError::NotSquare {
                rows: n,
                len: r.len(),
            });
        }
        Ok(Self {
            vertices: (0..n).collect(),
            n,
            entries: rows.into_iter().flatten().collect(),
            marginals: None,
        })
    }

    /// The unpinned left vertices indexing rows and columns.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn marginals(&self) -> Option<&[f64]> {
        self.marginals.as_deref()
    }
}

/// Enumeration front end carrying the vertex cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Oracle {
    cap: usize,
}

impl Default for Oracle {
    /// Cap from `BIPHC_ENUM_CAP` if set and valid, else 20.
    fn default() -> Self {
        let cap = std::env::var(ENUM_CAP_ENV)
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(DEFAULT_ENUM_CAP);
        Self::with_cap(cap)
    }
}

impl Oracle {
    /// Caps above 63 are clamped: configurations are 64-bit masks.
    pub fn with_cap(cap: usize) -> Self {
        Self { cap: cap.min(63) }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    fn check(&self, n: usize) -> Result<(), ExactError> {
        if n > self.cap {
            Err(ExactError::CapExceeded { n, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// `(config, log weight)` for every left configuration consistent with
    /// `pin`. Pinned vertices outside `0..nL` are ignored.
    fn left_log_weights(
        &self,
        g: &BipartiteGraph,
        f: Fugacities,
        pin: Pinning,
    ) -> Result<Vec<(u64, f64)>, ExactError> {
        let n = g.n_left();
        self.check(n)?;
        let all = if n == 0 { 0 } else { u64::MAX >> (64 - n) };
        let free = all & !pin.mask();
        let base = pin.plus_mask() & all;
        let rmask = right_masks(g);
        let (ll, la) = (f.lambda.ln(), f.alpha.ln_1p());

        let mut out = Vec::with_capacity(1 << free.count_ones());
        let mut sub = 0u64;
        loop {
            let s = base | sub;
            let n_free = rmask.iter().filter(|&&m| m & s == 0).count();
            out.push((s, s.count_ones() as f64 * ll + n_free as f64 * la));
            // next submask of `free` in increasing order
            sub = sub.wrapping_sub(free) & free;
            if sub == 0 {
                break;
            }
        }
        Ok(out)
    }

    /// `Z = Σ_{S⊆L} λ^{|S|} Π_{v∈R}(1 + α·1[Γ_v ∩ S = ∅])`.
    pub fn partition_function(&self, g: &BipartiteGraph, f: Fugacities) -> Result<f64, ExactError> {
        self.log_partition_function(g, f).map(f64::exp)
    }

    pub fn log_partition_function(
        &self,
        g: &BipartiteGraph,
        f: Fugacities,
    ) -> Result<f64, ExactError> {
        let lw = self.left_log_weights(g, f, Pinning::none())?;
        Ok(log_sum_exp(lw.iter().map(|e| e.1)))
    }

    /// Exact distribution on `L`, on `R`, or on all of `L ∪ R`.
    ///
    /// `R` is obtained by enumerating `R` and multiplying out the
    /// conditionally independent left spins (the mirror image of the `L`
    /// computation), so the cap applies to `nR`. `Full` enumerates `L` and,
    /// for each left configuration, every subset of the free right vertices;
    /// the cap applies to `nL + nR`.
    pub fn dist_side(
        &self,
        g: &BipartiteGraph,
        f: Fugacities,
        side: Side,
    ) -> Result<ExactDistribution, ExactError> {
        match side {
            Side::L => self.dist_left(g, f, Pinning::none()),
            Side::R => {
                let mirrored = mirror(g);
                let mf = Fugacities {
                    lambda: f.alpha,
                    alpha: f.lambda,
                };
                let lw = self.left_log_weights(&mirrored, mf, Pinning::none())?;
                Ok(ExactDistribution::from_log_weights(Side::R, g.n_right(), lw))
            }
            Side::Full => {
                let (nl, nr) = (g.n_left(), g.n_right());
                self.check(nl + nr)?;
                let rmask = right_masks(g);
                let (ll, la) = (f.lambda.ln(), f.alpha.ln());
                let mut entries = Vec::new();
                for s in 0..(1u64 << nl) {
                    let free: u64 = rmask
                        .iter()
                        .enumerate()
                        .filter(|(_, &m)| m & s == 0)
                        .fold(0, |acc, (v, _)| acc | 1 << v);
                    let base = s.count_ones() as f64 * ll;
                    let mut t = 0u64;
                    loop {
                        entries.push((s | t << nl, base + t.count_ones() as f64 * la));
                        t = t.wrapping_sub(free) & free;
                        if t == 0 {
                            break;
                        }
                    }
                }
                Ok(ExactDistribution::from_log_weights(Side::Full, nl + nr, entries))
            }
        }
    }

    /// Distribution of `ν^τ` on `L` (pinned coordinates included as fixed bits).
    pub fn dist_left(
        &self,
        g: &BipartiteGraph,
        f: Fugacities,
        pin: Pinning,
    ) -> Result<ExactDistribution, ExactError> {
        let lw = self.left_log_weights(g, f, pin)?;
        Ok(ExactDistribution::from_log_weights(Side::L, g.n_left(), lw))
    }

    /// `Pr_{ν^τ}[u occupied]`.
    pub fn conditional_marginal(
        &self,
        g: &BipartiteGraph,
        f: Fugacities,
        pin: Pinning,
        u: usize,
    ) -> Result<f64, ExactError> {
        if u >= g.n_left() {
            return Err(ExactError::NoSuchVertex {
                u,
                n_left: g.n_left(),
            });
        }
        if pin.is_pinned(u) {
            return Err(ExactError::Pinned(u));
        }
        let d = self.dist_left(g, f, pin)?;
        Ok(d.iter().filter(|(c, _)| c >> u & 1 == 1).map(|e| e.1).sum())
    }

    /// Influence matrix of `ν^τ` over the unpinned left vertices.
    ///
    /// Rows of vertices whose marginal is 0 or 1 are zero off the diagonal.
    pub fn influence_matrix(
        &self,
        g: &BipartiteGraph,
        f: Fugacities,
        pin: Pinning,
    ) -> Result<InfluenceMatrix, ExactError> {
        let vertices: Vec<usize> = (0..g.n_left()).filter(|&u| !pin.is_pinned(u)).collect();
        let k = vertices.len();
        if k < 2 {
            return Err(ExactError::TooFewUnpinned(k));
        }
        let d = self.dist_left(g, f, pin)?;

        let mut p = vec![0.0; k];
        let mut q = vec![0.0; k];
        let mut pp = vec![0.0; k * k];
        for (c, w) in d.iter() {
            let on: Vec<bool> = vertices.iter().map(|&u| c >> u & 1 == 1).collect();
            for i in 0..k {
                if on[i] {
                    p[i] += w;
                    for j in 0..k {
                        if on[j] {
                            pp[i * k + j] += w;
                        }
                    }
                } else {
                    q[i] += w;
                }
            }
        }

        let mut entries = vec![0.0; k * k];
        for i in 0..k {
            entries[i * k + i] = 1.0;
            if p[i] <= 0.0 || q[i] <= 0.0 {
                continue;
            }
            for j in (0..k).filter(|&j| j != i) {
                let given_plus = pp[i * k + j] / p[i];
                let given_minus = (p[j] - pp[i * k + j]) / q[i];
                entries[i * k + j] = (given_plus - given_minus).clamp(-1.0, 1.0);
            }
        }
        Ok(InfluenceMatrix {
            vertices,
            n: k,
            entries,
            marginals: Some(p),
        })
    }
}

/// Bit mask of `Γ_v` for every right vertex.
fn right_masks(g: &BipartiteGraph) -> Vec<u64> {
    (0..g.n_right())
        .map(|v| g.right_neighbors(v).iter().fold(0u64, |m, &u| m | 1 << u))
        .collect()
}

/// The same graph with the roles of the two sides exchanged.
fn mirror(g: &BipartiteGraph) -> BipartiteGraph {
    let edges: Vec<_> = g.edges().into_iter().map(|(u, v)| (v, u)).collect();
    BipartiteGraph::from_edges(g.n_right(), g.n_left(), &edges).expect("mirrored edges are valid")
}

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `Z` with the cap from the environment (default 20).
pub fn partition_function(g: &BipartiteGraph, f: Fugacities) -> Result<f64, ExactError> {
    Oracle::default().partition_function(g, f)
}

pub fn dist_side(g: &BipartiteGraph, f: Fugacities, side: Side) -> Result<ExactDistribution, ExactError> {
    Oracle::default().dist_side(g, f, side)
}

pub fn conditional_marginal(
    g: &BipartiteGraph,
    f: Fugacities,
    pin: Pinning,
    u: usize,
) -> Result<f64, ExactError> {
    Oracle::default().conditional_marginal(g, f, pin, u)
}

pub fn influence_matrix(
    g: &BipartiteGraph,
    f: Fugacities,
    pin: Pinning,
) -> Result<InfluenceMatrix, ExactError> {
    Oracle::default().influence_matrix(g, f, pin)
}

const EIG_TOL: f64 = 1e-9;
const EIG_MAX_ITER: usize = 100_000;

/// Largest eigenvalue of an influence matrix.
///
/// With marginals in `(0, 1)` the matrix is `D⁻¹C` for the covariance `C`
/// and `D = diag(C)`, so `D^{1/2} Ψ D^{-1/2}` is a correlation matrix:
/// symmetric positive semidefinite. Power iteration on it with a Rayleigh
/// quotient estimate converges to the top eigenvalue. Without that
/// structure (hand-built matrices, degenerate marginals) the iteration runs
/// on `Ψ + cI` with `c` the largest absolute row sum, which makes the top of
/// a real spectrum dominant.
pub fn max_eigenvalue(m: &InfluenceMatrix) -> Result<f64, ExactError> {
    let n = m.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let scale = m
        .marginals()
        .filter(|p| p.iter().all(|&x| x > 0.0 && x < 1.0))
        .map(|p| p.iter().map(|&x| (x * (1.0 - x)).sqrt()).collect::<Vec<_>>());

    let (a, shift) = match scale {
        Some(s) => {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] = m.get(i, j) * s[i] / s[j];
                }
            }
            // symmetrize away rounding noise
            for i in 0..n {
                for j in 0..i {
                    let avg = 0.5 * (a[i * n + j] + a[j * n + i]);
                    a[i * n + j] = avg;
                    a[j * n + i] = avg;
                }
            }
            (a, 0.0)
        }
        None => {
            let c = (0..n)
                .map(|i| (0..n).map(|j| m.get(i, j).abs()).sum::<f64>())
                .fold(0.0, f64::max);
            let mut a = m.entries.clone();
            for i in 0..n {
                a[i * n + i] += c;
            }
            (a, c)
        }
    };

    let matvec = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            y[i] = (0..n).map(|j| a[i * n + j] * x[j]).sum();
        }
    };
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();

    // A slightly irregular start vector avoids accidental orthogonality to
    // the top eigenvector.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i as f64 + 1.0).sqrt().fract())).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..EIG_MAX_ITER {
        matvec(&x, &mut y);
        let rho: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        residual = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (yi - rho * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= EIG_TOL * rho.abs().max(1.0) {
            return Ok(rho - shift);
        }
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(-shift);
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    Err(ExactError::NoConvergence {
        iterations: EIG_MAX_ITER,
        residual,
    })
}

/// Perfect sampler for `ν^τ` restricted to the unpinned left vertices,
/// backed by a cumulative table over the enumerated support.
#[derive(Debug, Clone)]
pub struct ConditionalSampler {
    configs: Vec<u64>,
    cdf: Vec<f64>,
}

impl ConditionalSampler {
    pub fn new(
        oracle: &Oracle,
        g: &BipartiteGraph,
        f: Fugacities,
        pin: Pinning,
    ) -> Result<Self, ExactError> {
        let d = oracle.dist_left(g, f, pin)?;
        let mut acc = 0.0;
        let cdf = d
            .probs()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            configs: d.support().to_vec(),
            cdf,
        })
    }

    /// Draws one left configuration mask.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let total = *self.cdf.last().expect("support is never empty");
        let r = rng.gen::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c <= r);
        self.configs[i.min(self.configs.len() - 1)]
    }
}
