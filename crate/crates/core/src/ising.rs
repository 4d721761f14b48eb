//! Reduction of bipartite hardcore instances whose left vertices have degree
//! at most 2 to a ferromagnetic Ising model on the right side.
//!
//! Summing out the left side of `μ` leaves a two-spin system on `R` with one
//! interaction per left vertex of degree 2. A change of basis turns it into
//! an Ising model on the graph `H = (R, F)`, where `v ~ w` iff they share a
//! left neighbour:
//!
//! ```text
//! wt(σ) = Π_{e ∈ F : σ agrees on e} β*_e · Π_{v : σ_v = −1} λ*_v
//! β*_e  = (1+λ_L)^{j_e/2},  j_e = |Γ_v ∩ Γ_w|
//! λ*_v  = (1+λ_L)^{k_v + Σ_{e ∋ v} j_e/2} / λ_R,  k_v = |{u ∈ Γ_v : Γ_u = {v}}|
//! ```
//!
//! with `σ_v = +1` meaning `v` is occupied. The marginal of this Ising model
//! is exactly `μ_R`.
//!
//! # Post-processing
//!
//! Fields below 1 are removed so the surviving instance has consistent
//! fields (`λ* ≥ 1`):
//!
//! * isolated vertices are independent of everything else and are dropped;
//! * a degree-1 vertex `v` with field `f < 1`, attached to `u` by coupling
//!   `b`, is summed out. This multiplies the weight of `σ_u = −1` relative
//!   to `σ_u = +1` by `(b·f + 1)/(f + b)`, which is folded into `λ*_u`.
//!
//! Removals repeat (isolated vertices first) until none applies. Since
//! `(b·f + 1)/(f + b) ≥ 1/b`, a fold costs `u` at most the factor its edge
//! to `v` contributed, so every vertex keeps
//! `λ*_u ≥ (1+λ)^{Σ_{surviving e ∋ u} j_e/2}/λ`; with equal fugacities a
//! survivor (degree ≥ 2, or degree 1 with `λ* ≥ 1`) therefore has `λ* ≥ 1`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::exact::{ExactDistribution, ExactError, Fugacities, Oracle, Side};
use crate::graph::BipartiteGraph;

/// Largest instance [`ising_gibbs_exact`] enumerates.
pub const ISING_ENUM_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsingError {
    #[error("left vertex {u} has degree {deg}; the reduction needs degree ≤ 2")]
    Degree { u: usize, deg: usize },
    #[error("fugacities must be positive and finite")]
    InvalidFugacity,
    #[error("{n} Ising vertices exceed the enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error(transparent)]
    Exact(#[from] ExactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsingEdge {
    /// Endpoints as original right-vertex indices, `a < b`.
    pub a: usize,
    pub b: usize,
    /// Number of shared left neighbours.
    pub j: u32,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Rule {
    /// Removed with field `field`; independent of the rest.
    Isolated,
    /// Summed out into `into` through coupling `beta`.
    Degree1Folded { into: usize, beta: f64 },
}

/// One post-processing step, with the field the vertex had when removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Removal {
    pub vertex: usize,
    pub field: f64,
    #[serde(flatten)]
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsingInstance {
    pub lambda_left: f64,
    pub lambda_right: f64,
    /// Built by [`reduce_general`] with `λ_L ≠ λ_R`; field consistency is
    /// not guaranteed then.
    pub general: bool,
    pub n_right: usize,
    /// Surviving right vertices, ascending.
    pub vertices: Vec<usize>,
    /// Fields `λ*`, aligned with `vertices`.
    pub fields: Vec<f64>,
    /// Couplings among surviving vertices, sorted by endpoints.
    pub edges: Vec<IsingEdge>,
    /// Removals in the order applied.
    pub log: Vec<Removal>,
}

impl IsingInstance {
    pub fn min_field(&self) -> Option<f64> {
        self.fields.iter().copied().reduce(f64::min)
    }

    pub fn min_beta(&self) -> Option<f64> {
        self.edges.iter().map(|e| e.beta).reduce(f64::min)
    }

    /// Surviving and removed vertices together, sorted.
    pub fn replayed_vertex_set(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.vertices.iter().copied().chain(self.log.iter().map(|r| r.vertex)).collect();
        all.sort_unstable();
        all
    }
}

/// The reduction with `λ_L = λ_R = λ`.
pub fn reduce(g: &BipartiteGraph, lambda: f64) -> Result<IsingInstance, IsingError> {
    reduce_general(g, lambda, lambda)
}

/// The reduction with separate fugacities `λ_L` (left) and `λ_R` (right).
pub fn reduce_general(g: &BipartiteGraph, lambda_left: f64, lambda_right: f64) -> Result<IsingInstance, IsingError> {
    if !(lambda_left > 0.0 && lambda_left.is_finite() && lambda_right > 0.0 && lambda_right.is_finite()) {
        return Err(IsingError::InvalidFugacity);
    }
    let nr = g.n_right();
    let mut k = vec![0u32; nr];
    let mut j: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for u in 0..g.n_left() {
        match *g.left_neighbors(u) {
            [] => {}
            [v] => k[v] += 1,
            [v, w] => *j.entry((v.min(w), v.max(w))).or_insert(0) += 1,
            ref nb => return Err(IsingError::Degree { u, deg: nb.len() }),
        }
    }

    let base = 1.0 + lambda_left;
    let mut exponent: Vec<f64> = k.iter().map(|&k| k as f64).collect();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nr];
    let mut beta: BTreeMap<(usize, usize), (u32, f64)> = BTreeMap::new();
    for (&(v, w), &je) in &j {
        exponent[v] += je as f64 / 2.0;
        exponent[w] += je as f64 / 2.0;
        adj[v].insert(w);
        adj[w].insert(v);
        beta.insert((v, w), (je, base.powf(je as f64 / 2.0)));
    }
    let mut field: Vec<f64> = exponent.iter().map(|&e| base.powf(e) / lambda_right).collect();

    let mut alive = vec![true; nr];
    let mut log = Vec::new();
    loop {
        let mut changed = false;
        for v in 0..nr {
            if alive[v] && adj[v].is_empty() {
                alive[v] = false;
                log.push(Removal {
                    vertex: v,
                    field: field[v],
                    rule: Rule::Isolated,
                });
                changed = true;
            }
        }
        let leaf = (0..nr).find(|&v| alive[v] && adj[v].len() == 1 && field[v] < 1.0);
        if let Some(v) = leaf {
            let u = *adj[v].iter().next().expect("degree one");
            let (_, b) = beta.remove(&(v.min(u), v.max(u))).expect("edge present");
            let f = field[v];
            field[u] *= (b * f + 1.0) / (f + b);
            adj[u].remove(&v);
            adj[v].clear();
            alive[v] = false;
            log.push(Removal {
                vertex: v,
                field: f,
                rule: Rule::Degree1Folded { into: u, beta: b },
            });
            changed = true;
        }
        if !changed {
            break;
        }
    }

    let vertices: Vec<usize> = (0..nr).filter(|&v| alive[v]).collect();
    Ok(IsingInstance {
        lambda_left,
        lambda_right,
        general: lambda_left != lambda_right,
        n_right: nr,
        fields: vertices.iter().map(|&v| field[v]).collect(),
        vertices,
        edges: beta
            .into_iter()
            .map(|((a, b), (j, beta))| IsingEdge { a, b, j, beta })
            .collect(),
        log,
    })
}

/// Gibbs distribution of the surviving instance. Bit `i` of a configuration
/// is `1` iff `σ = +1` at `inst.vertices[i]`.
pub fn ising_gibbs_exact(inst: &IsingInstance) -> Result<ExactDistribution, IsingError> {
    let n = inst.vertices.len();
    if n > ISING_ENUM_CAP {
        return Err(IsingError::CapExceeded { n, cap: ISING_ENUM_CAP });
    }
    let pos = |v: usize| inst.vertices.binary_search(&v).expect("edge endpoint survives");
    let edges: Vec<(usize, usize, f64)> = inst.edges.iter().map(|e| (pos(e.a), pos(e.b), e.beta.ln())).collect();
    let log_fields: Vec<f64> = inst.fields.iter().map(|f| f.ln()).collect();
    let entries = (0..1u64 << n)
        .map(|s| {
            let agree: f64 = edges
                .iter()
                .filter(|&&(a, b, _)| (s >> a ^ s >> b) & 1 == 0)
                .map(|e| e.2)
                .sum();
            let minus: f64 = (0..n).filter(|&i| s >> i & 1 == 0).map(|i| log_fields[i]).sum();
            (s, agree + minus)
        })
        .collect();
    Ok(ExactDistribution::from_log_weights(Side::R, n, entries))
}

/// Distribution on the original `R` obtained by sampling the surviving
/// instance and then restoring removed vertices in reverse order. Bit `v`
/// is `1` iff right vertex `v` is occupied.
pub fn reconstruct(inst: &IsingInstance) -> Result<ExactDistribution, IsingError> {
    let core = ising_gibbs_exact(inst)?;
    let mut dist: Vec<(u64, f64)> = core
        .iter()
        .map(|(s, p)| {
            let full = inst
                .vertices
                .iter()
                .enumerate()
                .filter(|(i, _)| s >> i & 1 == 1)
                .fold(0u64, |m, (_, &v)| m | 1 << v);
            (full, p)
        })
        .collect();
    for r in inst.log.iter().rev() {
        let f = r.field;
        let mut next = Vec::with_capacity(2 * dist.len());
        for (s, p) in dist {
            // Pr[σ_v = +1 | rest]
            let plus = match r.rule {
                Rule::Isolated => 1.0 / (1.0 + f),
                Rule::Degree1Folded { into, beta: b } => {
                    if s >> into & 1 == 1 {
                        b / (b + f)
                    } else {
                        1.0 / (1.0 + b * f)
                    }
                }
            };
            next.push((s | 1 << r.vertex, p * plus));
            next.push((s, p * (1.0 - plus)));
        }
        dist = next;
    }
    Ok(ExactDistribution::from_log_weights(
        Side::R,
        inst.n_right,
        dist.into_iter().map(|(s, p)| (s, p.ln())).collect(),
    ))
}

/// `max_T |μ_R(T) − ν_Ising(T)|` over all right configurations, comparing
/// the reconstructed Ising marginal with the hardcore model `(λ_L, λ_R)`
/// stored in the instance.
pub fn verify_reduction(g: &BipartiteGraph, inst: &IsingInstance, oracle: Oracle) -> Result<f64, IsingError> {
    let f = Fugacities::new(inst.lambda_left, inst.lambda_right)?;
    let exact = oracle.dist_side(g, f, Side::R)?;
    let rebuilt = reconstruct(inst)?;
    let dev = (0..1u64 << g.n_right())
        .map(|s| (exact.prob(s) - rebuilt.prob(s)).abs())
        .fold(0.0, f64::max);
    Ok(dev)
}
