//! Markov chains for the bipartite hardcore model.
//!
//! Spins are `+1` (occupied) and `−1` (unoccupied). One-side chains act on
//! `ν = μ_L` only and keep, for every right vertex `v`, the counter
//! `cnt[v] = |{u ∈ Γ_v : X(u) = +1}|`. The conditional law of a left spin
//! given the rest of `L` is then
//! `Pr[X(u) = +1] = λ / (λ + (1+α)^{F(u)})`, where `F(u)` counts the right
//! neighbours of `u` with no *other* occupied neighbour. Coins are uniform on
//! `[0, 1)` and a spin becomes `+1` iff `coin < p`.
//!
//! # Random streams
//!
//! All randomness is ChaCha8. A run with seed `s` keys the generator with
//! `ChaCha8Rng::seed_from_u64(s)` and gives replica `r` the two streams
//! `2r` (main: site choice, subsampling, right completion) and `2r + 1`
//! (inner chain of field dynamics). Streams of one key are independent, so
//! replicas never share randomness and results do not depend on the number
//! of worker threads.

use std::collections::HashMap;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exact::{ConditionalSampler, ExactError, Fugacities, Oracle, Pinning};
use crate::graph::BipartiteGraph;

pub type ChainRng = ChaCha8Rng;
pub type Spin = i8;
pub const PLUS: Spin = 1;
pub const MINUS: Spin = -1;

/// Stream `id` of the generator keyed by `seed`.
pub fn stream(seed: u64, id: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Main stream of replica `r`.
pub fn replica_stream(seed: u64, r: u64) -> ChainRng {
    stream(seed, 2 * r)
}

/// Inner-chain stream of replica `r`.
pub fn inner_stream(seed: u64, r: u64) -> ChainRng {
    stream(seed, 2 * r + 1)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("theta must lie in (0, 1), got {0}")]
    InvalidTheta(f64),
    #[error("invalid sampler parameters: {0}")]
    InvalidParams(String),
    #[error("configuration length {found} does not match graph side of size {expected}")]
    Length { expected: usize, found: usize },
    #[error("edge ({u}, {v}) has both endpoints occupied")]
    NotIndependent { u: usize, v: usize },
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// Spin assignment plus per-right-vertex occupied-neighbour counters.
#[derive(Debug, Clone)]
pub struct ChainState {
    spins_left: Vec<Spin>,
    spins_right: Option<Vec<Spin>>,
    cnt: Vec<u32>,
    rng: ChainRng,
    step: u64,
}

impl ChainState {
    /// All left spins `−1`, no right side.
    pub fn new(g: &BipartiteGraph, rng: ChainRng) -> Self {
        Self {
            spins_left: vec![MINUS; g.n_left()],
            spins_right: None,
            cnt: vec![0; g.n_right()],
            rng,
            step: 0,
        }
    }

    /// All spins `−1` on both sides.
    pub fn new_two_sided(g: &BipartiteGraph, rng: ChainRng) -> Self {
        Self {
            spins_right: Some(vec![MINUS; g.n_right()]),
            ..Self::new(g, rng)
        }
    }

    pub fn from_left(g: &BipartiteGraph, spins: Vec<Spin>, rng: ChainRng) -> Result<Self, SamplerError> {
        if spins.len() != g.n_left() {
            return Err(SamplerError::Length {
                expected: g.n_left(),
                found: spins.len(),
            });
        }
        let mut s = Self::new(g, rng);
        s.reset_left(g, &spins);
        Ok(s)
    }

    pub fn from_full(
        g: &BipartiteGraph,
        left: Vec<Spin>,
        right: Vec<Spin>,
        rng: ChainRng,
    ) -> Result<Self, SamplerError> {
        if right.len() != g.n_right() {
            return Err(SamplerError::Length {
                expected: g.n_right(),
                found: right.len(),
            });
        }
        let mut s = Self::from_left(g, left, rng)?;
        for (u, v) in g.edges() {
            if s.spins_left[u] == PLUS && right[v] == PLUS {
                return Err(SamplerError::NotIndependent { u, v });
            }
        }
        s.spins_right = Some(right);
        Ok(s)
    }

    /// Overwrites the left spins and recounts `cnt`.
    pub fn reset_left(&mut self, g: &BipartiteGraph, spins: &[Spin]) {
        self.spins_left.copy_from_slice(spins);
        self.recount(g);
    }

    fn recount(&mut self, g: &BipartiteGraph) {
        for (v, c) in self.cnt.iter_mut().enumerate() {
            *c = g
                .right_neighbors(v)
                .iter()
                .filter(|&&u| self.spins_left[u] == PLUS)
                .count() as u32;
        }
    }

    pub fn spins_left(&self) -> &[Spin] {
        &self.spins_left
    }

    pub fn spins_right(&self) -> Option<&[Spin]> {
        self.spins_right.as_deref()
    }

    pub fn cnt(&self) -> &[u32] {
        &self.cnt
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn rng_mut(&mut self) -> &mut ChainRng {
        &mut self.rng
    }

    pub fn into_rng(self) -> ChainRng {
        self.rng
    }

    /// Occupied left vertices as a bit mask (bit `u` = vertex `u`).
    pub fn left_mask(&self) -> u64 {
        mask_of(&self.spins_left)
    }

    /// Full configuration mask: left bits first, then right bits at `nL + v`.
    /// Right spins count as `−1` when absent.
    pub fn full_mask(&self) -> u64 {
        let r = self.spins_right.as_deref().map_or(0, mask_of);
        self.left_mask() | r << self.spins_left.len()
    }

    /// Sets a left spin, maintaining the counters.
    pub fn set_left(&mut self, g: &BipartiteGraph, u: usize, spin: Spin) {
        let old = self.spins_left[u];
        if old == spin {
            return;
        }
        self.spins_left[u] = spin;
        for &v in g.left_neighbors(u) {
            if spin == PLUS {
                self.cnt[v] += 1;
            } else {
                self.cnt[v] -= 1;
            }
        }
    }

    /// `F(X, u)`: right neighbours of `u` with no other occupied neighbour.
    pub fn free_count(&self, g: &BipartiteGraph, u: usize) -> u32 {
        let own = u32::from(self.spins_left[u] == PLUS);
        g.left_neighbors(u)
            .iter()
            .filter(|&&v| self.cnt[v] == own)
            .count() as u32
    }

    /// `Pr[X(u) = +1 | X(L \ {u})] = λ/(λ + (1+α)^{F(u)})`.
    pub fn update_probability(&self, g: &BipartiteGraph, f: Fugacities, u: usize) -> f64 {
        nu_probability(f, self.free_count(g, u))
    }

    /// Recounts from scratch and checks the counters and, when right spins
    /// are present, independence.
    pub fn check_invariants(&self, g: &BipartiteGraph) -> bool {
        let counts_ok = (0..g.n_right()).all(|v| {
            let c = g
                .right_neighbors(v)
                .iter()
                .filter(|&&u| self.spins_left[u] == PLUS)
                .count() as u32;
            c == self.cnt[v]
        });
        let indep_ok = self.spins_right.as_ref().map_or(true, |r| {
            (0..g.n_right()).all(|v| r[v] == MINUS || self.cnt[v] == 0)
        });
        counts_ok && indep_ok
    }

    /// Resamples every right spin from `μ` given the left spins.
    pub fn complete_right(&mut self, f: Fugacities) {
        let spins = complete_right_from_counts(&self.cnt, f, &mut self.rng);
        self.spins_right = Some(spins);
    }
}

fn mask_of(spins: &[Spin]) -> u64 {
    spins
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == PLUS)
        .fold(0, |m, (i, _)| m | 1 << i)
}

/// `λ/(λ + (1+α)^F)`.
pub fn nu_probability(f: Fugacities, free: u32) -> f64 {
    f.lambda / (f.lambda + (1.0 + f.alpha).powi(free as i32))
}

fn coin<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.gen::<f64>() < p
}

/// Heat-bath update of a uniformly chosen left vertex under `ν`.
pub fn glauber_nu_step(state: &mut ChainState, g: &BipartiteGraph, f: Fugacities) {
    state.step += 1;
    let n = g.n_left();
    if n == 0 {
        return;
    }
    let u = Uniform::new(0, n).sample(&mut state.rng);
    nu_update(state, g, f, u);
}

/// Heat-bath update of a vertex chosen uniformly from `active` (the inner
/// chain of field dynamics, where the pinned set is left out).
pub fn glauber_nu_step_on(state: &mut ChainState, g: &BipartiteGraph, f: Fugacities, active: &[usize]) {
    state.step += 1;
    if active.is_empty() {
        return;
    }
    let u = active[Uniform::new(0, active.len()).sample(&mut state.rng)];
    nu_update(state, g, f, u);
}

#[inline]
fn nu_update(state: &mut ChainState, g: &BipartiteGraph, f: Fugacities, u: usize) {
    let p = state.update_probability(g, f, u);
    let spin = if coin(&mut state.rng, p) { PLUS } else { MINUS };
    state.set_left(g, u, spin);
}

/// Precomputed form of [`glauber_nu_step`] for long runs: flat adjacency,
/// the update probability tabulated by free count, and the vertex sampler
/// built once. It consumes the same random numbers and makes the same
/// moves as repeated calls to [`glauber_nu_step`].
#[derive(Debug, Clone)]
pub struct NuKernel {
    pick: Option<Uniform<usize>>,
    offsets: Vec<usize>,
    adj: Vec<usize>,
    probs: Vec<f64>,
}

impl NuKernel {
    pub fn new(g: &BipartiteGraph, f: Fugacities) -> Self {
        let n = g.n_left();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut adj = Vec::new();
        offsets.push(0);
        for u in 0..n {
            adj.extend_from_slice(g.left_neighbors(u));
            offsets.push(adj.len());
        }
        Self {
            pick: (n > 0).then(|| Uniform::new(0, n)),
            offsets,
            adj,
            probs: (0..=g.max_deg_left() as u32).map(|k| nu_probability(f, k)).collect(),
        }
    }

    /// Advances `state` by `steps` single-site updates.
    pub fn run(&self, state: &mut ChainState, steps: u64) {
        state.step += steps;
        let Some(pick) = self.pick else {
            return;
        };
        let ChainState {
            spins_left,
            cnt,
            rng,
            ..
        } = state;
        for _ in 0..steps {
            let u = pick.sample(rng);
            let nb = &self.adj[self.offsets[u]..self.offsets[u + 1]];
            let old = spins_left[u] == PLUS;
            let own = u32::from(old);
            let free = nb.iter().filter(|&&v| cnt[v] == own).count();
            let new = rng.gen::<f64>() < self.probs[free];
            if new != old {
                spins_left[u] = if new { PLUS } else { MINUS };
                if new {
                    nb.iter().for_each(|&v| cnt[v] += 1);
                } else {
                    nb.iter().for_each(|&v| cnt[v] -= 1);
                }
            }
        }
    }
}

/// Heat-bath update of a uniformly chosen vertex of `L ∪ R` under `μ`.
///
/// # Panics
/// If the state has no right spins.
pub fn glauber_mu_step(state: &mut ChainState, g: &BipartiteGraph, f: Fugacities) {
    state.step += 1;
    let (nl, nr) = (g.n_left(), g.n_right());
    if nl + nr == 0 {
        return;
    }
    let i = Uniform::new(0, nl + nr).sample(&mut state.rng);
    let right = state
        .spins_right
        .as_mut()
        .expect("two-side Glauber needs right spins");
    if i < nl {
        let blocked = g.left_neighbors(i).iter().any(|&v| right[v] == PLUS);
        let spin = if !blocked && coin(&mut state.rng, f.lambda / (1.0 + f.lambda)) {
            PLUS
        } else {
            MINUS
        };
        state.set_left(g, i, spin);
    } else {
        let v = i - nl;
        right[v] = if state.cnt[v] == 0 && coin(&mut state.rng, f.alpha / (1.0 + f.alpha)) {
            PLUS
        } else {
            MINUS
        };
    }
}

/// Block dynamics: a uniformly chosen left vertex is resampled by the `ν`
/// rule (right side integrated out), then all of `R` is redrawn given `L`.
///
/// The left update consumes exactly the random numbers of
/// [`glauber_nu_step`], so both chains are coupled on `L` under equal seeds.
pub fn block_dynamics_step(state: &mut ChainState, g: &BipartiteGraph, f: Fugacities) {
    glauber_nu_step(state, g, f);
    state.complete_right(f);
}

fn complete_right_from_counts<R: Rng + ?Sized>(cnt: &[u32], f: Fugacities, rng: &mut R) -> Vec<Spin> {
    let p = f.alpha / (1.0 + f.alpha);
    cnt.iter()
        .map(|&c| if c == 0 && coin(rng, p) { PLUS } else { MINUS })
        .collect()
}

/// Draws right spins from `μ` conditioned on the left spins: each `v ∈ R`
/// independently `+1` with probability `(α/(1+α))·1[cnt(v) = 0]`.
pub fn complete_right<R: Rng + ?Sized>(
    g: &BipartiteGraph,
    f: Fugacities,
    spins_left: &[Spin],
    rng: &mut R,
) -> Vec<Spin> {
    let cnt: Vec<u32> = (0..g.n_right())
        .map(|v| {
            g.right_neighbors(v)
                .iter()
                .filter(|&&u| spins_left[u] == PLUS)
                .count() as u32
        })
        .collect();
    complete_right_from_counts(&cnt, f, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerMode {
    /// `m` single-site Glauber steps on the tilted conditional measure.
    Glauber,
    /// A perfect sample from the tilted conditional measure by enumeration.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldDynamicsParams {
    pub theta: f64,
    /// Outer iterations.
    pub t: u64,
    /// Inner Glauber steps per outer iteration.
    pub m: u64,
    pub inner_mode: InnerMode,
}

impl FieldDynamicsParams {
    pub fn new(theta: f64, t: u64, m: u64, inner_mode: InnerMode) -> Result<Self, SamplerError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(SamplerError::InvalidTheta(theta));
        }
        if t == 0 {
            return Err(SamplerError::InvalidParams("T must be at least 1".into()));
        }
        if m == 0 && inner_mode == InnerMode::Glauber {
            return Err(SamplerError::InvalidParams(
                "m must be at least 1 with Glauber inner chains".into(),
            ));
        }
        Ok(Self {
            theta,
            t,
            m,
            inner_mode,
        })
    }

    /// Desk-scale defaults: `θ = 1/2`, `T = ⌈10 log(1/ε)⌉`,
    /// `m = ⌈21 nL log(max(2, nL))⌉`.
    pub fn practical(n_left: usize, epsilon: f64, inner_mode: InnerMode) -> Result<Self, SamplerError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(SamplerError::InvalidParams(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let n = n_left as f64;
        let t = (10.0 * (1.0 / epsilon).ln()).ceil().max(1.0) as u64;
        let m = (21.0 * n * n.max(2.0).ln()).ceil().max(1.0) as u64;
        Self::new(0.5, t, m, inner_mode)
    }
}

/// The parameters of the analysed algorithm, which are far outside any
/// practical range; `T` is reported through its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaperParameters {
    /// `C = (1+λ)^Δ`.
    pub c: f64,
    /// `θ = (C e⁹ Δ log n / λ)^{-1}`.
    pub theta: f64,
    /// Exponent `10⁵ C⁵ / δ` of the base `C e⁹ Δ log n / λ` in `T`.
    pub exponent: f64,
    /// Natural log of `T`.
    pub log_t: f64,
    /// `T` when it fits in a `u64`.
    pub t: Option<u64>,
    /// `m = ⌈⌈log(4T/ε)/log n⌉ · 21 n log n⌉`.
    pub m: f64,
    /// Whether `log(n log C/(ε²/2))` was below 1 and clamped to 1.
    pub log_clamped: bool,
    /// Always true: these values certify the analysis, not a usable run.
    pub theoretical: bool,
}

/// `θ`, `T`, `m` from the mixing analysis for `n = nL`, `Δ = max_deg_left`.
pub fn paper_parameters(
    g: &BipartiteGraph,
    f: Fugacities,
    delta: f64,
    epsilon: f64,
) -> Result<PaperParameters, SamplerError> {
    let n = g.n_left();
    if n < 2 {
        return Err(SamplerError::InvalidParams(format!("need n_left ≥ 2, got {n}")));
    }
    if !(delta > 0.0 && delta < 1.0 && epsilon > 0.0 && epsilon < 1.0) {
        return Err(SamplerError::InvalidParams(format!(
            "need δ, ε in (0, 1), got δ = {delta}, ε = {epsilon}"
        )));
    }
    let n = n as f64;
    let big_delta = g.max_deg_left().max(1) as f64;
    let c = (1.0 + f.lambda).powf(big_delta);
    let base = c * 9f64.exp() * big_delta * n.ln() / f.lambda;
    let exponent = 1e5 * c.powi(5) / delta;
    let raw = (n * c.ln() / (epsilon * epsilon / 2.0)).ln();
    let log_clamped = !(raw >= 1.0);
    let inner = if log_clamped { 1.0 } else { raw };
    let log_t = exponent * base.ln() + inner.ln();
    let t = (log_t < (u64::MAX as f64).ln()).then(|| log_t.exp().ceil() as u64);
    let k = ((4f64.ln() + log_t - epsilon.ln()) / n.ln()).ceil();
    Ok(PaperParameters {
        c,
        theta: 1.0 / base,
        exponent,
        log_t,
        t,
        m: (k * 21.0 * n * n.ln()).ceil(),
        log_clamped,
        theoretical: true,
    })
}

/// Field dynamics on `ν` with retention `θ`, followed by right completion.
///
/// From `X₀ = −1`, each outer step pins every `i` with `X(i) = −1` to `−1`
/// with probability `1 − θ` and redraws the unpinned coordinates from `ν`
/// tilted by `1/θ` (left fugacity `λ/θ`) conditioned on the pins. The chain
/// is reversible with respect to `ν` itself.
pub struct FieldDynamics<'g> {
    g: &'g BipartiteGraph,
    f: Fugacities,
    params: FieldDynamicsParams,
    oracle: Oracle,
    tables: HashMap<u64, ConditionalSampler>,
}

impl<'g> FieldDynamics<'g> {
    pub fn new(
        g: &'g BipartiteGraph,
        f: Fugacities,
        params: FieldDynamicsParams,
        oracle: Oracle,
    ) -> Result<Self, SamplerError> {
        let params = FieldDynamicsParams::new(params.theta, params.t, params.m, params.inner_mode)?;
        if params.inner_mode == InnerMode::Exact && g.n_left() > oracle.cap() {
            return Err(ExactError::CapExceeded {
                n: g.n_left(),
                cap: oracle.cap(),
            }
            .into());
        }
        Ok(Self {
            g,
            f,
            params,
            oracle,
            tables: HashMap::new(),
        })
    }

    pub fn params(&self) -> FieldDynamicsParams {
        self.params
    }

    /// Runs replica `r` of the experiment keyed by `seed`.
    pub fn run_replica(&mut self, seed: u64, r: u64) -> Result<ChainState, SamplerError> {
        let g = self.g;
        let n = g.n_left();
        let tilted = self.f.tilt_left(1.0 / self.params.theta);
        let mut outer = replica_stream(seed, r);
        let mut inner = ChainState::new(g, inner_stream(seed, r));

        let mut x = vec![MINUS; n];
        let mut start = vec![MINUS; n];
        let mut active = Vec::with_capacity(n);
        for _ in 0..self.params.t {
            let mut pinned = 0u64;
            active.clear();
            for i in 0..n {
                if x[i] == MINUS && coin(&mut outer, 1.0 - self.params.theta) {
                    pinned |= 1 << i;
                    start[i] = MINUS;
                } else {
                    active.push(i);
                    start[i] = PLUS;
                }
            }
            match self.params.inner_mode {
                InnerMode::Glauber => {
                    inner.reset_left(g, &start);
                    for _ in 0..self.params.m {
                        glauber_nu_step_on(&mut inner, g, tilted, &active);
                    }
                    x.copy_from_slice(inner.spins_left());
                }
                InnerMode::Exact => {
                    let table = match self.tables.entry(pinned) {
                        std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                        std::collections::hash_map::Entry::Vacant(e) => e.insert(
                            ConditionalSampler::new(&self.oracle, g, tilted, Pinning::all_minus(pinned))?,
                        ),
                    };
                    let s = table.sample(inner.rng_mut());
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi = if s >> i & 1 == 1 { PLUS } else { MINUS };
                    }
                }
            }
        }
        let mut state = ChainState::from_left(g, x, outer)?;
        state.step = self.params.t;
        state.complete_right(self.f);
        Ok(state)
    }

    /// Replica 0 of the experiment keyed by `seed`.
    pub fn run(&mut self, seed: u64) -> Result<ChainState, SamplerError> {
        self.run_replica(seed, 0)
    }
}

/// One field-dynamics run with the default oracle cap.
pub fn field_dynamics_run(
    g: &BipartiteGraph,
    f: Fugacities,
    params: FieldDynamicsParams,
    seed: u64,
) -> Result<ChainState, SamplerError> {
    FieldDynamics::new(g, f, params, Oracle::default())?.run(seed)
}

/// Which chain to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "chain", rename_all = "lowercase")]
pub enum ChainSpec {
    /// One-side Glauber on `ν`.
    Nu,
    /// Two-side Glauber on `μ`.
    Mu,
    /// Block dynamics.
    Block,
    /// Field dynamics; one "step" is one outer iteration.
    Field(FieldDynamicsParams),
}

impl ChainSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ChainSpec::Nu => "nu",
            ChainSpec::Mu => "mu",
            ChainSpec::Block => "block",
            ChainSpec::Field(_) => "field",
        }
    }

    pub fn two_sided(&self) -> bool {
        !matches!(self, ChainSpec::Nu)
    }
}

/// Runs replicas of one chain from the all-minus state and reports the
/// state at each checkpoint. Keeps per-chain precomputation (the `ν`
/// kernel, field-dynamics sampling tables) across replicas.
///
/// Single-site chains advance one chain through the checkpoints. Field
/// dynamics restarts per checkpoint with `T` set to that time, since its
/// right completion only happens at the end of a run; the restarts share
/// their random streams.
pub struct ChainRunner<'g> {
    spec: ChainSpec,
    g: &'g BipartiteGraph,
    f: Fugacities,
    times: Vec<u64>,
    kernel: Option<NuKernel>,
    field: Vec<Option<FieldDynamics<'g>>>,
}

impl<'g> ChainRunner<'g> {
    pub fn new(
        spec: ChainSpec,
        g: &'g BipartiteGraph,
        f: Fugacities,
        times: &[u64],
        oracle: Oracle,
    ) -> Result<Self, SamplerError> {
        let field = match spec {
            ChainSpec::Field(params) => times
                .iter()
                .map(|&t| {
                    (t > 0)
                        .then(|| FieldDynamics::new(g, f, FieldDynamicsParams { t, ..params }, oracle))
                        .transpose()
                })
                .collect::<Result<_, _>>()?,
            _ => Vec::new(),
        };
        Ok(Self {
            spec,
            g,
            f,
            times: times.to_vec(),
            kernel: matches!(spec, ChainSpec::Nu).then(|| NuKernel::new(g, f)),
            field,
        })
    }

    /// Runs replica `r` under `seed`, calling `visit(k, state)` at the `k`-th
    /// checkpoint.
    pub fn run_replica(
        &mut self,
        seed: u64,
        r: u64,
        mut visit: impl FnMut(usize, &ChainState),
    ) -> Result<(), SamplerError> {
        let (g, f) = (self.g, self.f);
        if let ChainSpec::Field(_) = self.spec {
            for (k, fd) in self.field.iter_mut().enumerate() {
                let s = match fd {
                    Some(fd) => fd.run_replica(seed, r)?,
                    None => {
                        let mut s = ChainState::new(g, replica_stream(seed, r));
                        s.complete_right(f);
                        s
                    }
                };
                visit(k, &s);
            }
            return Ok(());
        }
        let rng = replica_stream(seed, r);
        let mut s = if self.spec.two_sided() {
            ChainState::new_two_sided(g, rng)
        } else {
            ChainState::new(g, rng)
        };
        for (k, &t) in self.times.iter().enumerate() {
            if let Some(kernel) = &self.kernel {
                let remaining = t.saturating_sub(s.step);
                kernel.run(&mut s, remaining);
            }
            while s.step < t {
                match self.spec {
                    ChainSpec::Mu => glauber_mu_step(&mut s, g, f),
                    ChainSpec::Block => block_dynamics_step(&mut s, g, f),
                    ChainSpec::Nu | ChainSpec::Field(_) => unreachable!(),
                }
            }
            visit(k, &s);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;
    use approx::assert_relative_eq;

    fn unit() -> Fugacities {
        Fugacities::uniform(1.0).unwrap()
    }

    #[test]
    fn free_count_examples() {
        let star = BipartiteGraph::star(2);
        let s = ChainState::new(&star, stream(0, 0));
        assert_eq!(s.free_count(&star, 0), 2);
        assert_relative_eq!(s.update_probability(&star, unit(), 0), 0.2);

        let edge = parse_graph("1 1 1\n0 0").unwrap();
        let s = ChainState::from_left(&edge, vec![PLUS], stream(0, 0)).unwrap();
        assert_eq!(s.free_count(&edge, 0), 1);
    }

    #[test]
    fn isolated_left_vertex_is_a_fair_coin() {
        let g = BipartiteGraph::empty(1, 0);
        let s = ChainState::new(&g, stream(0, 0));
        assert_eq!(s.update_probability(&g, unit(), 0), 0.5);
    }

    #[test]
    fn forced_moves() {
        let edge = parse_graph("1 1 1\n0 0").unwrap();
        let mut s = ChainState::from_full(&edge, vec![MINUS], vec![PLUS], stream(1, 0)).unwrap();
        for _ in 0..100 {
            glauber_mu_step(&mut s, &edge, unit());
            assert!(s.check_invariants(&edge));
        }
        let mut s = ChainState::from_left(&edge, vec![PLUS], stream(2, 0)).unwrap();
        s.complete_right(unit());
        assert_eq!(s.spins_right(), Some(&[MINUS][..]));
        assert!(ChainState::from_full(&edge, vec![PLUS], vec![PLUS], stream(0, 0)).is_err());
    }

    #[test]
    fn block_step_is_coupled_to_nu_step() {
        let g = crate::graph::random_left_regular(6, 5, 3, 3).unwrap();
        for seed in 0..50 {
            let mut a = ChainState::new(&g, stream(seed, 0));
            let mut b = ChainState::new_two_sided(&g, stream(seed, 0));
            glauber_nu_step(&mut a, &g, unit());
            block_dynamics_step(&mut b, &g, unit());
            assert_eq!(a.spins_left(), b.spins_left());
            assert!(b.check_invariants(&g));
        }
    }

    #[test]
    fn kernel_matches_single_steps() {
        let g = crate::graph::random_left_bounded(7, 6, 3, 11);
        let f = Fugacities::new(0.7, 2.5).unwrap();
        let kernel = NuKernel::new(&g, f);
        let mut a = ChainState::new(&g, stream(5, 0));
        let mut b = ChainState::new(&g, stream(5, 0));
        for _ in 0..200 {
            kernel.run(&mut a, 17);
            for _ in 0..17 {
                glauber_nu_step(&mut b, &g, f);
            }
            assert_eq!(a.spins_left(), b.spins_left());
            assert_eq!(a.cnt(), b.cnt());
        }
        assert_eq!(a.step(), b.step());
        assert!(a.check_invariants(&g));
    }

    #[test]
    fn paper_parameters_small_example() {
        let g = parse_graph("2 2 2\n0 0\n0 1").unwrap();
        let g2 = parse_graph("2 2 3\n0 0\n0 1\n1 0").unwrap();
        assert_eq!(g2.max_deg_left(), 2);
        let p = paper_parameters(&g2, unit(), 0.5, 0.5).unwrap();
        let want = 1.0 / (4.0 * 9f64.exp() * 2.0 * 2f64.ln());
        assert_relative_eq!(p.theta, want, max_relative = 1e-14);
        assert!(p.theoretical && p.t.is_none());
        let q = paper_parameters(&g, unit(), 0.9, 0.5).unwrap();
        assert!(q.log_t <= paper_parameters(&g, unit(), 0.1, 0.5).unwrap().log_t);
    }

    #[test]
    fn practical_defaults() {
        let p = FieldDynamicsParams::practical(8, 0.01, InnerMode::Glauber).unwrap();
        assert_eq!(p.theta, 0.5);
        assert_eq!(p.t, 47);
        assert_eq!(p.m, (21.0 * 8.0 * 8f64.ln()).ceil() as u64);
        assert!(FieldDynamicsParams::new(1.0, 1, 1, InnerMode::Exact).is_err());
    }
}
