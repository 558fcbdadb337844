//! Hamiltonian Monte Carlo with an adapted Euclidean metric.
//!
//! The default trajectory is the multinomial No-U-Turn sampler with the
//! generalized turning criterion. Warmup uses dual-averaging step-size
//! adaptation and windowed estimation of the inverse metric, either diagonal
//! or diagonal plus a few leading principal directions.
//! Chains run on scoped threads; each chain owns a seeded ChaCha stream, so
//! output depends only on the configuration and never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::metric::{Metric, WindowEstimator};

/// A differentiable log density over an unconstrained space.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Writes the gradient into `grad` and returns the log density.
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Trajectory {
    Nuts { max_depth: u32 },
    Static { steps: u32 },
}

/// How the inverse metric is estimated during warmup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MetricAdaptation {
    Diagonal,
    /// Diagonal scales plus at most `max_rank` correlated directions.
    LowRank { max_rank: usize },
}

impl Default for MetricAdaptation {
    fn default() -> Self {
        MetricAdaptation::LowRank { max_rank: 6 }
    }
}

impl MetricAdaptation {
    fn max_rank(self) -> usize {
        match self {
            MetricAdaptation::Diagonal => 0,
            MetricAdaptation::LowRank { max_rank } => max_rank,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    /// Total iterations per chain, warmup included.
    pub iterations: usize,
    pub warmup: usize,
    pub thin: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub metric: MetricAdaptation,
    /// Fits whose post-warmup divergence fraction exceeds this are flagged unreliable.
    pub max_divergence_rate: f64,
    pub init_radius: f64,
    pub init_retries: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            iterations: 2000,
            warmup: 1000,
            thin: 1,
            seed: 20_240_521,
            target_accept: 0.8,
            trajectory: Trajectory::Nuts { max_depth: 10 },
            metric: MetricAdaptation::default(),
            max_divergence_rate: 0.01,
            init_radius: 0.5,
            init_retries: 10,
        }
    }
}

impl SamplerConfig {
    /// Four chains of 20000 iterations, 5000 warmup, thinning 5.
    pub fn full_scale() -> Self {
        SamplerConfig {
            iterations: 20_000,
            warmup: 5_000,
            thin: 5,
            ..SamplerConfig::default()
        }
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.iterations.saturating_sub(self.warmup)) / self.thin.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.chains == 0 {
            return bad("chains must be at least 1");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.warmup >= self.iterations {
            return bad("warmup must be smaller than iterations");
        }
        if self.retained_per_chain() == 0 {
            return bad("no draws retained after warmup and thinning");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)");
        }
        match self.trajectory {
            Trajectory::Nuts { max_depth } if max_depth == 0 || max_depth > 20 => {
                bad("max_depth must lie in 1..=20")
            }
            Trajectory::Static { steps: 0 } => bad("static trajectories need at least one step"),
            _ => Ok(()),
        }
    }
}

/// Per-chain seed derived from the master seed.
pub fn chain_seed(master: u64, chain: usize) -> u64 {
    splitmix64(master ^ splitmix64(chain as u64 + 1))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub chain: usize,
    pub seed: u64,
    pub step_size: f64,
    /// Diagonal of the adapted inverse metric.
    pub inverse_metric: Vec<f64>,
    /// Number of correlated directions in the adapted metric.
    #[serde(default)]
    pub metric_rank: usize,
    pub mean_accept_stat: f64,
    pub divergences: usize,
    pub max_depth_hits: usize,
    pub mean_leapfrog_steps: f64,
}

/// Retained unconstrained draws of one chain, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub stats: ChainStats,
    pub dim: usize,
    pub draws: Vec<f64>,
}

impl ChainOutput {
    pub fn len(&self) -> usize {
        self.draws.len() / self.dim.max(1)
    }
    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
    pub fn draw(&self, t: usize) -> &[f64] {
        &self.draws[t * self.dim..(t + 1) * self.dim]
    }
}

// ============================================================================
// Phase-space state and integrator
// ============================================================================

#[derive(Debug, Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

struct Hamiltonian<'a, D: LogDensity> {
    density: &'a D,
    metric: Metric,
}

impl<D: LogDensity> Hamiltonian<'_, D> {
    fn kinetic(&self, p: &[f64]) -> f64 {
        self.metric.kinetic(p)
    }

    fn energy(&self, z: &State) -> f64 {
        let h = -z.logp + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        self.metric.velocity(p)
    }

    fn leapfrog(&self, z: &mut State, eps: f64) {
        let half = 0.5 * eps;
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += half * g;
        }
        let v = self.metric.velocity(&z.p);
        for (q, v) in z.q.iter_mut().zip(&v) {
            *q += eps * v;
        }
        z.logp = self.density.log_density_grad(&z.q, &mut z.grad);
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += half * g;
        }
    }

    fn sample_momentum<R: Rng>(&self, z: &mut State, rng: &mut R) {
        self.metric.sample_momentum(rng, &mut z.p);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn sum_of(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

const MAX_ENERGY_ERROR: f64 = 1000.0;

#[derive(Debug, Default, Clone, Copy)]
struct TransitionInfo {
    accept_stat: f64,
    divergent: bool,
    depth_exhausted: bool,
    leapfrog_steps: usize,
}

struct TreeTally {
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

/// Subtree boundary quantities filled by [`build_tree`].
struct Edge {
    p_sharp_beg: Vec<f64>,
    p_sharp_end: Vec<f64>,
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
    rho: Vec<f64>,
}

impl Edge {
    fn zeros(n: usize) -> Self {
        Edge {
            p_sharp_beg: vec![0.0; n],
            p_sharp_end: vec![0.0; n],
            p_beg: vec![0.0; n],
            p_end: vec![0.0; n],
            rho: vec![0.0; n],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_tree<D: LogDensity, R: Rng>(
    ham: &Hamiltonian<'_, D>,
    rng: &mut R,
    z: &mut State,
    depth: u32,
    eps: f64,
    h0: f64,
    z_propose: &mut State,
    edge: &mut Edge,
    log_sum_weight: &mut f64,
    tally: &mut TreeTally,
) -> bool {
    if depth == 0 {
        ham.leapfrog(z, eps);
        tally.n_leapfrog += 1;
        let h = ham.energy(z);
        if h - h0 > MAX_ENERGY_ERROR {
            tally.divergent = true;
        }
        *log_sum_weight = log_sum_exp(*log_sum_weight, h0 - h);
        tally.sum_metro_prob += if h0 - h > 0.0 { 1.0 } else { (h0 - h).exp() };
        z_propose.clone_from(z);
        let ps = ham.p_sharp(&z.p);
        edge.p_sharp_beg.clone_from(&ps);
        edge.p_sharp_end = ps;
        add_into(&mut edge.rho, &z.p);
        edge.p_beg.clone_from(&z.p);
        edge.p_end.clone_from(&z.p);
        return !tally.divergent;
    }

    let n = z.q.len();
    // Initial half
    let mut init = Edge::zeros(n);
    let mut lsw_init = f64::NEG_INFINITY;
    if !build_tree(ham, rng, z, depth - 1, eps, h0, z_propose, &mut init, &mut lsw_init, tally) {
        return false;
    }
    // Final half
    let mut z_propose_final = z.clone();
    let mut fin = Edge::zeros(n);
    let mut lsw_final = f64::NEG_INFINITY;
    if !build_tree(ham, rng, z, depth - 1, eps, h0, &mut z_propose_final, &mut fin, &mut lsw_final, tally) {
        return false;
    }

    let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
    if lsw_final > lsw_subtree {
        *z_propose = z_propose_final;
    } else {
        let accept = (lsw_final - lsw_subtree).exp();
        if rng.random::<f64>() < accept {
            *z_propose = z_propose_final;
        }
    }

    let rho_subtree = sum_of(&init.rho, &fin.rho);
    add_into(&mut edge.rho, &rho_subtree);
    let mut persist = no_u_turn(&init.p_sharp_beg, &fin.p_sharp_end, &rho_subtree);
    let rho_ext = sum_of(&init.rho, &fin.p_beg);
    persist &= no_u_turn(&init.p_sharp_beg, &fin.p_sharp_beg, &rho_ext);
    let rho_ext = sum_of(&fin.rho, &init.p_end);
    persist &= no_u_turn(&init.p_sharp_end, &fin.p_sharp_end, &rho_ext);

    edge.p_sharp_beg = init.p_sharp_beg;
    edge.p_beg = init.p_beg;
    edge.p_sharp_end = fin.p_sharp_end;
    edge.p_end = fin.p_end;
    persist
}

fn nuts_transition<D: LogDensity, R: Rng>(
    ham: &Hamiltonian<'_, D>,
    rng: &mut R,
    current: &mut State,
    eps: f64,
    max_depth: u32,
) -> TransitionInfo {
    ham.sample_momentum(current, rng);
    let h0 = ham.energy(current);
    let n = current.q.len();

    let mut z_fwd = current.clone();
    let mut z_bck = current.clone();
    let mut z_sample = current.clone();
    let mut z_propose = current.clone();

    let ps0 = ham.p_sharp(&current.p);
    let (mut p_sharp_fwd_fwd, mut p_sharp_fwd_bck) = (ps0.clone(), ps0.clone());
    let (mut p_sharp_bck_fwd, mut p_sharp_bck_bck) = (ps0.clone(), ps0);
    let (mut p_fwd_fwd, mut p_fwd_bck) = (current.p.clone(), current.p.clone());
    let (mut p_bck_fwd, mut p_bck_bck) = (current.p.clone(), current.p.clone());
    let mut rho = current.p.clone();

    let mut log_sum_weight = 0.0;
    let mut depth = 0;
    let mut tally = TreeTally {
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
    };

    while depth < max_depth {
        let mut edge = Edge::zeros(n);
        let mut lsw_subtree = f64::NEG_INFINITY;
        let (rho_fwd, rho_bck);
        let valid = if rng.random::<f64>() > 0.5 {
            // Extend forward from the forward end.
            let mut z = z_fwd.clone();
            let ok = build_tree(
                ham,
                rng,
                &mut z,
                depth,
                eps,
                h0,
                &mut z_propose,
                &mut edge,
                &mut lsw_subtree,
                &mut tally,
            );
            z_fwd = z;
            rho_bck = rho.clone();
            p_bck_fwd.clone_from(&p_fwd_fwd);
            p_sharp_bck_fwd.clone_from(&p_sharp_fwd_fwd);
            p_sharp_fwd_bck = edge.p_sharp_beg;
            p_sharp_fwd_fwd = edge.p_sharp_end;
            p_fwd_bck = edge.p_beg;
            p_fwd_fwd = edge.p_end;
            rho_fwd = edge.rho;
            ok
        } else {
            let mut z = z_bck.clone();
            let ok = build_tree(
                ham,
                rng,
                &mut z,
                depth,
                -eps,
                h0,
                &mut z_propose,
                &mut edge,
                &mut lsw_subtree,
                &mut tally,
            );
            z_bck = z;
            rho_fwd = rho.clone();
            p_fwd_bck.clone_from(&p_bck_bck);
            p_sharp_fwd_bck.clone_from(&p_sharp_bck_bck);
            p_sharp_bck_fwd = edge.p_sharp_beg;
            p_sharp_bck_bck = edge.p_sharp_end;
            p_bck_fwd = edge.p_beg;
            p_bck_bck = edge.p_end;
            rho_bck = edge.rho;
            ok
        };
        if !valid {
            break;
        }
        depth += 1;

        if lsw_subtree > log_sum_weight {
            z_sample.clone_from(&z_propose);
        } else {
            let accept = (lsw_subtree - log_sum_weight).exp();
            if rng.random::<f64>() < accept {
                z_sample.clone_from(&z_propose);
            }
        }
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

        rho = sum_of(&rho_bck, &rho_fwd);
        let mut persist = no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
        let rho_ext = sum_of(&rho_bck, &p_fwd_bck);
        persist &= no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_ext);
        let rho_ext = sum_of(&rho_fwd, &p_bck_fwd);
        persist &= no_u_turn(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_ext);
        if !persist {
            break;
        }
    }

    *current = z_sample;
    TransitionInfo {
        accept_stat: if tally.n_leapfrog > 0 {
            tally.sum_metro_prob / tally.n_leapfrog as f64
        } else {
            0.0
        },
        divergent: tally.divergent,
        depth_exhausted: depth >= max_depth,
        leapfrog_steps: tally.n_leapfrog,
    }
}

fn static_transition<D: LogDensity, R: Rng>(
    ham: &Hamiltonian<'_, D>,
    rng: &mut R,
    current: &mut State,
    eps: f64,
    steps: u32,
) -> TransitionInfo {
    ham.sample_momentum(current, rng);
    let h0 = ham.energy(current);
    let mut z = current.clone();
    for _ in 0..steps {
        ham.leapfrog(&mut z, eps);
    }
    let h = ham.energy(&z);
    let divergent = h - h0 > MAX_ENERGY_ERROR;
    let accept = if h.is_finite() { (h0 - h).exp().min(1.0) } else { 0.0 };
    if rng.random::<f64>() < accept {
        *current = z;
    }
    TransitionInfo {
        accept_stat: accept,
        divergent,
        depth_exhausted: false,
        leapfrog_steps: steps as usize,
    }
}

// ============================================================================
// Adaptation
// ============================================================================

struct DualAveraging {
    mu: f64,
    target: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, target: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps).ln(),
            target,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    fn update(&mut self, accept_stat: f64) -> f64 {
        let accept = if accept_stat.is_finite() { accept_stat.min(1.0) } else { 0.0 };
        self.counter += 1.0;
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let x_eta = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Slow-phase windows for metric estimation: `(start, end)` iteration ranges.
fn metric_windows(warmup: usize) -> Vec<(usize, usize)> {
    let (mut init, mut term, mut base) = (75usize, 50usize, 25usize);
    if warmup < 20 {
        return Vec::new();
    }
    if init + term + base > warmup {
        init = (0.15 * warmup as f64) as usize;
        term = (0.1 * warmup as f64) as usize;
        base = warmup - init - term;
    }
    let last = warmup - term;
    let mut windows = Vec::new();
    let mut start = init;
    let mut size = base;
    while start < last {
        let mut end = start + size;
        // Stretch the final window when the next one would not fit.
        if end + 2 * size > last {
            end = last;
        }
        windows.push((start, end));
        start = end;
        size *= 2;
    }
    windows
}

fn find_reasonable_step<D: LogDensity, R: Rng>(ham: &Hamiltonian<'_, D>, rng: &mut R, z0: &State, start: f64) -> f64 {
    let mut eps = start;
    let mut z = z0.clone();
    ham.sample_momentum(&mut z, rng);
    let h0 = ham.energy(&z);
    let mut probe = z.clone();
    ham.leapfrog(&mut probe, eps);
    let delta = h0 - ham.energy(&probe);
    let direction = if delta > 0.8f64.ln() { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let mut probe = z.clone();
        ham.sample_momentum(&mut probe, rng);
        let h0 = ham.energy(&probe);
        ham.leapfrog(&mut probe, eps);
        let delta = h0 - ham.energy(&probe);
        if direction > 0.0 && !(delta > 0.8f64.ln()) {
            break;
        }
        if direction < 0.0 && !(delta < 0.8f64.ln()) {
            break;
        }
        eps = if direction > 0.0 { 2.0 * eps } else { 0.5 * eps };
        if !(1e-8..=1e7).contains(&eps) {
            break;
        }
    }
    eps.clamp(1e-8, 1e7)
}

// ============================================================================
// Chain driver
// ============================================================================

fn initial_state<D: LogDensity, R: Rng>(density: &D, config: &SamplerConfig, rng: &mut R) -> Result<State> {
    let d = density.dim();
    for _ in 0..=config.init_retries {
        let q: Vec<f64> = (0..d)
            .map(|_| rng.random_range(-config.init_radius..=config.init_radius))
            .collect();
        let mut grad = vec![0.0; d];
        let logp = density.log_density_grad(&q, &mut grad);
        if logp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(State {
                q,
                p: vec![0.0; d],
                grad,
                logp,
            });
        }
    }
    Err(Error::NonFinite(format!(
        "log density non-finite at {} initial points",
        config.init_retries + 1
    )))
}

fn run_chain<D: LogDensity>(density: &D, config: &SamplerConfig, chain: usize) -> Result<ChainOutput> {
    let d = density.dim();
    let seed = chain_seed(config.seed, chain);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);

    let mut z = initial_state(density, config, &mut rng)?;
    let mut ham = Hamiltonian {
        density,
        metric: Metric::unit(d),
    };
    let mut eps = find_reasonable_step(&ham, &mut rng, &z, 1.0);
    let mut dual = DualAveraging::new(eps, config.target_accept);
    let windows = metric_windows(config.warmup);
    let mut window_idx = 0;
    let mut window = WindowEstimator::new(d);
    let max_rank = config.metric.max_rank();

    let retained = config.retained_per_chain();
    let mut draws = Vec::with_capacity(retained * d);
    let (mut accept_sum, mut divergences, mut depth_hits, mut leapfrogs, mut sampled) = (0.0, 0, 0, 0usize, 0usize);

    for t in 0..config.iterations {
        let info = match config.trajectory {
            Trajectory::Nuts { max_depth } => nuts_transition(&ham, &mut rng, &mut z, eps, max_depth),
            Trajectory::Static { steps } => static_transition(&ham, &mut rng, &mut z, eps, steps),
        };
        if t < config.warmup {
            eps = dual.update(info.accept_stat);
            if let Some(&(start, end)) = windows.get(window_idx) {
                if t >= start && t < end {
                    window.add(&z.q);
                }
                if t + 1 == end {
                    ham.metric = window.estimate(max_rank, &mut rng);
                    window = WindowEstimator::new(d);
                    window_idx += 1;
                    eps = find_reasonable_step(&ham, &mut rng, &z, eps);
                    dual = DualAveraging::new(eps, config.target_accept);
                }
            }
            if t + 1 == config.warmup {
                eps = dual.final_step();
            }
        } else {
            sampled += 1;
            accept_sum += info.accept_stat;
            divergences += info.divergent as usize;
            depth_hits += info.depth_exhausted as usize;
            leapfrogs += info.leapfrog_steps;
            if (t + 1 - config.warmup).is_multiple_of(config.thin) && draws.len() < retained * d {
                draws.extend_from_slice(&z.q);
            }
        }
    }

    let sampled_f = sampled.max(1) as f64;
    Ok(ChainOutput {
        stats: ChainStats {
            chain,
            seed,
            step_size: eps,
            inverse_metric: ham.metric.diagonal_variance(),
            metric_rank: ham.metric.rank(),
            mean_accept_stat: accept_sum / sampled_f,
            divergences,
            max_depth_hits: depth_hits,
            mean_leapfrog_steps: leapfrogs as f64 / sampled_f,
        },
        dim: d,
        draws,
    })
}

/// Runs all chains in parallel and returns them in chain order.
pub fn sample_chains<D: LogDensity>(density: &D, config: &SamplerConfig) -> Result<Vec<ChainOutput>> {
    config.validate()?;
    let results: Vec<Result<ChainOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.chains)
            .map(|c| scope.spawn(move || run_chain(density, config, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::NonFinite("sampler thread panicked".into()))))
            .collect()
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Gaussian {
        mean: Vec<f64>,
        sd: Vec<f64>,
    }

    impl LogDensity for Gaussian {
        fn dim(&self) -> usize {
            self.mean.len()
        }
        fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            let mut lp = 0.0;
            for i in 0..x.len() {
                let z = (x[i] - self.mean[i]) / self.sd[i];
                lp -= 0.5 * z * z;
                grad[i] = -z / self.sd[i];
            }
            lp
        }
    }

    fn moments(chains: &[ChainOutput], k: usize) -> (f64, f64) {
        let xs: Vec<f64> = chains.iter().flat_map(|c| (0..c.len()).map(move |t| c.draw(t)[k])).collect();
        (crate::stats::mean(&xs), crate::stats::sample_sd(&xs))
    }

    #[test]
    fn nuts_recovers_scaled_gaussian() {
        let target = Gaussian {
            mean: vec![1.0, -2.0, 0.0],
            sd: vec![0.1, 3.0, 1.0],
        };
        let config = SamplerConfig {
            chains: 2,
            iterations: 1500,
            warmup: 500,
            ..SamplerConfig::default()
        };
        let chains = sample_chains(&target, &config).unwrap();
        for k in 0..3 {
            let (m, s) = moments(&chains, k);
            assert!((m - target.mean[k]).abs() < 0.15 * target.sd[k], "mean {k}: {m}");
            assert!((s / target.sd[k] - 1.0).abs() < 0.15, "sd {k}: {s}");
        }
        for c in &chains {
            assert_eq!(c.stats.divergences, 0);
            // The adapted metric should approach the target variances.
            assert!((c.stats.inverse_metric[1] / 9.0 - 1.0).abs() < 0.5);
        }
    }

    #[test]
    fn static_hmc_recovers_gaussian() {
        let target = Gaussian {
            mean: vec![0.5, 0.5],
            sd: vec![1.0, 2.0],
        };
        let config = SamplerConfig {
            chains: 2,
            iterations: 3000,
            warmup: 500,
            trajectory: Trajectory::Static { steps: 8 },
            ..SamplerConfig::default()
        };
        let chains = sample_chains(&target, &config).unwrap();
        for k in 0..2 {
            let (m, s) = moments(&chains, k);
            assert!((m - 0.5).abs() < 0.2 * target.sd[k], "mean {k}: {m}");
            assert!((s / target.sd[k] - 1.0).abs() < 0.2, "sd {k}: {s}");
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let target = Gaussian {
            mean: vec![0.0; 4],
            sd: vec![1.0; 4],
        };
        let config = SamplerConfig {
            chains: 3,
            iterations: 200,
            warmup: 100,
            thin: 3,
            ..SamplerConfig::default()
        };
        let a = sample_chains(&target, &config).unwrap();
        let b = sample_chains(&target, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), config.retained_per_chain());
        assert_eq!(config.retained_per_chain(), 33);
        assert_ne!(a[0].draws, a[1].draws);
        let other = sample_chains(
            &target,
            &SamplerConfig {
                seed: 7,
                ..config.clone()
            },
        )
        .unwrap();
        assert_ne!(a[0].draws, other[0].draws);
    }

    #[test]
    fn full_scale_retains_twelve_thousand() {
        let c = SamplerConfig::full_scale();
        assert_eq!(c.chains * c.retained_per_chain(), 12_000);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = SamplerConfig::default();
        for bad in [
            SamplerConfig { chains: 0, ..base.clone() },
            SamplerConfig { thin: 0, ..base.clone() },
            SamplerConfig { warmup: 2000, ..base.clone() },
            SamplerConfig { target_accept: 1.0, ..base.clone() },
            SamplerConfig { trajectory: Trajectory::Static { steps: 0 }, ..base.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    struct Broken;
    impl LogDensity for Broken {
        fn dim(&self) -> usize {
            2
        }
        fn log_density_grad(&self, _x: &[f64], grad: &mut [f64]) -> f64 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            f64::NAN
        }
    }

    #[test]
    fn non_finite_initialization_is_an_error() {
        let err = sample_chains(&Broken, &SamplerConfig::default()).unwrap_err();
        assert_eq!(err.kind(), "non_finite");
    }

    #[test]
    fn windows_cover_slow_phase() {
        let w = metric_windows(1000);
        assert_eq!(w.first().unwrap().0, 75);
        assert_eq!(w.last().unwrap().1, 950);
        for pair in w.windows(2) {
            assert_eq!(pair[0].1, pair[1].0);
        }
        assert!(metric_windows(10).is_empty());
        let small = metric_windows(100);
        assert_eq!(small.first().unwrap().0, 15);
        assert_eq!(small.last().unwrap().1, 90);
    }
}
