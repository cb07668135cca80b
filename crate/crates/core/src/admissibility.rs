//! Estimates of admissibility constants
//! `c(t) = sup ‖Φ_· u‖_{L^q([0,t],X)} / ‖u‖_{L^p([0,t],U)}` and verdicts on
//! whether they stay bounded as the horizon grows.
//!
//! All estimates are lower bounds: either the exact norm of the operator
//! restricted to piecewise-constant inputs on a uniform grid (`p = q = 2`,
//! by power iteration) or a maximum over a finite set of probe inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::mild_solution::{integrator_factor, piece_gram, trajectory_time_norm, ModeWeights};
use crate::numerics::{least_squares_slope, pairwise_sum_by};
use crate::signals::{random_probe_family, AnalyticSignal, GridSignal, ProbeShape, SignalFamily};
use crate::spectral::{LinearSystem, StateVector};

/// Ratio `c(t_last)/c(t_prev)` at or below which a ladder counts as a plateau.
pub const PLATEAU_THRESHOLD: f64 = 1.05;
/// Growth `c(t_last)/c(t_first)` at or above which a ladder counts as divergent.
pub const DIVERGENCE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerIterationConfig {
    pub steps_per_unit: f64,
    pub min_steps: usize,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for PowerIterationConfig {
    fn default() -> Self {
        PowerIterationConfig { steps_per_unit: 32.0, min_steps: 64, max_iter: 5000, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub count: usize,
    pub pieces: usize,
    /// Additional candidates, e.g. counterexample inputs.
    pub extra: Vec<GridSignal>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { count: 48, pieces: 32, extra: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    PowerIteration(PowerIterationConfig),
    ProbeFamily(ProbeConfig),
    /// Ratio for one analytic input, truncated to each horizon.
    FixedInput(AnalyticSignal),
}

impl Strategy {
    /// Power iteration for `p = q = 2`, probes otherwise.
    pub fn default_for(p: Exponent, q: Exponent) -> Strategy {
        if p == Exponent::TWO && q == Exponent::TWO {
            Strategy::PowerIteration(PowerIterationConfig::default())
        } else {
            Strategy::ProbeFamily(ProbeConfig::default())
        }
    }

    fn method(&self) -> Method {
        match self {
            Strategy::PowerIteration(_) => Method::PowerIteration,
            Strategy::ProbeFamily(_) => Method::ProbeFamily,
            Strategy::FixedInput(_) => Method::FixedInput,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PowerIteration,
    ProbeFamily,
    FixedInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Neither a plateau nor a clear divergence on the ladder.
    FiniteTime,
    InfiniteTimeConsistent,
    Divergent,
}

/// Convergence record of one power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerIterationInfo {
    pub horizon: f64,
    pub steps: usize,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub p: Exponent,
    pub q: Exponent,
    pub horizons: Vec<f64>,
    pub c_estimates: Vec<f64>,
    pub method: Method,
    pub plateau_ratio: f64,
    pub growth_factor: f64,
    /// Least-squares slope of `log c` against `log t`.
    pub power_law_exponent: f64,
    pub verdict: Verdict,
    pub probe_count: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub power_iteration: Vec<PowerIterationInfo>,
}

impl AdmissibilityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon,c_estimate\n");
        for (t, c) in self.horizons.iter().zip(&self.c_estimates) {
            out.push_str(&format!("{t},{c}\n"));
        }
        out
    }

    pub fn last_estimate(&self) -> f64 {
        *self.c_estimates.last().unwrap_or(&0.0)
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        a / b
    }
}

/// Plateau ratio, growth factor, fitted exponent and verdict of a ladder.
pub fn ladder_verdict(horizons: &[f64], c: &[f64]) -> (f64, f64, f64, Verdict) {
    let n = c.len();
    let plateau = ratio(c[n - 1], c[n - 2]);
    let growth = ratio(c[n - 1], c[0]);
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        horizons.iter().zip(c).filter(|(_, v)| **v > 0.0).map(|(t, v)| (t.ln(), v.ln())).unzip();
    let exponent = least_squares_slope(&xs, &ys);
    let verdict = if plateau <= PLATEAU_THRESHOLD {
        Verdict::InfiniteTimeConsistent
    } else if growth >= DIVERGENCE_FACTOR {
        Verdict::Divergent
    } else {
        Verdict::FiniteTime
    };
    (plateau, growth, exponent, verdict)
}

/// Precomputed per-mode data for the discretized input-to-trajectory map.
struct DiscreteMap<'a> {
    system: &'a LinearSystem,
    steps: usize,
    dt: f64,
    decay: Vec<f64>,
    gain: Vec<f64>,
    /// Rows of the Cholesky factor of each mode's Gram matrix, weighted.
    chol: Vec<[f64; 3]>,
}

impl<'a> DiscreteMap<'a> {
    fn new(system: &'a LinearSystem, t: f64, dt_target: f64, weight: ModeWeights) -> Self {
        let steps = ((t / dt_target) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        let rates = system.generator.rates();
        let w: Vec<f64> = match weight {
            ModeWeights::Identity => vec![1.0; rates.len()],
            ModeWeights::Rates => rates.clone(),
        };
        let chol = rates
            .iter()
            .zip(&w)
            .map(|(&r, &wn)| {
                let [ee, ef, ff] = piece_gram(r, dt);
                let l11 = ee.sqrt();
                let l21 = ef / l11;
                let l22 = (ff - l21 * l21).max(0.0).sqrt();
                [wn * l11, wn * l21, wn * l22]
            })
            .collect();
        DiscreteMap {
            system,
            steps,
            dt,
            decay: rates.iter().map(|r| (-r * dt).exp()).collect(),
            gain: rates.iter().map(|&r| integrator_factor(r, dt)).collect(),
            chol,
        }
    }

    fn input_len(&self) -> usize {
        self.steps * self.system.input_dim()
    }

    /// `v ↦ z`, with `‖v‖ = ‖u‖_{L²}` and `‖z‖ = ‖w ⊙ Φ_· u‖_{L²}`.
    fn forward(&self, v: &[f64]) -> Vec<f64> {
        let m = self.system.modes();
        let d = self.system.input_dim();
        let scale = 1.0 / self.dt.sqrt();
        let mut y = vec![0.0; m];
        let mut z = vec![0.0; 2 * m * self.steps];
        let mut u = vec![0.0; d];
        for k in 0..self.steps {
            for (j, uj) in u.iter_mut().enumerate() {
                *uj = v[k * d + j] * scale;
            }
            let g = self.system.control.apply(&u);
            for n in 0..m {
                let [a, b, c] = self.chol[n];
                let idx = 2 * (k * m + n);
                z[idx] = a * y[n] + b * g[n];
                z[idx + 1] = c * g[n];
                y[n] = self.decay[n] * y[n] + self.gain[n] * g[n];
            }
        }
        z
    }

    /// Exact transpose of [`forward`](Self::forward).
    fn adjoint(&self, z: &[f64]) -> Vec<f64> {
        let m = self.system.modes();
        let d = self.system.input_dim();
        let scale = 1.0 / self.dt.sqrt();
        let mut carry = vec![0.0; m];
        let mut v = vec![0.0; d * self.steps];
        let mut gbar = vec![0.0; m];
        for k in (0..self.steps).rev() {
            for n in 0..m {
                let [a, b, c] = self.chol[n];
                let idx = 2 * (k * m + n);
                gbar[n] = b * z[idx] + c * z[idx + 1] + self.gain[n] * carry[n];
                carry[n] = a * z[idx] + self.decay[n] * carry[n];
            }
            let ubar = self.system.control.adjoint_apply(&gbar);
            for j in 0..d {
                v[k * d + j] = ubar[j] * scale;
            }
        }
        v
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum_by(a.len(), |i| a[i] * b[i])
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest singular value of the input-to-trajectory map restricted to
/// piecewise-constant inputs on a uniform grid of step about `dt`.
///
/// A multiplier control makes the map block-diagonal, so its norm is the
/// largest single-mode norm, and those are known in closed form. Power
/// iteration on such a map stalls because many singular values nearly
/// coincide.
fn power_iteration(
    system: &LinearSystem,
    t: f64,
    dt: f64,
    weight: ModeWeights,
    cfg: &PowerIterationConfig,
    seed: u64,
) -> (f64, PowerIterationInfo) {
    if system.control.is_rank_one() || system.modes() == 1 {
        return power_iteration_full(system, t, dt, weight, cfg, seed);
    }
    let rates = system.generator.rates();
    let b = system.control.coefficients();
    let value = rates
        .iter()
        .zip(b)
        .map(|(&r, &bn)| {
            let w = match weight {
                ModeWeights::Identity => 1.0,
                ModeWeights::Rates => r.abs(),
            };
            w * bn.abs() * scalar_convolution_norm(r, t)
        })
        .fold(0.0, f64::max);
    let info = PowerIterationInfo { horizon: t, steps: 0, iterations: 0, residual: 0.0, converged: true };
    (value, info)
}

fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `L²(0,t) → L²(0,t)` norm of `u ↦ ∫₀^s e^{-r(s-τ)} u(τ) dτ`.
///
/// Singular pairs solve a two-point problem whose top frequency `ω` is the
/// smallest positive root of `ω cos ωt + r sin ωt`; the norm is
/// `(r² + ω²)^{-1/2}`. For `r t < -1` the root moves to the hyperbolic
/// branch `μ cosh μt + r sinh μt` with norm `(r² − μ²)^{-1/2}`.
pub fn scalar_convolution_norm(rate: f64, t: f64) -> f64 {
    let r = rate;
    if r * t < -1.0 {
        let mu = bisect_root(|m| m * (m * t).cosh() + r * (m * t).sinh(), 0.0, -r);
        if mu > 0.0 && r * r - mu * mu > 0.0 {
            return 1.0 / (r * r - mu * mu).sqrt();
        }
        return 1.0 / r.abs();
    }
    let hi = std::f64::consts::PI / t;
    let omega = bisect_root(|w| w * (w * t).cos() + r * (w * t).sin(), hi * 1e-12, hi);
    1.0 / (r * r + omega * omega).sqrt()
}

fn power_iteration_full(
    system: &LinearSystem,
    t: f64,
    dt: f64,
    weight: ModeWeights,
    cfg: &PowerIterationConfig,
    seed: u64,
) -> (f64, PowerIterationInfo) {
    let map = DiscreteMap::new(system, t, dt, weight);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..map.input_len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut rho_prev = 0.0;
    let mut info = PowerIterationInfo { horizon: t, steps: map.steps, iterations: 0, residual: f64::INFINITY, converged: false };
    let mut best = 0.0;
    for it in 1..=cfg.max_iter {
        let z = map.forward(&v);
        let w = map.adjoint(&z);
        let rho = dot(&z, &z);
        info.iterations = it;
        if rho == 0.0 {
            info.residual = 0.0;
            info.converged = true;
            return (0.0, info);
        }
        best = f64::max(best, rho);
        let res: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - rho * b).collect();
        info.residual = norm(&res) / rho;
        if info.residual < cfg.tolerance || (rho - rho_prev).abs() <= 1e-13 * rho {
            info.converged = info.residual < cfg.tolerance;
            break;
        }
        rho_prev = rho;
        let nw = norm(&w);
        v = w.into_iter().map(|x| x / nw).collect();
    }
    (best.sqrt(), info)
}

fn dt_for(horizons: &[f64], cfg: &PowerIterationConfig) -> f64 {
    let tmin = horizons.iter().copied().fold(f64::INFINITY, f64::min);
    (1.0 / cfg.steps_per_unit).min(tmin / cfg.min_steps as f64)
}

fn unit_direction(system: &LinearSystem, mode: usize) -> Vec<f64> {
    if system.control.is_rank_one() {
        vec![1.0]
    } else {
        let mut e = vec![0.0; system.input_dim()];
        e[mode] = 1.0;
        e
    }
}

/// Constant input, early bumps, a top-mode bump and decaying ramps matched
/// to the slowest and fastest modes.
pub fn structured_candidates(system: &LinearSystem, t: f64) -> Result<Vec<GridSignal>> {
    let d = system.input_dim();
    let m = system.modes();
    let rates = system.generator.rates();
    let mut out = Vec::new();
    let ones = vec![1.0 / (d as f64).sqrt(); d];
    out.push(GridSignal::constant(ones.clone(), t)?);
    for w in [t / 64.0, t.min(1.0) / 8.0] {
        out.push(GridSignal::new(vec![0.0, w, t], vec![ones.clone(), vec![0.0; d]], vec![0.0; d])?);
    }
    let top = m - 1;
    if rates[top] > 0.0 {
        let w = (1.0 / rates[top]).min(t);
        let dir = unit_direction(system, top);
        if w < t {
            out.push(GridSignal::new(vec![0.0, w, t], vec![dir, vec![0.0; d]], vec![0.0; d])?);
        } else {
            out.push(GridSignal::constant(dir, t)?);
        }
    }
    for mode in [0, top] {
        let r = rates[mode];
        if r <= 0.0 {
            continue;
        }
        let dir = unit_direction(system, mode);
        let pieces = 64;
        let bps: Vec<f64> = (0..=pieces).map(|k| t * k as f64 / pieces as f64).collect();
        let values = bps
            .windows(2)
            .map(|w| {
                let a = (-r * (t - 0.5 * (w[0] + w[1]))).exp();
                dir.iter().map(|x| a * x).collect()
            })
            .collect();
        out.push(GridSignal::new(bps, values, vec![0.0; d])?);
    }
    Ok(out)
}

fn probe_candidates(system: &LinearSystem, p: Exponent, t: f64, cfg: &ProbeConfig, seed: u64) -> Result<Vec<GridSignal>> {
    let shape = ProbeShape { horizon: t, input_dim: system.input_dim(), pieces: cfg.pieces };
    let mut c = structured_candidates(system, t)?;
    c.extend(random_probe_family(seed, cfg.count.max(1), shape, p)?);
    c.extend(cfg.extra.iter().cloned());
    Ok(c)
}

/// Max over candidates of `‖w ⊙ Φ_· u‖_{L^q([0,t])} / ‖u‖_{L^p([0,t])}`.
pub fn max_ratio(
    system: &LinearSystem,
    p: Exponent,
    q: Exponent,
    t: f64,
    weight: ModeWeights,
    candidates: &[GridSignal],
) -> Result<f64> {
    let zero = StateVector::zeros(system.modes());
    let ratios: Vec<f64> = candidates
        .par_iter()
        .map(|u| -> Result<f64> {
            let nu = u.lp_norm(p, t)?;
            if nu == 0.0 {
                return Ok(0.0);
            }
            Ok(trajectory_time_norm(system, &zero, u, t, q, weight)? / nu)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

fn fixed_input_grid(signal: &AnalyticSignal, t: f64) -> Result<GridSignal> {
    match signal.family {
        SignalFamily::PowerDecay { .. } => signal.discretize_graded(1e-3, t),
        _ => signal.discretize(t / 1024.0, t),
    }
}

fn check_input_dim(system: &LinearSystem, signal: &AnalyticSignal) -> Result<()> {
    if signal.dim() != system.input_dim() {
        return Err(Error::Incompatible(format!(
            "input of dimension {} for a system with {}-dimensional input space",
            signal.dim(),
            system.input_dim()
        )));
    }
    Ok(())
}

fn validate_horizon(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon {t} must be positive and finite")));
    }
    Ok(())
}

/// Lower estimate of `c(t)`.
pub fn admissibility_constant(
    system: &LinearSystem,
    p: Exponent,
    q: Exponent,
    t: f64,
    strategy: &Strategy,
    seed: u64,
) -> Result<f64> {
    validate_horizon(t)?;
    match strategy {
        Strategy::PowerIteration(cfg) => {
            if p != Exponent::TWO || q != Exponent::TWO {
                return Err(Error::InvalidArgument(format!("power iteration needs p = q = 2, got p = {p}, q = {q}")));
            }
            Ok(power_iteration(system, t, dt_for(&[t], cfg), ModeWeights::Identity, cfg, seed).0)
        }
        Strategy::ProbeFamily(cfg) => {
            let c = probe_candidates(system, p, t, cfg, seed)?;
            max_ratio(system, p, q, t, ModeWeights::Identity, &c)
        }
        Strategy::FixedInput(signal) => {
            check_input_dim(system, signal)?;
            let u = fixed_input_grid(signal, t)?;
            max_ratio(system, p, q, t, ModeWeights::Identity, &[u])
        }
    }
}

/// Checks that `horizons` is an increasing geometric ladder of at least four
/// entries.
pub fn validate_ladder(horizons: &[f64]) -> Result<()> {
    if horizons.len() < 4 {
        return Err(Error::InvalidArgument(format!("horizon ladder needs at least 4 entries, got {}", horizons.len())));
    }
    for &t in horizons {
        validate_horizon(t)?;
    }
    let r = horizons[1] / horizons[0];
    if !(r > 1.0) || horizons.windows(2).any(|w| ((w[1] / w[0]) - r).abs() > 1e-9 * r) {
        return Err(Error::InvalidArgument("horizons must form an increasing geometric sequence".into()));
    }
    Ok(())
}

fn ladder_estimates(
    system: &LinearSystem,
    p: Exponent,
    q: Exponent,
    horizons: &[f64],
    strategy: &Strategy,
    weight: ModeWeights,
    seed: u64,
) -> Result<(Vec<f64>, usize, Vec<PowerIterationInfo>)> {
    match strategy {
        Strategy::PowerIteration(cfg) => {
            if p != Exponent::TWO || q != Exponent::TWO {
                return Err(Error::InvalidArgument(format!("power iteration needs p = q = 2, got p = {p}, q = {q}")));
            }
            let dt = dt_for(horizons, cfg);
            let runs: Vec<(f64, PowerIterationInfo)> = horizons
                .par_iter()
                .enumerate()
                .map(|(i, &t)| power_iteration(system, t, dt, weight, cfg, seed.wrapping_add(i as u64)))
                .collect();
            let mut c = Vec::with_capacity(runs.len());
            let mut best: f64 = 0.0;
            for (v, _) in &runs {
                best = best.max(*v);
                c.push(best);
            }
            Ok((c, 0, runs.into_iter().map(|r| r.1).collect()))
        }
        Strategy::ProbeFamily(cfg) => {
            let mut pool: Vec<GridSignal> = Vec::new();
            let mut c = Vec::with_capacity(horizons.len());
            let mut best: f64 = 0.0;
            for (i, &t) in horizons.iter().enumerate() {
                pool.extend(probe_candidates(system, p, t, cfg, seed.wrapping_add(i as u64))?);
                best = best.max(max_ratio(system, p, q, t, weight, &pool)?);
                c.push(best);
            }
            Ok((c, pool.len(), Vec::new()))
        }
        Strategy::FixedInput(signal) => {
            check_input_dim(system, signal)?;
            let c = horizons
                .iter()
                .map(|&t| max_ratio(system, p, q, t, weight, &[fixed_input_grid(signal, t)?]))
                .collect::<Result<Vec<f64>>>()?;
            Ok((c, 1, Vec::new()))
        }
    }
}

fn build_report(
    p: Exponent,
    q: Exponent,
    horizons: &[f64],
    method: Method,
    (c, probes, runs): (Vec<f64>, usize, Vec<PowerIterationInfo>),
) -> AdmissibilityReport {
    let (plateau_ratio, growth_factor, power_law_exponent, verdict) = ladder_verdict(horizons, &c);
    AdmissibilityReport {
        p,
        q,
        horizons: horizons.to_vec(),
        c_estimates: c,
        method,
        plateau_ratio,
        growth_factor,
        power_law_exponent,
        verdict,
        probe_count: probes,
        power_iteration: runs,
    }
}

/// Estimates `c(t)` along a geometric horizon ladder and classifies the
/// growth. Probe estimates are running maxima over all candidates seen so
/// far, each extended by zero, so the sequence is nondecreasing.
pub fn infinite_time_probe(
    system: &LinearSystem,
    p: Exponent,
    q: Exponent,
    horizons: &[f64],
    strategy: &Strategy,
    seed: u64,
) -> Result<AdmissibilityReport> {
    validate_ladder(horizons)?;
    let est = ladder_estimates(system, p, q, horizons, strategy, ModeWeights::Identity, seed)?;
    Ok(build_report(p, q, horizons, strategy.method(), est))
}

/// `M (ωr)^{-1/r} ‖B‖` with `1/r = 1 - (1/p - 1/q)`, an upper bound for the
/// infinite-time constant when `‖T(t)‖ ≤ M e^{-ωt}` and `B` is bounded.
pub fn young_bound(system: &LinearSystem, p: Exponent, q: Exponent, m: f64, omega: f64) -> Result<f64> {
    if !system.control.is_bounded() {
        return Err(Error::Incompatible("Young bound needs a bounded control operator".into()));
    }
    if p > q {
        return Err(Error::InvalidArgument(format!("Young bound needs p ≤ q, got p = {p}, q = {q}")));
    }
    if !(m >= 1.0) || !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("decay envelope needs M ≥ 1 and ω > 0, got {m}, {omega}")));
    }
    let inv_r = 1.0 - (p.reciprocal() - q.reciprocal());
    let kernel = if inv_r == 0.0 { 1.0 } else { (omega / inv_r).powf(-inv_r) };
    Ok(m * kernel * system.control.bounded_norm())
}

/// Estimates `sup ‖AΦ^{(A, A^{-1}B)}_· u‖_{L^p} / ‖u‖_{L^p}` along the
/// ladder. For the diagonal multiplier `B = A₋₁` this is the maximal
/// regularity constant of `A`.
pub fn maximal_regularity_probe(
    system: &LinearSystem,
    p: Exponent,
    horizons: &[f64],
    seed: u64,
) -> Result<AdmissibilityReport> {
    system.generator.require_stable()?;
    validate_ladder(horizons)?;
    let reduced = system.with_inverse_generator_control()?;
    let strategy = Strategy::ProbeFamily(ProbeConfig::default());
    let est = ladder_estimates(&reduced, p, p, horizons, &strategy, ModeWeights::Rates, seed)?;
    Ok(build_report(p, p, horizons, Method::ProbeFamily, est))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationLabel {
    InfiniteTime,
    FiniteTimeOnly,
    Inconclusive,
    NotAdmissible,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelationEntry {
    pub p: Exponent,
    pub q: Exponent,
    pub horizon_report: AdmissibilityReport,
    pub truncation_modes: Vec<usize>,
    /// `c(t_0)` at the first horizon for each truncation of the ladder.
    pub truncation_estimates: Vec<f64>,
    pub truncation_growth: f64,
    pub label: RelationLabel,
}

impl RelationEntry {
    /// Admissible on every finite interval as far as the data show.
    pub fn finite_time_admissible(&self) -> bool {
        self.label != RelationLabel::NotAdmissible
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArrowViolation {
    pub from: (Exponent, Exponent),
    pub to: (Exponent, Exponent),
}

#[derive(Debug, Clone, Serialize)]
pub struct RelationTable {
    pub entries: Vec<RelationEntry>,
    pub violations: Vec<ArrowViolation>,
}

impl RelationTable {
    pub fn entry(&self, p: Exponent, q: Exponent) -> Option<&RelationEntry> {
        self.entries.iter().find(|e| e.p == p && e.q == q)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,q,label,verdict,plateau_ratio,growth_factor,truncation_growth,c_last\n");
        for e in &self.entries {
            let r = &e.horizon_report;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                e.p,
                e.q,
                serde_json::to_value(e.label).unwrap().as_str().unwrap_or(""),
                serde_json::to_value(r.verdict).unwrap().as_str().unwrap_or(""),
                r.plateau_ratio,
                r.growth_factor,
                e.truncation_growth,
                r.last_estimate()
            ));
        }
        out
    }
}

/// Per-`(p, q)` verdicts over a truncation ladder (growing mode counts of
/// the same system family) and a horizon ladder, followed by a check of the
/// finite-time nesting arrows: admissibility for `(p, q)` implies it for
/// every `(p', q')` with `p' ≥ p` and `q' ≤ q`.
pub fn classify_admissibility(
    truncations: &[LinearSystem],
    pairs: &[(Exponent, Exponent)],
    horizons: &[f64],
    seed: u64,
) -> Result<RelationTable> {
    if truncations.is_empty() {
        return Err(Error::InvalidArgument("truncation ladder is empty".into()));
    }
    validate_ladder(horizons)?;
    let mut entries = Vec::with_capacity(pairs.len());
    for &(p, q) in pairs {
        let strategy = Strategy::default_for(p, q);
        let horizon_report = infinite_time_probe(&truncations[0], p, q, horizons, &strategy, seed)?;
        let truncation_estimates = truncations
            .iter()
            .map(|s| admissibility_constant(s, p, q, horizons[0], &strategy, seed))
            .collect::<Result<Vec<f64>>>()?;
        let truncation_growth = ratio(*truncation_estimates.last().unwrap(), truncation_estimates[0]);
        let label = if truncations.len() > 1 && truncation_growth >= DIVERGENCE_FACTOR {
            RelationLabel::NotAdmissible
        } else {
            match horizon_report.verdict {
                Verdict::InfiniteTimeConsistent => RelationLabel::InfiniteTime,
                Verdict::Divergent => RelationLabel::FiniteTimeOnly,
                Verdict::FiniteTime => RelationLabel::Inconclusive,
            }
        };
        entries.push(RelationEntry {
            p,
            q,
            horizon_report,
            truncation_modes: truncations.iter().map(LinearSystem::modes).collect(),
            truncation_estimates,
            truncation_growth,
            label,
        });
    }
    let mut violations = Vec::new();
    for a in &entries {
        for b in &entries {
            let implied = b.p >= a.p && b.q <= a.q && (a.p, a.q) != (b.p, b.q);
            if implied && a.finite_time_admissible() && !b.finite_time_admissible() {
                violations.push(ArrowViolation { from: (a.p, a.q), to: (b.p, b.q) });
            }
        }
    }
    Ok(RelationTable { entries, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{ControlOperator, DiagonalGenerator, EigenRule};

    fn scalar() -> LinearSystem {
        let g = DiagonalGenerator::new(vec![1.0]).unwrap();
        let b = ControlOperator::rank_one(vec![1.0], 0.0, &g).unwrap();
        LinearSystem::new(g, b).unwrap()
    }

    #[test]
    fn scalar_convolution_norm_matches_discrete_iteration() {
        let cfg = PowerIterationConfig::default();
        for (rate, t) in [(1.0, 4.0), (5.0, 2.0), (0.0, 1.0), (-0.5, 1.0), (-2.0, 2.0)] {
            let g = DiagonalGenerator::new(vec![1.0]).unwrap().shifted(1.0 - rate);
            let b = ControlOperator::rank_one(vec![1.0], 0.0, &g).unwrap();
            let sys = LinearSystem::new(g, b).unwrap();
            let (discrete, _) = power_iteration_full(&sys, t, 1.0 / 512.0, ModeWeights::Identity, &cfg, 3);
            let exact = scalar_convolution_norm(rate, t);
            assert!((discrete - exact).abs() < 2e-3 * exact, "r={rate} t={t}: {discrete} vs {exact}");
        }
        assert!((scalar_convolution_norm(0.0, 3.0) - 6.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!((scalar_convolution_norm(2.0, 1e4) - 0.5).abs() < 1e-8);
    }

    fn minus_n(n: usize) -> LinearSystem {
        let g = DiagonalGenerator::from_rule(EigenRule::Linear { scale: 1.0, offset: 0.0 }, n).unwrap();
        let b = ControlOperator::multiplier((1..=n).map(|k| -(k as f64)).collect(), 1.0, &g).unwrap();
        LinearSystem::new(g, b).unwrap()
    }

    const LADDER: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

    #[test]
    fn adjoint_is_exact_transpose() {
        for sys in [scalar(), minus_n(5)] {
            let map = DiscreteMap::new(&sys, 1.0, 0.1, ModeWeights::Rates);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let v: Vec<f64> = (0..map.input_len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let z0 = map.forward(&v);
            let zr: Vec<f64> = (0..z0.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let lhs = dot(&map.forward(&v), &zr);
            let rhs = dot(&v, &map.adjoint(&zr));
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn forward_norm_matches_exact_time_norm() {
        let sys = minus_n(4);
        let map = DiscreteMap::new(&sys, 2.0, 0.25, ModeWeights::Identity);
        let u: Vec<f64> = (0..map.input_len()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let z = map.forward(&u);
        let scale = 1.0 / map.dt.sqrt();
        let bps: Vec<f64> = (0..=map.steps).map(|k| k as f64 * map.dt).collect();
        let values = (0..map.steps).map(|k| u[k * 4..k * 4 + 4].iter().map(|x| x * scale).collect()).collect();
        let g = GridSignal::new(bps, values, vec![0.0; 4]).unwrap();
        let exact =
            trajectory_time_norm(&sys, &StateVector::zeros(4), &g, 2.0, Exponent::TWO, ModeWeights::Identity).unwrap();
        assert!((norm(&z) - exact).abs() < 1e-12 * exact);
        assert!((norm(&u) - g.lp_norm(Exponent::TWO, 2.0).unwrap()).abs() < 1e-12 * norm(&u));
    }

    #[test]
    fn zero_control_gives_zero() {
        let sys = scalar().without_control();
        let s = Strategy::default_for(Exponent::TWO, Exponent::TWO);
        assert_eq!(admissibility_constant(&sys, Exponent::TWO, Exponent::TWO, 2.0, &s, 0).unwrap(), 0.0);
        let pf = Strategy::ProbeFamily(ProbeConfig::default());
        assert_eq!(admissibility_constant(&sys, Exponent::ONE, Exponent::TWO, 2.0, &pf, 0).unwrap(), 0.0);
        let r = maximal_regularity_probe(&sys, Exponent::TWO, &LADDER, 0).unwrap();
        assert!(r.c_estimates.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn power_iteration_rejects_other_exponents() {
        let s = Strategy::PowerIteration(PowerIterationConfig::default());
        assert!(admissibility_constant(&scalar(), Exponent::TWO, Exponent::ONE, 1.0, &s, 0).is_err());
    }

    #[test]
    fn scalar_l2_plateau() {
        let s = Strategy::default_for(Exponent::TWO, Exponent::TWO);
        let r = infinite_time_probe(&scalar(), Exponent::TWO, Exponent::TWO, &LADDER, &s, 0).unwrap();
        assert_eq!(r.verdict, Verdict::InfiniteTimeConsistent);
        assert!(r.last_estimate() > 0.95 && r.last_estimate() <= 1.0);
        assert!(r.c_estimates.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn scalar_l2_l1_constant_input_growth() {
        let s = Strategy::ProbeFamily(ProbeConfig::default());
        for t in [4.0f64, 16.0] {
            let c = admissibility_constant(&scalar(), Exponent::TWO, Exponent::ONE, t, &s, 0).unwrap();
            let constant = (t - 1.0 + (-t).exp()) / t.sqrt();
            assert!(c >= constant * (1.0 - 1e-9));
        }
        let r = infinite_time_probe(&scalar(), Exponent::TWO, Exponent::ONE, &LADDER, &s, 0).unwrap();
        assert_eq!(r.verdict, Verdict::Divergent);
    }

    #[test]
    fn power_decay_exponent() {
        let u = AnalyticSignal::power_decay(0.6, None).unwrap();
        let s = Strategy::FixedInput(u);
        let ladder = [1e2, 1e3, 1e4, 1e5];
        let r = infinite_time_probe(&scalar(), Exponent::TWO, Exponent::ONE, &ladder, &s, 0).unwrap();
        assert_eq!(r.verdict, Verdict::Divergent);
        assert!((r.power_law_exponent - 0.4).abs() < 0.05, "{}", r.power_law_exponent);
    }

    #[test]
    fn young_bound_examples() {
        let s = scalar();
        assert!((young_bound(&s, Exponent::TWO, Exponent::TWO, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(young_bound(&s, Exponent::ONE, Exponent::INFINITY, 1.5, 1.0).unwrap(), 1.5);
        assert!(young_bound(&s, Exponent::TWO, Exponent::ONE, 1.0, 1.0).is_err());
        assert!(young_bound(&minus_n(4), Exponent::TWO, Exponent::TWO, 1.0, 1.0).is_err());
    }

    #[test]
    fn maximal_regularity_examples() {
        let r = maximal_regularity_probe(&minus_n(16), Exponent::TWO, &LADDER, 0).unwrap();
        assert_eq!(r.verdict, Verdict::InfiniteTimeConsistent);
        assert!(r.last_estimate() <= 1.0 + 1e-9);
        let inf = Exponent::INFINITY;
        let reduced = scalar().with_inverse_generator_control().unwrap();
        let u = GridSignal::constant(vec![1.0], 3.0).unwrap();
        let v = trajectory_time_norm(&reduced, &StateVector::zeros(1), &u, 3.0, inf, ModeWeights::Rates).unwrap();
        assert!((v - (1.0 - (-3f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn ladder_validation() {
        assert!(validate_ladder(&[1.0, 2.0, 4.0]).is_err());
        assert!(validate_ladder(&[1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(validate_ladder(&[1.0, 2.0, 4.0, 8.0]).is_ok());
    }

    #[test]
    fn input_scaling_invariance() {
        let sys = minus_n(8);
        let cands = structured_candidates(&sys, 2.0).unwrap();
        let a = max_ratio(&sys, Exponent::TWO, Exponent::TWO, 2.0, ModeWeights::Identity, &cands).unwrap();
        let scaled: Vec<GridSignal> = cands.iter().map(|u| u.scaled(-37.5)).collect();
        let b = max_ratio(&sys, Exponent::TWO, Exponent::TWO, 2.0, ModeWeights::Identity, &scaled).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }
}
