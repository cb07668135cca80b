//! Linear ISS envelopes: fits of the transient constant `M` and the gain `G`
//! in `‖φ(·, x, u)‖_{L^q} ≤ M‖x‖ + G‖u‖_{L^p}`, Datko-type stability
//! diagnostics, and the pointwise exponential envelope for `q = ∞`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::admissibility::{
    infinite_time_probe, ladder_verdict, structured_candidates, validate_ladder, AdmissibilityReport, Strategy,
    Verdict, DIVERGENCE_FACTOR, PLATEAU_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::mild_solution::{trajectory, trajectory_time_norm, uniform_grid, ModeWeights};
use crate::numerics::{integrate, least_squares_slope};
use crate::signals::{random_probe_family, GridSignal, ProbeShape};
use crate::spectral::{DiagonalGenerator, LinearSystem, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssVerdict {
    IssConsistent,
    NotIss,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub q: Exponent,
    pub horizon: f64,
    /// Decay rate fitted to `log ‖T(t)e₁‖`.
    pub omega_fit: f64,
    /// Largest `∫₀^horizon ‖T(t)e_n‖^q dt` over the basis probes.
    pub datko_integral: f64,
    pub tail_bound: f64,
    pub converged: bool,
    pub stable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IssGainReport {
    pub p: Exponent,
    pub q: Exponent,
    pub horizons: Vec<f64>,
    pub m_estimates: Vec<f64>,
    pub g_estimates: Vec<f64>,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub probe_count: usize,
    pub worst_ratio: f64,
    pub m_plateau_ratio: f64,
    pub g_plateau_ratio: f64,
    pub verdict: IssVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<AdmissibilityReport>,
    pub stability: StabilityReport,
    /// Exponential rate `a` of the pointwise envelope.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_rate: Option<f64>,
    /// `max_t ‖φ(t)‖ - (M‖x‖e^{-at} + G‖u‖_{L^p([0,t])})` over the probes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_violation: Option<f64>,
}

impl IssGainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon,M,G\n");
        for (i, t) in self.horizons.iter().enumerate() {
            let g = self.g_estimates.get(i).copied().unwrap_or(f64::NAN);
            out.push_str(&format!("{t},{},{g}\n", self.m_estimates[i]));
        }
        out
    }
}

/// `∫₀^horizon ‖T(t)x‖^q dt` by adaptive quadrature.
pub fn datko_integral(gen: &DiagonalGenerator, x: &StateVector, q: Exponent, horizon: f64) -> Result<f64> {
    if q.is_infinite() {
        return Err(Error::InvalidArgument("Datko integral needs finite q".into()));
    }
    let qv = q.value();
    let rates = gen.rates();
    let c = x.coefficients();
    let f = |t: f64| {
        let s: f64 = c.iter().zip(&rates).map(|(x, r)| x * x * (-2.0 * r * t).exp()).sum();
        s.powf(qv / 2.0)
    };
    Ok(integrate(f, 0.0, horizon, 1e-12, 1e-300, 2000).value)
}

/// Fitted decay rate and Datko integral over basis probes.
pub fn exponential_stability_check(gen: &DiagonalGenerator, q: Exponent, horizon: f64) -> Result<StabilityReport> {
    if q.is_infinite() {
        return Err(Error::InvalidArgument("exponential stability check needs finite q".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive and finite")));
    }
    let e1 = StateVector::basis(gen.modes(), 0);
    let ts: Vec<f64> = (0..=32).map(|k| horizon * k as f64 / 32.0).collect();
    let logs: Vec<f64> = ts.iter().map(|&t| gen.semigroup_apply(t, &e1).map(|y| y.norm().ln())).collect::<Result<_>>()?;
    let omega_fit = -least_squares_slope(&ts, &logs);
    let mut best = (0.0, 0usize);
    for n in 0..gen.modes() {
        let v = datko_integral(gen, &StateVector::basis(gen.modes(), n), q, horizon)?;
        if v > best.0 {
            best = (v, n);
        }
    }
    let (datko, n) = best;
    let tail_bound = if omega_fit > 0.0 {
        let end = gen.semigroup_apply(horizon, &StateVector::basis(gen.modes(), n))?.norm();
        end.powf(q.value()) / (q.value() * omega_fit)
    } else {
        f64::INFINITY
    };
    let converged = tail_bound < 0.01 * datko;
    Ok(StabilityReport {
        q,
        horizon,
        omega_fit,
        datko_integral: datko,
        tail_bound,
        converged,
        stable: omega_fit > 0.0 && converged,
    })
}

fn unit_random(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let x = StateVector::new(v);
    let nx = x.norm();
    x.scaled(1.0 / nx)
}

/// Basis vectors (first eight and last) and seeded random unit vectors.
fn state_probes(n: usize, seed: u64) -> Vec<StateVector> {
    let mut out: Vec<StateVector> = (0..n.min(8)).map(|k| StateVector::basis(n, k)).collect();
    if n > 8 {
        out.push(StateVector::basis(n, n - 1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    out.extend((0..8).map(|_| unit_random(&mut rng, n)));
    out
}

fn stability_for(system: &LinearSystem, q: Exponent, horizons: &[f64]) -> Result<StabilityReport> {
    let qd = if q.is_infinite() { Exponent::TWO } else { q };
    exponential_stability_check(&system.generator, qd, *horizons.last().unwrap())
}

/// Fits `M` over state probes with `u = 0` and `G` over input probes with
/// `x = 0` along the horizon ladder; ISS-consistent when both plateau.
pub fn iss_gain_fit(system: &LinearSystem, p: Exponent, q: Exponent, horizons: &[f64], seed: u64) -> Result<IssGainReport> {
    validate_ladder(horizons)?;
    let stability = stability_for(system, q, horizons)?;
    let n = system.modes();
    let zero_u = GridSignal::zero(system.input_dim(), 1.0)?;
    let xs = state_probes(n, seed);
    let m_estimates = horizons
        .iter()
        .map(|&t| -> Result<f64> {
            let vals = xs
                .par_iter()
                .map(|x| trajectory_time_norm(system, x, &zero_u, t, q, ModeWeights::Identity))
                .collect::<Result<Vec<f64>>>()?;
            Ok(vals.into_iter().fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (m_plateau, m_growth, _, _) = ladder_verdict(horizons, &m_estimates);
    let m = *m_estimates.last().unwrap();

    if !system.generator.is_stable() {
        return Ok(IssGainReport {
            p,
            q,
            horizons: horizons.to_vec(),
            m_estimates,
            g_estimates: Vec::new(),
            m,
            g: f64::NAN,
            probe_count: xs.len(),
            worst_ratio: f64::NAN,
            m_plateau_ratio: m_plateau,
            g_plateau_ratio: f64::NAN,
            verdict: IssVerdict::NotIss,
            admissibility: None,
            stability,
            decay_rate: None,
            envelope_violation: None,
        });
    }

    let adm = infinite_time_probe(system, p, q, horizons, &Strategy::default_for(p, q), seed)?;
    let g = adm.last_estimate();

    // Mixed probes: (‖φ(·,x,u)‖ - M‖x‖)/‖u‖.
    let t = *horizons.last().unwrap();
    let shape = ProbeShape { horizon: t, input_dim: system.input_dim(), pieces: 16 };
    let us = random_probe_family(seed.wrapping_add(101), 12, shape, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let pairs: Vec<(StateVector, GridSignal)> = us
        .into_iter()
        .enumerate()
        .map(|(i, u)| (unit_random(&mut rng, n).scaled([0.5, 1.0, 2.0][i % 3]), u))
        .collect();
    let worst = pairs
        .par_iter()
        .map(|(x, u)| -> Result<f64> {
            let y = trajectory_time_norm(system, x, u, t, q, ModeWeights::Identity)?;
            Ok((y - m * x.norm()) / u.lp_norm(p, t)?)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);

    let verdict = iss_verdict(m_plateau, m_growth, adm.verdict);
    Ok(IssGainReport {
        p,
        q,
        horizons: horizons.to_vec(),
        m_estimates,
        g_estimates: adm.c_estimates.clone(),
        m,
        g,
        probe_count: xs.len() + adm.probe_count.max(1) + pairs.len(),
        worst_ratio: worst,
        m_plateau_ratio: m_plateau,
        g_plateau_ratio: adm.plateau_ratio,
        verdict,
        admissibility: Some(adm),
        stability,
        decay_rate: None,
        envelope_violation: None,
    })
}

fn iss_verdict(m_plateau: f64, m_growth: f64, g: Verdict) -> IssVerdict {
    if m_plateau <= PLATEAU_THRESHOLD && g == Verdict::InfiniteTimeConsistent {
        IssVerdict::IssConsistent
    } else if m_growth >= DIVERGENCE_FACTOR || g == Verdict::Divergent {
        IssVerdict::NotIss
    } else {
        IssVerdict::Inconclusive
    }
}

/// Fits `‖φ(t, x, u)‖ ≤ M‖x‖e^{-at} + G‖u‖_{L^p([0,t])}` on sampled
/// trajectories, with `a` the fitted decay rate of the semigroup.
pub fn p_infty_bridge(system: &LinearSystem, p: Exponent, horizons: &[f64], seed: u64) -> Result<IssGainReport> {
    validate_ladder(horizons)?;
    let stability = stability_for(system, Exponent::INFINITY, horizons)?;
    system.generator.require_stable()?;
    let a = stability.omega_fit;
    let n = system.modes();
    let t_end = *horizons.last().unwrap();
    let grid = uniform_grid(t_end, t_end / 1024.0)?;
    let zero_u = GridSignal::zero(system.input_dim(), 1.0)?;
    let xs = state_probes(n, seed);

    // M: sup over probes and times of ‖T(t)x‖ e^{at} / ‖x‖, per horizon.
    let m_curves = xs
        .par_iter()
        .map(|x| -> Result<Vec<(f64, f64)>> {
            let tr = trajectory(system, x, &zero_u, &grid)?;
            Ok(tr.times.iter().zip(&tr.states).map(|(t, s)| (*t, s.norm() * (a * t).exp() / x.norm())).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let m_estimates: Vec<f64> = horizons
        .iter()
        .map(|&h| m_curves.iter().flatten().filter(|(t, _)| *t <= h).map(|c| c.1).fold(0.0, f64::max))
        .collect();
    let m = *m_estimates.last().unwrap();

    // G: sup over input probes and times of ‖Φ_t u‖ / ‖u‖_{L^p([0,t])}.
    let shape = ProbeShape { horizon: t_end, input_dim: system.input_dim(), pieces: 32 };
    let mut us = structured_candidates(system, t_end)?;
    us.extend(random_probe_family(seed, 24, shape, p)?);
    let zero_x = StateVector::zeros(n);
    let g_curves = us
        .par_iter()
        .map(|u| -> Result<Vec<(f64, f64)>> {
            let tr = trajectory(system, &zero_x, u, &grid)?;
            tr.times
                .iter()
                .zip(&tr.states)
                .filter(|(t, _)| **t > 0.0)
                .map(|(t, s)| {
                    let nu = u.lp_norm(p, *t)?;
                    Ok((*t, if nu == 0.0 { 0.0 } else { s.norm() / nu }))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let g_estimates: Vec<f64> = horizons
        .iter()
        .map(|&h| g_curves.iter().flatten().filter(|(t, _)| *t <= h).map(|c| c.1).fold(0.0, f64::max))
        .collect();
    let g = *g_estimates.last().unwrap();

    // Envelope on mixed trajectories.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1d6e);
    let pairs: Vec<(StateVector, &GridSignal)> =
        us.iter().map(|u| (unit_random(&mut rng, n).scaled(rng_scale(&mut rng)), u)).collect();
    let violation = pairs
        .par_iter()
        .map(|(x, u)| -> Result<f64> {
            let tr = trajectory(system, x, u, &grid)?;
            let mut worst = f64::NEG_INFINITY;
            for (t, s) in tr.times.iter().zip(&tr.states) {
                let env = m * x.norm() * (-a * t).exp() + g * u.lp_norm(p, *t)?;
                worst = worst.max(s.norm() - env);
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);

    let (m_plateau, m_growth, _, _) = ladder_verdict(horizons, &m_estimates);
    let (g_plateau, _, _, g_verdict) = ladder_verdict(horizons, &g_estimates);
    let mut verdict = iss_verdict(m_plateau, m_growth, g_verdict);
    if violation > 1e-9 * (m + g).max(1.0) {
        verdict = IssVerdict::NotIss;
    }
    Ok(IssGainReport {
        p,
        q: Exponent::INFINITY,
        horizons: horizons.to_vec(),
        m_estimates,
        g_estimates,
        m,
        g,
        probe_count: xs.len() + us.len(),
        worst_ratio: g,
        m_plateau_ratio: m_plateau,
        g_plateau_ratio: g_plateau,
        verdict,
        admissibility: None,
        stability,
        decay_rate: Some(a),
        envelope_violation: Some(violation),
    })
}

fn rng_scale(rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    0.5 + z.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ControlOperator;

    fn scalar() -> LinearSystem {
        let g = DiagonalGenerator::new(vec![1.0]).unwrap();
        let b = ControlOperator::rank_one(vec![1.0], 0.0, &g).unwrap();
        LinearSystem::new(g, b).unwrap()
    }

    const LADDER: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

    #[test]
    fn datko_scalar() {
        let g = DiagonalGenerator::new(vec![1.0]).unwrap();
        let r = exponential_stability_check(&g, Exponent::TWO, 20.0).unwrap();
        assert!((r.datko_integral - 0.5).abs() < 1e-12);
        assert!((r.omega_fit - 1.0).abs() < 1e-12);
        assert!(r.stable);
        assert_eq!(datko_integral(&g, &StateVector::zeros(1), Exponent::TWO, 5.0).unwrap(), 0.0);
        assert!(exponential_stability_check(&g, Exponent::INFINITY, 1.0).is_err());
    }

    #[test]
    fn datko_unstable_grows() {
        let g = DiagonalGenerator::new(vec![1.0, 2.0]).unwrap().shifted(1.5);
        let a = exponential_stability_check(&g, Exponent::TWO, 4.0).unwrap();
        let b = exponential_stability_check(&g, Exponent::TWO, 8.0).unwrap();
        assert!(b.datko_integral >= 2.0 * a.datko_integral);
        assert!(!b.stable);
    }

    #[test]
    fn scalar_transient_constant() {
        let r = iss_gain_fit(&scalar(), Exponent::TWO, Exponent::TWO, &LADDER, 0).unwrap();
        let exact = ((1.0 - (-32f64).exp()) / 2.0).sqrt();
        assert!((r.m - exact).abs() < 1e-12);
        assert!(r.g > 0.95 && r.g <= 1.0);
        assert_eq!(r.verdict, IssVerdict::IssConsistent);
    }

    #[test]
    fn scalar_classical_envelope() {
        let r = iss_gain_fit(&scalar(), Exponent::INFINITY, Exponent::INFINITY, &LADDER, 0).unwrap();
        assert!((r.m - 1.0).abs() < 1e-12);
        assert!(r.g <= 1.0 && r.g > 0.99);
        assert_eq!(r.verdict, IssVerdict::IssConsistent);
    }

    #[test]
    fn unstable_system_is_not_iss() {
        let s = scalar().shifted(2.0);
        let r = iss_gain_fit(&s, Exponent::TWO, Exponent::TWO, &LADDER, 0).unwrap();
        assert_eq!(r.verdict, IssVerdict::NotIss);
        assert!(!r.stability.stable);
    }

    #[test]
    fn bridge_scalar() {
        let r = p_infty_bridge(&scalar(), Exponent::TWO, &LADDER, 0).unwrap();
        assert!((r.m - 1.0).abs() < 1e-9);
        assert!((r.decay_rate.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.g <= 1.0 / 2f64.sqrt() + 1e-12);
        assert!(r.envelope_violation.unwrap() <= 1e-12);
        assert_eq!(r.verdict, IssVerdict::IssConsistent);
    }
}
