//! Metropolis-Hastings model fitting with a cascade of per-object (local) and
//! joint (global) acceptance filters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, Volume3};
use crate::model::{Coefficients, DmfcGpm, JointInstance};
use crate::{Error, Result};

/// Observed per-object point set for surface fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTarget {
    pub points: Vec<Point3>,
    /// Surface vertices of the model object that enter the likelihood;
    /// `None` uses all of them.
    #[serde(default)]
    pub mask: Option<Vec<usize>>,
}

/// What the model is fitted to.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    /// Observed intensities; residuals are instance intensity minus the
    /// nearest voxel value at the posed point (0 outside the grid).
    Volume { volume: Volume3, sigma: f64 },
    /// Per-object targets (`None` = object unobserved); residuals are
    /// closest-point distances in both directions.
    Surface {
        targets: Vec<Option<SurfaceTarget>>,
        sigma: f64,
    },
}

impl Observation {
    /// Volume observation with `σ` = 10% of the volume's dynamic range.
    pub fn volume_default(volume: Volume3) -> Result<Self> {
        let range = volume.max_value() - volume.min_value();
        if !(range > 0.0) {
            return Err(Error::ZeroVariance);
        }
        Ok(Observation::Volume {
            volume,
            sigma: 0.1 * range,
        })
    }

    pub fn sigma(&self) -> f64 {
        match self {
            Observation::Volume { sigma, .. } | Observation::Surface { sigma, .. } => *sigma,
        }
    }

    fn validate(&self, model: &DmfcGpm) -> Result<()> {
        let s = self.sigma();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise scale must be positive, got {s}")));
        }
        if let Observation::Surface { targets, .. } = self {
            if targets.len() != model.reference.n_objects() {
                return Err(Error::LengthMismatch {
                    what: "surface targets",
                    expected: model.reference.n_objects(),
                    got: targets.len(),
                });
            }
        }
        Ok(())
    }
}

fn gaussian_log_density(residual: f64, sigma: f64) -> f64 {
    -0.5 * (residual / sigma).powi(2) - 0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
}

/// Per-object residuals of an instance against an observation.
pub fn object_residuals(instance: &JointInstance, obs: &Observation, object: usize) -> Result<Vec<f64>> {
    let obj = instance
        .objects
        .get(object)
        .ok_or(Error::IndexOutOfRange {
            what: "object",
            index: object,
            len: instance.objects.len(),
        })?;
    match obs {
        Observation::Volume { volume, .. } => Ok(obj
            .tet
            .vertices
            .iter()
            .zip(&obj.tet.intensity)
            .map(|(p, v)| v - volume.sample_nearest(p).unwrap_or(0.0))
            .collect()),
        Observation::Surface { targets, .. } => {
            let Some(target) = targets.get(object).and_then(Option::as_ref) else {
                return Ok(Vec::new());
            };
            let model_pts: Vec<Point3> = match &target.mask {
                Some(m) => m
                    .iter()
                    .map(|&i| {
                        obj.surface.vertices.get(i).copied().ok_or(Error::IndexOutOfRange {
                            what: "surface mask",
                            index: i,
                            len: obj.surface.vertices.len(),
                        })
                    })
                    .collect::<Result<_>>()?,
                None => obj.surface.vertices.clone(),
            };
            if model_pts.is_empty() || target.points.is_empty() {
                return Ok(Vec::new());
            }
            let mut out: Vec<f64> = model_pts.iter().map(|p| closest_distance(p, &target.points)).collect();
            out.extend(target.points.iter().map(|q| closest_distance(q, &model_pts)));
            Ok(out)
        }
    }
}

pub(crate) fn closest_distance(p: &Point3, set: &[Point3]) -> f64 {
    set.iter()
        .map(|q| (p - q).norm_squared())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Gaussian log-likelihood of object `j` of an instance.
pub fn instance_local_log_likelihood(instance: &JointInstance, obs: &Observation, object: usize) -> Result<f64> {
    let sigma = obs.sigma();
    Ok(object_residuals(instance, obs, object)?
        .iter()
        .map(|r| gaussian_log_density(*r, sigma))
        .sum())
}

pub fn local_log_likelihood(model: &DmfcGpm, theta: &Coefficients, obs: &Observation, object: usize) -> Result<f64> {
    obs.validate(model)?;
    if object >= model.reference.n_objects() {
        return Err(Error::IndexOutOfRange {
            what: "object",
            index: object,
            len: model.reference.n_objects(),
        });
    }
    instance_local_log_likelihood(&model.sample(theta)?, obs, object)
}

/// Sum of the local log-likelihoods over all objects.
pub fn global_log_likelihood(model: &DmfcGpm, theta: &Coefficients, obs: &Observation) -> Result<f64> {
    obs.validate(model)?;
    let inst = model.sample(theta)?;
    (0..inst.objects.len())
        .map(|j| instance_local_log_likelihood(&inst, obs, j))
        .sum()
}

/// Standard-normal log density of the coefficients (up to a constant).
pub fn log_prior(theta: &Coefficients) -> f64 {
    -0.5 * theta.0.iter().map(|t| t * t).sum::<f64>()
}

/// One random-walk component: isotropic `scale`, optionally multiplied per
/// coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalComponent {
    pub weight: f64,
    pub scale: f64,
}

/// Symmetric Gaussian random walk, a weighted mixture of scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub components: Vec<ProposalComponent>,
    /// Per-coefficient multipliers of every component's scale.
    #[serde(default)]
    pub per_coefficient: Option<Vec<f64>>,
}

impl Default for Proposal {
    fn default() -> Self {
        Self::mixture(&[(0.8, 0.05), (0.2, 0.2)]).expect("valid default mixture")
    }
}

impl Proposal {
    pub fn isotropic(scale: f64) -> Result<Self> {
        Self::mixture(&[(1.0, scale)])
    }

    /// `(weight, scale)` pairs; weights must sum to 1.
    pub fn mixture(parts: &[(f64, f64)]) -> Result<Self> {
        let p = Proposal {
            components: parts
                .iter()
                .map(|&(weight, scale)| ProposalComponent { weight, scale })
                .collect(),
            per_coefficient: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Empty("proposal components"));
        }
        if self
            .components
            .iter()
            .any(|c| !(c.scale > 0.0 && c.scale.is_finite() && c.weight >= 0.0))
        {
            return Err(Error::InvalidArgument("proposal scales must be positive".into()));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("proposal weights sum to {total}")));
        }
        if let Some(m) = &self.per_coefficient {
            if m.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::InvalidArgument("per-coefficient scales must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn propose(&self, theta: &Coefficients, rng: &mut ChaCha8Rng) -> Coefficients {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut scale = self.components.last().expect("non-empty").scale;
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                scale = c.scale;
                break;
            }
        }
        Coefficients(
            theta
                .0
                .iter()
                .enumerate()
                .map(|(m, t)| {
                    let z: f64 = StandardNormal.sample(rng);
                    let s = self
                        .per_coefficient
                        .as_ref()
                        .and_then(|v| v.get(m))
                        .map_or(scale, |k| k * scale);
                    t + s * z
                })
                .collect(),
        )
    }
}

/// Which acceptance filters run, in order: local per object, then global.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filters {
    pub local: bool,
    pub global: bool,
}

impl Default for Filters {
    fn default() -> Self {
        Self {
            local: true,
            global: true,
        }
    }
}

/// A chain position with its cached evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub theta: Coefficients,
    pub local: Vec<f64>,
    pub global: f64,
    pub log_prior: f64,
}

impl ChainState {
    /// Log-likelihood plus log-prior.
    pub fn log_posterior(&self) -> f64 {
        self.global + self.log_prior
    }
}

/// Evaluates `θ` against the observation.
pub fn evaluate(model: &DmfcGpm, theta: Coefficients, obs: &Observation) -> Result<ChainState> {
    let inst = model.sample(&theta)?;
    let local = (0..inst.objects.len())
        .map(|j| instance_local_log_likelihood(&inst, obs, j))
        .collect::<Result<Vec<_>>>()?;
    let global = local.iter().sum();
    if !f64::is_finite(global) {
        return Err(Error::NonFinite("log-likelihood"));
    }
    let lp = log_prior(&theta);
    Ok(ChainState {
        theta,
        local,
        global,
        log_prior: lp,
    })
}

/// Outcome of one proposal.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Per filter in cascade order: `Some(accepted)` when evaluated, `None`
    /// when an earlier filter already rejected.
    pub decisions: Vec<Option<bool>>,
    pub accepted: bool,
}

fn metropolis_accept(delta: f64, rng: &mut ChaCha8Rng) -> bool {
    let u: f64 = rng.random();
    delta >= 0.0 || u.ln() < delta
}

/// Draws `θ′ ~ Q(·|θ)` and runs the filter cascade. The state is replaced
/// only when every enabled filter accepts.
pub fn metropolis_step(
    model: &DmfcGpm,
    obs: &Observation,
    state: &mut ChainState,
    proposal: &Proposal,
    filters: Filters,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    let candidate = proposal.propose(&state.theta, rng);
    let next = evaluate(model, candidate, obs)?;
    let prior_delta = next.log_prior - state.log_prior;
    let mut decisions = Vec::with_capacity(next.local.len() + 1);
    let mut ok = true;
    if filters.local {
        for j in 0..next.local.len() {
            if !ok {
                decisions.push(None);
                continue;
            }
            let a = metropolis_accept(next.local[j] - state.local[j] + prior_delta, rng);
            decisions.push(Some(a));
            ok = a;
        }
    }
    if filters.global {
        if ok {
            let a = metropolis_accept(next.global - state.global + prior_delta, rng);
            decisions.push(Some(a));
            ok = a;
        } else {
            decisions.push(None);
        }
    }
    if ok {
        *state = next;
    }
    Ok(StepOutcome {
        decisions,
        accepted: ok,
    })
}

/// Record of one Markov chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// Accepted states and their log-posterior (global log-likelihood plus
    /// log-prior), in acceptance order.
    pub states: Vec<(Coefficients, f64)>,
    /// Starting state and its log-posterior.
    pub start: (Coefficients, f64),
    /// Per filter: (evaluated, accepted).
    pub filter_counts: Vec<(usize, usize)>,
    pub iterations: usize,
    pub seed: u64,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.states.len() as f64 / self.iterations as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub proposal: Proposal,
    pub filters: Filters,
    pub iterations: usize,
    pub seed: u64,
    pub start: Option<Coefficients>,
}

impl ChainConfig {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            proposal: Proposal::default(),
            filters: Filters::default(),
            iterations,
            seed,
            start: None,
        }
    }
}

/// Runs `n_I` proposals from `θ = 0` (or the configured start).
pub fn run_chain(model: &DmfcGpm, obs: &Observation, cfg: &ChainConfig) -> Result<Chain> {
    if cfg.iterations == 0 {
        return Err(Error::InvalidArgument("a chain needs at least one iteration".into()));
    }
    obs.validate(model)?;
    cfg.proposal.validate()?;
    let start = cfg.start.clone().unwrap_or_else(|| Coefficients::zeros(model.rank()));
    if start.len() != model.rank() {
        return Err(Error::LengthMismatch {
            what: "start coefficients",
            expected: model.rank(),
            got: start.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = evaluate(model, start, obs)?;
    let n_filters = if cfg.filters.local { model.reference.n_objects() } else { 0 } + usize::from(cfg.filters.global);
    let mut counts = vec![(0usize, 0usize); n_filters];
    let mut states = Vec::new();
    let start = (state.theta.clone(), state.log_posterior());
    for _ in 0..cfg.iterations {
        let out = metropolis_step(model, obs, &mut state, &cfg.proposal, cfg.filters, &mut rng)?;
        for (c, d) in counts.iter_mut().zip(&out.decisions) {
            if let Some(a) = d {
                c.0 += 1;
                c.1 += usize::from(*a);
            }
        }
        if out.accepted {
            states.push((state.theta.clone(), state.log_posterior()));
        }
    }
    Ok(Chain {
        states,
        start,
        filter_counts: counts,
        iterations: cfg.iterations,
        seed: cfg.seed,
    })
}

/// Highest-probability recorded state (earliest on ties) and its instance.
pub fn best_sample(model: &DmfcGpm, chain: &Chain) -> Result<(Coefficients, JointInstance)> {
    let (theta, _) = best_state(&chain.states).ok_or(Error::Empty("chain"))?;
    Ok((theta.clone(), model.sample(theta)?))
}

fn best_state(states: &[(Coefficients, f64)]) -> Option<&(Coefficients, f64)> {
    let mut best: Option<&(Coefficients, f64)> = None;
    for s in states {
        if best.is_none_or(|b| s.1 > b.1) {
            best = Some(s);
        }
    }
    best
}

/// Result of fitting with several chains.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub chains: Vec<Chain>,
    pub best: Coefficients,
    pub best_log_posterior: f64,
    pub instance: JointInstance,
}

/// Runs `chains` independent chains (seeds `seed, seed + 1, …`) in parallel
/// and merges them by the global argmax. A chain that accepted nothing
/// contributes its start state.
pub fn fit(model: &DmfcGpm, obs: &Observation, cfg: &ChainConfig, chains: usize) -> Result<FitResult> {
    if chains == 0 {
        return Err(Error::InvalidArgument("at least one chain is required".into()));
    }
    let runs = (0..chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut cc = cfg.clone();
            cc.seed = cfg.seed.wrapping_add(c);
            run_chain(model, obs, &cc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(Coefficients, f64)> = None;
    for ch in &runs {
        let cand = best_state(&ch.states).unwrap_or(&ch.start);
        if best.as_ref().is_none_or(|b| cand.1 > b.1) {
            best = Some(cand.clone());
        }
    }
    let (theta, lp) = best.expect("at least one chain");
    let instance = model.sample(&theta)?;
    Ok(FitResult {
        chains: runs,
        best: theta,
        best_log_posterior: lp,
        instance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_training_functions, PoseCoding, Rank, Weighting};
    use crate::synthetic::{generate_dataset, synthesize_joint, JointSpec};
    use std::sync::OnceLock;

    fn specs() -> Vec<JointSpec> {
        [(6.0, 0.5, 0.3), (8.0, 0.7, 0.2), (10.0, 0.6, 0.4), (7.0, 0.9, 0.1), (9.0, 0.4, 0.5)]
            .iter()
            .map(|&(r, a, b)| JointSpec::from_r(r, a, b))
            .collect()
    }

    fn model() -> &'static DmfcGpm {
        static M: OnceLock<DmfcGpm> = OnceLock::new();
        M.get_or_init(|| {
            let data = generate_dataset(&specs(), 0, 1.0).unwrap();
            let ts = assemble_training_functions(&data.samples, &data.reference, PoseCoding::Edr).unwrap();
            DmfcGpm::build(&ts, Weighting::Balanced, Rank::Full).unwrap()
        })
    }

    fn observation() -> Observation {
        let (_, vol) = synthesize_joint(&JointSpec::from_r(8.5, 0.65, 0.3), 0, 1.0).unwrap();
        Observation::volume_default(vol).unwrap()
    }

    #[test]
    fn likelihood_matches_loop_oracle() {
        let m = model();
        let obs = observation();
        let Observation::Volume { volume, sigma } = &obs else { unreachable!() };
        let theta = Coefficients(vec![0.3, -0.7, 0.2]);
        let inst = m.sample(&theta).unwrap();
        let mut total = 0.0;
        for (j, obj) in inst.objects.iter().enumerate() {
            let mut local = 0.0;
            for (p, v) in obj.tet.vertices.iter().zip(&obj.tet.intensity) {
                let g = volume.to_grid(p);
                let idx: Vec<f64> = (0..3).map(|a| g[a].round()).collect();
                let inside = (0..3).all(|a| idx[a] >= 0.0 && idx[a] < volume.dims[a] as f64);
                let obs_v = if inside {
                    volume.voxels[volume.index(idx[0] as usize, idx[1] as usize, idx[2] as usize)]
                } else {
                    0.0
                };
                let r = (v - obs_v) / sigma;
                local += -0.5 * r * r - (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
            }
            let got = local_log_likelihood(m, &theta, &obs, j).unwrap();
            assert!((got - local).abs() <= 1e-9 * local.abs().max(1.0), "object {j}: {got} vs {local}");
            total += local;
        }
        let g = global_log_likelihood(m, &theta, &obs).unwrap();
        assert!((g - total).abs() <= 1e-9 * total.abs());
        assert!(local_log_likelihood(m, &theta, &obs, 3).is_err());
    }

    #[test]
    fn surface_likelihood_peaks_at_exact_target() {
        let m = model();
        let inst = m.sample(&Coefficients::zeros(m.rank())).unwrap();
        let targets = inst
            .objects
            .iter()
            .map(|o| {
                Some(SurfaceTarget {
                    points: o.surface.vertices.clone(),
                    mask: None,
                })
            })
            .collect();
        let obs = Observation::Surface { targets, sigma: 0.5 };
        let at_mean = global_log_likelihood(m, &Coefficients::zeros(m.rank()), &obs).unwrap();
        let off = global_log_likelihood(m, &Coefficients(vec![1.0]), &obs).unwrap();
        assert!(at_mean > off);
        let mut r = object_residuals(&inst, &obs, 0).unwrap();
        r.retain(|x| *x != 0.0);
        assert!(r.is_empty());
        let bad = Observation::Surface {
            targets: vec![None],
            sigma: 0.5,
        };
        assert!(global_log_likelihood(m, &Coefficients(vec![]), &bad).is_err());
    }

    #[test]
    fn accept_rule_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let delta = (0.3f64).ln();
        let n = 40_000;
        let hits = (0..n).filter(|_| metropolis_accept(delta, &mut rng)).count();
        let p = hits as f64 / n as f64;
        let se = (0.3 * 0.7 / n as f64).sqrt();
        assert!((p - 0.3).abs() < 4.0 * se, "{p}");
        assert!(metropolis_accept(0.0, &mut rng));
        assert!(metropolis_accept(2.0, &mut rng));
    }

    #[test]
    fn flat_likelihood_chain_samples_the_prior() {
        // Constant likelihood and only the global filter: MH on N(0, I).
        let m = model();
        let mut vol = match observation() {
            Observation::Volume { volume, .. } => volume,
            _ => unreachable!(),
        };
        vol.voxels.iter_mut().for_each(|v| *v = 0.0);
        let obs = Observation::Volume {
            volume: vol,
            sigma: 1e9,
        };
        let prop = Proposal::isotropic(0.8).unwrap();
        let global_only = Filters {
            local: false,
            global: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut state = evaluate(m, Coefficients::zeros(m.rank()), &obs).unwrap();
        let (mut s1, mut s2, n) = (0.0, 0.0, 20_000);
        for _ in 0..n {
            metropolis_step(m, &obs, &mut state, &prop, global_only, &mut rng).unwrap();
            let t = state.theta.0[0];
            s1 += t;
            s2 += t * t;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        // Autocorrelated draws; generous bounds on the first two moments.
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn cascade_reports_short_circuit() {
        let m = model();
        let obs = observation();
        let prop = Proposal::isotropic(3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = evaluate(m, Coefficients::zeros(m.rank()), &obs).unwrap();
        for _ in 0..50 {
            let before = state.clone();
            let out = metropolis_step(m, &obs, &mut state, &prop, Filters::default(), &mut rng).unwrap();
            assert_eq!(out.decisions.len(), 4);
            if let Some(k) = out.decisions.iter().position(|d| *d == Some(false)) {
                assert!(out.decisions[k + 1..].iter().all(Option::is_none));
                assert!(!out.accepted);
                assert_eq!(state, before);
            } else {
                assert!(out.accepted);
            }
        }
    }

    #[test]
    fn chains_are_deterministic_and_best_is_maximal() {
        let m = model();
        let obs = observation();
        let cfg = ChainConfig::new(300, 9);
        let a = run_chain(m, &obs, &cfg).unwrap();
        let b = run_chain(m, &obs, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.states.is_empty());
        let (theta, inst) = best_sample(m, &a).unwrap();
        let best = a.states.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let lp = evaluate(m, theta.clone(), &obs).unwrap().log_posterior();
        assert!((lp - best).abs() < 1e-9 * best.abs());
        assert_eq!(inst, m.sample(&theta).unwrap());
        for (eval, acc) in &a.filter_counts {
            assert!(acc <= eval && *eval <= 300);
        }
        assert!(a.filter_counts[0].0 == 300);

        let fitted = fit(m, &obs, &cfg, 3).unwrap();
        assert_eq!(fitted.chains[0], a);
        let per_chain = fitted
            .chains
            .iter()
            .flat_map(|c| c.states.iter().map(|s| s.1))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(fitted.best_log_posterior, per_chain.max(fitted.chains[0].start.1));
    }

    #[test]
    fn chain_improves_on_the_mean() {
        let m = model();
        let obs = observation();
        let res = fit(m, &obs, &ChainConfig::new(400, 1), 2).unwrap();
        let start = evaluate(m, Coefficients::zeros(m.rank()), &obs).unwrap();
        assert!(res.best_log_posterior >= start.log_posterior());
    }

    #[test]
    fn rejections() {
        let m = model();
        let obs = observation();
        assert!(run_chain(m, &obs, &ChainConfig::new(0, 1)).is_err());
        assert!(fit(m, &obs, &ChainConfig::new(10, 1), 0).is_err());
        let mut cfg = ChainConfig::new(10, 1);
        cfg.start = Some(Coefficients(vec![0.0; m.rank() + 1]));
        assert!(run_chain(m, &obs, &cfg).is_err());
        assert!(Proposal::mixture(&[(0.5, 0.1), (0.4, 0.2)]).is_err());
        assert!(Proposal::isotropic(0.0).is_err());
        let Observation::Volume { volume, .. } = obs else { unreachable!() };
        let bad = Observation::Volume { volume, sigma: -1.0 };
        assert!(run_chain(m, &bad, &ChainConfig::new(10, 1)).is_err());
        let empty = Chain {
            states: vec![],
            start: (Coefficients::zeros(m.rank()), 0.0),
            filter_counts: vec![],
            iterations: 1,
            seed: 0,
        };
        assert!(matches!(best_sample(m, &empty), Err(Error::Empty(_))));
        let flat = Volume3::zeros([2, 2, 2], [1.0; 3], Point3::origin()).unwrap();
        assert!(Observation::volume_default(flat).is_err());
    }

    #[test]
    fn closest_distance_brute_force() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 0.0, 0.0)];
        assert_eq!(closest_distance(&Point3::new(2.0, 0.0, 0.0), &pts), 1.0);
        assert_eq!(closest_distance(&Point3::new(0.0, 0.0, -2.0), &pts), 2.0);
    }
}
