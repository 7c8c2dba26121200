//! Monte Carlo oracle for the analytical results.
//!
//! Each trial drops a Poisson number of BSs uniformly on a disc around the
//! typical UE, draws one LoS state per BS, associates by path loss and
//! evaluates the SINR under Rayleigh fading. Trial `i` draws from ChaCha
//! stream `i` of the configured seed, so any trial can be regenerated in
//! isolation and results do not depend on scheduling.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{ScenarioParams, System};
use crate::channel::{angle_deg, gain_gauss, DipolePattern, GainModel, LinkType};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_tail, QuadratureSpec};

/// Largest admissible share of the mean interference-plus-noise power that
/// BSs beyond the simulation disc may contribute.
pub const TAIL_FRACTION: f64 = 1e-3;

/// Trials per work unit; blocks are reduced in index order.
const BLOCK: u64 = 1024;

/// Refuse radii that would put more than this many BSs in a trial on average.
const MAX_MEAN_COUNT: f64 = 2e6;

/// Rule used to pick the serving BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Association {
    /// Strongest mean power excluding antenna gain, as in the analysis.
    #[default]
    PathLoss,
    /// Strongest mean power including the antenna gain toward the UE.
    GainInclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub system: System,
    pub scenario: ScenarioParams,
    /// Radius (m) of the disc on which BSs are dropped.
    pub sim_radius: f64,
    pub n_trials: u64,
    pub seed: u64,
    /// Apply the antenna pattern to interferers; off gives unit interferer gain.
    pub gain_on_interference: bool,
    pub association: Association,
}

impl TrialConfig {
    /// Config with the smallest admissible default radius for the scenario's tilt.
    pub fn new(system: System, scenario: ScenarioParams, n_trials: u64, seed: u64) -> Result<Self> {
        Self::for_tilts(system, scenario, n_trials, seed, true, &[scenario.tilt])
    }

    /// Config whose radius passes the tail check at every tilt in `tilts`.
    pub fn for_tilts(
        system: System,
        scenario: ScenarioParams,
        n_trials: u64,
        seed: u64,
        gain_on_interference: bool,
        tilts: &[f64],
    ) -> Result<Self> {
        let mut cfg = Self {
            system,
            scenario,
            sim_radius: 0.0,
            n_trials,
            seed,
            gain_on_interference,
            association: Association::PathLoss,
        };
        cfg.sim_radius = default_sim_radius(&cfg, tilts)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_sim_radius(mut self, sim_radius: f64) -> Result<Self> {
        self.sim_radius = sim_radius;
        self.validate()?;
        Ok(self)
    }

    pub fn with_association(mut self, association: Association) -> Self {
        self.association = association;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(self.scenario.tilt)
    }

    fn validate_at(&self, tilt: f64) -> Result<()> {
        self.system.validate()?;
        self.scenario.validate()?;
        if self.n_trials == 0 {
            return Err(invalid("n_trials", "must be positive"));
        }
        if !(self.sim_radius > 0.0 && self.sim_radius.is_finite()) {
            return Err(invalid("sim_radius", format!("must be positive and finite, got {}", self.sim_radius)));
        }
        let ratio = tail_ratio(self, tilt, self.sim_radius)?;
        if ratio > TAIL_FRACTION {
            return Err(invalid(
                "sim_radius",
                format!(
                    "{} m leaves {ratio:.3e} of the interference-plus-noise power outside the disc at tilt {tilt}",
                    self.sim_radius
                ),
            ));
        }
        Ok(())
    }

    fn mean_count(&self) -> f64 {
        self.scenario.density_m2() * PI * self.sim_radius * self.sim_radius
    }
}

/// Mean received power (fading averaged) from a BS at 2D distance `u`, with
/// the LoS state averaged out.
fn mean_power(cfg: &TrialConfig, tilt: f64, u: f64) -> f64 {
    let p = &cfg.system.propagation;
    let w2 = u * u + p.height_diff * p.height_diff;
    let pl = p.los_probability_2d(u);
    let g = if cfg.gain_on_interference {
        cfg.system.gain_model.gain(angle_deg(u, p.height_diff), tilt, &cfg.system.antenna)
    } else {
        1.0
    };
    cfg.scenario.tx_power_w() * g * (pl * p.path_loss_sq(w2, LinkType::Los) + (1.0 - pl) * p.path_loss_sq(w2, LinkType::Nlos))
}

/// Mean interference from beyond `radius` relative to noise plus the mean
/// interference from beyond the typical cell radius `1/sqrt(πλ)`.
fn tail_ratio(cfg: &TrialConfig, tilt: f64, radius: f64) -> Result<f64> {
    let q = QuadratureSpec {
        rel_tol: 1e-6,
        ..Default::default()
    };
    let lambda = cfg.scenario.density_m2();
    let d1 = cfg.system.propagation.d1;
    let cell = 1.0 / (PI * lambda).sqrt();
    let field = |a: f64| -> Result<f64> {
        let est = integrate_tail(|u| Ok(mean_power(cfg, tilt, u) * u), a, a.max(d1), &[d1], &q)?;
        Ok(2.0 * PI * lambda * est.value)
    };
    let tail = field(radius)?;
    let reference = cfg.scenario.noise_power_w() + field(cell.min(radius))?;
    Ok(tail / reference)
}

/// Smallest radius `max(d1, 10/sqrt(πλ))·2^k` passing the tail check at all `tilts`.
pub fn default_sim_radius(cfg: &TrialConfig, tilts: &[f64]) -> Result<f64> {
    cfg.system.validate()?;
    cfg.scenario.validate()?;
    let lambda = cfg.scenario.density_m2();
    let mut radius = cfg.system.propagation.d1.max(10.0 / (PI * lambda).sqrt());
    let worst = |r: f64| -> Result<f64> {
        let mut m: f64 = 0.0;
        for t in tilts.iter().copied().chain(std::iter::once(cfg.scenario.tilt)) {
            m = m.max(tail_ratio(cfg, t, r)?);
        }
        Ok(m)
    };
    while worst(radius)? > TAIL_FRACTION {
        radius *= 2.0;
        if lambda * PI * radius * radius > MAX_MEAN_COUNT {
            return Err(invalid(
                "sim_radius",
                format!("tail check needs a radius above {radius} m, too many BSs per trial"),
            ));
        }
    }
    Ok(radius)
}

/// One realized network around the typical UE at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedNetwork {
    /// BS positions (m).
    pub bs_positions: Vec<[f64; 2]>,
    pub link_types: Vec<LinkType>,
    /// Serving BS under path-loss association; `None` for an empty network.
    pub serving_index: Option<usize>,
    dist: Vec<f64>,
    /// `P_B·ζ(w)` under the realized link type.
    atten: Vec<f64>,
}

impl RealizedNetwork {
    pub fn len(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bs_positions.is_empty()
    }

    /// 2D distance of BS `i` to the UE.
    pub fn distance(&self, i: usize) -> f64 {
        self.dist[i]
    }

    /// Transmit power times path loss of BS `i`, no gain and no fading.
    pub fn mean_power(&self, i: usize) -> f64 {
        self.atten[i]
    }
}

/// Generator of trial `trial_index`, positioned after the network draws
/// when returned from [`sample_network_with_rng`].
fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Realizes the network of trial `trial_index`.
pub fn sample_network(cfg: &TrialConfig, trial_index: u64) -> RealizedNetwork {
    sample_network_with_rng(cfg, trial_index).0
}

/// As [`sample_network`], also returning the trial's generator for the
/// fading draws.
pub fn sample_network_with_rng(cfg: &TrialConfig, trial_index: u64) -> (RealizedNetwork, ChaCha8Rng) {
    let mut rng = trial_rng(cfg.seed, trial_index);
    let p = &cfg.system.propagation;
    let mean = cfg.mean_count();
    let n = if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(&mut rng) as usize).unwrap_or(0)
    } else {
        0
    };
    let r = cfg.sim_radius;
    let r2 = r * r;
    let l2 = p.height_diff * p.height_diff;
    let p_tx = cfg.scenario.tx_power_w();
    let mut net = RealizedNetwork {
        bs_positions: Vec::with_capacity(n),
        link_types: Vec::with_capacity(n),
        serving_index: None,
        dist: Vec::with_capacity(n),
        atten: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let (x, y, d2) = loop {
            let x = r * (2.0 * rng.random::<f64>() - 1.0);
            let y = r * (2.0 * rng.random::<f64>() - 1.0);
            let d2 = x * x + y * y;
            if d2 <= r2 {
                break (x, y, d2);
            }
        };
        let w2 = d2 + l2;
        let pl = crate::channel::los_probability(w2.sqrt(), p.d1);
        let link = if pl > 0.0 && rng.random::<f64>() < pl {
            LinkType::Los
        } else {
            LinkType::Nlos
        };
        net.bs_positions.push([x, y]);
        net.link_types.push(link);
        net.dist.push(d2.sqrt());
        net.atten.push(p_tx * p.path_loss_sq(w2, link));
    }
    net.serving_index = strongest(&net, |_| 1.0);
    (net, rng)
}

/// Index maximizing `atten·weight`, ties to the nearer BS.
fn strongest(net: &RealizedNetwork, weight: impl Fn(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..net.len() {
        let v = net.atten[i] * weight(i);
        match best {
            Some((j, bv)) if v < bv || (v == bv && net.dist[i] >= net.dist[j]) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Serving BS of a realized network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Serving {
    pub index: usize,
    pub link: LinkType,
    /// 2D distance (m).
    pub distance: f64,
}

/// Path-loss association; errors on an empty network.
pub fn associate(net: &RealizedNetwork, trial: u64) -> Result<Serving> {
    let i = strongest(net, |_| 1.0).ok_or(Error::NoServingBs { trial })?;
    Ok(Serving {
        index: i,
        link: net.link_types[i],
        distance: net.dist[i],
    })
}

/// Antenna gain toward the UE for each BS at a given tilt.
struct GainEval {
    model: GainModel,
    pattern: DipolePattern,
    cos_t: f64,
    sin_t: f64,
    tilt: f64,
    l: f64,
}

impl GainEval {
    fn new(system: &System, tilt: f64) -> Self {
        let t = tilt.to_radians();
        Self {
            model: system.gain_model,
            pattern: system.antenna.pattern(),
            cos_t: t.cos(),
            sin_t: t.sin(),
            tilt,
            l: system.propagation.height_diff,
        }
    }

    #[inline]
    fn gain(&self, u: f64, system: &System) -> f64 {
        match self.model {
            GainModel::Unit => 1.0,
            GainModel::Exact => {
                // cos(θ - t) with θ = atan(L/u), without the trigonometry.
                let w = u.hypot(self.l);
                if w == 0.0 {
                    return self.pattern.gain(90.0, self.tilt);
                }
                self.pattern.gain_from_cos((u * self.cos_t + self.l * self.sin_t) / w)
            }
            GainModel::Gaussian => gain_gauss(angle_deg(u, self.l), self.tilt, &system.antenna),
        }
    }
}

fn draw_fading(n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..n).map(|_| -> f64 { Exp1.sample(rng) }));
}

fn sinr_with(net: &RealizedNetwork, fading: &[f64], cfg: &TrialConfig, ge: &GainEval, gains: &mut Vec<f64>) -> Option<f64> {
    gains.clear();
    gains.extend(net.dist.iter().map(|u| ge.gain(*u, &cfg.system)));
    let s = match cfg.association {
        Association::PathLoss => net.serving_index?,
        Association::GainInclusive => strongest(net, |i| gains[i])?,
    };
    let mut interference = 0.0;
    for i in 0..net.len() {
        if i == s {
            continue;
        }
        let g = if cfg.gain_on_interference { gains[i] } else { 1.0 };
        interference += net.atten[i] * g * fading[i];
    }
    let signal = net.atten[s] * gains[s] * fading[s];
    let denom = interference + cfg.scenario.noise_power_w();
    Some(if denom == 0.0 { f64::INFINITY } else { signal / denom })
}

/// Linear SINR at the scenario tilt, drawing the fading from `rng`;
/// `None` for an empty network.
pub fn sinr_sample(net: &RealizedNetwork, cfg: &TrialConfig, rng: &mut ChaCha8Rng) -> Option<f64> {
    let mut fading = Vec::new();
    draw_fading(net.len(), rng, &mut fading);
    let ge = GainEval::new(&cfg.system, cfg.scenario.tilt);
    sinr_with(net, &fading, cfg, &ge, &mut Vec::new())
}

/// Per-tilt accumulator of one block of trials.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Acc {
    covered: u64,
    rate: f64,
    rate_sq: f64,
}

/// Outcome of a batch of trials at one tilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltStats {
    pub tilt: f64,
    /// Trials with a serving BS.
    pub trials: u64,
    /// Trials without any BS, excluded from the estimates.
    pub discarded: u64,
    pub covered: u64,
    /// `Σ log2(1+SINR)·1{SINR > γ0}` over the valid trials.
    pub rate_sum: f64,
    pub rate_sq_sum: f64,
}

/// Probability estimate with a 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate95 {
    pub value: f64,
    pub ci: f64,
}

impl TiltStats {
    pub fn coverage(&self) -> Estimate95 {
        let n = self.trials as f64;
        if self.trials == 0 {
            return Estimate95 { value: f64::NAN, ci: f64::NAN };
        }
        let p = self.covered as f64 / n;
        Estimate95 {
            value: p,
            ci: 1.96 * (p * (1.0 - p) / n).sqrt(),
        }
    }

    /// ASE (bps/Hz/km²) at the given density.
    pub fn ase(&self, bs_density: f64) -> Estimate95 {
        let n = self.trials as f64;
        if self.trials == 0 {
            return Estimate95 { value: f64::NAN, ci: f64::NAN };
        }
        let mean = self.rate_sum / n;
        let var = (self.rate_sq_sum / n - mean * mean).max(0.0);
        Estimate95 {
            value: bs_density * mean,
            ci: bs_density * 1.96 * (var / n).sqrt(),
        }
    }
}

/// Runs all trials once and evaluates every tilt on the same networks and
/// fading draws.
pub fn run_tilts(cfg: &TrialConfig, tilts: &[f64]) -> Result<Vec<TiltStats>> {
    for t in tilts {
        if !(0.0..=90.0).contains(t) {
            return Err(invalid("tilt", format!("must lie in [0, 90] degrees, got {t}")));
        }
        cfg.validate_at(*t)?;
    }
    let gamma = cfg.scenario.sinr_threshold();
    let gamma0 = cfg.scenario.ase_threshold();
    let evals: Vec<GainEval> = tilts.iter().map(|t| GainEval::new(&cfg.system, *t)).collect();
    let n_blocks = cfg.n_trials.div_ceil(BLOCK);
    let blocks: Vec<(Vec<Acc>, u64)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![Acc::default(); tilts.len()];
            let mut discarded = 0;
            let (mut fading, mut gains) = (Vec::new(), Vec::new());
            for trial in b * BLOCK..((b + 1) * BLOCK).min(cfg.n_trials) {
                let (net, mut rng) = sample_network_with_rng(cfg, trial);
                if net.is_empty() {
                    discarded += 1;
                    continue;
                }
                draw_fading(net.len(), &mut rng, &mut fading);
                for (a, ge) in acc.iter_mut().zip(&evals) {
                    let Some(sinr) = sinr_with(&net, &fading, cfg, ge, &mut gains) else {
                        continue;
                    };
                    if sinr > gamma {
                        a.covered += 1;
                    }
                    if sinr > gamma0 {
                        let c = if sinr.is_finite() { sinr.ln_1p() / LN_2 } else { f64::MAX.log2() };
                        a.rate += c;
                        a.rate_sq += c * c;
                    }
                }
            }
            (acc, discarded)
        })
        .collect();
    let discarded: u64 = blocks.iter().map(|b| b.1).sum();
    Ok(tilts
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let mut s = TiltStats {
                tilt: *t,
                trials: cfg.n_trials - discarded,
                discarded,
                covered: 0,
                rate_sum: 0.0,
                rate_sq_sum: 0.0,
            };
            for (acc, _) in &blocks {
                s.covered += acc[k].covered;
                s.rate_sum += acc[k].rate;
                s.rate_sq_sum += acc[k].rate_sq;
            }
            s
        })
        .collect())
}

/// Coverage at the scenario tilt.
pub fn coverage_estimate(cfg: &TrialConfig) -> Result<Estimate95> {
    Ok(run_tilts(cfg, &[cfg.scenario.tilt])?[0].coverage())
}

/// ASE (bps/Hz/km²) at the scenario tilt and ASE threshold.
pub fn ase_estimate(cfg: &TrialConfig) -> Result<Estimate95> {
    Ok(run_tilts(cfg, &[cfg.scenario.tilt])?[0].ase(cfg.scenario.bs_density))
}

/// Serving distances split by link type and by side of the LoS cut-off.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServingSamples {
    pub los: Vec<f64>,
    pub nlos_near: Vec<f64>,
    pub nlos_far: Vec<f64>,
    pub discarded: u64,
}

impl ServingSamples {
    pub fn total(&self) -> usize {
        self.los.len() + self.nlos_near.len() + self.nlos_far.len()
    }
}

/// Serving distances of `cfg.n_trials` trials under path-loss association.
pub fn serving_distances(cfg: &TrialConfig) -> Result<ServingSamples> {
    cfg.validate()?;
    let d1 = cfg.system.propagation.d1;
    let n_blocks = cfg.n_trials.div_ceil(BLOCK);
    let blocks: Vec<ServingSamples> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut out = ServingSamples::default();
            for trial in b * BLOCK..((b + 1) * BLOCK).min(cfg.n_trials) {
                let net = sample_network(cfg, trial);
                match associate(&net, trial) {
                    Ok(a) => match a.link {
                        LinkType::Los => out.los.push(a.distance),
                        LinkType::Nlos if a.distance <= d1 => out.nlos_near.push(a.distance),
                        LinkType::Nlos => out.nlos_far.push(a.distance),
                    },
                    Err(_) => out.discarded += 1,
                }
            }
            out
        })
        .collect();
    let mut all = ServingSamples::default();
    for b in blocks {
        all.los.extend(b.los);
        all.nlos_near.extend(b.nlos_near);
        all.nlos_far.extend(b.nlos_far);
        all.discarded += b.discarded;
    }
    Ok(all)
}
