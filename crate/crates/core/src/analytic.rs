//! Quadrature evaluation of coverage probability and area spectral efficiency.
//!
//! The typical UE sits at the origin. The serving BS is the one with the
//! strongest path loss (link type included, antenna gain and fading
//! excluded), so the serving distance has three densities: LoS within the
//! LoS region, NLoS within it, and NLoS beyond it. Conditioned on the
//! serving distance, coverage is a noise factor times the Laplace transform
//! of the LoS and NLoS interference fields outside their exclusion radii.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::channel::{
    angle_deg, equiv_dist_los, equiv_dist_nlos, gain_gauss_deriv, AntennaConfig, DipolePattern,
    GainModel, LinkType, PropagationParams,
};
use crate::error::{domain, invalid, Result};
use crate::quadrature::{integrate, integrate_tail, Estimate, QuadratureSpec};

/// Per-point network parameters in user units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    /// BS density (per km²).
    pub bs_density: f64,
    /// BS transmit power (dBm).
    pub tx_power_dbm: f64,
    /// Noise power at the UE (dBm).
    pub noise_power_dbm: f64,
    /// Coverage SINR threshold (dB).
    pub sinr_threshold_db: f64,
    /// Network-wide downtilt (degrees).
    pub tilt: f64,
    /// Minimum working SINR for ASE (dB).
    pub ase_threshold_db: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            bs_density: 1000.0,
            tx_power_dbm: 24.0,
            noise_power_dbm: -95.0,
            sinr_threshold_db: 0.0,
            tilt: 0.0,
            ase_threshold_db: 0.0,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bs_density > 0.0 && self.bs_density.is_finite()) {
            return Err(invalid("bs_density", "must be positive and finite"));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(invalid("tx_power_dbm", "must be finite"));
        }
        if self.noise_power_dbm.is_nan() || self.noise_power_dbm == f64::INFINITY {
            return Err(invalid("noise_power_dbm", "must be finite or -inf"));
        }
        if self.sinr_threshold_db.is_nan() {
            return Err(invalid("sinr_threshold_db", "must be a number"));
        }
        if !(0.0..=90.0).contains(&self.tilt) {
            return Err(invalid("tilt", "must lie in [0, 90] degrees"));
        }
        if !self.ase_threshold_db.is_finite() {
            return Err(invalid("ase_threshold_db", "must be finite"));
        }
        Ok(())
    }

    /// Density per m².
    pub fn density_m2(&self) -> f64 {
        self.bs_density * 1e-6
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_w(self.tx_power_dbm)
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_w(self.noise_power_dbm)
    }

    pub fn sinr_threshold(&self) -> f64 {
        db_to_lin(self.sinr_threshold_db)
    }

    pub fn ase_threshold(&self) -> f64 {
        db_to_lin(self.ase_threshold_db)
    }

    pub fn with_tilt(mut self, tilt: f64) -> Self {
        self.tilt = tilt;
        self
    }

    pub fn with_density(mut self, bs_density: f64) -> Self {
        self.bs_density = bs_density;
        self
    }

    pub fn with_threshold_db(mut self, db: f64) -> Self {
        self.sinr_threshold_db = db;
        self
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Propagation and antenna description shared by every evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct System {
    pub propagation: PropagationParams,
    pub antenna: AntennaConfig,
    pub gain_model: GainModel,
}

impl System {
    pub fn with_gain_model(mut self, gain_model: GainModel) -> Self {
        self.gain_model = gain_model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.propagation.validate()?;
        self.antenna.validate()
    }

    /// 2D distance below which an NLoS server still sees LoS interferers.
    ///
    /// This is the NLoS distance whose LoS-equivalent distance equals `d1`;
    /// zero when even an overhead NLoS server outranks no LoS BS in the LoS region.
    pub fn nlos_los_boundary(&self) -> f64 {
        equiv_dist_nlos(self.propagation.d1, &self.propagation)
    }
}

/// Which of the three serving-distance densities a term belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ServingBranch {
    /// LoS server at `r <= d1`.
    Los,
    /// NLoS server at `r <= d1`.
    NlosNear,
    /// NLoS server at `r > d1`.
    NlosFar,
}

impl ServingBranch {
    pub fn link(&self) -> LinkType {
        match self {
            ServingBranch::Los => LinkType::Los,
            _ => LinkType::Nlos,
        }
    }
}

/// Precomputed state for one (system, scenario, threshold) evaluation.
#[derive(Clone, Copy)]
pub(crate) struct Evaluator<'a> {
    pub prop: &'a PropagationParams,
    pub ant: &'a AntennaConfig,
    pub q: &'a QuadratureSpec,
    pattern: DipolePattern,
    model: GainModel,
    interferer_gain: bool,
    /// Density per m².
    pub lambda: f64,
    p_tx: f64,
    n0: f64,
    pub gamma: f64,
    pub tilt: f64,
    pub l: f64,
    pub d1: f64,
    /// 2D edge of the LoS region.
    los_r: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(sys: &'a System, sc: &ScenarioParams, q: &'a QuadratureSpec) -> Result<Self> {
        sys.validate()?;
        sc.validate()?;
        q.validate(sys.propagation.d1)?;
        Ok(Self {
            prop: &sys.propagation,
            ant: &sys.antenna,
            q,
            pattern: sys.antenna.pattern(),
            model: sys.gain_model,
            interferer_gain: true,
            lambda: sc.density_m2(),
            p_tx: sc.tx_power_w(),
            n0: sc.noise_power_w(),
            gamma: sc.sinr_threshold(),
            tilt: sc.tilt,
            l: sys.propagation.height_diff,
            d1: sys.propagation.d1,
            los_r: sys.propagation.los_radius_2d(),
        })
    }

    pub fn without_interferer_gain(mut self) -> Self {
        self.interferer_gain = false;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Antenna gain toward a UE at 2D distance `r`.
    #[inline]
    pub fn gain(&self, r: f64) -> f64 {
        let theta = angle_deg(r, self.l);
        match self.model {
            GainModel::Exact => self.pattern.gain(theta, self.tilt),
            GainModel::Gaussian => crate::channel::gain_gauss(theta, self.tilt, self.ant),
            GainModel::Unit => 1.0,
        }
    }

    /// `d gain / d tilt` toward a UE at 2D distance `r` (per degree).
    pub fn gain_deriv(&self, r: f64) -> f64 {
        let theta = angle_deg(r, self.l);
        match self.model {
            GainModel::Gaussian => gain_gauss_deriv(theta, self.tilt, self.ant),
            GainModel::Unit => 0.0,
            GainModel::Exact => {
                let x = (theta - self.tilt).to_radians();
                let c = x.cos();
                let g = self.pattern.gain_from_cos(c);
                if c.abs() <= 10f64.powf(self.ant.sidelobe_floor_db / (10.0 * self.ant.dipole_exp)) {
                    0.0
                } else {
                    // d/dt cos^n(θ - t) = n cos^(n-1) sin(θ - t) · π/180
                    g * self.ant.dipole_exp * x.tan() * PI / 180.0
                }
            }
        }
    }

    #[inline]
    fn interferer_gain(&self, u: f64) -> f64 {
        if self.interferer_gain {
            self.gain(u)
        } else {
            1.0
        }
    }

    fn interferer_gain_deriv(&self, u: f64) -> f64 {
        if self.interferer_gain {
            self.gain_deriv(u)
        } else {
            0.0
        }
    }

    #[inline]
    pub fn los_prob(&self, u: f64) -> f64 {
        self.prop.los_probability_2d(u)
    }

    #[inline]
    fn path_loss(&self, u: f64, link: LinkType) -> f64 {
        self.prop.path_loss_sq(u * u + self.l * self.l, link)
    }

    /// Mean received power (fading excluded) from a server at `r`.
    pub fn signal_mean(&self, r: f64, link: LinkType) -> f64 {
        self.p_tx * self.gain(r) * self.path_loss(r, link)
    }

    /// `∫_0^x Pr^L(u) u du`.
    pub fn void_los(&self, x: f64) -> Result<f64> {
        let end = x.min(self.los_r);
        if end <= 0.0 {
            return Ok(0.0);
        }
        Ok(integrate(|u| Ok(self.los_prob(u) * u), &[0.0, end], self.q)?.value)
    }

    /// `∫_0^x (1 - Pr^L(u)) u du`.
    pub fn void_nlos(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        Ok(integrate(|u| Ok((1.0 - self.los_prob(u)) * u), &[0.0, self.los_r, x], self.q)?.value)
    }

    /// Serving-distance density of one branch; zero outside its support.
    pub fn pdf(&self, r: f64, branch: ServingBranch) -> Result<f64> {
        let two_pi_lambda = 2.0 * PI * self.lambda;
        match branch {
            ServingBranch::Los => {
                let pl = self.los_prob(r);
                if r > self.d1 || pl == 0.0 || r <= 0.0 {
                    return Ok(0.0);
                }
                let r1 = equiv_dist_nlos(r, self.prop);
                let void = self.void_nlos(r1)? + self.void_los(r)?;
                Ok((-two_pi_lambda * void).exp() * pl * two_pi_lambda * r)
            }
            ServingBranch::NlosNear | ServingBranch::NlosFar => {
                let in_support = match branch {
                    ServingBranch::NlosNear => r <= self.d1,
                    _ => r > self.d1,
                };
                if !in_support || r <= 0.0 {
                    return Ok(0.0);
                }
                let pn = 1.0 - self.los_prob(r);
                if pn == 0.0 {
                    return Ok(0.0);
                }
                let r2 = equiv_dist_los(r, self.prop);
                let void = self.void_los(r2)? + self.void_nlos(r)?;
                Ok((-two_pi_lambda * void).exp() * pn * two_pi_lambda * r)
            }
        }
    }

    /// Typical-distance scale `1/sqrt(πλ)` in meters.
    fn scale(&self) -> f64 {
        1.0 / (PI * self.lambda).sqrt()
    }

    /// 2D distances where the exact pattern switches between lobe and floor.
    fn gain_kinks(&self) -> Vec<f64> {
        if self.model != GainModel::Exact || self.l == 0.0 {
            return Vec::new();
        }
        let x = self.ant.crossover_offset();
        [self.tilt - x, self.tilt + x]
            .into_iter()
            .filter(|t| *t > 0.0 && *t < 90.0)
            .map(|t| self.l / t.to_radians().tan())
            .collect()
    }

    /// Breakpoints for integrals over the serving distance.
    fn serving_points(&self) -> Vec<f64> {
        let s = self.scale();
        let mut pts: Vec<f64> = [0.03125, 0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|k| k * s)
            .collect();
        pts.push(self.los_r);
        pts.push(self.d1);
        let y1 = equiv_dist_nlos(self.d1, self.prop);
        if y1 > 0.0 {
            pts.push(y1);
        }
        pts.extend(self.gain_kinks());
        pts
    }

    /// Kernel `1 - E[exp(-s P G_u ζ(u) g)]` for an interferer at `u`.
    #[inline]
    fn kernel(&self, u: f64, link: LinkType, signal: f64) -> f64 {
        let t = self.gamma * self.p_tx * self.interferer_gain(u) * self.path_loss(u, link) / signal;
        t / (1.0 + t)
    }

    /// Interference regions for a server at `r`: (lower bound of LoS
    /// interferers, lower bound of NLoS interferers).
    fn exclusion(&self, r: f64, link: LinkType) -> (f64, f64) {
        match link {
            LinkType::Los => (r, equiv_dist_nlos(r, self.prop)),
            LinkType::Nlos => (equiv_dist_los(r, self.prop).min(self.d1), r),
        }
    }

    /// Integrates `g(u, link)` weighted by the link's thinning probability
    /// over both interferer fields.
    fn over_interferers<G>(&self, r: f64, link: LinkType, mut g: G) -> Result<f64>
    where
        G: FnMut(f64, LinkType) -> f64,
    {
        let (los_lo, nlos_lo) = self.exclusion(r, link);
        let mut pts = self.gain_kinks();
        pts.push(self.los_r);
        pts.push(self.d1);
        let mut total = 0.0;
        if los_lo < self.los_r {
            let mut p = vec![los_lo];
            p.extend(pts.iter().copied().filter(|x| *x > los_lo && *x < self.los_r));
            p.push(self.los_r);
            total += integrate(|u| Ok(self.los_prob(u) * g(u, LinkType::Los) * u), &p, self.q)?.value;
        }
        let horizon = self.q.trunc_radius.max(8.0 * self.scale().min(self.q.trunc_radius));
        total += integrate_tail(
            |u| Ok((1.0 - self.los_prob(u)) * g(u, LinkType::Nlos) * u),
            nlos_lo,
            horizon,
            &pts,
            self.q,
        )?
        .value;
        Ok(total)
    }

    /// Exponent of the interference Laplace transform for a server at `r`.
    pub fn laplace_exponent(&self, r: f64, link: LinkType) -> Result<f64> {
        let signal = self.signal_mean(r, link);
        let integral = self.over_interferers(r, link, |u, k| self.kernel(u, k, signal))?;
        Ok(2.0 * PI * self.lambda * integral)
    }

    /// Noise exponent `γ N0 / S(r)`.
    pub fn noise_exponent(&self, r: f64, link: LinkType) -> f64 {
        self.gamma * self.n0 / self.signal_mean(r, link)
    }

    /// Conditional coverage given a server of type `link` at 2D distance `r`.
    pub fn cond_cov(&self, r: f64, link: LinkType) -> Result<f64> {
        let exponent = self.noise_exponent(r, link) + self.laplace_exponent(r, link)?;
        Ok((-exponent).exp())
    }

    /// `d/d tilt` of `-(noise exponent)` and of `-(Laplace exponent)`.
    pub fn exponent_derivs(&self, r: f64, link: LinkType) -> Result<(f64, f64)> {
        let signal = self.signal_mean(r, link);
        let g_r = self.gain(r);
        let dlog_r = self.gain_deriv(r) / g_r;
        let noise = self.noise_exponent(r, link) * dlog_r;
        let integral = self.over_interferers(r, link, |u, k| {
            let t = self.gamma * self.p_tx * self.interferer_gain(u) * self.path_loss(u, k) / signal;
            if t == 0.0 {
                return 0.0;
            }
            // K = t/(1+t) with t ∝ G_u/G_r, so dK/dtilt = K/(1+t) · (G_u'/G_u - G_r'/G_r).
            let dlog_u = if self.interferer_gain {
                self.interferer_gain_deriv(u) / self.interferer_gain(u)
            } else {
                0.0
            };
            t / ((1.0 + t) * (1.0 + t)) * (dlog_u - dlog_r)
        })?;
        Ok((noise, -2.0 * PI * self.lambda * integral))
    }

    /// Integrates `h(r, branch)` against the three serving branches.
    pub fn over_serving<H>(&self, mut h: H) -> Result<[Estimate; 3]>
    where
        H: FnMut(f64, ServingBranch) -> Result<f64>,
    {
        let mut pts = vec![0.0];
        pts.extend(self.serving_points().into_iter().filter(|p| *p > 0.0 && *p < self.d1));
        pts.push(self.d1);
        let los = integrate(|r| h(r, ServingBranch::Los), &pts, self.q)?;
        let near = integrate(|r| h(r, ServingBranch::NlosNear), &pts, self.q)?;
        let far_pts: Vec<f64> = self.serving_points().into_iter().filter(|p| *p > self.d1).collect();
        let far = integrate_tail(
            |r| h(r, ServingBranch::NlosFar),
            self.d1,
            self.q.trunc_radius.max(4.0 * self.scale()),
            &far_pts,
            self.q,
        )?;
        Ok([los, near, far])
    }

    pub fn coverage(&self) -> Result<Estimate> {
        let parts = self.over_serving(|r, branch| {
            let f = self.pdf(r, branch)?;
            if f == 0.0 {
                return Ok(0.0);
            }
            Ok(f * self.cond_cov(r, branch.link())?)
        })?;
        let mut total = parts[0] + parts[1] + parts[2];
        total.value = total.value.clamp(0.0, 1.0);
        Ok(total)
    }
}

fn check_r(op: &'static str, r: f64, max: Option<f64>) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(domain(op, format!("distance must be finite and non-negative, got {r}")));
    }
    if let Some(m) = max {
        if r > m {
            return Err(domain(op, format!("distance {r} exceeds the LoS cut-off {m}")));
        }
    }
    Ok(())
}

/// Density of a LoS serving BS at 2D distance `r`.
pub fn pdf_serving_los(r: f64, sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<f64> {
    check_r("pdf_serving_los", r, Some(sys.propagation.d1))?;
    Evaluator::new(sys, sc, q)?.pdf(r, ServingBranch::Los)
}

/// Density of an NLoS serving BS at 2D distance `r <= d1`.
pub fn pdf_serving_nlos_near(r: f64, sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<f64> {
    check_r("pdf_serving_nlos_near", r, Some(sys.propagation.d1))?;
    Evaluator::new(sys, sc, q)?.pdf(r, ServingBranch::NlosNear)
}

/// Density of an NLoS serving BS at 2D distance `r > d1`.
pub fn pdf_serving_nlos_far(r: f64, sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<f64> {
    check_r("pdf_serving_nlos_far", r, None)?;
    if r <= sys.propagation.d1 {
        return Err(domain(
            "pdf_serving_nlos_far",
            format!("distance {r} is inside the LoS cut-off {}", sys.propagation.d1),
        ));
    }
    Evaluator::new(sys, sc, q)?.pdf(r, ServingBranch::NlosFar)
}

/// Integrals of the three serving-distance densities over their supports.
///
/// Their sum is one whenever a serving BS exists almost surely.
pub fn serving_masses(sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<[f64; 3]> {
    let ev = Evaluator::new(sys, sc, q)?;
    let parts = ev.over_serving(|r, b| ev.pdf(r, b))?;
    Ok([parts[0].value, parts[1].value, parts[2].value])
}

/// Coverage given a LoS server at 2D distance `r`.
pub fn cond_cov_los(r: f64, sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<f64> {
    check_r("cond_cov_los", r, Some(sys.propagation.d1))?;
    Evaluator::new(sys, sc, q)?.cond_cov(r, LinkType::Los)
}

/// Coverage given an NLoS server at 2D distance `r`.
pub fn cond_cov_nlos(r: f64, sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<f64> {
    check_r("cond_cov_nlos", r, None)?;
    Evaluator::new(sys, sc, q)?.cond_cov(r, LinkType::Nlos)
}

/// Coverage probability `P[SINR > γ]` with the antenna pattern applied to
/// the serving link and to every interferer.
pub fn coverage(sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<Estimate> {
    Evaluator::new(sys, sc, q)?.coverage()
}

/// Coverage probability when interferers radiate with unit gain while the
/// serving link keeps its antenna gain.
pub fn coverage_no_tilt_interference(sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<Estimate> {
    Evaluator::new(sys, sc, q)?.without_interferer_gain().coverage()
}

/// Received-power ratio with and without the antenna pattern for a server
/// at 2D distance `r`, i.e. the linear gain toward it.
pub fn signal_gain_ratio(r: f64, tilt: f64, ant: &AntennaConfig, p: &PropagationParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(domain("signal_gain_ratio", format!("distance must be positive, got {r}")));
    }
    let theta = crate::channel::elevation_angle(r, p.height_diff)?;
    Ok(crate::channel::gain_exact(theta, tilt, ant))
}

/// Mean distance from a typical point to its nearest BS, `1/(2 sqrt(λ))`.
pub fn mean_nearest_distance(bs_density_km2: f64) -> f64 {
    0.5 / (bs_density_km2 * 1e-6).sqrt()
}

/// Area spectral efficiency (bps/Hz/km²) at the scenario's ASE threshold.
///
/// Uses `E[log2(1+Γ) 1{Γ>γ0}] = log2(1+γ0) p(γ0) + (1/ln 2) ∫_{γ0}^∞ p(γ)/(1+γ) dγ`,
/// with the integral taken in `t = ln(1+γ)`.
pub fn ase(sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<Estimate> {
    let gamma0 = sc.ase_threshold();
    let base = Evaluator::new(sys, sc, q)?;
    let outer = QuadratureSpec {
        rel_tol: q.rel_tol.max(1e-7),
        ..q.clone()
    };
    let cov_at = |gamma: f64| -> Result<f64> { Ok(base.with_gamma(gamma).coverage()?.value) };
    let t0 = gamma0.ln_1p();
    let head = gamma0.ln_1p() / LN_2 * cov_at(gamma0)?;
    let tail = integrate_tail(|s| cov_at((t0 + s).exp_m1()), 0.0, 8.0, &[1.0, 2.0, 4.0], &outer)?;
    let mut est = tail;
    est.value = sc.bs_density * (head + tail.value / LN_2);
    est.abs_err = sc.bs_density * tail.abs_err / LN_2;
    Ok(est)
}

/// ASE from a finite-difference SINR density on the quadrature spec's
/// threshold grid; a cross-check of [`ase`].
pub fn ase_by_density(sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<f64> {
    let gamma0_db = sc.ase_threshold_db;
    let mut grid: Vec<f64> = vec![gamma0_db];
    grid.extend(q.gamma_grid_db.iter().copied().filter(|g| *g > gamma0_db));
    let base = Evaluator::new(sys, sc, q)?;
    let cov: Vec<f64> = grid
        .iter()
        .map(|g| Ok(base.with_gamma(db_to_lin(*g)).coverage()?.value))
        .collect::<Result<_>>()?;
    let mut sum = 0.0;
    for i in 0..grid.len() - 1 {
        // Midpoint in dB is the geometric midpoint in linear scale.
        let mid = db_to_lin(0.5 * (grid[i] + grid[i + 1]));
        sum += (1.0 + mid).log2() * (cov[i] - cov[i + 1]);
    }
    let last = grid[grid.len() - 1];
    sum += (1.0 + db_to_lin(last)).log2() * cov[cov.len() - 1];
    Ok(sc.bs_density * sum)
}
