//! Deterministic propagation and antenna math.
//!
//! Distances are in meters and angles in degrees at every public boundary.
//! Gains are linear (not dBi) unless a name says otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};

/// Meters per unit of distance inside the power-law path loss.
///
/// The 3GPP constants `A^L = 10^-10.38` and `A^NL = 10^-14.54` are quoted
/// for a distance measured in kilometers.
pub const KM: f64 = 1000.0;

/// Line-of-sight state of a single base-station link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkType {
    Los,
    Nlos,
}

/// Power-law LoS/NLoS path loss with a linear LoS probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationParams {
    /// Linear LoS path loss at one distance unit.
    pub a_los: f64,
    /// Linear NLoS path loss at one distance unit.
    pub a_nlos: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    /// 3D LoS cut-off distance (m).
    pub d1: f64,
    /// BS-to-UE antenna height difference `L` (m).
    pub height_diff: f64,
    /// Meters per distance unit of the path-loss law (1 for meters, 1000 for km).
    pub distance_unit: f64,
}

impl Default for PropagationParams {
    /// 3GPP Case 1.
    fn default() -> Self {
        Self {
            a_los: 10f64.powf(-10.38),
            a_nlos: 10f64.powf(-14.54),
            alpha_los: 2.0,
            alpha_nlos: 3.75,
            d1: 300.0,
            height_diff: 8.5,
            distance_unit: KM,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_los > 0.0 && self.a_los.is_finite()) {
            return Err(invalid("a_los", "must be positive and finite"));
        }
        if !(self.a_nlos > 0.0 && self.a_nlos.is_finite()) {
            return Err(invalid("a_nlos", "must be positive and finite"));
        }
        if !(self.alpha_los > 0.0) {
            return Err(invalid("alpha_los", "must be positive"));
        }
        if !(self.alpha_nlos > self.alpha_los) {
            return Err(invalid("alpha_nlos", "must exceed alpha_los"));
        }
        if !(self.d1 > 0.0 && self.d1.is_finite()) {
            return Err(invalid("d1", "must be positive and finite"));
        }
        if !(self.height_diff >= 0.0 && self.height_diff.is_finite()) {
            return Err(invalid("height_diff", "must be non-negative and finite"));
        }
        if !(self.distance_unit > 0.0 && self.distance_unit.is_finite()) {
            return Err(invalid("distance_unit", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn alpha(&self, link: LinkType) -> f64 {
        match link {
            LinkType::Los => self.alpha_los,
            LinkType::Nlos => self.alpha_nlos,
        }
    }

    pub fn coefficient(&self, link: LinkType) -> f64 {
        match link {
            LinkType::Los => self.a_los,
            LinkType::Nlos => self.a_nlos,
        }
    }

    /// 2D distance at which the 3D distance reaches `d1`; LoS is impossible beyond it.
    pub fn los_radius_2d(&self) -> f64 {
        let l = self.height_diff;
        if l >= self.d1 {
            0.0
        } else {
            (self.d1 * self.d1 - l * l).sqrt()
        }
    }

    /// LoS probability of a BS at 2D distance `r`.
    pub fn los_probability_2d(&self, r: f64) -> f64 {
        los_probability(dist3d(r, self.height_diff), self.d1)
    }

    /// Path loss evaluated from a squared 3D distance, skipping the domain check.
    #[inline]
    pub(crate) fn path_loss_sq(&self, w2: f64, link: LinkType) -> f64 {
        let unit2 = self.distance_unit * self.distance_unit;
        let x = w2 / unit2;
        match link {
            LinkType::Los => self.a_los * pow_half(x, self.alpha_los),
            LinkType::Nlos => self.a_nlos * pow_half(x, self.alpha_nlos),
        }
    }
}

/// `x^(-alpha/2)` with the free-space exponent special-cased.
#[inline]
fn pow_half(x: f64, alpha: f64) -> f64 {
    if alpha == 2.0 {
        1.0 / x
    } else if alpha == 4.0 {
        1.0 / (x * x)
    } else {
        x.powf(-0.5 * alpha)
    }
}

/// Vertical dipole pattern with an omni horizontal pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntennaConfig {
    /// Exponent `n` of the `cos^n` main lobe.
    pub dipole_exp: f64,
    /// Vertical side-lobe floor (dB, negative).
    pub sidelobe_floor_db: f64,
    /// Maximum antenna gain (dBi).
    pub max_gain_db: f64,
    /// Gaussian-fit peak (linear).
    pub gauss_a: f64,
    /// Gaussian-fit width (degrees squared).
    pub gauss_b: f64,
    /// Gaussian-fit floor (linear).
    pub gauss_c: f64,
}

impl Default for AntennaConfig {
    /// 4-element half-wave dipole.
    fn default() -> Self {
        Self {
            dipole_exp: 47.64,
            sidelobe_floor_db: -12.0,
            max_gain_db: 8.15,
            gauss_a: 6.208,
            gauss_b: 116.64,
            gauss_c: 0.4142,
        }
    }
}

impl AntennaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dipole_exp > 0.0 && self.dipole_exp.is_finite()) {
            return Err(invalid("dipole_exp", "must be positive and finite"));
        }
        if !(self.sidelobe_floor_db < 0.0) {
            return Err(invalid("sidelobe_floor_db", "must be negative"));
        }
        if !self.max_gain_db.is_finite() {
            return Err(invalid("max_gain_db", "must be finite"));
        }
        for (name, v) in [
            ("gauss_a", self.gauss_a),
            ("gauss_b", self.gauss_b),
            ("gauss_c", self.gauss_c),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Precomputed constants of the exact dipole pattern.
    pub fn pattern(&self) -> DipolePattern {
        DipolePattern::new(self)
    }

    /// Peak linear gain, `10^(G_m/10)`.
    pub fn peak_gain(&self) -> f64 {
        10f64.powf(self.max_gain_db / 10.0)
    }

    /// Linear gain on the side-lobe floor, `10^((F_v2 + G_m)/10)`.
    pub fn floor_gain(&self) -> f64 {
        10f64.powf((self.sidelobe_floor_db + self.max_gain_db) / 10.0)
    }

    /// Angular offset (degrees) at which the main lobe meets the side-lobe floor.
    pub fn crossover_offset(&self) -> f64 {
        let c = 10f64.powf(self.sidelobe_floor_db / (10.0 * self.dipole_exp));
        c.acos().to_degrees()
    }
}

/// Exact dipole pattern with its constants hoisted out of hot loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipolePattern {
    n: f64,
    peak: f64,
    floor: f64,
    /// Cosine of the offset below which the floor applies.
    cos_floor: f64,
}

impl DipolePattern {
    pub fn new(ant: &AntennaConfig) -> Self {
        Self {
            n: ant.dipole_exp,
            peak: ant.peak_gain(),
            floor: ant.floor_gain(),
            cos_floor: 10f64.powf(ant.sidelobe_floor_db / (10.0 * ant.dipole_exp)),
        }
    }

    /// Linear gain given the cosine of the angular offset from boresight.
    #[inline]
    pub fn gain_from_cos(&self, cos_offset: f64) -> f64 {
        let c = cos_offset.abs();
        // ln(0) = -inf would also land on the floor; the comparison settles it first.
        if c <= self.cos_floor {
            self.floor
        } else {
            self.peak * (self.n * c.ln()).exp()
        }
    }

    #[inline]
    pub fn gain(&self, theta: f64, tilt: f64) -> f64 {
        self.gain_from_cos((theta - tilt).to_radians().cos())
    }
}

/// Antenna gain law used by an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainModel {
    /// `max(cos^n, floor)` dipole pattern.
    #[default]
    Exact,
    /// Gaussian fit `a·exp(-(θ-θ_t)²/b) + c`.
    Gaussian,
    /// Isotropic unit gain.
    Unit,
}

impl GainModel {
    pub fn gain(&self, theta: f64, tilt: f64, ant: &AntennaConfig) -> f64 {
        match self {
            GainModel::Exact => gain_exact(theta, tilt, ant),
            GainModel::Gaussian => gain_gauss(theta, tilt, ant),
            GainModel::Unit => 1.0,
        }
    }
}

/// 3D BS-to-UE distance.
#[inline]
pub fn dist3d(r: f64, l: f64) -> f64 {
    r.hypot(l)
}

/// Linear LoS probability of a link with 3D length `w`, clamped to `[0, 1]`.
#[inline]
pub fn los_probability(w: f64, d1: f64) -> f64 {
    if w >= d1 {
        0.0
    } else {
        (1.0 - w / d1).clamp(0.0, 1.0)
    }
}

/// Linear attenuation of a link with 3D length `w` meters.
pub fn path_loss(w: f64, link: LinkType, p: &PropagationParams) -> Result<f64> {
    if !(w > 0.0) {
        return Err(domain("path_loss", format!("distance must be positive, got {w}")));
    }
    Ok(p.path_loss_sq(w * w, link))
}

/// Angle (degrees) from a BS at 2D distance `r` down to the UE.
pub fn elevation_angle(r: f64, l: f64) -> Result<f64> {
    if r < 0.0 || l < 0.0 || (r == 0.0 && l == 0.0) || r.is_nan() || l.is_nan() {
        return Err(domain(
            "elevation_angle",
            format!("need r >= 0, L >= 0 not both zero, got ({r}, {l})"),
        ));
    }
    Ok(l.atan2(r).to_degrees())
}

/// Elevation angle without the domain check; 90° at the origin.
#[inline]
pub(crate) fn angle_deg(r: f64, l: f64) -> f64 {
    if r == 0.0 {
        90.0
    } else {
        (l / r).atan().to_degrees()
    }
}

/// Exact linear antenna gain toward elevation `theta` for downtilt `tilt`.
pub fn gain_exact(theta: f64, tilt: f64, ant: &AntennaConfig) -> f64 {
    DipolePattern::new(ant).gain(theta, tilt)
}

/// Gaussian approximation of the linear antenna gain.
#[inline]
pub fn gain_gauss(theta: f64, tilt: f64, ant: &AntennaConfig) -> f64 {
    let d = theta - tilt;
    ant.gauss_a * (-d * d / ant.gauss_b).exp() + ant.gauss_c
}

/// `d gain_gauss / d tilt` (per degree).
#[inline]
pub fn gain_gauss_deriv(theta: f64, tilt: f64, ant: &AntennaConfig) -> f64 {
    let d = theta - tilt;
    2.0 * ant.gauss_a / ant.gauss_b * d * (-d * d / ant.gauss_b).exp()
}

/// NLoS 2D distance whose path loss equals that of a LoS link at 2D distance `r`.
///
/// Clamped to zero when no such distance exists (the NLoS link is weaker
/// even directly overhead).
pub fn equiv_dist_nlos(r: f64, p: &PropagationParams) -> f64 {
    equivalent(r, p, LinkType::Los, LinkType::Nlos)
}

/// LoS 2D distance whose path loss equals that of an NLoS link at 2D distance `r`.
pub fn equiv_dist_los(r: f64, p: &PropagationParams) -> f64 {
    equivalent(r, p, LinkType::Nlos, LinkType::Los)
}

fn equivalent(r: f64, p: &PropagationParams, from: LinkType, to: LinkType) -> f64 {
    let l = p.height_diff;
    let u = p.distance_unit;
    let a_from = p.coefficient(from);
    let a_to = p.coefficient(to);
    let alpha_from = p.alpha(from);
    let alpha_to = p.alpha(to);
    // Squared 3D distance in path-loss units.
    let w2 = (r * r + l * l) / (u * u);
    let target2 = (a_from / a_to).powf(-2.0 / alpha_to) * w2.powf(alpha_from / alpha_to);
    let bracket = target2 * u * u - l * l;
    bracket.max(0.0).sqrt()
}
