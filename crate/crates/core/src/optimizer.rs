//! Optimal network-wide downtilt.
//!
//! Two independent routes: bisection on the tilt derivative of coverage
//! under the Gaussian gain fit, and a grid scan plus golden-section search
//! over coverage under whatever gain model the system carries.

use std::f64::consts::PI;

use crate::analytic::{Evaluator, ScenarioParams, System};
use crate::channel::{GainModel, PropagationParams};
use crate::error::{invalid, Error, Result};
use crate::quadrature::QuadratureSpec;

/// Final bracket width of both tilt searches (degrees).
pub const TILT_TOL: f64 = 0.01;

/// The three addends of `dP_c / dθ_tilt` (per degree).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityParts {
    /// Interference term with a LoS serving BS.
    pub los_part: f64,
    /// Interference term with an NLoS serving BS, both distance branches.
    pub nlos_part: f64,
    /// Noise term summed over all serving branches.
    pub noise_part: f64,
}

impl StationarityParts {
    pub fn residual(&self) -> f64 {
        self.los_part + self.nlos_part + self.noise_part
    }
}

fn check_tilt(tilt: f64) -> Result<()> {
    if !(0.0..=90.0).contains(&tilt) {
        return Err(invalid("tilt", format!("must lie in [0, 90] degrees, got {tilt}")));
    }
    Ok(())
}

/// Tilt derivative of coverage under the Gaussian gain fit.
///
/// Association ignores antenna gain, so the serving densities do not move
/// with the tilt; only the conditional coverage does, through the gain
/// toward the serving BS and toward each interferer.
pub fn stationarity_residual(tilt: f64, sys: &System, sc: &ScenarioParams, q: &QuadratureSpec) -> Result<StationarityParts> {
    check_tilt(tilt)?;
    let gsys = sys.with_gain_model(GainModel::Gaussian);
    let sc = sc.with_tilt(tilt);
    let ev = Evaluator::new(&gsys, &sc, q)?;
    // Noise and interference terms are integrated in separate passes so that
    // each carries its own quadrature error control.
    let weighted = |pick: fn((f64, f64)) -> f64| {
        ev.over_serving(|r, branch| {
            let f = ev.pdf(r, branch)?;
            if f == 0.0 {
                return Ok(0.0);
            }
            let c = ev.cond_cov(r, branch.link())?;
            if c == 0.0 {
                return Ok(0.0);
            }
            Ok(f * c * pick(ev.exponent_derivs(r, branch.link())?))
        })
    };
    let interference = weighted(|(_, di)| di)?;
    let noise = weighted(|(dn, _)| dn)?;
    Ok(StationarityParts {
        los_part: interference[0].value,
        nlos_part: interference[1].value + interference[2].value,
        noise_part: noise.iter().map(|e| e.value).sum(),
    })
}

/// Bisection on a sign change of the stationarity residual, refined to
/// [`TILT_TOL`].
pub fn optimal_tilt_root(sys: &System, sc: &ScenarioParams, q: &QuadratureSpec, bracket: [f64; 2]) -> Result<f64> {
    let [mut lo, mut hi] = bracket;
    check_tilt(lo)?;
    check_tilt(hi)?;
    if !(lo < hi) {
        return Err(invalid("bracket", format!("need lo < hi, got [{lo}, {hi}]")));
    }
    let f = |t: f64| Ok::<f64, Error>(stationarity_residual(t, sys, sc, q)?.residual());
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    while hi - lo > TILT_TOL {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Brackets `[t_i, t_{i+1}]` on a uniform grid over `[0, 90]` where the
/// residual falls from positive to non-positive, i.e. candidate maxima.
pub fn residual_brackets(sys: &System, sc: &ScenarioParams, q: &QuadratureSpec, step: f64) -> Result<Vec<[f64; 2]>> {
    let grid = tilt_grid(step)?;
    let mut out = Vec::new();
    let mut prev = stationarity_residual(grid[0], sys, sc, q)?.residual();
    for w in grid.windows(2) {
        let cur = stationarity_residual(w[1], sys, sc, q)?.residual();
        if prev > 0.0 && cur <= 0.0 {
            out.push([w[0], w[1]]);
        }
        prev = cur;
    }
    Ok(out)
}

fn tilt_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 90.0) {
        return Err(invalid("grid_step", format!("must lie in (0, 90] degrees, got {step}")));
    }
    let n = (90.0 / step).ceil() as usize;
    Ok((0..=n).map(|i| (i as f64 * step).min(90.0)).collect())
}

/// Tilt maximizing coverage over `[0, 90]`: a grid scan with ties going to
/// the smaller tilt, then golden-section refinement around the best point.
pub fn optimal_tilt_scan(sys: &System, sc: &ScenarioParams, q: &QuadratureSpec, grid_step: f64) -> Result<f64> {
    let cov = |t: f64| crate::analytic::coverage(sys, &sc.with_tilt(t), q).map(|e| e.value);
    optimal_tilt_scan_by(cov, grid_step)
}

/// [`optimal_tilt_scan`] for an arbitrary objective in the tilt.
pub fn optimal_tilt_scan_by<F>(mut objective: F, grid_step: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let grid = tilt_grid(grid_step)?;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, t) in grid.iter().enumerate() {
        let v = objective(*t)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let (i, best_v) = best;
    let mut a = grid[i.saturating_sub(1)];
    let mut b = grid[(i + 1).min(grid.len() - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while b - a > TILT_TOL {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2)?;
        }
    }
    let (x, fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    // Golden section can only wander inside the neighbours of the grid
    // maximum; keep the grid point if the refinement did not improve on it.
    Ok(if fx > best_v { x } else { grid[i] })
}

/// Per-BS empirical downtilt: the angle to the edge of a cell of radius
/// `1/sqrt(πλ)` plus a fraction `z` of the vertical beamwidth `bv`.
pub fn empirical_tilt(bs_density: f64, p: &PropagationParams, z: f64, bv: f64) -> Result<f64> {
    if !(bs_density > 0.0 && bs_density.is_finite()) {
        return Err(invalid("bs_density", format!("must be positive and finite, got {bs_density}")));
    }
    let r_cell = 1.0 / (PI * bs_density * 1e-6).sqrt();
    Ok((p.height_diff / r_cell).atan().to_degrees() + z * bv)
}

/// Defaults of [`empirical_tilt`].
pub const EMPIRICAL_Z: f64 = 0.7;
pub const EMPIRICAL_BV: f64 = 19.5;

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: 1e-8,
            ..Default::default()
        }
    }

    #[test]
    fn residual_matches_finite_difference_of_gaussian_coverage() {
        let sys = System::default();
        let gsys = sys.with_gain_model(GainModel::Gaussian);
        let qq = q();
        for (lam, tilt) in [(10.0, 5.0), (1000.0, 30.0), (1000.0, 45.0), (3e4, 70.0)] {
            let sc = ScenarioParams::default().with_density(lam);
            let parts = stationarity_residual(tilt, &sys, &sc, &qq).unwrap();
            let h = 1e-3;
            let up = crate::analytic::coverage(&gsys, &sc.with_tilt(tilt + h), &qq).unwrap().value;
            let dn = crate::analytic::coverage(&gsys, &sc.with_tilt(tilt - h), &qq).unwrap().value;
            let fd = (up - dn) / (2.0 * h);
            let r = parts.residual();
            assert!((r - fd).abs() <= 1e-4 * fd.abs().max(1e-3), "λ={lam} tilt={tilt}: {r} vs {fd}");
        }
    }

    #[test]
    fn root_rejects_bracket_without_sign_change() {
        let sys = System::default();
        let sc = ScenarioParams::default();
        let err = optimal_tilt_root(&sys, &sc, &q(), [60.0, 90.0]).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }), "{err:?}");
        assert!(optimal_tilt_root(&sys, &sc, &q(), [10.0, 5.0]).is_err());
    }

    #[test]
    fn scan_finds_parabola_vertex() {
        let t = optimal_tilt_scan_by(|x| Ok(-(x - 37.123f64).powi(2)), 1.0).unwrap();
        assert!((t - 37.123).abs() < TILT_TOL);
    }

    #[test]
    fn scan_breaks_ties_toward_smaller_tilt() {
        let t = optimal_tilt_scan_by(|x| Ok(if x < 50.0 { 1.0 } else { 0.0 }), 5.0).unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn scan_respects_domain_edges() {
        let t = optimal_tilt_scan_by(Ok, 2.0).unwrap();
        assert!(t > 90.0 - TILT_TOL && t <= 90.0);
        assert!(optimal_tilt_scan_by(Ok, 0.0).is_err());
    }

    #[test]
    fn empirical_tilt_examples() {
        let p = PropagationParams::default();
        let r_cell = 1.0 / (PI * 1e-3f64).sqrt();
        let expect = (8.5 / r_cell).atan().to_degrees() + 0.7 * 19.5;
        let t = empirical_tilt(1000.0, &p, EMPIRICAL_Z, EMPIRICAL_BV).unwrap();
        assert!((t - expect).abs() < 1e-12);
        assert!((t - 39.12).abs() < 0.01, "{t}");
        let flat = PropagationParams { height_diff: 0.0, ..p };
        assert_eq!(empirical_tilt(1000.0, &flat, 0.7, 19.5).unwrap(), 0.7 * 19.5);
        let geo = empirical_tilt(1000.0, &p, 0.0, 19.5).unwrap();
        assert!((geo - (8.5 / r_cell).atan().to_degrees()).abs() < 1e-12);
        assert!(empirical_tilt(0.0, &p, 0.7, 19.5).is_err());
    }
}
