//! Adaptive Gauss–Kronrod quadrature.
//!
//! Every integral in the crate goes through [`integrate`] (finite ranges with
//! explicit breakpoints) or [`integrate_tail`] (semi-infinite ranges, truncated
//! by doubling the horizon until the next slab is negligible).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerances and limits shared by all integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    /// Absolute error floor; also the size below which a tail slab is dropped.
    pub abs_tol: f64,
    /// Bisections allowed per integral on top of the initial breakpoints.
    pub max_subdiv: usize,
    /// First truncation horizon for `[a, ∞)` integrals in 2D meters.
    pub trunc_radius: f64,
    /// SINR thresholds (dB) used by grid-based ASE evaluation; strictly increasing.
    pub gamma_grid_db: Vec<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-200,
            max_subdiv: 400,
            trunc_radius: 3000.0,
            gamma_grid_db: (0..=400).map(|i| -20.0 + 0.25 * i as f64).collect(),
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self, d1: f64) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(invalid("rel_tol", "must be positive"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(invalid("abs_tol", "must be positive"));
        }
        if self.max_subdiv == 0 {
            return Err(invalid("max_subdiv", "must be at least 1"));
        }
        if !(self.trunc_radius > d1) {
            return Err(invalid("trunc_radius", format!("must exceed d1 = {d1}")));
        }
        if self.gamma_grid_db.len() < 2 {
            return Err(invalid("gamma_grid_db", "needs at least two points"));
        }
        if self.gamma_grid_db.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("gamma_grid_db", "must be strictly increasing"));
        }
        Ok(())
    }

    fn accept(&self, err: f64, value: f64) -> bool {
        err <= self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Value of an integral with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, o: Estimate) -> Estimate {
        Estimate {
            value: self.value + o.value,
            abs_err: self.abs_err + o.abs_err,
            evals: self.evals + o.evals,
        }
    }
}

// Standard 21-point Kronrod nodes and weights, kept at their published precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_501_831,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// 10-point Gauss weights for XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

/// One 21-point Kronrod pass with the QUADPACK error heuristic.
fn gk21<F>(f: &mut F, lo: f64, hi: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let a = f(center - x)?;
        let b = f(center + x)?;
        fv1[j] = a;
        fv2[j] = b;
        res_k += WGK[j] * (a + b);
        res_abs += WGK[j] * (a.abs() + b.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (a + b);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() || !err.is_finite() {
        return Err(Error::Quadrature {
            lo,
            hi,
            err: f64::INFINITY,
            value,
            subdivisions: 0,
        });
    }
    Ok(Segment { lo, hi, value, err })
}

/// Integrates `f` over `[points[0], points[last]]`, splitting at every
/// interior breakpoint before adapting.
///
/// `points` must hold at least two values; they are sorted and deduplicated,
/// and a reversed range yields the negated integral.
pub fn integrate<F>(mut f: F, points: &[f64], q: &QuadratureSpec) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    assert!(points.len() >= 2, "integrate needs an interval");
    let (a, b) = (points[0], points[points.len() - 1]);
    if a == b {
        return Ok(Estimate::default());
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = points
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();

    let mut segs = Vec::with_capacity(cuts.len() + q.max_subdiv);
    for w in cuts.windows(2) {
        segs.push(gk21(&mut f, w[0], w[1])?);
    }
    let mut evals = 21 * segs.len();
    let mut splits = 0;
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let err: f64 = segs.iter().map(|s| s.err).sum();
        if q.accept(err, value) {
            return Ok(Estimate {
                value: sign * value,
                abs_err: err,
                evals,
            });
        }
        let (worst, seg) = segs
            .iter()
            .copied()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("at least one segment");
        let mid = 0.5 * (seg.lo + seg.hi);
        let too_narrow = mid <= seg.lo || mid >= seg.hi;
        if splits >= q.max_subdiv || too_narrow {
            return Err(Error::Quadrature {
                lo: seg.lo,
                hi: seg.hi,
                err: seg.err,
                value: sign * value,
                subdivisions: splits,
            });
        }
        let left = gk21(&mut f, seg.lo, mid)?;
        let right = gk21(&mut f, mid, seg.hi)?;
        evals += 42;
        splits += 1;
        segs[worst] = left;
        segs.push(right);
    }
}

/// Integrates `f` over `[a, ∞)`.
///
/// The range `[a, horizon]` (with `points` as breakpoints) is integrated
/// first; further slabs `[T, 2T]` are added until one contributes less than
/// the tolerance of the running total.
pub fn integrate_tail<F>(mut f: F, a: f64, horizon: f64, points: &[f64], q: &QuadratureSpec) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    const MAX_DOUBLINGS: usize = 80;
    let mut end = if horizon > a { horizon } else { 2.0 * a.max(1.0) };
    let mut pts = Vec::with_capacity(points.len() + 2);
    pts.push(a);
    pts.extend(points.iter().copied().filter(|p| *p > a && *p < end));
    pts.push(end);
    let mut total = integrate(&mut f, &pts, q)?;
    for _ in 0..MAX_DOUBLINGS {
        let next = 2.0 * end;
        let slab = integrate(&mut f, &[end, next], q)?;
        total = total + slab;
        if slab.value.abs() + slab.abs_err <= q.abs_tol.max(q.rel_tol * total.value.abs()) {
            return Ok(total);
        }
        end = next;
    }
    Err(Error::Quadrature {
        lo: end,
        hi: f64::INFINITY,
        err: f64::INFINITY,
        value: total.value,
        subdivisions: MAX_DOUBLINGS,
    })
}

/// Infallible convenience wrapper over [`integrate`].
pub fn integrate_plain<F>(mut f: F, points: &[f64], q: &QuadratureSpec) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Ok(f(x)), points, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn polynomial_is_exact() {
        let e = integrate_plain(|x| 3.0 * x * x, &[0.0, 2.0], &spec()).unwrap();
        assert!((e.value - 8.0).abs() < 1e-13);
        assert_eq!(e.evals, 21);
    }

    #[test]
    fn reversed_range_negates() {
        let e = integrate_plain(|x| x.exp(), &[1.0, 0.0], &spec()).unwrap();
        assert!((e.value + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        // ∫_{-1}^{2} |x| dx = 0.5 + 2
        let e = integrate_plain(|x: f64| x.abs(), &[-1.0, 0.0, 2.0], &spec()).unwrap();
        assert!((e.value - 2.5).abs() < 1e-14);
    }

    #[test]
    fn adapts_to_peaks() {
        // ∫_0^1 1/((x-0.3)^2 + 1e-4) dx
        let eps: f64 = 1e-2;
        let exact = ((0.7 / eps).atan() + (0.3 / eps).atan()) / eps;
        let e = integrate_plain(|x| 1.0 / ((x - 0.3) * (x - 0.3) + eps * eps), &[0.0, 1.0], &spec())
            .unwrap();
        assert!(((e.value - exact) / exact).abs() < 1e-9, "{} vs {exact}", e.value);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        let e = integrate_plain(|x: f64| 1.0 / x.sqrt(), &[0.0, 1.0], &spec()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn tail_integral() {
        // ∫_1^∞ x^-2.75 dx = 1/1.75
        let q = QuadratureSpec {
            trunc_radius: 10.0,
            ..spec()
        };
        let e = integrate_tail(|x: f64| Ok(x.powf(-2.75)), 1.0, 10.0, &[], &q).unwrap();
        assert!((e.value - 1.0 / 1.75).abs() < 1e-8, "{}", e.value);
    }

    #[test]
    fn subdivision_cap_reports_worst_interval() {
        let q = QuadratureSpec {
            max_subdiv: 3,
            ..spec()
        };
        let err = integrate_plain(|x: f64| (1.0 / (x + 1e-12)).sin(), &[0.0, 1.0], &q).unwrap_err();
        match err {
            Error::Quadrature { lo, hi, subdivisions, .. } => {
                assert!(lo < hi);
                assert_eq!(subdivisions, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn integrand_errors_propagate() {
        let r = integrate(
            |x| {
                if x > 0.5 {
                    Err(crate::error::domain("test", "boom"))
                } else {
                    Ok(x)
                }
            },
            &[0.0, 1.0],
            &spec(),
        );
        assert!(matches!(r, Err(Error::Domain { .. })));
    }

    #[test]
    fn spec_validation() {
        assert!(spec().validate(300.0).is_ok());
        let q = QuadratureSpec {
            trunc_radius: 100.0,
            ..spec()
        };
        assert!(q.validate(300.0).is_err());
        let q = QuadratureSpec {
            gamma_grid_db: vec![1.0, 1.0],
            ..spec()
        };
        assert!(q.validate(300.0).is_err());
    }
}
