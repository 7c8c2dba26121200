//! Sweep recipes. Each mode maps a grid to CSV rows with a fixed column order.

use downtilt_core::analytic::{self, ScenarioParams, System};
use downtilt_core::channel::GainModel;
use downtilt_core::mcsim::{self, TiltStats, TrialConfig};
use downtilt_core::optimizer;
use rayon::prelude::*;

use crate::config::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Coverage against tilt for each density of `sweep.densities`.
    CoverageTilt,
    /// Optimal tilt (scan and stationarity root) against density.
    OptTilt,
    /// Coverage at the optimal tilt against density, with the no-antenna baseline.
    CoverageDensity,
    /// ASE at the optimal tilt against density, with the no-antenna baseline.
    AseDensity,
    /// Serving-link gain toward the mean nearest-BS distance against tilt.
    SignalGain,
    /// Coverage at the optimal tilt with and without the pattern on interferers.
    InterferenceCompare,
    /// ASE under the empirical per-BS tilt against density.
    AseEmpirical,
    /// Analytic against Monte Carlo coverage on the validation grid.
    Validate,
}

/// Densities (per km²) and tilts (degrees) of the validation grid.
pub const VALIDATE_DENSITIES: [f64; 3] = [10.0, 100.0, 1000.0];
pub const VALIDATE_TILTS: [f64; 3] = [5.0, 15.0, 36.0];

/// Absolute agreement floor of the validation grid.
pub const VALIDATE_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Na,
}

impl Cell {
    fn opt(x: Option<f64>) -> Self {
        x.filter(|v| v.is_finite()).map_or(Cell::Na, Cell::Num)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(x) => Some(*x as f64),
            Cell::Na => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            // Both forms print the shortest digits that parse back to the same bits.
            Cell::Num(x) if *x == 0.0 || (x.is_finite() && (1e-4..1e15).contains(&x.abs())) => format!("{x}"),
            Cell::Num(x) if x.is_finite() => format!("{x:e}"),
            Cell::Int(x) => format!("{x}"),
            _ => "NA".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Points whose evaluation failed; their outputs are NA.
    pub failures: usize,
    /// Diagnostics for the summary on standard error.
    pub notes: Vec<String>,
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        let i = self.header.iter().position(|h| *h == name).expect("known column");
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }
}

type Outcome = Result<Vec<Cell>, String>;

const COVERAGE_COLS: [&str; 8] = [
    "density_per_km2",
    "tilt_deg",
    "gamma_db",
    "p_cov_analytic",
    "p_cov_mc",
    "mc_ci",
    "quad_err",
    "seed",
];

struct Ctx<'a> {
    cfg: &'a Config,
    sys: System,
    use_mc: bool,
}

impl Ctx<'_> {
    fn scenario(&self, density: f64, tilt: f64) -> ScenarioParams {
        self.cfg.scenario.with_density(density).with_tilt(tilt)
    }

    fn coverage(&self, sys: &System, density: f64, tilt: f64) -> Result<(f64, f64), String> {
        let e = analytic::coverage(sys, &self.scenario(density, tilt), &self.cfg.quadrature).map_err(|e| e.to_string())?;
        Ok((e.value, e.abs_err))
    }

    fn scan(&self, density: f64) -> Result<f64, String> {
        optimizer::optimal_tilt_scan(&self.sys, &self.scenario(density, 0.0), &self.cfg.quadrature, self.cfg.sweep.scan_step)
            .map_err(|e| e.to_string())
    }

    fn trial_config(&self, density: f64, tilts: &[f64], gain_on_interference: bool) -> Result<TrialConfig, String> {
        let sc = self.scenario(density, tilts[0]);
        let mc = &self.cfg.mc;
        let cfg = match mc.sim_radius {
            Some(r) => {
                let c = TrialConfig {
                    system: self.sys,
                    scenario: sc,
                    sim_radius: r,
                    n_trials: mc.trials,
                    seed: mc.seed,
                    gain_on_interference,
                    association: mc.association,
                };
                c.validate().map(|_| c)
            }
            None => TrialConfig::for_tilts(self.sys, sc, mc.trials, mc.seed, gain_on_interference, tilts)
                .map(|c| c.with_association(mc.association)),
        };
        cfg.map_err(|e| e.to_string())
    }

    /// Monte Carlo statistics at `tilts`, or `None` when MC is off.
    fn mc(&self, density: f64, tilts: &[f64], gain_on_interference: bool) -> Result<Option<Vec<TiltStats>>, String> {
        if !self.use_mc {
            return Ok(None);
        }
        let tc = self.trial_config(density, tilts, gain_on_interference)?;
        mcsim::run_tilts(&tc, tilts).map(Some).map_err(|e| e.to_string())
    }

    fn seed_cell(&self) -> Cell {
        if self.use_mc {
            Cell::Int(self.cfg.mc.seed)
        } else {
            Cell::Na
        }
    }
}

fn mc_cov_cells(stats: Option<&TiltStats>) -> [Cell; 2] {
    match stats.map(|s| s.coverage()) {
        Some(e) => [Cell::opt(Some(e.value)), Cell::opt(Some(e.ci))],
        None => [Cell::Na, Cell::Na],
    }
}

fn mc_ase_cells(stats: Option<&TiltStats>, density: f64) -> [Cell; 2] {
    match stats.map(|s| s.ase(density)) {
        Some(e) => [Cell::opt(Some(e.value)), Cell::opt(Some(e.ci))],
        None => [Cell::Na, Cell::Na],
    }
}

/// Runs a closure per density in parallel, keeping grid order. A failing
/// point keeps its echoed inputs and gets NA elsewhere.
fn per_density<F>(ctx: &Ctx, grid: &[f64], header: Vec<&'static str>, f: F) -> SweepResult
where
    F: Fn(&Ctx, f64) -> Outcome + Sync,
{
    let width = header.len();
    let outcomes: Vec<Outcome> = grid.par_iter().map(|d| f(ctx, *d)).collect();
    let mut res = SweepResult {
        header,
        rows: Vec::with_capacity(grid.len()),
        failures: 0,
        notes: Vec::new(),
    };
    for (d, out) in grid.iter().zip(outcomes) {
        match out {
            Ok(row) => res.rows.push(row),
            Err(e) => {
                res.failures += 1;
                res.notes.push(format!("density {d}: {e}"));
                let mut row = vec![Cell::Na; width];
                row[0] = Cell::Num(*d);
                res.rows.push(row);
            }
        }
    }
    res
}

/// Analytic (value, error) per tilt, plus the MC run for one density.
type DensityGroup = (Vec<Result<(f64, f64), String>>, Result<Option<Vec<TiltStats>>, String>);

/// Coverage rows for a density × tilt grid, MC on common random numbers per density.
fn coverage_grid(ctx: &Ctx, densities: &[f64], tilts: &[f64]) -> SweepResult {
    let gamma_db = ctx.cfg.scenario.sinr_threshold_db;
    let groups: Vec<DensityGroup> = densities
        .par_iter()
        .map(|d| {
            let analytic: Vec<_> = tilts.par_iter().map(|t| ctx.coverage(&ctx.sys, *d, *t)).collect();
            (analytic, ctx.mc(*d, tilts, true))
        })
        .collect();
    let mut res = SweepResult {
        header: COVERAGE_COLS.to_vec(),
        rows: Vec::new(),
        failures: 0,
        notes: Vec::new(),
    };
    for (d, (analytic, mc)) in densities.iter().zip(groups) {
        let mc_stats = match mc {
            Ok(s) => s,
            Err(e) => {
                res.notes.push(format!("density {d}: Monte Carlo failed: {e}"));
                res.failures += tilts.len();
                None
            }
        };
        for (k, (t, a)) in tilts.iter().zip(analytic).enumerate() {
            let (value, err) = match a {
                Ok((v, e)) => (Cell::Num(v), Cell::Num(e)),
                Err(e) => {
                    res.failures += 1;
                    res.notes.push(format!("density {d}, tilt {t}: {e}"));
                    (Cell::Na, Cell::Na)
                }
            };
            let [mc_v, mc_ci] = mc_cov_cells(mc_stats.as_ref().map(|s| &s[k]));
            res.rows.push(vec![
                Cell::Num(*d),
                Cell::Num(*t),
                Cell::Num(gamma_db),
                value,
                mc_v,
                mc_ci,
                err,
                ctx.seed_cell(),
            ]);
        }
    }
    res
}

fn opt_tilt(ctx: &Ctx) -> SweepResult {
    let header = vec![
        "density_per_km2",
        "tilt_deg",
        "tilt_root_deg",
        "gamma_db",
        "p_cov_analytic",
        "p_cov_mc",
        "mc_ci",
        "quad_err",
        "seed",
    ];
    let notes = std::sync::Mutex::new(Vec::new());
    let mut res = per_density(ctx, &ctx.cfg.sweep.density_grid, header, |ctx, d| {
        let tilt = ctx.scan(d)?;
        let sc = ctx.scenario(d, tilt);
        let q = &ctx.cfg.quadrature;
        let brackets = optimizer::residual_brackets(&ctx.sys, &sc, q, ctx.cfg.sweep.bracket_step).map_err(|e| e.to_string())?;
        // Several falling sign changes are possible; keep the one nearest the scan maximizer.
        let nearest = brackets.iter().min_by(|a, b| {
            let da = (0.5 * (a[0] + a[1]) - tilt).abs();
            let db = (0.5 * (b[0] + b[1]) - tilt).abs();
            da.total_cmp(&db)
        });
        let root = match nearest {
            Some(b) => Some(optimizer::optimal_tilt_root(&ctx.sys, &sc, q, *b).map_err(|e| e.to_string())?),
            None => {
                notes.lock().unwrap().push(format!("density {d}: residual has no falling sign change on [0, 90]"));
                None
            }
        };
        let (cov, err) = ctx.coverage(&ctx.sys, d, tilt)?;
        let mc = ctx.mc(d, &[tilt], true)?;
        let [mv, mci] = mc_cov_cells(mc.as_ref().map(|s| &s[0]));
        Ok(vec![
            Cell::Num(d),
            Cell::Num(tilt),
            Cell::opt(root),
            Cell::Num(ctx.cfg.scenario.sinr_threshold_db),
            Cell::Num(cov),
            mv,
            mci,
            Cell::Num(err),
            ctx.seed_cell(),
        ])
    });
    let mut extra = notes.into_inner().unwrap();
    extra.sort();
    res.notes.extend(extra);
    res
}

fn coverage_density(ctx: &Ctx) -> SweepResult {
    let mut header = COVERAGE_COLS.to_vec();
    header.push("p_cov_no_antenna");
    let unit = ctx.sys.with_gain_model(GainModel::Unit);
    per_density(ctx, &ctx.cfg.sweep.density_grid, header, |ctx, d| {
        let tilt = ctx.scan(d)?;
        let (cov, err) = ctx.coverage(&ctx.sys, d, tilt)?;
        let (base, _) = ctx.coverage(&unit, d, 0.0)?;
        let mc = ctx.mc(d, &[tilt], true)?;
        let [mv, mci] = mc_cov_cells(mc.as_ref().map(|s| &s[0]));
        Ok(vec![
            Cell::Num(d),
            Cell::Num(tilt),
            Cell::Num(ctx.cfg.scenario.sinr_threshold_db),
            Cell::Num(cov),
            mv,
            mci,
            Cell::Num(err),
            ctx.seed_cell(),
            Cell::Num(base),
        ])
    })
}

const ASE_COLS: [&str; 8] = [
    "density_per_km2",
    "tilt_deg",
    "gamma0_db",
    "ase_analytic",
    "ase_mc",
    "ase_ci",
    "quad_err",
    "seed",
];

fn ase_row(ctx: &Ctx, d: f64, tilt: f64) -> Outcome {
    let sc = ctx.scenario(d, tilt);
    let a = analytic::ase(&ctx.sys, &sc, &ctx.cfg.quadrature).map_err(|e| e.to_string())?;
    let mc = ctx.mc(d, &[tilt], true)?;
    let [mv, mci] = mc_ase_cells(mc.as_ref().map(|s| &s[0]), d);
    Ok(vec![
        Cell::Num(d),
        Cell::Num(tilt),
        Cell::Num(ctx.cfg.scenario.ase_threshold_db),
        Cell::Num(a.value),
        mv,
        mci,
        Cell::Num(a.abs_err),
        ctx.seed_cell(),
    ])
}

fn ase_density(ctx: &Ctx) -> SweepResult {
    let mut header = ASE_COLS.to_vec();
    header.push("ase_no_antenna");
    let unit = ctx.sys.with_gain_model(GainModel::Unit);
    per_density(ctx, &ctx.cfg.sweep.density_grid, header, |ctx, d| {
        let tilt = ctx.scan(d)?;
        let mut row = ase_row(ctx, d, tilt)?;
        let base = analytic::ase(&unit, &ctx.scenario(d, 0.0), &ctx.cfg.quadrature).map_err(|e| e.to_string())?;
        row.push(Cell::Num(base.value));
        Ok(row)
    })
}

fn ase_empirical(ctx: &Ctx) -> SweepResult {
    let mut header = ASE_COLS.to_vec();
    header.extend(["tilt_opt_deg", "ase_opt_tilt"]);
    per_density(ctx, &ctx.cfg.sweep.density_grid, header, |ctx, d| {
        let s = &ctx.cfg.sweep;
        let tilt = optimizer::empirical_tilt(d, &ctx.sys.propagation, s.empirical_z, s.empirical_bv)
            .map_err(|e| e.to_string())?
            .min(90.0);
        let mut row = ase_row(ctx, d, tilt)?;
        let opt = ctx.scan(d)?;
        let a = analytic::ase(&ctx.sys, &ctx.scenario(d, opt), &ctx.cfg.quadrature).map_err(|e| e.to_string())?;
        row.push(Cell::Num(opt));
        row.push(Cell::Num(a.value));
        Ok(row)
    })
}

fn interference_compare(ctx: &Ctx) -> SweepResult {
    let header = vec![
        "density_per_km2",
        "tilt_deg",
        "gamma_db",
        "p_cov_analytic",
        "p_cov_mc",
        "mc_ci",
        "p_cov_unit_interference",
        "p_cov_unit_interference_mc",
        "unit_interference_ci",
        "quad_err",
        "seed",
    ];
    per_density(ctx, &ctx.cfg.sweep.density_grid, header, |ctx, d| {
        let tilt = ctx.scan(d)?;
        let sc = ctx.scenario(d, tilt);
        let q = &ctx.cfg.quadrature;
        let full = analytic::coverage(&ctx.sys, &sc, q).map_err(|e| e.to_string())?;
        let unit = analytic::coverage_no_tilt_interference(&ctx.sys, &sc, q).map_err(|e| e.to_string())?;
        let mc_full = ctx.mc(d, &[tilt], true)?;
        let mc_unit = ctx.mc(d, &[tilt], false)?;
        let [fv, fci] = mc_cov_cells(mc_full.as_ref().map(|s| &s[0]));
        let [uv, uci] = mc_cov_cells(mc_unit.as_ref().map(|s| &s[0]));
        Ok(vec![
            Cell::Num(d),
            Cell::Num(tilt),
            Cell::Num(ctx.cfg.scenario.sinr_threshold_db),
            Cell::Num(full.value),
            fv,
            fci,
            Cell::Num(unit.value),
            uv,
            uci,
            Cell::Num(full.abs_err.max(unit.abs_err)),
            ctx.seed_cell(),
        ])
    })
}

fn signal_gain(ctx: &Ctx) -> SweepResult {
    let header = vec!["density_per_km2", "distance_m", "tilt_deg", "gain_ratio", "gain_ratio_gauss"];
    let mut res = SweepResult {
        header,
        rows: Vec::new(),
        failures: 0,
        notes: Vec::new(),
    };
    let p = &ctx.sys.propagation;
    let ant = &ctx.sys.antenna;
    for d in &ctx.cfg.sweep.densities {
        let r = analytic::mean_nearest_distance(*d);
        for t in &ctx.cfg.sweep.tilt_grid {
            let exact = analytic::signal_gain_ratio(r, *t, ant, p);
            let gauss = downtilt_core::channel::elevation_angle(r, p.height_diff)
                .map(|theta| downtilt_core::channel::gain_gauss(theta, *t, ant));
            let (e, g) = match (exact, gauss) {
                (Ok(e), Ok(g)) => (Cell::Num(e), Cell::Num(g)),
                (Err(err), _) | (_, Err(err)) => {
                    res.failures += 1;
                    res.notes.push(format!("density {d}, tilt {t}: {err}"));
                    (Cell::Na, Cell::Na)
                }
            };
            res.rows.push(vec![Cell::Num(*d), Cell::Num(r), Cell::Num(*t), e, g]);
        }
    }
    res
}

/// Evaluates one sweep. Never panics on a failing point; see [`SweepResult::failures`].
pub fn run_sweep(cfg: &Config, mode: Mode, use_mc: bool) -> SweepResult {
    let ctx = Ctx {
        cfg,
        sys: cfg.system(),
        use_mc,
    };
    let s = &cfg.sweep;
    match mode {
        Mode::CoverageTilt => coverage_grid(&ctx, &s.densities, &s.tilt_grid),
        Mode::Validate => {
            let mut res = coverage_grid(&ctx, &VALIDATE_DENSITIES, &VALIDATE_TILTS);
            if use_mc {
                let an = res.column("p_cov_analytic");
                let mc = res.column("p_cov_mc");
                let ci = res.column("mc_ci");
                for (i, row) in res.rows.iter().enumerate() {
                    if let (Some(a), Some(m), Some(c)) = (an[i], mc[i], ci[i]) {
                        let ok = (a - m).abs() <= VALIDATE_TOL.max(c);
                        res.notes.push(format!(
                            "validate density {} tilt {}: |analytic - mc| = {:.4} ({})",
                            row[0].render(),
                            row[1].render(),
                            (a - m).abs(),
                            if ok { "ok" } else { "MISMATCH" }
                        ));
                    }
                }
            }
            res
        }
        Mode::OptTilt => opt_tilt(&ctx),
        Mode::CoverageDensity => coverage_density(&ctx),
        Mode::AseDensity => ase_density(&ctx),
        Mode::SignalGain => signal_gain(&ctx),
        Mode::InterferenceCompare => interference_compare(&ctx),
        Mode::AseEmpirical => ase_empirical(&ctx),
    }
}

/// Writes the header and rows as CSV.
pub fn write_csv<W: std::io::Write>(res: &SweepResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&res.header)?;
    for row in &res.rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips_bits() {
        for x in [0.0, 1.0 / 3.0, 1e-4, 9.99e-5, 2.5e-36, 1e15, 123456.789, -0.75] {
            let s = Cell::Num(x).render();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(Cell::Num(2.5e-36).render(), "2.5e-36");
        assert_eq!(Cell::Num(f64::NAN).render(), "NA");
        assert_eq!(Cell::Num(f64::INFINITY).render(), "NA");
        assert_eq!(Cell::Na.render(), "NA");
        assert_eq!(Cell::Int(7).render(), "7");
    }

    #[test]
    fn signal_gain_has_one_row_per_density_and_tilt() {
        let mut cfg = Config::default();
        cfg.sweep.densities = vec![100.0, 1000.0];
        cfg.sweep.tilt_grid = vec![0.0, 36.0];
        let res = run_sweep(&cfg, Mode::SignalGain, false);
        assert_eq!(res.rows.len(), 4);
        assert_eq!(res.failures, 0);
        let d = res.column("density_per_km2");
        let t = res.column("tilt_deg");
        let ratio = res.column("gain_ratio");
        let i = (0..4).find(|i| d[*i] == Some(1000.0) && t[*i] == Some(36.0)).unwrap();
        let expect = analytic::signal_gain_ratio(
            analytic::mean_nearest_distance(1000.0),
            36.0,
            &cfg.antenna,
            &cfg.propagation,
        )
        .unwrap();
        assert_eq!(ratio[i], Some(expect));
    }
}
