//! Monte Carlo evaluation over i.i.d. Rayleigh draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asym::normalized_gap;
use crate::decomp::{joint_decompose, DEFAULT_TOL};
use crate::error::{Result, TwrcError};
use crate::io::{fmt_f64, Table};
use crate::linalg::{cplx, half_log2det_link, waterfill_covariance, ComplexMatrix};
use crate::optim::{OptimizerSettings, SdPlan, WeightedObjective};
use crate::rates::{equal_power_downlink, sd_rate_pair, uplink_upper_bound, PowerConfig, RatePair, TwrcInstance};
use crate::region::{cd_region_points, sd_region_points, RateRegion};

/// Draws per trial before a trial is declared failed.
const MAX_ATTEMPTS: u64 = 64;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(master) ^ trial)
}

/// Seed for resampled draw `attempt ≥ 1` of `trial`; attempt 0 is [`trial_seed`].
pub fn attempt_seed(master: u64, trial: u64, attempt: u64) -> u64 {
    if attempt == 0 {
        trial_seed(master, trial)
    } else {
        splitmix64(trial_seed(master, trial) ^ splitmix64(attempt))
    }
}

/// Matrix of i.i.d. `CN(0, 1)` entries.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        cplx(s * re, s * im)
    })
}

/// Four independent Rayleigh channels at 0 dB; set the powers with `with_power`.
pub fn rayleigh_sample(n_a: usize, n_b: usize, n_r: usize, seed: u64) -> TwrcInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_ar = complex_gaussian_matrix(&mut rng, n_r, n_a);
    let h_br = complex_gaussian_matrix(&mut rng, n_r, n_b);
    let h_ra = complex_gaussian_matrix(&mut rng, n_a, n_r);
    let h_rb = complex_gaussian_matrix(&mut rng, n_b, n_r);
    TwrcInstance { h_ar, h_br, h_ra, h_rb, power: PowerConfig::symmetric_db(0.0) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    UpperBound,
    Sd,
    GsvdPnc,
    CompleteDecoding,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::UpperBound, Scheme::Sd, Scheme::GsvdPnc, Scheme::CompleteDecoding];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::UpperBound => "upper_bound",
            Scheme::Sd => "sd",
            Scheme::GsvdPnc => "gsvd_pnc",
            Scheme::CompleteDecoding => "complete_decoding",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| TwrcError::InvalidConfig(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    UplinkSum,
    MinUplinkDownlink,
    Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n_a: usize,
    pub n_b: usize,
    pub n_r: usize,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub mode: Mode,
    #[serde(default)]
    pub settings: OptimizerSettings,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_a == 0 || self.n_b == 0 || self.n_r == 0 {
            return Err(TwrcError::InvalidConfig("antenna counts must be positive".into()));
        }
        if self.n_a > self.n_r || self.n_b > self.n_r {
            return Err(TwrcError::InvalidConfig(format!(
                "user antennas ({}, {}) exceed relay antennas {}",
                self.n_a, self.n_b, self.n_r
            )));
        }
        if self.trials == 0 {
            return Err(TwrcError::InvalidConfig("trials must be at least 1".into()));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|x| !x.is_finite()) {
            return Err(TwrcError::InvalidConfig("snr list must be nonempty and finite".into()));
        }
        if self.schemes.is_empty() {
            return Err(TwrcError::InvalidConfig("no schemes selected".into()));
        }
        self.settings.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub mean_sum_rate: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: Scenario,
    pub cells: Vec<SweepCell>,
    /// Degenerate draws replaced by resampling.
    pub resampled: usize,
    pub version: String,
}

impl SweepResult {
    pub fn cell(&self, scheme: Scheme, snr_db: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.scheme == scheme && c.snr_db == snr_db)
    }

    /// Mean curve of `scheme` in scenario SNR order.
    pub fn curve(&self, scheme: Scheme) -> Vec<f64> {
        self.scenario
            .snr_db
            .iter()
            .filter_map(|&s| self.cell(scheme, s).map(|c| c.mean_sum_rate))
            .collect()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&SWEEP_COLUMNS);
        for c in &self.cells {
            t.push(sweep_row(c.scheme.name(), c.snr_db, &self.scenario, c.mean_sum_rate, c.stderr, c.trials));
        }
        t
    }
}

pub const SWEEP_COLUMNS: [&str; 9] =
    ["scheme", "snr_db", "n_a", "n_b", "n_r", "mean_sum_rate", "stderr", "trials", "seed"];

pub const REGION_COLUMNS: [&str; 3] = ["r_a", "r_b", "scheme"];

fn sweep_row(scheme: &str, snr: f64, sc: &Scenario, mean: f64, stderr: f64, trials: usize) -> Vec<String> {
    vec![
        scheme.to_string(),
        fmt_f64(snr),
        sc.n_a.to_string(),
        sc.n_b.to_string(),
        sc.n_r.to_string(),
        fmt_f64(mean),
        fmt_f64(stderr),
        trials.to_string(),
        sc.seed.to_string(),
    ]
}

/// Worker count from `TWRC_THREADS`; unset or 0 means one per core.
pub fn worker_count() -> usize {
    std::env::var("TWRC_THREADS").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}

/// Maps `f` over trial indices in order. Inside an existing rayon pool that pool is used;
/// otherwise a pool of [`worker_count`] threads is built.
fn run_parallel<T: Send>(trials: usize, f: impl Fn(u64) -> T + Sync + Send) -> Result<Vec<T>> {
    if rayon::current_thread_index().is_some() {
        return Ok((0..trials as u64).into_par_iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| TwrcError::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..trials as u64).into_par_iter().map(f).collect()))
}

/// Runs `f` on fresh draws for `trial` until it succeeds; numerical failures trigger a resample.
fn with_resampling<T>(
    dims: (usize, usize, usize),
    master: u64,
    trial: u64,
    f: impl Fn(&TwrcInstance) -> Result<T>,
) -> Result<(T, usize)> {
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let ch = rayleigh_sample(dims.0, dims.1, dims.2, attempt_seed(master, trial, attempt));
        match f(&ch) {
            Ok(v) => return Ok((v, attempt as usize)),
            Err(e) if e.is_config() => return Err(e),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn check_resample_rate(failed: usize, trials: usize) -> Result<()> {
    if failed as f64 > 0.01 * trials as f64 {
        return Err(TwrcError::ResampleLimit { failed, attempted: trials + failed });
    }
    Ok(())
}

/// Downlink cut-set pair with each link water-filled at full relay power.
fn downlink_upper_bound(ch: &TwrcInstance) -> Result<RatePair> {
    let p = &ch.power;
    let link = |h: &ComplexMatrix| half_log2det_link(h, &waterfill_covariance(h, p.p_r, p.n0), p.n0);
    Ok(RatePair::new(link(&ch.h_rb)?, link(&ch.h_ra)?))
}

/// Sum rates of one draw, indexed `[scheme][snr]`.
fn evaluate_trial(ch: &TwrcInstance, sc: &Scenario) -> Result<Vec<Vec<f64>>> {
    let jd = joint_decompose(&ch.h_ar, &ch.h_br, DEFAULT_TOL)?;
    let needs_plan = sc.schemes.iter().any(|&s| s != Scheme::UpperBound);
    let plan = if needs_plan {
        Some(SdPlan::new(&ch.h_ar, &ch.h_br, &jd, &WeightedObjective::SUM, &sc.settings)?)
    } else {
        None
    };
    let mut out = vec![Vec::with_capacity(sc.snr_db.len()); sc.schemes.len()];
    for &snr in &sc.snr_db {
        let ch = ch.with_power(PowerConfig::symmetric_db(snr));
        let solved = plan.as_ref().map(|p| p.optimize_with_baselines(&ch.power)).transpose()?;
        let dl = match sc.mode {
            Mode::UplinkSum => RatePair::UNBOUNDED,
            Mode::MinUplinkDownlink => equal_power_downlink(&ch)?,
            Mode::Region => return Err(TwrcError::InvalidConfig("region mode has no sum-rate sweep".into())),
        };
        for (i, &scheme) in sc.schemes.iter().enumerate() {
            let pair = match (scheme, &solved) {
                (Scheme::UpperBound, _) => {
                    let dl_ub = if sc.mode == Mode::UplinkSum { RatePair::UNBOUNDED } else { downlink_upper_bound(&ch)? };
                    sd_rate_pair(uplink_upper_bound(&ch)?, dl_ub)
                }
                (Scheme::Sd, Some(b)) => sd_rate_pair(b.sd.rates, dl),
                (Scheme::GsvdPnc, Some(b)) => sd_rate_pair(b.gsvd_pnc.rates, dl),
                (Scheme::CompleteDecoding, Some(b)) => sd_rate_pair(b.complete_decoding.rates, dl),
                _ => unreachable!("plan exists whenever a non-bound scheme is requested"),
            };
            out[i].push(pair.sum());
        }
    }
    Ok(out)
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn run_scenario(sc: &Scenario) -> Result<SweepResult> {
    sc.validate()?;
    let dims = (sc.n_a, sc.n_b, sc.n_r);
    let per_trial = run_parallel(sc.trials, |t| with_resampling(dims, sc.seed, t, |ch| evaluate_trial(ch, sc)))?;
    let mut results = Vec::with_capacity(sc.trials);
    let mut resampled = 0;
    for r in per_trial {
        let (v, extra) = r?;
        resampled += extra;
        results.push(v);
    }
    check_resample_rate(resampled, sc.trials)?;
    let mut cells = Vec::new();
    for (i, &scheme) in sc.schemes.iter().enumerate() {
        for (j, &snr) in sc.snr_db.iter().enumerate() {
            let xs: Vec<f64> = results.iter().map(|r| r[i][j]).collect();
            let (mean_sum_rate, stderr) = mean_stderr(&xs);
            cells.push(SweepCell { scheme, snr_db: snr, mean_sum_rate, stderr, trials: sc.trials });
        }
    }
    Ok(SweepResult { scenario: sc.clone(), cells, resampled, version: env!("CARGO_PKG_VERSION").to_string() })
}

/// Trial-averaged regions at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedRegions {
    pub sd: RateRegion,
    pub complete_decoding: RateRegion,
    pub outer_bound: RateRegion,
}

/// Averages, per boundary weight, the SD and CD points (each capped by the
/// equal-power downlink) and the cut-set corner over `trials` draws.
pub fn average_regions(
    dims: (usize, usize, usize),
    snr_db: f64,
    trials: usize,
    seed: u64,
    s: &OptimizerSettings,
) -> Result<AveragedRegions> {
    if trials == 0 {
        return Err(TwrcError::InvalidConfig("trials must be at least 1".into()));
    }
    s.validate()?;
    let power = PowerConfig::symmetric_db(snr_db);
    let per_trial = run_parallel(trials, |t| {
        with_resampling(dims, seed, t, |ch| {
            let ch = ch.with_power(power);
            let jd = joint_decompose(&ch.h_ar, &ch.h_br, DEFAULT_TOL)?;
            let dl = equal_power_downlink(&ch)?;
            let cap = |v: Vec<RatePair>| v.into_iter().map(|p| sd_rate_pair(p, dl)).collect::<Vec<_>>();
            let sd = cap(sd_region_points(&ch, &jd, s)?);
            let cd = cap(cd_region_points(&ch, s)?);
            let outer = sd_rate_pair(uplink_upper_bound(&ch)?, downlink_upper_bound(&ch)?);
            Ok((sd, cd, outer))
        })
    })?;
    let mut rows = Vec::with_capacity(trials);
    let mut resampled = 0;
    for r in per_trial {
        let (v, extra) = r?;
        resampled += extra;
        rows.push(v);
    }
    check_resample_rate(resampled, trials)?;
    let n = trials as f64;
    let average = |pick: &dyn Fn(&(Vec<RatePair>, Vec<RatePair>, RatePair)) -> &Vec<RatePair>| -> Vec<RatePair> {
        let len = pick(&rows[0]).len();
        (0..len)
            .map(|i| {
                let (a, b) = rows.iter().fold((0.0, 0.0), |acc, r| (acc.0 + pick(r)[i].r_a, acc.1 + pick(r)[i].r_b));
                RatePair::new(a / n, b / n)
            })
            .collect()
    };
    let sd = average(&|r| &r.0);
    let cd = average(&|r| &r.1);
    let (oa, ob) = rows.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r.2.r_a, acc.1 + r.2.r_b));
    Ok(AveragedRegions {
        sd: RateRegion::from_points(&sd),
        complete_decoding: RateRegion::from_points(&cd),
        outer_bound: RateRegion::from_points(&[RatePair::new(oa / n, ob / n)]),
    })
}

pub fn region_table(regions: &[(&str, &RateRegion)]) -> Table {
    let mut t = Table::new(&REGION_COLUMNS);
    for (name, region) in regions {
        for p in &region.boundary {
            t.push(vec![fmt_f64(p.r_a), fmt_f64(p.r_b), name.to_string()]);
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Figure {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "fig3" => Figure::Fig3,
            "fig4" => Figure::Fig4,
            "fig5" => Figure::Fig5,
            "fig6" => Figure::Fig6,
            "fig7" => Figure::Fig7,
            "fig8" => Figure::Fig8,
            _ => return Err(TwrcError::InvalidConfig(format!("unknown figure `{s}` (fig3..fig8)"))),
        })
    }
}

/// SNR grid of the sum-rate figures: 0 to 30 dB in 2.5 dB steps.
pub fn figure_snr_grid() -> Vec<f64> {
    (0..=12).map(|i| 2.5 * i as f64).collect()
}

/// Antenna configurations `(n_A, n_B, n_R)` plotted in each sum-rate figure.
pub fn figure_configs(fig: Figure) -> Vec<(usize, usize, usize)> {
    match fig {
        Figure::Fig3 => Vec::new(),
        Figure::Fig4 => vec![(2, 2, 4)],
        Figure::Fig5 | Figure::Fig8 => vec![(2, 2, 3)],
        Figure::Fig6 => vec![(2, 2, 4), (3, 3, 6), (4, 4, 8)],
        Figure::Fig7 => vec![(2, 2, 3), (4, 4, 6), (6, 6, 9)],
    }
}

/// Label of the large-system estimate rows in sum-rate figures.
pub const APPROX_SCHEME: &str = "large_system_approx";

/// Scenario used by the sum-rate figures for one antenna configuration.
pub fn figure_scenario(fig: Figure, dims: (usize, usize, usize), trials: usize, seed: u64) -> Scenario {
    let schemes = match fig {
        Figure::Fig4 | Figure::Fig5 => Scheme::ALL.to_vec(),
        _ => vec![Scheme::UpperBound, Scheme::Sd],
    };
    Scenario {
        n_a: dims.0,
        n_b: dims.1,
        n_r: dims.2,
        snr_db: figure_snr_grid(),
        trials,
        seed,
        schemes,
        mode: Mode::UplinkSum,
        settings: OptimizerSettings::default(),
    }
}

/// Rows `ub − n_R r^SD` aligned with the upper-bound curve of `res`.
fn approx_rows(res: &SweepResult, t: &mut Table) -> Result<()> {
    let sc = &res.scenario;
    let (eta_a, eta_b) = (sc.n_a as f64 / sc.n_r as f64, sc.n_b as f64 / sc.n_r as f64);
    let gap = sc.n_r as f64 * normalized_gap(eta_a, eta_b, 1e-10)?;
    for &snr in &sc.snr_db {
        if let Some(ub) = res.cell(Scheme::UpperBound, snr) {
            t.push(sweep_row(APPROX_SCHEME, snr, sc, (ub.mean_sum_rate - gap).max(0.0), 0.0, ub.trials));
        }
    }
    Ok(())
}

pub fn reproduce_figure(fig: Figure, trials: usize, seed: u64) -> Result<Table> {
    match fig {
        Figure::Fig3 => {
            let mut t = Table::new(&["eta", "r_sd"]);
            for i in 1..=100 {
                let eta = i as f64 / 100.0;
                t.push(vec![fmt_f64(eta), fmt_f64(normalized_gap(eta, eta, 1e-10)?)]);
            }
            Ok(t)
        }
        Figure::Fig8 => {
            let r = average_regions((2, 2, 3), 30.0, trials, seed, &OptimizerSettings::default())?;
            Ok(region_table(&[
                ("sd", &r.sd),
                ("complete_decoding", &r.complete_decoding),
                ("outer_bound", &r.outer_bound),
            ]))
        }
        _ => {
            let mut t = Table::new(&SWEEP_COLUMNS);
            for dims in figure_configs(fig) {
                let res = run_scenario(&figure_scenario(fig, dims, trials, seed))?;
                t.rows.extend(res.to_table().rows);
                approx_rows(&res, &mut t)?;
            }
            Ok(t)
        }
    }
}
