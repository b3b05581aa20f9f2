use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use twrc_core::asym::{aed, asymptotic_gap, high_snr_gap_empirical, optimal_l_prime, normalized_gap};
use twrc_core::decomp::{joint_decompose, DEFAULT_TOL};
use twrc_core::io::{fmt_f64, read_channels, MatrixJson, Table};
use twrc_core::linalg::real_to_complex;
use twrc_core::optim::{OptimizerSettings, SdPlan, SdSolution, Strategy, WeightedObjective};
use twrc_core::quad::QuadSettings;
use twrc_core::rates::{equal_power_downlink, sd_rate_pair, uplink_upper_bound, Indicator, PowerConfig, RatePair};
use twrc_core::region::{cd_region_points, sd_region_points, trace_region, RateRegion};
use twrc_core::sim::{region_table, reproduce_figure, run_scenario, Figure, Mode, Scenario, Scheme};
use twrc_core::validate::run_validation;
use twrc_core::{Result, TwrcError};

const SCHEMA_HELP: &str = "\
Output formats:
  sweep, reproduce (fig4-fig7) CSV columns:
    scheme,snr_db,n_a,n_b,n_r,mean_sum_rate,stderr,trials,seed
    scheme is one of upper_bound, sd, gsvd_pnc, complete_decoding, large_system_approx
  region, reproduce fig8 CSV columns:
    r_a,r_b,scheme
  reproduce fig3 CSV columns:
    eta,r_sd
  aed CSV columns:
    kind,lambda,value   (kind is density or point_mass)
  Floats are written with 17 significant digits. Rates are in bits per channel use.

Matrix JSON: {\"rows\": r, \"cols\": c, \"re\": [...], \"im\": [...]}, row-major.
Channel JSON: {\"h_ar\": M, \"h_br\": M, \"h_ra\"?: M, \"h_rb\"?: M,
               \"power\"?: {\"p_a\": .., \"p_b\": .., \"p_r\": .., \"n0\": ..}}
  Missing downlink matrices default to the transposed uplink.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
Environment: TWRC_THREADS caps the worker count (0 or unset = one per core).";

#[derive(Parser)]
#[command(name = "twrc", version, about = "Space-division network coding simulator for MIMO two-way relay channels")]
#[command(after_help = SCHEMA_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Joint decomposition of an uplink channel pair, as JSON.
    Decompose(DecomposeArgs),
    /// Optimized SD rates and both baselines for one channel, as JSON.
    Rates(RatesArgs),
    /// SD and complete-decoding rate regions for one channel, as CSV.
    Region(RegionArgs),
    /// Monte Carlo sum-rate sweep, as CSV or JSON.
    Sweep(SweepArgs),
    /// High-SNR gap for a channel, or the large-system gap for antenna ratios.
    Asymptotic(AsymptoticArgs),
    /// Large-system eigenvalue law on a grid, as CSV.
    Aed(AedArgs),
    /// Regenerates the data behind one figure, as CSV.
    Reproduce(ReproduceArgs),
    /// Runs the randomized invariant suite and prints a pass/fail report.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct OutArg {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum IndicatorArg {
    FirstStream,
    AllStreams,
}

#[derive(Args, Default)]
struct SettingsArgs {
    /// JSON file with optimizer settings; flags below override it.
    #[arg(long)]
    settings: Option<PathBuf>,
    #[arg(long)]
    gradient_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Points in the per-user CD power-fraction grid.
    #[arg(long)]
    power_split_grid: Option<usize>,
    /// Which PNC streams carry the self-interference term.
    #[arg(long, value_enum)]
    indicator: Option<IndicatorArg>,
}

impl SettingsArgs {
    fn resolve(&self, base: OptimizerSettings) -> Result<OptimizerSettings> {
        let mut s = match &self.settings {
            Some(p) => parse_json(p)?,
            None => base,
        };
        if let Some(v) = self.gradient_tol {
            s.gradient_tol = v;
        }
        if let Some(v) = self.max_iters {
            s.max_iters = v;
        }
        if let Some(v) = self.power_split_grid {
            s.power_split_grid = v;
        }
        if let Some(v) = self.indicator {
            s.indicator = match v {
                IndicatorArg::FirstStream => Indicator::FirstStream,
                IndicatorArg::AllStreams => Indicator::AllStreams,
            };
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Args)]
struct ChannelArgs {
    /// Channel JSON file.
    #[arg(long)]
    matrices: PathBuf,
    /// Symmetric SNR in dB; overrides the file's powers.
    #[arg(long)]
    snr_db: Option<f64>,
}

impl ChannelArgs {
    fn load(&self) -> Result<twrc_core::rates::TwrcInstance> {
        let file = read_channels(&self.matrices)?;
        let ch = file.to_instance(PowerConfig::symmetric_db(self.snr_db.unwrap_or(20.0)))?;
        Ok(match self.snr_db {
            Some(snr) => ch.with_power(PowerConfig::symmetric_db(snr)),
            None => ch,
        })
    }
}

#[derive(Args)]
struct DecomposeArgs {
    /// Channel JSON file (only the uplink matrices are used).
    #[arg(long)]
    matrices: PathBuf,
    /// Eigenvalue classification tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value_t = 1.0)]
    w_a: f64,
    #[arg(long, default_value_t = 1.0)]
    w_b: f64,
    #[command(flatten)]
    settings: SettingsArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct RegionArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    /// Skip the downlink clip and report the uplink regions.
    #[arg(long)]
    uplink_only: bool,
    #[command(flatten)]
    settings: SettingsArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    UplinkSum,
    MinUplinkDownlink,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario JSON file; flags below override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    n_a: Option<usize>,
    #[arg(long)]
    n_b: Option<usize>,
    #[arg(long)]
    n_r: Option<usize>,
    /// Comma-separated SNR list in dB.
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated schemes: upper_bound, sd, gsvd_pnc, complete_decoding.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    settings: SettingsArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct AsymptoticArgs {
    /// Channel JSON file; reports the per-split high-SNR gaps of this channel.
    #[arg(long, conflicts_with_all = ["eta_a", "eta_b"])]
    matrices: Option<PathBuf>,
    /// Also evaluate the empirical gap at these SNRs (dB, comma-separated).
    #[arg(long, value_delimiter = ',', requires = "matrices")]
    snr_db: Option<Vec<f64>>,
    #[arg(long, requires = "eta_b")]
    eta_a: Option<f64>,
    #[arg(long, requires = "eta_a")]
    eta_b: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    quad_tol: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct AedArgs {
    #[arg(long)]
    eta_a: f64,
    #[arg(long)]
    eta_b: f64,
    /// Grid points over [0, 2].
    #[arg(long, default_value_t = 401)]
    points: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ReproduceArgs {
    /// One of fig3, fig4, fig5, fig6, fig7, fig8.
    #[arg(long)]
    figure: String,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ValidateArgs {
    /// Random draws per randomized section.
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| TwrcError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| TwrcError::Parse {
        field: path.display().to_string(),
        msg: format!("line {} column {}: {e}", e.line(), e.column()),
    })
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| TwrcError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(TwrcError::from),
    }
}

fn emit_json(out: &Option<PathBuf>, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).expect("json value serializes");
    text.push('\n');
    emit(out, &text)
}

fn rate_json(p: RatePair) -> Value {
    json!({ "r_a": p.r_a, "r_b": p.r_b, "sum": p.sum() })
}

fn solution_json(s: &SdSolution, dl: RatePair) -> Value {
    let strategy = match s.strategy {
        Strategy::SpaceDivision => "space_division",
        Strategy::FullComplete => "full_complete",
    };
    json!({
        "strategy": strategy,
        "l_prime": s.cfg.l_prime,
        "cd_power_a": s.cfg.cd_power_a,
        "cd_power_b": s.cfg.cd_power_b,
        "psi_a": s.psi_a,
        "psi_b": s.psi_b,
        "uplink": rate_json(s.rates),
        "rates": rate_json(sd_rate_pair(s.rates, dl)),
        "objective": s.objective,
        "mac_converged": s.mac_converged,
    })
}

fn decompose(a: &DecomposeArgs) -> Result<()> {
    let file = read_channels(&a.matrices)?;
    let h_ar = file.h_ar.to_matrix("h_ar")?;
    let h_br = file.h_br.to_matrix("h_br")?;
    let jd = joint_decompose(&h_ar, &h_br, a.tol)?;
    emit_json(
        &a.out.out,
        &json!({
            "u": MatrixJson::from(&jd.u),
            "d_a": MatrixJson::from(&real_to_complex(&jd.d_a)),
            "d_b": MatrixJson::from(&real_to_complex(&jd.d_b)),
            "g_a": MatrixJson::from(&jd.g_a),
            "g_b": MatrixJson::from(&jd.g_b),
            "lambdas": jd.lambdas,
            "k": jd.k,
            "l": jd.l,
            "d_a_dim": jd.d_a_dim,
            "d_b_dim": jd.d_b_dim,
        }),
    )
}

fn rates(a: &RatesArgs) -> Result<()> {
    let ch = a.channel.load()?;
    let s = a.settings.resolve(OptimizerSettings::default())?;
    let w = WeightedObjective::new(a.w_a, a.w_b)?;
    let jd = joint_decompose(&ch.h_ar, &ch.h_br, DEFAULT_TOL)?;
    let b = SdPlan::new(&ch.h_ar, &ch.h_br, &jd, &w, &s)?.optimize_with_baselines(&ch.power)?;
    let dl = equal_power_downlink(&ch)?;
    emit_json(
        &a.out.out,
        &json!({
            "power": ch.power,
            "weights": w,
            "upper_bound_uplink": rate_json(uplink_upper_bound(&ch)?),
            "downlink": rate_json(dl),
            "sd": solution_json(&b.sd, dl),
            "gsvd_pnc": solution_json(&b.gsvd_pnc, dl),
            "complete_decoding": solution_json(&b.complete_decoding, dl),
        }),
    )
}

fn region(a: &RegionArgs) -> Result<()> {
    let ch = a.channel.load()?;
    let s = a.settings.resolve(OptimizerSettings::default())?;
    let jd = joint_decompose(&ch.h_ar, &ch.h_br, DEFAULT_TOL)?;
    let (sd, cd) = if a.uplink_only {
        (RateRegion::from_points(&sd_region_points(&ch, &jd, &s)?), RateRegion::from_points(&cd_region_points(&ch, &s)?))
    } else {
        let dl = equal_power_downlink(&ch)?;
        (trace_region(&ch, &jd, &s)?, RateRegion::from_points(&cd_region_points(&ch, &s)?).clip(dl))
    };
    emit(&a.out.out, &region_table(&[("sd", &sd), ("complete_decoding", &cd)]).to_csv())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let mut sc: Scenario = match &a.scenario {
        Some(p) => parse_json(p)?,
        None => Scenario {
            n_a: 2,
            n_b: 2,
            n_r: 4,
            snr_db: vec![20.0],
            trials: 100,
            seed: 1,
            schemes: Scheme::ALL.to_vec(),
            mode: Mode::UplinkSum,
            settings: OptimizerSettings::default(),
        },
    };
    sc.n_a = a.n_a.unwrap_or(sc.n_a);
    sc.n_b = a.n_b.unwrap_or(sc.n_b);
    sc.n_r = a.n_r.unwrap_or(sc.n_r);
    sc.trials = a.trials.unwrap_or(sc.trials);
    sc.seed = a.seed.unwrap_or(sc.seed);
    if let Some(v) = &a.snr_db {
        sc.snr_db = v.clone();
    }
    if let Some(v) = &a.schemes {
        sc.schemes = v.iter().map(|s| Scheme::parse(s.trim())).collect::<Result<_>>()?;
    }
    if let Some(m) = a.mode {
        sc.mode = match m {
            ModeArg::UplinkSum => Mode::UplinkSum,
            ModeArg::MinUplinkDownlink => Mode::MinUplinkDownlink,
        };
    }
    if sc.mode == Mode::Region {
        return Err(TwrcError::InvalidConfig("region mode is served by `twrc region` and `reproduce --figure fig8`".into()));
    }
    sc.settings = a.settings.resolve(sc.settings)?;
    let res = run_scenario(&sc)?;
    match a.format {
        Format::Csv => emit(&a.out.out, &res.to_table().to_csv()),
        Format::Json => emit_json(&a.out.out, &serde_json::to_value(&res).expect("sweep result serializes")),
    }
}

fn asymptotic(a: &AsymptoticArgs) -> Result<()> {
    if let Some(path) = &a.matrices {
        let file = read_channels(path)?;
        let ch = file.to_instance(PowerConfig::symmetric_db(0.0))?;
        let jd = joint_decompose(&ch.h_ar, &ch.h_br, DEFAULT_TOL)?;
        let best = optimal_l_prime(&jd.lambdas, jd.k);
        let gaps = (0..=jd.l).map(|lp| asymptotic_gap(&jd.lambdas, jd.k, lp)).collect::<Result<Vec<_>>>()?;
        let mut empirical = Vec::new();
        for &snr in a.snr_db.as_deref().unwrap_or(&[]) {
            empirical.push(json!({ "snr_db": snr, "gap": high_snr_gap_empirical(&ch, &jd, best, snr)? }));
        }
        return emit_json(
            &a.out.out,
            &json!({
                "k": jd.k,
                "l": jd.l,
                "pair_lambdas": jd.pair_lambdas(),
                "optimal_l_prime": best,
                "delta_sd": gaps[best],
                "gap_by_l_prime": gaps,
                "empirical": empirical,
            }),
        );
    }
    let (Some(eta_a), Some(eta_b)) = (a.eta_a, a.eta_b) else {
        return Err(TwrcError::InvalidConfig("give either --matrices or both --eta-a and --eta-b".into()));
    };
    emit_json(
        &a.out.out,
        &json!({ "eta_a": eta_a, "eta_b": eta_b, "r_sd": normalized_gap(eta_a, eta_b, a.quad_tol)? }),
    )
}

fn aed_table(a: &AedArgs) -> Result<()> {
    if a.points < 2 {
        return Err(TwrcError::InvalidConfig("--points must be at least 2".into()));
    }
    let spec = aed(a.eta_a, a.eta_b)?;
    let mut t = Table::new(&["kind", "lambda", "value"]);
    for i in 0..a.points {
        let x = 2.0 * i as f64 / (a.points - 1) as f64;
        t.push(vec!["density".into(), fmt_f64(x), fmt_f64(spec.density(x))]);
    }
    for (x, m) in [(0.0, spec.mass_at_0), (1.0, spec.mass_at_1), (2.0, spec.mass_at_2)] {
        t.push(vec!["point_mass".into(), fmt_f64(x), fmt_f64(m)]);
    }
    // Fails loudly if the law is not normalized at the default tolerance.
    spec.total_mass(QuadSettings::default())?;
    emit(&a.out.out, &t.to_csv())
}

fn reproduce(a: &ReproduceArgs) -> Result<()> {
    let fig = Figure::parse(&a.figure)?;
    emit(&a.out.out, &reproduce_figure(fig, a.trials, a.seed)?.to_csv())
}

fn validate(a: &ValidateArgs) -> Result<bool> {
    let report = run_validation(a.draws, a.seed);
    let mut text = String::new();
    for c in &report {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        text.push_str(&format!("{tag} {} (worst {:e}, limit {:e}, cases {})\n", c.name, c.worst, c.limit, c.cases));
    }
    let ok = report.iter().all(|c| c.passed);
    text.push_str(if ok { "all checks passed\n" } else { "some checks failed\n" });
    emit(&None, &text)?;
    if a.out.is_some() {
        emit_json(&a.out, &serde_json::to_value(&report).expect("report serializes"))?;
    }
    Ok(ok)
}

fn error_kind(e: &TwrcError) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Decompose(a) => decompose(a).map(|_| true),
        Command::Rates(a) => rates(a).map(|_| true),
        Command::Region(a) => region(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Asymptotic(a) => asymptotic(a).map(|_| true),
        Command::Aed(a) => aed_table(a).map(|_| true),
        Command::Reproduce(a) => reproduce(a).map(|_| true),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            let code = if e.is_config() { 2 } else { 3 };
            eprintln!("{}", json!({ "error": error_kind(&e), "message": e.to_string(), "exit_code": code }));
            ExitCode::from(code)
        }
    }
}
