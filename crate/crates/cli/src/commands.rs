use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use gbmsum::density::{solve_geometric, solve_infinite, InitialDensity};
use gbmsum::distributions::{yor_params, yor_pdf, yor_survival};
use gbmsum::mc::{perpetuity_horizon, simulate_sum, Horizon};
use gbmsum::moments::{moments_geometric, moments_infinite_product_form};
use gbmsum::pricing::{makeham_match_p, put_call_parity_gap, AsianPricer, Makeham, MatchMethod, ParityGap};
use gbmsum::tails::{
    exponent_geometric, shortfall_continuous, shortfall_probability, tail_constant_geometric, value_at_risk,
    RiskRecord, ShortfallPoint, TailRegime, VarMethod,
};
use gbmsum::{
    AsianSpec, Error, GridDensity, McConfig, McEstimate, MultiplierMoments, ReducedParams, SolveOptions, SolveReport,
    TailAsymptote,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    InverseGamma,
    Lognormal,
}

impl From<Init> for InitialDensity {
    fn from(i: Init) -> Self {
        match i {
            Init::InverseGamma => InitialDensity::InverseGamma,
            Init::Lognormal => InitialDensity::LogNormal,
        }
    }
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct DensityArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub rho: f64,
    /// Per-period stopping probability; 0 gives the perpetuity.
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    /// Grid step in u = ln(1 + x).
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    #[arg(long)]
    pub umax: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum, default_value_t = Init::InverseGamma)]
    pub init: Init,
}

/// Continuous-time law used for the comparison columns: unit volatility, so
/// that `tau = beta`, `m = rho / beta`, `lambda = p / beta`, and `beta X` is
/// compared with the time integral.
#[derive(Debug, Clone, Copy, Serialize)]
struct LimitLaw {
    sigma: f64,
    m: f64,
    lambda: f64,
    scale: f64,
}

#[derive(Debug, Serialize)]
struct DensityRecord<'a> {
    params: ReducedParams,
    options: SolveOptions,
    report: &'a SolveReport,
    mass: f64,
    mean: Option<f64>,
    tail: Option<TailAsymptote>,
    /// Local maxima of the density of `ln(1 + X)`.
    modes: Vec<f64>,
    bimodal: bool,
    limit: Option<LimitLaw>,
}

/// Local maxima of `F(u) e^u` above 1% of the global maximum, returned as `x`.
fn modes(f: &GridDensity) -> Vec<f64> {
    let g: Vec<f64> = f.values.iter().enumerate().map(|(j, v)| v * f.grid.u(j).exp()).collect();
    let top = g.iter().cloned().fold(0.0, f64::max);
    (1..g.len() - 1)
        .filter(|&j| g[j] > g[j - 1] && g[j] >= g[j + 1] && g[j] > 0.01 * top)
        .map(|j| f.grid.u(j).exp_m1())
        .collect()
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.10e}"),
        _ => String::new(),
    }
}

pub fn density(a: &DensityArgs, out: &Path) -> CliResult<()> {
    let rp = ReducedParams::new(a.beta, a.rho, a.p)?;
    let opts = SolveOptions {
        h: a.h,
        u_max: a.umax,
        tol: a.tol,
        max_iter: a.max_iter,
        init: a.init.into(),
        ..Default::default()
    };
    let (f, report) = if a.p == 0.0 {
        solve_infinite(&rp, &opts)?
    } else {
        solve_geometric(&rp, &opts)?
    };

    let law = LimitLaw {
        sigma: 1.0,
        m: a.rho / a.beta,
        lambda: a.p / a.beta,
        scale: a.beta,
    };
    let limit = if law.lambda == 0.0 {
        (law.m < 0.5).then_some(law)
    } else {
        yor_params(law.sigma, law.m, law.lambda).ok().map(|_| law)
    };

    let mut csv = String::from("u,x,F,f,cdf,f_limit,cdf_limit\n");
    for (j, (v, c)) in f.values.iter().zip(f.cdf_at_nodes()).enumerate() {
        let u = f.grid.u(j);
        let x = u.exp_m1();
        let (fl, cl) = match limit {
            Some(l) if x > 0.0 => (
                yor_pdf(l.scale * x, l.sigma, l.m, l.lambda).ok().map(|d| l.scale * d),
                yor_survival(l.scale * x, l.sigma, l.m, l.lambda).ok().map(|s| 1.0 - s),
            ),
            Some(_) => (None, Some(0.0)),
            None => (None, None),
        };
        writeln!(csv, "{u:.6},{x:.10e},{v:.10e},{v:.10e},{c:.10e},{},{}", cell(fl), cell(cl)).unwrap();
    }

    let modes = modes(&f);
    let record = DensityRecord {
        params: rp,
        options: opts,
        report: &report,
        mass: f.mass(),
        mean: f.mean().ok(),
        tail: f.tail,
        bimodal: modes.len() >= 2,
        modes,
        limit,
    };

    let mut run = Run::start(out, "density", a)?;
    run.write("density.csv", csv.as_bytes())?;
    run.write_json("density.json", &record)?;
    run.finish()?;
    println!(
        "converged in {} iterations (delta {:.3e}), {} grid points, mean {}",
        report.iterations,
        report.final_delta,
        f.grid.n_points,
        record.mean.map_or("infinite".into(), |m| format!("{m:.6}"))
    );
    Ok(())
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct AsianArgs {
    #[arg(long)]
    pub s0: f64,
    #[arg(long)]
    pub strike: f64,
    #[arg(long)]
    pub rate: f64,
    /// Continuous dividend yield.
    #[arg(long, default_value_t = 0.0)]
    pub div: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub maturity: f64,
    #[arg(long)]
    pub fixings: u32,
    /// Price the put instead of the call.
    #[arg(long)]
    pub put: bool,
    /// Check the price against a Monte Carlo estimate with this many paths.
    #[arg(long, value_name = "PATHS")]
    pub mc_check: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Exit with code 4 on a truncation warning or a Monte Carlo miss beyond 3 SE.
    #[arg(long)]
    pub strict: bool,
}

impl AsianArgs {
    pub fn spec(&self) -> AsianSpec {
        AsianSpec {
            s0: self.s0,
            strike: self.strike,
            rate: self.rate,
            dividend: self.div,
            sigma: self.sigma,
            maturity: self.maturity,
            n_fixings: self.fixings,
        }
    }
}

#[derive(Debug, Serialize)]
struct MeanCheck {
    grid_mean: f64,
    exact_mean: f64,
    relative_error: f64,
}

#[derive(Debug, Serialize)]
struct McCheck {
    estimate: McEstimate,
    z_score: f64,
}

#[derive(Debug, Serialize)]
struct AsianRecord {
    spec: AsianSpec,
    option: &'static str,
    price: f64,
    truncation: f64,
    truncation_warning: bool,
    normalization_drift: f64,
    parity: ParityGap,
    mean_check: MeanCheck,
    mc: Option<McCheck>,
}

pub fn asian(a: &AsianArgs, out: &Path) -> CliResult<()> {
    let spec = a.spec();
    let pricer = AsianPricer::new(&spec)?;
    let (kind, price) = if a.put {
        ("put", pricer.put(spec.strike)?)
    } else {
        ("call", pricer.call(spec.strike)?)
    };
    let parity = put_call_parity_gap(&spec)?;

    let mut run = Run::start(out, "asian", a)?;
    let mc = match a.mc_check {
        None => None,
        Some(paths) => {
            run.seed(a.seed);
            let rp = spec.reduced()?;
            let kappa = spec.kappa();
            let scale = (-spec.rate * spec.maturity).exp() * spec.s0 / spec.n_fixings as f64;
            let put = a.put;
            let cfg = McConfig {
                n_paths: paths,
                seed: a.seed,
                antithetic: true,
                horizon: Horizon::Fixed(spec.n_fixings),
            };
            let estimate = simulate_sum(&rp, &cfg, |x| {
                scale * if put { (kappa - x).max(0.0) } else { (x - kappa).max(0.0) }
            })?;
            let z_score = (estimate.value - price.price) / estimate.std_error;
            Some(McCheck { estimate, z_score })
        }
    };

    let record = AsianRecord {
        spec,
        option: kind,
        price: price.price,
        truncation: price.truncation,
        truncation_warning: price.truncation_warning,
        normalization_drift: price.normalization_drift,
        parity,
        mean_check: MeanCheck {
            grid_mean: price.grid_mean,
            exact_mean: price.exact_mean,
            relative_error: price.grid_mean / price.exact_mean - 1.0,
        },
        mc,
    };
    let csv = format!("n,s0,{kind}\n{},{},{:.4}\n", spec.n_fixings, spec.s0, price.price);
    run.write("asian.csv", csv.as_bytes())?;
    run.write_json("asian.json", &record)?;
    run.finish()?;
    println!("{kind} {:.4} (parity gap {:.2e})", price.price, parity.gap);

    if a.strict {
        if record.truncation_warning {
            return Err(CliError::Accuracy(format!(
                "grid truncation {:.3e} dominates the price",
                record.truncation
            )));
        }
        if let Some(m) = &record.mc {
            if m.z_score.abs() > 3.0 {
                return Err(CliError::Accuracy(format!("Monte Carlo differs by {:.2} SE", m.z_score)));
            }
        }
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct AnnuityArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long)]
    pub p: f64,
    /// Capital loadings q; the capital is (1 + q) E[X_N].
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub q_list: Vec<f64>,
    /// Probability level for the value at risk.
    #[arg(long)]
    pub var_level: Option<f64>,
}

/// One annuity scenario: the stopped-sum law and its shortfall rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnuityScenario {
    pub beta: f64,
    pub rho: f64,
    pub p: f64,
    #[serde(default = "zero_loading")]
    pub q: Vec<f64>,
    #[serde(default)]
    pub var_level: Option<f64>,
}

fn zero_loading() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Serialize)]
pub struct AnnuityResult {
    pub scenario: AnnuityScenario,
    /// Exact `E[X_N]`, the capital at `q = 0`.
    pub mean: f64,
    pub grid_mean: f64,
    pub risk: RiskRecord,
    pub report: SolveReport,
}

pub const SHORTFALL_HEADER: &str = "beta,rho,p,mean,q,threshold,shortfall,shortfall_continuous\n";

impl AnnuityResult {
    pub fn table_rows(&self, out: &mut String) {
        let s = &self.scenario;
        for pt in &self.risk.shortfall {
            writeln!(
                out,
                "{},{},{},{:.4},{},{:.4},{:.5},{}",
                s.beta,
                s.rho,
                s.p,
                self.mean,
                pt.q,
                pt.threshold,
                pt.probability,
                pt.continuous.map_or(String::new(), |c| format!("{c:.5}"))
            )
            .unwrap();
        }
    }
}

pub fn solve_annuity(s: &AnnuityScenario) -> CliResult<AnnuityResult> {
    let rp = ReducedParams::new(s.beta, s.rho, s.p)?;
    if !(s.p > 0.0) {
        return Err(Error::Domain(format!("annuity needs a stopping probability p > 0, got {}", s.p)).into());
    }
    let growth = (1.0 - s.p) * s.rho.exp();
    if growth >= 1.0 {
        return Err(Error::Infeasible(format!("E[X_N] is infinite: (1 - p) e^rho = {growth}")).into());
    }
    let mean = s.rho.exp() / (1.0 - growth);
    let (f, report) = solve_geometric(&rp, &SolveOptions::default())?;

    let mut flags = Vec::new();
    let (exponent, constant) = if s.p < 1.0 {
        (exponent_geometric(&rp)?, tail_constant_geometric(&f, &rp)?)
    } else {
        flags.push("log_normal_tail".to_string());
        (f64::NAN, f64::NAN)
    };
    let shortfall = s
        .q
        .iter()
        .map(|&q| {
            Ok(ShortfallPoint {
                q,
                threshold: (1.0 + q) * mean,
                probability: shortfall_probability(&f, mean, q)?,
                continuous: shortfall_continuous(s.beta.sqrt(), s.rho, s.p, mean, q).ok(),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let var_threshold = match s.var_level {
        Some(level) if exponent.is_finite() => {
            let ta = TailAsymptote {
                exponent,
                constant,
                regime: TailRegime::GeometricSum,
            };
            let v = value_at_risk(&ta, level, Some(&f))?;
            flags.push(match v.method {
                VarMethod::PowerLaw => "var_power_law".into(),
                VarMethod::GridInversion => "var_grid_inversion".into(),
            });
            if v.regime_violation {
                flags.push("var_regime_violation".into());
            }
            Some(v.threshold)
        }
        Some(level) => {
            flags.push("var_grid_inversion".into());
            Some(gbmsum::tails::invert_survival(&f, level)?)
        }
        None => None,
    };
    if report.grid_refined {
        flags.push("grid_refined".into());
    }

    Ok(AnnuityResult {
        scenario: s.clone(),
        mean,
        grid_mean: f.mean()?,
        risk: RiskRecord {
            exponent,
            constant,
            shortfall,
            var_threshold,
            method_flags: flags,
        },
        report,
    })
}

pub fn annuity(a: &AnnuityArgs, out: &Path) -> CliResult<()> {
    let res = solve_annuity(&AnnuityScenario {
        beta: a.beta,
        rho: a.rho,
        p: a.p,
        q: a.q_list.clone(),
        var_level: a.var_level,
    })?;
    let mut csv = String::from(SHORTFALL_HEADER);
    res.table_rows(&mut csv);

    let mut run = Run::start(out, "annuity", a)?;
    run.write("annuity.csv", csv.as_bytes())?;
    run.write_json("annuity.json", &res)?;
    run.finish()?;
    for pt in &res.risk.shortfall {
        println!(
            "q={} shortfall {:.5} continuous {}",
            pt.q,
            pt.probability,
            pt.continuous.map_or("-".into(), |c| format!("{c:.5}"))
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// a0 + 1/p equals the remaining life expectancy.
    LifeExpectancy,
    /// p equals the one-year death probability at a0.
    HazardRate,
    /// p solves mu(a0) = p (1 - p)^a0.
    HazardLiteral,
}

impl From<Method> for MatchMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::LifeExpectancy => MatchMethod::LifeExpectancy,
            Method::HazardRate => MatchMethod::HazardRate,
            Method::HazardLiteral => MatchMethod::HazardLiteral,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 65.0)]
    pub age: f64,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Makeham constant A.
    #[arg(long, default_value_t = Makeham::default().a)]
    pub a: f64,
    /// Makeham scale B.
    #[arg(long, default_value_t = Makeham::default().b)]
    pub b: f64,
    /// Makeham growth rate of the hazard.
    #[arg(long, default_value_t = Makeham::default().beta)]
    pub growth: f64,
}

#[derive(Debug, Serialize)]
struct CalibrationRecord {
    age: f64,
    method: MatchMethod,
    law: Makeham,
    p: f64,
    expected_horizon: f64,
}

pub fn calibrate(a: &CalibrateArgs, out: &Path) -> CliResult<()> {
    let law = Makeham {
        a: a.a,
        b: a.b,
        beta: a.growth,
    };
    let method = MatchMethod::from(a.method);
    let p = makeham_match_p(a.age, method, &law)?;
    let mut run = Run::start(out, "calibrate", a)?;
    let name = a.method.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    run.write("calibrate.csv", format!("age,method,p\n{},{name},{p:.10}\n", a.age).as_bytes())?;
    run.write_json(
        "calibrate.json",
        &CalibrationRecord {
            age: a.age,
            method,
            law,
            p,
            expected_horizon: 1.0 / p,
        },
    )?;
    run.finish()?;
    println!("p = {p:.5}");
    Ok(())
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct MomentsArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    #[arg(long, default_value_t = 4)]
    pub kmax: u32,
}

#[derive(Debug, Serialize)]
struct MomentsRecord {
    params: ReducedParams,
    /// `E[X^k]` for `k = 1..=kmax`.
    moments: Vec<f64>,
    /// The perpetuity moments from the product form, for comparison.
    product_form: Option<Vec<f64>>,
}

pub fn moments(a: &MomentsArgs, out: &Path) -> CliResult<()> {
    let rp = ReducedParams::new(a.beta, a.rho, a.p)?;
    if a.kmax == 0 {
        return Err(CliError::Usage("--kmax must be at least 1".into()));
    }
    let mm = MultiplierMoments::gbm(&rp);
    let m = moments_geometric(a.kmax, &mm, a.p)?;
    let product_form = (a.p == 0.0 && a.kmax <= 40)
        .then(|| moments_infinite_product_form(a.kmax, &mm))
        .transpose()?
        .map(|v| v[1..].to_vec());

    let mut csv = String::from("k,moment\n");
    for (k, v) in m.iter().enumerate().skip(1) {
        writeln!(csv, "{k},{v:e}").unwrap();
    }
    let mut run = Run::start(out, "moments", a)?;
    run.write("moments.csv", csv.as_bytes())?;
    run.write_json(
        "moments.json",
        &MomentsRecord {
            params: rp,
            moments: m[1..].to_vec(),
            product_form,
        },
    )?;
    run.finish()?;
    for (k, v) in m.iter().enumerate().skip(1) {
        println!("E[X^{k}] = {v:.6}");
    }
    Ok(())
}

/// Number of terms: a fixed count, `geometric` (uses `--p`) or `perpetuity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HorizonArg {
    Fixed(u32),
    Geometric,
    Perpetuity,
}

impl FromStr for HorizonArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "geometric" => Ok(Self::Geometric),
            "perpetuity" => Ok(Self::Perpetuity),
            n => n
                .parse()
                .map(Self::Fixed)
                .map_err(|_| format!("expected a term count, `geometric` or `perpetuity`, got `{n}`")),
        }
    }
}

#[derive(Args, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct McArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Term count, `geometric` or `perpetuity` [default: geometric when p > 0].
    #[arg(long)]
    pub horizon: Option<HorizonArg>,
    /// Moment order to estimate.
    #[arg(long, default_value_t = 1)]
    pub moment: i32,
    /// Also estimate P(X > threshold).
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub no_antithetic: bool,
}

#[derive(Debug, Serialize)]
struct McRow {
    statistic: String,
    #[serde(flatten)]
    estimate: McEstimate,
}

#[derive(Debug, Serialize)]
struct McRecord {
    params: ReducedParams,
    config: McConfig,
    estimates: Vec<McRow>,
}

pub fn mc(a: &McArgs, out: &Path) -> CliResult<()> {
    let rp = ReducedParams::new(a.beta, a.rho, a.p)?;
    let horizon = match a.horizon.unwrap_or(if a.p > 0.0 { HorizonArg::Geometric } else { HorizonArg::Perpetuity }) {
        HorizonArg::Fixed(n) => Horizon::Fixed(n),
        HorizonArg::Geometric => Horizon::Geometric(a.p),
        HorizonArg::Perpetuity => Horizon::Fixed(perpetuity_horizon(a.rho)?),
    };
    let cfg = McConfig {
        n_paths: a.paths,
        seed: a.seed,
        antithetic: !a.no_antithetic,
        horizon,
    };
    let k = a.moment;
    let mut rows = vec![McRow {
        statistic: format!("moment_{k}"),
        estimate: simulate_sum(&rp, &cfg, |x| x.powi(k))?,
    }];
    if let Some(t) = a.threshold {
        rows.push(McRow {
            statistic: "survival".into(),
            estimate: simulate_sum(&rp, &cfg, |x| if x > t { 1.0 } else { 0.0 })?,
        });
    }

    let mut csv = String::from("statistic,value,std_error,n_paths\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{:e},{:e},{}",
            r.statistic, r.estimate.value, r.estimate.std_error, r.estimate.n_paths
        )
        .unwrap();
    }
    let mut run = Run::start(out, "mc", a)?;
    run.seed(a.seed);
    run.write("mc.csv", csv.as_bytes())?;
    run.write_json(
        "mc.json",
        &McRecord {
            params: rp,
            config: cfg,
            estimates: rows,
        },
    )?;
    run.finish()?;
    print!("{csv}");
    Ok(())
}
