//! `ewlkit`: fit, compare, sample and inspect EWL lifetime models.

mod input;
mod output;

use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ewlkit::dist::{sample_compound, sample_inverse};
use ewlkit::gof::{self, empirical_scaled_ttt, gof_report};
use ewlkit::inference::{self, aic, family_loglik, weibull_plot_start};
use ewlkit::submodels::{restrict, THETA_EPS};
use ewlkit::{moments, EwlError, EwlParams, FamilyId, FitMethod, FitOptions, FitResult, SeriesPolicy};

use output::{FitRecord, PARAM_NAMES};

/// Input errors exit with 1, numerical failures with 2.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric(String),
}

impl From<EwlError> for CliError {
    fn from(e: EwlError) -> Self {
        match e {
            EwlError::Domain(_) | EwlError::InvalidParams(_) | EwlError::Nesting { .. } | EwlError::Degenerate(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "ewlkit", version, about = "Exponentiated Weibull-logarithmic lifetime models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one family by maximum likelihood.
    Fit(FitArgs),
    /// Fit several families, rank them and run likelihood-ratio tests.
    Compare(CompareArgs),
    /// Draw a random sample.
    Sample(SampleArgs),
    /// Tabulate a curve on a grid.
    Curves(CurvesArgs),
    /// Goodness-of-fit statistics of a data set at given parameters.
    Gof(GofArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Machine,
}

#[derive(Args)]
struct DataArgs {
    /// Data file (one column, or CSV with a header), `-` for stdin, or
    /// `builtin:fatigue` / `builtin:carbon-fiber`.
    input: String,
    /// Column to read, by header name or 1-based index.
    #[arg(long)]
    column: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "ewl")]
    family: String,
    /// em, direct or hybrid (EM followed by quasi-Newton polishing).
    #[arg(long, default_value = "hybrid")]
    method: String,
    /// Starting values, e.g. `--init alpha=2,theta=0.3`.
    #[arg(long, value_delimiter = ',')]
    init: Vec<String>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Families to fit, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "ewl,cwl,gel,ew,ge,weibull")]
    family: Vec<String>,
    /// Likelihood-ratio pairs `null:alt`; by default every nested pair.
    #[arg(long, value_delimiter = ',')]
    lr: Vec<String>,
    #[arg(long, default_value = "hybrid")]
    method: String,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct ParamArgs {
    /// Parameters, e.g. `--params alpha=2,beta=1,gamma=1.5,theta=0.5`.
    #[arg(long, value_delimiter = ',', conflicts_with = "from")]
    params: Vec<String>,
    /// Family whose fixed parameters fill in missing values.
    #[arg(long, conflicts_with = "from")]
    family: Option<String>,
    /// Read family and parameters from `fit --format machine` output.
    #[arg(long)]
    from: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleMethod {
    Inverse,
    Compound,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "inverse")]
    method: SampleMethod,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Curve {
    Pdf,
    Cdf,
    Hazard,
    Mrl,
    Lorenz,
    Bonferroni,
    Ttt,
    EmpiricalTtt,
}

impl Curve {
    fn name(self) -> &'static str {
        match self {
            Curve::Pdf => "pdf",
            Curve::Cdf => "cdf",
            Curve::Hazard => "hazard",
            Curve::Mrl => "mrl",
            Curve::Lorenz => "lorenz",
            Curve::Bonferroni => "bonferroni",
            Curve::Ttt => "ttt",
            Curve::EmpiricalTtt => "empirical_ttt",
        }
    }

    /// Lorenz, Bonferroni and TTT curves are tabulated against `F(x)`.
    fn probability_scale(self) -> bool {
        matches!(self, Curve::Lorenz | Curve::Bonferroni | Curve::Ttt)
    }
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long, value_enum)]
    which: Curve,
    #[command(flatten)]
    params: ParamArgs,
    /// `lo:hi:points`; lifetimes for pdf/cdf/hazard/mrl, probabilities in
    /// (0, 1) for lorenz/bonferroni/ttt.
    #[arg(long)]
    grid: Option<String>,
    /// Data set, required for empirical-ttt.
    input: Option<String>,
    #[arg(long)]
    column: Option<String>,
}

#[derive(Args)]
struct GofArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

fn parse_family(s: &str) -> CliResult<FamilyId> {
    s.parse::<FamilyId>().map_err(CliError::from)
}

fn parse_method(s: &str) -> CliResult<FitMethod> {
    s.parse::<FitMethod>().map_err(CliError::from)
}

/// Parses `key=value` pairs into `[α, β, γ, θ]` slots.
fn parse_assignments(pairs: &[String], flag: &str) -> CliResult<[Option<f64>; 4]> {
    let mut out = [None; 4];
    for pair in pairs.iter().filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--{flag} expects key=value, got '{pair}'")))?;
        let idx = match k.trim().to_ascii_lowercase().as_str() {
            "alpha" | "a" => 0,
            "beta" | "b" => 1,
            "gamma" | "g" => 2,
            "theta" | "t" => 3,
            other => return Err(CliError::Input(format!("--{flag}: unknown parameter '{other}'"))),
        };
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("--{flag}: '{v}' is not a number")))?;
        out[idx] = Some(v);
    }
    Ok(out)
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

/// Fills a family's fixed coordinates, warning when a given value is overridden.
fn apply_family(slots: [Option<f64>; 4], family: FamilyId, flag: &str) -> [Option<f64>; 4] {
    let fixed = [
        family.fixed_alpha(),
        None,
        family.fixed_gamma(),
        family.theta_limit().then_some(THETA_EPS),
    ];
    let mut out = slots;
    for i in 0..4 {
        if let Some(f) = fixed[i] {
            if let Some(v) = slots[i] {
                if v != f {
                    warn(&format!("{} is fixed in {family}; --{flag} {}={v} ignored", PARAM_NAMES[i], PARAM_NAMES[i]));
                }
            }
            out[i] = Some(f);
        }
    }
    out
}

fn resolve_params(args: &ParamArgs) -> CliResult<(FamilyId, EwlParams)> {
    if let Some(path) = &args.from {
        let text = if path == "-" {
            io::read_to_string(io::stdin()).map_err(|e| CliError::Input(format!("cannot read stdin: {e}")))?
        } else {
            std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?
        };
        let rec: FitRecord =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{path}: not a fit record: {e}")))?;
        let p = EwlParams::new(rec.params.alpha, rec.params.beta, rec.params.gamma, rec.params.theta)?;
        return Ok((rec.family, restrict(&p, rec.family)));
    }
    let family = match &args.family {
        Some(f) => parse_family(f)?,
        None => FamilyId::Ewl,
    };
    let slots = apply_family(parse_assignments(&args.params, "params")?, family, "params");
    let mut v = [0.0; 4];
    for i in 0..4 {
        v[i] = slots[i].ok_or_else(|| CliError::Input(format!("missing parameter {} (use --params)", PARAM_NAMES[i])))?;
    }
    Ok((family, EwlParams::from_array(v)?))
}

fn series_policy() -> CliResult<SeriesPolicy> {
    let policy = SeriesPolicy::default();
    match std::env::var("EWLKIT_MAX_TERMS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(policy.with_max_terms(n)),
            _ => Err(CliError::Input(format!("EWLKIT_MAX_TERMS must be a positive integer, got '{s}'"))),
        },
        Err(_) => Ok(policy),
    }
}

fn emit(text: &str) -> CliResult<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Input(format!("cannot write output: {e}")))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let data = input::load(&args.data.input, args.data.column.as_deref())?;
    let family = parse_family(&args.family)?;
    let mut opts = FitOptions {
        method: parse_method(&args.method)?,
        ..FitOptions::default()
    };
    if !args.init.is_empty() {
        let given = apply_family(parse_assignments(&args.init, "init")?, family, "init");
        let (beta, gamma) = weibull_plot_start(&data.values)?;
        let defaults = [1.0, beta, gamma, 0.5];
        let v: Vec<f64> = (0..4).map(|i| given[i].unwrap_or(defaults[i])).collect();
        opts.init = Some(EwlParams::new(v[0], v[1], v[2], v[3])?);
    }
    let fit = inference::fit(&data.values, family, &opts)?;
    if !fit.converged {
        warn(&format!(
            "{family} fit did not converge cleanly (gap {:.3e}{})",
            fit.convergence_gap,
            if fit.boundary { ", theta on the boundary" } else { "" }
        ));
    }
    let report = gof_report(&data.values, &fit)?;
    match args.format {
        Format::Table => emit(&output::fit_table(&fit, Some(&report))),
        Format::Machine => emit(&to_json(&FitRecord::from_fit(&fit, Some(report)))),
    }
}

/// Requested LR pairs, or every nested pair among `families`.
fn lr_pairs(spec: &[String], families: &[FamilyId]) -> CliResult<Vec<(FamilyId, FamilyId)>> {
    if spec.is_empty() {
        let mut pairs = Vec::new();
        for &alt in families {
            for &null in families {
                if null.is_nested_in(&alt) {
                    pairs.push((null, alt));
                }
            }
        }
        return Ok(pairs);
    }
    let mut pairs = Vec::new();
    for s in spec.iter().filter(|s| !s.trim().is_empty()) {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| CliError::Input(format!("--lr expects null:alt, got '{s}'")))?;
        let (null, alt) = (parse_family(a)?, parse_family(b)?);
        if !null.is_nested_in(&alt) {
            warn(&format!("{null} is not nested in {alt}; pair skipped"));
            continue;
        }
        if !families.contains(&null) || !families.contains(&alt) {
            warn(&format!("{null}:{alt} needs both families in --family; pair skipped"));
            continue;
        }
        pairs.push((null, alt));
    }
    Ok(pairs)
}

fn cmd_compare(args: &CompareArgs) -> CliResult<()> {
    let data = input::load(&args.data.input, args.data.column.as_deref())?;
    let mut families = Vec::new();
    for f in args.family.iter().filter(|f| !f.trim().is_empty()) {
        let f = parse_family(f)?;
        if !families.contains(&f) {
            families.push(f);
        }
    }
    if families.is_empty() {
        return Err(CliError::Input("no families requested".into()));
    }
    let pairs = lr_pairs(&args.lr, &families)?;
    let opts = FitOptions {
        method: parse_method(&args.method)?,
        ..FitOptions::default()
    };
    let rows = gof::model_table(&data.values, &families, &opts)?;
    let fit_of = |f: FamilyId| -> Option<&FitResult> { rows.iter().find(|r| r.family == f).and_then(|r| r.fit.as_ref()) };
    let mut tests = Vec::new();
    for (null, alt) in pairs {
        match (fit_of(null), fit_of(alt)) {
            (Some(n), Some(a)) => tests.push(inference::lr_from_fits(n, a)?),
            _ => warn(&format!("{null}:{alt} skipped because a fit failed")),
        }
    }
    let all_failed = rows.iter().all(|r| r.fit.is_none());
    match args.format {
        Format::Table => {
            let mut text = output::model_table(&rows);
            if !tests.is_empty() {
                text.push('\n');
                text.push_str(&output::lr_table(&tests));
            }
            emit(&text)?;
        }
        Format::Machine => {
            let models: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| match &r.fit {
                    Some(f) => serde_json::to_value(FitRecord::from_fit(f, r.gof)).expect("record serializes"),
                    None => serde_json::json!({
                        "family": r.family,
                        "error": r.error,
                    }),
                })
                .collect();
            emit(&to_json(&serde_json::json!({ "models": models, "lr": tests })))?;
        }
    }
    if all_failed {
        return Err(CliError::Numeric("every fit failed".into()));
    }
    Ok(())
}

fn cmd_sample(args: &SampleArgs) -> CliResult<()> {
    let (_, p) = resolve_params(&args.params)?;
    let draws = match args.method {
        SampleMethod::Inverse => sample_inverse(&p, args.n, args.seed)?,
        SampleMethod::Compound => sample_compound(&p, args.n, args.seed)?,
    };
    let mut out = BufWriter::new(io::stdout().lock());
    for y in draws {
        writeln!(out, "{y}").map_err(|e| CliError::Input(format!("cannot write output: {e}")))?;
    }
    out.flush().map_err(|e| CliError::Input(format!("cannot write output: {e}")))
}

fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Input(format!("invalid grid '{spec}' (expected lo:hi:points with lo < hi, points >= 2)"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi && points >= 2) {
        return Err(bad());
    }
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

fn curve_value(which: Curve, family: FamilyId, p: &EwlParams, x: f64, policy: &SeriesPolicy) -> CliResult<f64> {
    let v = match which {
        Curve::Pdf => family.ln_pdf(p, x)?.exp(),
        Curve::Cdf => family.cdf(p, x),
        Curve::Hazard => p.hazard(x)?,
        Curve::Mrl => moments::mean_residual_life(p, x, policy)?.value,
        Curve::Lorenz => moments::lorenz(p, family.quantile(p, x)?, policy)?.value,
        Curve::Bonferroni => moments::bonferroni(p, family.quantile(p, x)?, policy)?.value,
        Curve::Ttt => moments::scaled_ttt(p, family.quantile(p, x)?, policy)?.value,
        Curve::EmpiricalTtt => unreachable!("empirical curve has no model value"),
    };
    Ok(v)
}

fn cmd_curves(args: &CurvesArgs) -> CliResult<()> {
    let mut text = format!("x,{}\n", args.which.name());
    if args.which == Curve::EmpiricalTtt {
        let path = args
            .input
            .as_deref()
            .ok_or_else(|| CliError::Input("empirical-ttt needs a data set".into()))?;
        let data = input::load(path, args.column.as_deref())?;
        for (x, v) in empirical_scaled_ttt(&data.values)? {
            text.push_str(&format!("{x},{v}\n"));
        }
        return emit(&text);
    }
    let (family, p) = resolve_params(&args.params)?;
    let policy = series_policy()?;
    let grid = match &args.grid {
        Some(g) => parse_grid(g)?,
        None if args.which.probability_scale() => (1..100).map(|i| i as f64 / 100.0).collect(),
        None => {
            let (lo, hi) = (family.quantile(&p, 0.001)?, family.quantile(&p, 0.999)?);
            (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect()
        }
    };
    let valid = |x: f64| {
        if args.which.probability_scale() {
            x > 0.0 && x < 1.0
        } else {
            x > 0.0
        }
    };
    if let Some(x) = grid.iter().find(|&&x| !valid(x)) {
        let range = if args.which.probability_scale() { "(0, 1)" } else { "(0, inf)" };
        return Err(CliError::Input(format!(
            "invalid grid: {} needs points in {range}, got {x}",
            args.which.name()
        )));
    }
    for x in grid {
        let v = curve_value(args.which, family, &p, x, &policy)?;
        text.push_str(&format!("{x},{v}\n"));
    }
    emit(&text)
}

fn cmd_gof(args: &GofArgs) -> CliResult<()> {
    let data = input::load(&args.data.input, args.data.column.as_deref())?;
    let (family, p) = resolve_params(&args.params)?;
    let loglik = family_loglik(&data.values, &p, family)?;
    let fit = FitResult {
        family,
        params: p,
        std_errors: vec![f64::NAN; family.n_free()],
        loglik,
        aic: aic(loglik, family.n_free()),
        n_obs: data.values.len(),
        method: FitMethod::Direct,
        iterations: 0,
        converged: true,
        convergence_gap: 0.0,
        boundary: false,
    };
    let report = gof_report(&data.values, &fit)?;
    match args.format {
        Format::Table => emit(&output::gof_table(family, &report, loglik)),
        Format::Machine => {
            let rec = FitRecord {
                stderr: Default::default(),
                fit: None,
                ..FitRecord::from_fit(&fit, Some(report))
            };
            emit(&to_json(&rec))
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Gof(a) => cmd_gof(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        for bad in ["1:0:5", "0:1:1", "0:1", "a:1:3", "0:inf:4"] {
            assert!(matches!(parse_grid(bad), Err(CliError::Input(_))), "{bad}");
        }
    }

    #[test]
    fn assignments_fill_fixed_values() {
        let slots = parse_assignments(&["alpha=3".into(), "b=2".into()], "init").unwrap();
        assert_eq!(slots, [Some(3.0), Some(2.0), None, None]);
        let cel = apply_family(slots, FamilyId::Cel, "init");
        assert_eq!(cel, [Some(1.0), Some(2.0), Some(1.0), None]);
        assert!(parse_assignments(&["delta=1".into()], "init").is_err());
        assert!(parse_assignments(&["alpha".into()], "init").is_err());
    }

    #[test]
    fn error_classes() {
        assert!(matches!(CliError::from(EwlError::InvalidParams("x".into())), CliError::Input(_)));
        assert!(matches!(CliError::from(EwlError::SingularInformation), CliError::Numeric(_)));
    }
}
