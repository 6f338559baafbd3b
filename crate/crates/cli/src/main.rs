//! `promotime` command line: simulate portfolios, fit the cure-rate model,
//! and tabulate or plot fitted non-recovery curves.
//!
//! Exit codes: 0 success, 1 input error, 2 statistical degeneracy (a group
//! that cannot be identified, a singular information matrix, or a fit that
//! did not converge).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use promotime::portfolio::{load_portfolio, segment, summary_table, write_portfolio, write_summary_csv};
use promotime::report::{build_curves, render_svg, write_curves_csv, FitReport, GroupParams, SurvivalTable};
use promotime::simulation::{simulate_portfolio, SimulationSpec};
use promotime::{fit_mle, fit_stratified, FitOptions, ModelParams, PartitionSpec, Portfolio};

#[derive(Parser)]
#[command(name = "promotime", version, about = "Promotion-time cure-rate model for loan recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic portfolio from known parameters.
    Simulate(SimulateArgs),
    /// Fit the model to a portfolio, one shared baseline across groups.
    Fit(FitArgs),
    /// Fitted non-recovery percentages at fixed horizons.
    SurvivalTable(TableArgs),
    /// Fitted non-recovery curves on a uniform grid.
    Curves(CurveArgs),
    /// Recovered / unrecovered counts per group.
    Summary(SummaryArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    theta: f64,
    #[arg(long, default_value_t = 1.157)]
    shape: f64,
    #[arg(long, default_value_t = 18.762)]
    scale: f64,
    /// Number of contracts.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 24.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Behaviour-score range stamped on every record.
    #[arg(long, default_value_t = 1)]
    fx_bs: u8,
    /// Contracted-amount range stamped on every record.
    #[arg(long, default_value_t = 1)]
    fx_cv: u8,
    /// Output CSV (standard output when omitted or `-`).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// Portfolio CSV (standard input when `-`).
    #[arg(long, short)]
    input: PathBuf,
    /// Partition, e.g. `cv=1,2;bs=1,2`. Whole population when omitted.
    #[arg(long)]
    by: Option<PartitionSpec>,
    /// Observation window; unrecovered contracts must be censored here.
    #[arg(long, default_value_t = 24.0)]
    horizon: f64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Minimizer, by registry name (`bfgs`, `nelder-mead`, or an alias).
    #[arg(long, default_value = "bfgs")]
    optimizer: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    multistart: usize,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    /// Full-precision JSON report (standard output when omitted).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Rounded CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ParamsSource {
    /// JSON report written by `fit`.
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    report: Option<PathBuf>,
    /// Literal parameters, `label:theta,shape,scale`; repeatable.
    #[arg(long)]
    params: Vec<GroupParams>,
}

impl ParamsSource {
    fn load(&self) -> anyhow::Result<(Vec<GroupParams>, Option<FitReport>)> {
        match &self.report {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let report = FitReport::from_json(&text)
                    .with_context(|| format!("parsing fit report {}", path.display()))?;
                Ok((report.group_params()?, Some(report)))
            }
            None => Ok((self.params.clone(), None)),
        }
    }
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    source: ParamsSource,
    #[arg(long, value_delimiter = ',', default_value = "12,18,24")]
    horizons: Vec<f64>,
    /// Portfolio CSV for the observed `% unrecovered` column.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Partition applied to `--data`; defaults to the report's partition.
    #[arg(long)]
    by: Option<PartitionSpec>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    source: ParamsSource,
    /// Grid spacing in months.
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    /// Right end of the grid; the report's horizon (or 24) when omitted.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SummaryArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Marks a run that completed but hit a statistical degeneracy.
#[derive(Debug)]
struct Degenerate(String);

impl std::fmt::Display for Degenerate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Degenerate {}

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(io::stdout().lock())),
    }
}

fn read_portfolio(path: &Path, horizon: f64) -> anyhow::Result<Portfolio> {
    let source: Box<dyn Read> = if path == Path::new("-") {
        Box::new(io::stdin().lock())
    } else {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Box::new(BufReader::new(f))
    };
    let p = load_portfolio(source, horizon).with_context(|| format!("loading {}", path.display()))?;
    if p.excluded_partial() > 0 {
        eprintln!("excluded {} partially recovered contracts", p.excluded_partial());
    }
    Ok(p)
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let params = ModelParams::from_triple(args.theta, args.shape, args.scale)?;
    let mut spec = SimulationSpec::new(params, args.n, args.horizon, args.seed);
    spec.fx_bs = args.fx_bs;
    spec.fx_cv = args.fx_cv;
    let portfolio = simulate_portfolio(&spec)?;
    let mut out = sink(args.output.as_deref())?;
    write_portfolio(&portfolio, &mut out)?;
    out.flush()?;

    let censored = portfolio.records().iter().filter(|r| !r.recovered).count();
    let line = format!(
        "censored fraction: {:.4} ({censored} of {})",
        censored as f64 / args.n as f64,
        args.n
    );
    // keep stdout clean when it carries the CSV
    if args.output.as_deref().is_some_and(|p| p != Path::new("-")) {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    Ok(())
}

fn fit(args: FitArgs) -> anyhow::Result<()> {
    let portfolio = read_portfolio(&args.input.input, args.input.horizon)?;
    let partition = args.input.by.clone().unwrap_or_default();
    let seg = segment(&portfolio, &partition)?;
    let opts = FitOptions {
        optimizer: args.optimizer.clone(),
        seed: args.seed,
        multistart_count: args.multistart,
        max_iterations: args.max_iterations,
        ..Default::default()
    };
    let horizon = args.input.horizon;
    let report = if seg.groups.len() == 1 {
        let (label, data) = seg.groups.iter().next().expect("segment never returns no groups");
        let result = fit_mle(data, &opts).with_context(|| format!("group {label}"))?;
        FitReport::from_single(label, &result, &opts.optimizer, horizon, &partition.to_string())
    } else {
        let result = fit_stratified(&seg.groups, &opts)?;
        FitReport::from_stratified(&result, &opts.optimizer, horizon, &partition.to_string())
    };

    let mut json = sink(args.json.as_deref())?;
    writeln!(json, "{}", report.to_json()?)?;
    json.flush()?;
    if let Some(path) = &args.csv {
        let mut csv = sink(Some(path))?;
        report.write_csv(&mut csv)?;
        csv.flush()?;
    }

    if report.is_degenerate() {
        let flagged: Vec<&str> = report
            .groups
            .iter()
            .filter(|g| g.degenerate)
            .map(|g| g.label.as_str())
            .collect();
        let mut reasons = Vec::new();
        if !report.converged {
            reasons.push("fit did not converge".to_string());
        }
        if let Some(d) = &report.degeneracy {
            reasons.push(d.clone());
        }
        if !flagged.is_empty() {
            reasons.push(format!("unidentifiable groups: {}", flagged.join(", ")));
        }
        return Err(Degenerate(reasons.join("; ")).into());
    }
    Ok(())
}

fn survival_table(args: TableArgs) -> anyhow::Result<()> {
    let (groups, report) = args.source.load()?;
    if groups.is_empty() {
        bail!("no parameters given; use --report or --params");
    }
    let observed = match &args.data {
        Some(path) => {
            let horizon = report.as_ref().map_or(24.0, |r| r.horizon_months);
            let portfolio = read_portfolio(path, horizon)?;
            let partition = match (&args.by, &report) {
                (Some(by), _) => by.clone(),
                (None, Some(r)) if r.partition != promotime::portfolio::POPULATION_LABEL => r
                    .partition
                    .parse()
                    .map_err(|e| anyhow!("report partition `{}`: {e}", r.partition))?,
                _ => PartitionSpec::population(),
            };
            Some(segment(&portfolio, &partition)?.groups)
        }
        None => None,
    };
    let table = SurvivalTable::build(&groups, &args.horizons, observed.as_ref())?;
    let mut out = sink(args.output.as_deref())?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn curves(args: CurveArgs) -> anyhow::Result<()> {
    let (groups, report) = args.source.load()?;
    if groups.is_empty() {
        bail!("no parameters given; use --report or --params");
    }
    let horizon = args
        .horizon
        .or(report.as_ref().map(|r| r.horizon_months))
        .unwrap_or(24.0);
    let series = build_curves(&groups, args.step, horizon)?;
    let mut out = sink(args.output.as_deref())?;
    write_curves_csv(&series, &mut out)?;
    out.flush()?;
    if let Some(path) = &args.svg {
        std::fs::write(path, render_svg(&series, "Probability of non-recovery"))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn summary(args: SummaryArgs) -> anyhow::Result<()> {
    let portfolio = read_portfolio(&args.input.input, args.input.horizon)?;
    let partition = args.input.by.unwrap_or_default();
    let rows = summary_table(&portfolio, &partition)?;
    let mut out = sink(args.output.as_deref())?;
    write_summary_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let degenerate = err.chain().any(|e| {
        e.is::<Degenerate>() || e.downcast_ref::<promotime::Error>().is_some_and(|e| e.is_degenerate())
    });
    if degenerate {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::SurvivalTable(a) => survival_table(a),
        Command::Curves(a) => curves(a),
        Command::Summary(a) => summary(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let kind = if code == 2 { "degenerate" } else { "error" };
            eprintln!("{kind}: {e:#}");
            ExitCode::from(code)
        }
    }
}
