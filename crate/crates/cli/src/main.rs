mod config;

use clap::{Parser, Subcommand};
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use granular_core::claims::{aggregate_triangle, ingest_csv, write_csv, IngestOptions};
use granular_core::reserving::{
    backtest, chain_ladder_reserve, fit_model, reserve_summary, simulate_reserves, write_cash_flows_csv,
    write_scenarios_csv, FitReport, ReserveReport,
};
use granular_core::synth::{generate_portfolio, SynthConfig};
use granular_core::{Day, GranularModel, Portfolio};

use config::{CliError, CliResult, FileConfig, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "granular", version, about = "Claim-by-claim stochastic loss reserving")]
struct Cli {
    /// Claims CSV (claim_id,claim_type,accident_date,reporting_date,payment_date,amount).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    scenarios: Option<usize>,
    /// Valuation date a (YYYY-MM-DD); defaults to the data cutoff.
    #[arg(long, global = true)]
    valuation_date: Option<String>,
    /// one-year, ultimate, ultimate:<years> or an end date.
    #[arg(long, global = true)]
    horizon: Option<String>,
    /// Threads for the scenario loop (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fitted model JSON for `reserve`; fitted on the fly when absent.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic portfolio from a known model.
    Synth,
    /// Fit occurrence, delay, payment, severity and copula models.
    Fit,
    /// Simulate the reserve distribution at the valuation date.
    Reserve,
    /// Refit on data known at the valuation date and score the realised payments.
    Backtest,
    /// Aggregate into a paid triangle and run the chain ladder.
    Triangle,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::read(p)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        input: cli.input,
        out: cli.out,
        model: cli.model,
        seed: cli.seed,
        scenarios: cli.scenarios,
        valuation_date: cli.valuation_date,
        horizon: cli.horizon,
        workers: cli.workers,
    };
    let cfg = RunConfig::resolve(file, flags)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    match cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Fit => cmd_fit(&cfg),
        Command::Reserve => cmd_reserve(&cfg),
        Command::Backtest => cmd_backtest(&cfg),
        Command::Triangle => cmd_triangle(&cfg),
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(granular_core::Error::from)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn load_portfolio(cfg: &RunConfig) -> CliResult<Portfolio> {
    let path = cfg.input.as_ref().ok_or_else(|| CliError::Config("no input file given (--input)".into()))?;
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let opts = IngestOptions { data_cutoff: cfg.data_cutoff, strict: cfg.strict };
    let ingested = ingest_csv(BufReader::new(f), &opts).map_err(|e| e.context(path.display()))?;
    if !ingested.report.is_clean() {
        eprint!("{}", ingested.report);
    }
    let p = ingested.portfolio;
    if cfg.claim_types.is_empty() {
        return Ok(p);
    }
    let kept = p.claims().iter().filter(|c| cfg.claim_types.contains(&c.claim_type)).cloned().collect();
    Ok(Portfolio::new(kept, p.data_cutoff())?)
}

fn load_model(path: &Path) -> CliResult<GranularModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let m = GranularModel::from_json(&text).map_err(|e| e.context(path.display()))?;
    m.validate()?;
    Ok(m)
}

fn thread_pool(cfg: &RunConfig) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))
}

fn report_fit(fit: &FitReport) {
    for n in &fit.notices {
        eprintln!("notice: {n}");
    }
    for t in &fit.types {
        for w in &t.warnings {
            eprintln!("warning: {}: {w}", t.claim_type);
        }
    }
}

fn valuation(cfg: &RunConfig, p: &Portfolio) -> CliResult<Day> {
    let a = cfg.valuation_date.unwrap_or(p.data_cutoff());
    if a > p.data_cutoff() {
        return Err(CliError::Config(format!("valuation date {a} is after the data cutoff {}", p.data_cutoff())));
    }
    Ok(a)
}

fn cmd_synth(cfg: &RunConfig) -> CliResult<()> {
    let mut sc = SynthConfig::default();
    if let Some(path) = &cfg.synth.model {
        sc.model = load_model(path)?;
    }
    if let Some(s) = &cfg.synth.start {
        sc.start = Day::parse_iso(s).map_err(|_| CliError::Config(format!("synth.start: bad date '{s}'")))?;
    }
    if let Some(s) = &cfg.synth.end {
        sc.end = Day::parse_iso(s).map_err(|_| CliError::Config(format!("synth.end: bad date '{s}'")))?;
    }
    if !cfg.claim_types.is_empty() {
        sc.model.types.retain(|m| cfg.claim_types.contains(&m.claim_type));
        if sc.model.types.len() < 2 {
            sc.model.inter_type = None;
        }
    }
    if let Some(n) = cfg.synth.expected_claims {
        sc = sc.with_expected_claims(n)?;
    }
    let p = generate_portfolio(&sc, cfg.seed)?;
    let path = cfg.out.join("portfolio.csv");
    write_csv(&p, create(&path)?)?;

    #[derive(Serialize)]
    struct Truth<'a> {
        seed: u64,
        n_claims: usize,
        data_cutoff: String,
        generator: &'a SynthConfig,
    }
    let truth = Truth { seed: cfg.seed, n_claims: p.len(), data_cutoff: p.data_cutoff().to_string(), generator: &sc };
    write_json(&cfg.out.join("truth.json"), &truth)?;
    println!("seed: {}", cfg.seed);
    println!("claims: {}", p.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_fit(cfg: &RunConfig) -> CliResult<()> {
    let p = load_portfolio(cfg)?;
    let a = valuation(cfg, &p)?;
    let known = if a < p.data_cutoff() { p.as_of(a)? } else { p };
    let (model, fit) = fit_model(&known, &cfg.fit)?;
    report_fit(&fit);
    write_json(&cfg.out.join("model.json"), &model)?;
    write_json(&cfg.out.join("fit_report.json"), &fit)?;
    println!("fitted {} claim type(s) on {} claims up to {}", model.types.len(), known.len(), known.data_cutoff());
    Ok(())
}

fn cmd_reserve(cfg: &RunConfig) -> CliResult<()> {
    let p = load_portfolio(cfg)?;
    let a = valuation(cfg, &p)?;
    let known = if a < p.data_cutoff() { p.as_of(a)? } else { p };
    let model = match &cfg.model {
        Some(path) => load_model(path)?,
        None => {
            let (model, fit) = fit_model(&known, &cfg.fit)?;
            report_fit(&fit);
            write_json(&cfg.out.join("model.json"), &model)?;
            write_json(&cfg.out.join("fit_report.json"), &fit)?;
            model
        }
    };
    let window = cfg.horizon.window(a)?;
    let dist = thread_pool(cfg)?.install(|| simulate_reserves(&model, &known, &window, cfg.scenarios, cfg.seed))?;
    let summary = reserve_summary(&dist, &cfg.levels)?;
    let report = ReserveReport::new(&dist, cfg.horizon.to_string(), summary);
    write_json(&cfg.out.join("summary.json"), &report)?;
    let path = cfg.out.join("scenarios.csv");
    write_scenarios_csv(create(&path)?, &dist)?;
    let path = cfg.out.join("cash_flows.csv");
    write_cash_flows_csv(create(&path)?, &dist, &report.summary)?;

    println!("seed: {}", cfg.seed);
    println!("window: ({}, {}]", window.a, window.b);
    println!("mean reserve: {:.2}", report.summary.total.mean);
    for q in &report.summary.total.quantiles {
        println!("  q{:<6} {:.2}", q.level, q.value);
    }
    Ok(())
}

fn cmd_backtest(cfg: &RunConfig) -> CliResult<()> {
    let p = load_portfolio(cfg)?;
    let a = match cfg.valuation_date {
        Some(a) => a,
        None => p.data_cutoff().offset(-365),
    };
    let window = cfg.horizon.window(a)?;
    if window.a >= p.data_cutoff() || window.b > p.data_cutoff() {
        return Err(CliError::Config(format!(
            "backtest window ({}, {}] must end by the data cutoff {}",
            window.a,
            window.b,
            p.data_cutoff()
        )));
    }
    let (report, _, _) =
        thread_pool(cfg)?.install(|| backtest(&p, &cfg.fit, &window, cfg.scenarios, cfg.seed, &cfg.levels))?;
    report_fit(&report.fit);

    #[derive(Serialize)]
    struct Out<'a> {
        seed: u64,
        #[serde(flatten)]
        report: &'a granular_core::reserving::BacktestReport,
    }
    write_json(&cfg.out.join("backtest.json"), &Out { seed: cfg.seed, report: &report })?;
    println!("seed: {}", cfg.seed);
    println!("window: ({}, {}]", window.a, window.b);
    println!("actual: {:.2}  percentile: {:.3}", report.actual, report.percentile);
    println!("90% band: [{:.2}, {:.2}] {}", report.band.0, report.band.1, if report.in_band { "covered" } else { "missed" });
    Ok(())
}

fn cmd_triangle(cfg: &RunConfig) -> CliResult<()> {
    let p = load_portfolio(cfg)?;
    let a = valuation(cfg, &p)?;
    let known = if a < p.data_cutoff() { p.as_of(a)? } else { p };
    let tri = aggregate_triangle(&known, cfg.period_years)?;
    let cl = chain_ladder_reserve(&tri)?;

    let path = cfg.out.join("triangle.csv");
    let mut w = create(&path)?;
    let header: Vec<String> = std::iter::once("origin".to_string()).chain((0..tri.n_dev()).map(|j| format!("dev_{j}"))).collect();
    let mut lines = vec![header.join(",")];
    for (o, row) in tri.origins.iter().zip(&tri.cells) {
        let cells = row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default());
        lines.push(std::iter::once(o.to_string()).chain(cells).collect::<Vec<_>>().join(","));
    }
    writeln!(w, "{}", lines.join("\n")).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;

    #[derive(Serialize)]
    struct Out<'a> {
        valuation_date: String,
        period_years: u32,
        origins: &'a [i32],
        #[serde(flatten)]
        chain_ladder: &'a granular_core::reserving::ChainLadder,
    }
    let out = Out {
        valuation_date: known.data_cutoff().to_string(),
        period_years: cfg.period_years,
        origins: &tri.origins,
        chain_ladder: &cl,
    };
    write_json(&cfg.out.join("chain_ladder.json"), &out)?;
    println!("chain-ladder reserve: {:.2}", cl.total);
    Ok(())
}
