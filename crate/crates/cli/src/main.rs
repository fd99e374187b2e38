//! `matchnet`: rates, equilibria, sweeps, simulation and verification for
//! the marriage-through-friends market.
//!
//! Exit codes: 0 on success, 2 when the model has no interior equilibrium,
//! 1 on any error or failed verification.

mod config;
#[cfg(test)]
mod tests;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::ser::{Serialize, SerializeMap, Serializer};
use serde_json::{json, Value};

use matchnet::equilibrium::{
    a_bar, ds_da_implicit, solve_heterogeneous, solve_homogeneous, HeterogeneousOptions,
};
use matchnet::rates::{marriage_rate, marriage_rate_homogeneous, MarriageRateVariant, MatchingRates};
use matchnet::simulator::{
    compare_to_closed_form, monte_carlo, write_replications_csv, write_summary_json, SimConfig,
};
use matchnet::sweep::{sweep, write_csv, write_json, Model};
use matchnet::verify::{self, Mode, VerifyOptions};
use matchnet::{Education, Params};

use config::{FormatArg, ModelKind, PassRuleArg, Settings};

#[derive(Debug, Parser)]
#[command(name = "matchnet", version, about = "Marriage through friends: rates, equilibria and simulation")]
struct Cli {
    /// TOML file of `key = value` settings; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the eight channel rates and the marriage rates at a profile
    Rates(Settings),
    /// Solve for the interior symmetric equilibrium
    Solve(Settings),
    /// Sweep one parameter over a grid
    Sweep(Settings),
    /// Monte Carlo estimates of the channel rates
    Simulate(Settings),
    /// Run the invariant suites
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Closed-form suites only (default)
    #[arg(long, conflicts_with = "full")]
    quick: bool,
    /// Add the Monte Carlo suites
    #[arg(long)]
    full: bool,
    #[command(flatten)]
    settings: Settings,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (command, settings) = match cli.command {
        Command::Rates(s) => ("rates", s),
        Command::Solve(s) => ("solve", s),
        Command::Sweep(s) => ("sweep", s),
        Command::Simulate(s) => ("simulate", s),
        Command::Verify(v) => {
            let mode = if v.full { Mode::Full } else { Mode::Quick };
            let settings = v.settings.with_file(cli.config.as_deref())?;
            init_threads(settings.threads)?;
            return cmd_verify(&settings, mode);
        }
    };
    let settings = settings.with_file(cli.config.as_deref())?;
    init_threads(settings.threads)?;
    match command {
        "rates" => cmd_rates(&settings),
        "solve" => cmd_solve(&settings),
        "sweep" => cmd_sweep(&settings),
        _ => cmd_simulate(&settings),
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads.filter(|&t| t > 0) {
        // The global pool can be built once per process; a second request
        // keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn output(settings: &Settings) -> Result<Box<dyn Write>> {
    Ok(match &settings.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Key/value pairs kept in insertion order.
struct Record(Vec<(&'static str, Value)>);

impl Record {
    fn new() -> Self {
        Record(Vec::new())
    }

    fn put(&mut self, key: &'static str, value: impl Into<Value>) -> &mut Self {
        self.0.push((key, value.into()));
        self
    }

    fn params(&mut self, model: ModelKind, p: &Params) -> &mut Self {
        let model = match model {
            ModelKind::Homogeneous => "homogeneous",
            ModelKind::Heterogeneous => "heterogeneous",
            ModelKind::Exogenous => "exogenous",
        };
        self.put("model", model)
            .put("a", p.arrival)
            .put("d", p.divorce)
            .put("c", p.cost)
            .put("h", p.high_share)
            .put("Y", p.high_gain)
            .put("V", p.marriage_value)
            .put("n", p.population.map_or(Value::Null, Value::from))
    }

    fn write(&self, format: Option<FormatArg>, out: &mut dyn Write) -> Result<()> {
        let text = |v: &Value| match v {
            Value::Null => String::new(),
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        match format {
            None => {
                for (k, v) in &self.0 {
                    writeln!(out, "{k} = {}", text(v))?;
                }
            }
            Some(FormatArg::Csv) => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(self.0.iter().map(|(k, _)| *k))?;
                w.write_record(self.0.iter().map(|(_, v)| text(v)))?;
                w.flush()?;
            }
            Some(FormatArg::Json) => {
                serde_json::to_writer_pretty(&mut *out, self)?;
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

impl Serialize for Record {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

fn cmd_rates(settings: &Settings) -> Result<ExitCode> {
    if settings.model() == ModelKind::Exogenous {
        bail!("rates takes --model homogeneous or heterogeneous");
    }
    let p = settings.params()?;
    let prof = settings.profile()?;
    let opts = settings.rate_options();
    let rates = MatchingRates::evaluate(&prof, &p, opts)?;
    let mut rec = Record::new();
    rec.params(settings.model(), &p).put("s_h", prof.high).put("s_l", prof.low);
    for (ch, v) in rates.iter() {
        rec.put(ch.name(), v);
    }
    for (key, e) in [("m_summed_h", Education::High), ("m_summed_l", Education::Low)] {
        rec.put(key, marriage_rate(e, &prof, &p, MarriageRateVariant::Summed, opts)?);
    }
    let weighted = (p.high_share == 1.0)
        .then(|| marriage_rate_homogeneous(prof.high, &p, MarriageRateVariant::Weighted));
    rec.put("m_weighted", weighted.map_or(Value::Null, Value::from));
    let mut out = output(settings)?;
    rec.write(settings.format, &mut out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(settings: &Settings) -> Result<ExitCode> {
    let p = settings.params()?;
    let mut rec = Record::new();
    rec.params(settings.model(), &p);
    let exists = match settings.model() {
        ModelKind::Homogeneous => {
            let eq = solve_homogeneous(&p, settings.tol.unwrap_or(1e-10))?;
            rec.put("exists", eq.exists)
                .put("s_star", eq.s_star)
                .put("residual", eq.residual)
                .put("threshold", eq.threshold)
                .put("iterations", eq.iterations);
            if eq.exists {
                rec.put("a_bar", a_bar(p.divorce, eq.s_star))
                    .put("ds_da", ds_da_implicit(eq.s_star, &p)?);
            } else {
                eprintln!(
                    "no interior equilibrium: c = {} is not below the threshold {}",
                    p.cost, eq.threshold
                );
            }
            eq.exists
        }
        ModelKind::Heterogeneous => {
            let mut opts = HeterogeneousOptions::default();
            if let Some(tol) = settings.tol {
                opts.tol = tol;
            }
            let eq = solve_heterogeneous(&p, &opts)?;
            let roots: Vec<String> = eq.roots.iter().map(|r| format!("{}:{}", r.high, r.low)).collect();
            rec.put("exists", eq.exists)
                .put("status", eq.status.tag())
                .put("s_h_star", eq.s_h_star)
                .put("s_l_star", eq.s_l_star)
                .put("residual_h", eq.residual_h)
                .put("residual_l", eq.residual_l)
                .put("threshold", eq.threshold)
                .put("threshold_low", eq.threshold_low)
                .put("threshold_high", eq.threshold_high)
                .put("iterations", eq.iterations)
                .put("roots", roots.join(";"));
            if !eq.exists {
                eprintln!(
                    "no interior equilibrium ({}): cost bound a(1-a)(1-d)Yd = {}",
                    eq.status.tag(),
                    eq.threshold
                );
            }
            eq.exists
        }
        ModelKind::Exogenous => bail!("solve takes --model homogeneous or heterogeneous"),
    };
    let mut out = output(settings)?;
    rec.write(settings.format, &mut out)?;
    out.flush()?;
    Ok(if exists { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_sweep(settings: &Settings) -> Result<ExitCode> {
    let p = settings.params()?;
    let model = match settings.model() {
        ModelKind::Homogeneous => Model::Homogeneous,
        ModelKind::Heterogeneous => Model::Heterogeneous,
        ModelKind::Exogenous => Model::Exogenous(settings.profile()?),
    };
    let table = sweep(settings.axis()?, &settings.grid()?, &p, &model)?;
    let mut out = output(settings)?;
    match settings.format {
        Some(FormatArg::Json) => write_json(&table, &mut out)?,
        _ => write_csv(&table, &mut out)?,
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(settings: &Settings) -> Result<ExitCode> {
    if settings.model() == ModelKind::Exogenous {
        bail!("simulate takes --model homogeneous or heterogeneous");
    }
    let mut p = settings.params()?;
    let n = settings.n.unwrap_or(20_000);
    p.population = Some(n);
    let cfg = SimConfig {
        n,
        reps: settings.reps.unwrap_or(200),
        seed: settings.seed(),
        pass_rule: settings.pass_rule.unwrap_or(PassRuleArg::PsiConsistent).into(),
        params: p,
        profile: settings.profile()?,
    };
    let est = monte_carlo(&cfg)?;
    let report = compare_to_closed_form(&est, &cfg.params, &cfg.profile);
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = output(settings)?;
    match settings.format {
        Some(FormatArg::Json) => write_summary_json(&est, &report, &mut out)?,
        Some(FormatArg::Csv) => write_replications_csv(&est, &mut out)?,
        None => {
            writeln!(out, "{:<14} {:>12} {:>12} {:>12} {:>8}  status", "channel", "analytic", "estimate", "se", "z")?;
            let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
            for r in &report.rows {
                let status = if !r.applicable {
                    "n/a"
                } else if r.pass {
                    "pass"
                } else {
                    "FAIL"
                };
                let z = r.z.map_or("-".to_string(), |z| format!("{z:.3}"));
                writeln!(
                    out,
                    "{:<14} {:>12.6} {:>12} {:>12} {:>8}  {status}",
                    r.name,
                    r.analytic,
                    show(r.estimate),
                    show(r.standard_error),
                    z
                )?;
            }
            let rate = est.conflict_rate.map_or("-".to_string(), |r| format!("{r:.6}"));
            writeln!(out, "conflict rate {rate}; max |z| {:.3}", report.max_abs_z)?;
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(settings: &Settings, mode: Mode) -> Result<ExitCode> {
    let report = verify::run(&VerifyOptions {
        mode,
        seed: settings.seed(),
    });
    let mut out = output(settings)?;
    match settings.format {
        Some(FormatArg::Json) => {
            serde_json::to_writer_pretty(&mut out, &json!(report))?;
            writeln!(out)?;
        }
        _ => write!(out, "{}", report.render())?,
    }
    out.flush()?;
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
