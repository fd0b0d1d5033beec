//! `gauge-arb` subcommands. Exit codes: 0 analysis completed (whatever the
//! verdict), 2 configuration or I/O error, 3 numerical failure.

mod args;
mod output;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use gauge_arb::arbitrage::{
    curvature_field, novikov_diagnostic, zc_series, zc_series_deterministic, DeterministicReturn, RangeTestReport,
    ReturnField, StochasticReturn,
};
use gauge_arb::grid::XGrid;
use gauge_arb::laplacian::{
    analyze_ensemble, analyze_scenario, extract_pricing_kernel, is_complete, radon_nikodym_series, EigenOptions,
    SectionGrid, SpectrumConfig, DEFAULT_GRID,
};
use gauge_arb::market_model::MarketScenario;
use gauge_arb::nelson::NelsonConfig;
use gauge_arb::scenario_io::ScenarioDoc;
use gauge_arb::simulation::{replay_residual, simulate, ItoModelSpec, PathEnsemble};
use gauge_arb::utility::{maximize_expected_utility, UtilityFunction};
use gauge_arb::{Error, Result};

use args::{Cli, Command, Common, UtilityArgs, UtilityKind};
use output::{config_hash, Output};

const CURVATURE_GRID: usize = 9;
const UTILITY_GRID: usize = 9;
const KERNEL_CHECK_NODES: usize = 100;

pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            if e.is_config_error() {
                2
            } else {
                3
            }
        }
    }
}

#[derive(Serialize)]
struct HashedConfig<'a, A: Serialize> {
    command: &'a str,
    args: &'a A,
    scenario: &'a ScenarioDoc,
}

fn run(cmd: &Command) -> Result<()> {
    let common = cmd.common();
    let doc = ScenarioDoc::load(&common.scenario)?;
    validate(common)?;
    let hash = match cmd {
        Command::Utility(u) => config_hash(&HashedConfig {
            command: cmd.name(),
            args: u,
            scenario: &doc,
        }),
        _ => config_hash(&HashedConfig {
            command: cmd.name(),
            args: common,
            scenario: &doc,
        }),
    };
    let out = Output::create(&common.out, cmd.name(), hash, common.force)?;
    let result = dispatch(cmd, &doc, &out).and_then(|body| out.write_report(&body).map(|_| ()));
    let code = match &result {
        Ok(()) => 0,
        Err(e) if e.is_config_error() => 2,
        Err(_) => 3,
    };
    out.write_meta(code)?;
    result
}

fn validate(c: &Common) -> Result<()> {
    if !(c.tol > 0.0) {
        return Err(Error::ConfigInvalid(format!("--tol must be positive (got {})", c.tol)));
    }
    if let Some(e) = c.epsilon_kernel {
        if !(e > 0.0) {
            return Err(Error::ConfigInvalid(format!("--epsilon-kernel must be positive (got {e})")));
        }
    }
    if c.k == 0 {
        return Err(Error::ConfigInvalid("--k must be at least 1".into()));
    }
    if matches!(c.grid, Some(n) if n < 3) {
        return Err(Error::ConfigInvalid("--grid needs at least 3 nodes".into()));
    }
    Ok(())
}

fn dispatch(cmd: &Command, doc: &ScenarioDoc, out: &Output) -> Result<Value> {
    match cmd {
        Command::Simulate(c) => cmd_simulate(c, doc, out),
        Command::Curvature(c) => with_market(c, doc, |m| cmd_curvature(c, m, out)),
        Command::ZcTest(c) => with_market(c, doc, |m| cmd_zc(m)),
        Command::Spectrum(c) => with_market(c, doc, |m| cmd_spectrum(c, m, out)),
        Command::Kernel(c) => cmd_kernel(c, &doc.market_scenario()?, out),
        Command::Utility(u) => with_market(&u.common, doc, |m| cmd_utility(u, m, out)),
        Command::Report(c) => with_market(c, doc, |m| cmd_report(c, m, doc)),
    }
}

/// The market a command runs on: explicit gauges, or a simulated Itô model.
enum Market<'a> {
    Deterministic(&'a MarketScenario),
    Stochastic {
        spec: &'a ItoModelSpec,
        ensemble: &'a PathEnsemble,
        field: StochasticReturn<'a>,
    },
}

impl Market<'_> {
    fn field(&self) -> Box<dyn ReturnField + '_> {
        match self {
            Market::Deterministic(s) => Box::new(DeterministicReturn::new(s)),
            Market::Stochastic { field, .. } => Box::new(field.clone()),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Market::Deterministic(_) => "deterministic",
            Market::Stochastic { .. } => "stochastic",
        }
    }
}

fn run_simulation(c: &Common, doc: &ScenarioDoc) -> Result<(ItoModelSpec, PathEnsemble)> {
    let spec = doc.model()?.clone();
    let sim = doc.simulation()?;
    let seed = c.seed.unwrap_or(sim.seed);
    let ensemble = simulate(&spec, sim.horizon, sim.steps, sim.paths, seed)?;
    Ok((spec, ensemble))
}

fn with_market<F>(c: &Common, doc: &ScenarioDoc, f: F) -> Result<Value>
where
    F: FnOnce(&Market) -> Result<Value>,
{
    if doc.has_deterministic() {
        let scenario = doc.market_scenario()?;
        f(&Market::Deterministic(&scenario))
    } else if doc.has_model() {
        let (spec, ensemble) = run_simulation(c, doc)?;
        let field = StochasticReturn::new(&ensemble, doc.domain()?, NelsonConfig::for_paths(ensemble.path_count()))?;
        f(&Market::Stochastic {
            spec: &spec,
            ensemble: &ensemble,
            field,
        })
    } else {
        Err(Error::ConfigInvalid(
            "scenario needs \"time_grid\" with \"assets\", or a \"model\" block".into(),
        ))
    }
}

fn spectrum_config(c: &Common, default_grid: usize) -> SpectrumConfig {
    SpectrumConfig {
        grid_nodes: c.grid.unwrap_or(default_grid),
        time_nodes: None,
        eigen: EigenOptions {
            k: c.k,
            tol: c.tol,
            ..EigenOptions::default()
        },
        epsilon_kernel: c.epsilon_kernel,
    }
}

fn cmd_simulate(c: &Common, doc: &ScenarioDoc, out: &Output) -> Result<Value> {
    let (spec, ensemble) = run_simulation(c, doc)?;
    let path = out.path("ensemble.csv");
    let file = std::fs::File::create(&path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    ensemble
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    let last = ensemble.steps();
    let m = ensemble.path_count() as f64;
    let terminal_mean: Vec<f64> = (0..ensemble.asset_count())
        .map(|j| (0..ensemble.path_count()).map(|p| ensemble.values_at(p, last)[j]).sum::<f64>() / m)
        .collect();
    Ok(json!({
        "horizon": ensemble.times()[last],
        "steps": last,
        "paths": ensemble.path_count(),
        "seed": ensemble.seed(),
        "replay_residual": replay_residual(&spec, &ensemble),
        "terminal_mean": terminal_mean,
        "ensemble_csv": file_name(&path),
    }))
}

fn file_name(p: &std::path::Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn axis_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("{prefix}_{j}")).collect()
}

fn cmd_curvature(c: &Common, market: &Market, out: &Output) -> Result<Value> {
    let field = market.field();
    let grid = XGrid::uniform(field.domain(), c.grid.unwrap_or(CURVATURE_GRID))?;
    let cf = curvature_field(field.as_ref(), &grid)?;
    let n = grid.dim();
    let mut header = vec!["time".to_string()];
    header.extend(axis_header("x", n));
    header.extend(axis_header("r", n));
    header.push("norm".into());
    let mut rows = Vec::new();
    for node in 0..grid.len() {
        let x = grid.point(node);
        for (t, &time) in cf.times.iter().enumerate() {
            let mut row = vec![time];
            row.extend(&x);
            row.extend(&cf.components[node][t]);
            row.push(cf.component_norm(node, t));
            rows.push(row);
        }
    }
    let csv = out.write_csv("grid", &header, &rows)?;
    let by_time: Vec<Value> = cf
        .times
        .iter()
        .enumerate()
        .map(|(t, &time)| json!({"time": time, "sup_norm": cf.sup_norm_at(t)}))
        .collect();
    Ok(json!({
        "market": market.kind(),
        "grid_nodes": grid.shape(),
        "sup_norm": cf.sup_norm(),
        "by_time": by_time,
        "curvature_csv": file_name(&csv),
    }))
}

fn zc_body(times: &[f64], reports: &[RangeTestReport]) -> Value {
    let all_zc = reports.iter().all(|r| r.verdict == gauge_arb::arbitrage::ZcVerdict::Zc);
    let rows: Vec<Value> = times
        .iter()
        .zip(reports)
        .map(|(t, r)| {
            let mut v = serde_json::to_value(r).expect("report serializes");
            v["time"] = json!(t);
            v
        })
        .collect();
    json!({
        "verdict": if all_zc { "ZC" } else { "NOT_ZC" },
        "max_residual": reports.iter().map(|r| r.residual).fold(0.0, f64::max),
        "times": rows,
    })
}

fn cmd_zc(market: &Market) -> Result<Value> {
    let (times, reports) = match market {
        Market::Deterministic(s) => (s.time_grid().to_vec(), zc_series_deterministic(s)?),
        Market::Stochastic { spec, ensemble, .. } => (ensemble.times().to_vec(), zc_series(spec, ensemble)?),
    };
    let mut body = zc_body(&times, &reports);
    body["market"] = json!(market.kind());
    Ok(body)
}

fn section_rows(sections: &[SectionGrid]) -> (Vec<String>, Vec<Vec<f64>>) {
    let first = &sections[0];
    let n = first.grid.dim();
    let mut header = vec!["time".to_string()];
    header.extend(axis_header("x", n));
    header.extend((0..sections.len()).map(|i| format!("f_{i}")));
    let pts = first.grid.points();
    let mut rows = Vec::with_capacity(first.values.len());
    for (k, &t) in first.times.iter().enumerate() {
        for (m, x) in pts.iter().enumerate() {
            let mut row = vec![t];
            row.extend(x);
            row.extend(sections.iter().map(|s| s.values[k * pts.len() + m]));
            rows.push(row);
        }
    }
    (header, rows)
}

fn cmd_spectrum(c: &Common, market: &Market, out: &Output) -> Result<Value> {
    match market {
        Market::Deterministic(s) => {
            let cfg = spectrum_config(c, DEFAULT_GRID);
            let sp = analyze_scenario(s, &cfg)?;
            let (header, rows) = section_rows(&sp.result.sections);
            let csv = out.write_csv("sections", &header, &rows)?;
            Ok(json!({
                "market": market.kind(),
                "grid_nodes": cfg.grid_nodes,
                "time_nodes": sp.result.sections[0].times.len(),
                "lambda": sp.result.eigenvalues,
                "residuals": sp.result.residuals,
                "operator_norm": sp.result.operator_norm,
                "iterations": sp.result.iterations,
                "epsilon_kernel": sp.epsilon_kernel,
                "verdict": sp.verdict,
                "kernel_dim": sp.kernel_dim,
                "completeness": is_complete(&sp.result, sp.epsilon_kernel)?,
                "sections_csv": file_name(&csv),
            }))
        }
        Market::Stochastic { field, .. } => {
            let cfg = spectrum_config(c, CURVATURE_GRID);
            let es = analyze_ensemble(field, &cfg, c.blocks)?;
            let rows: Vec<Vec<f64>> = es
                .blocks
                .iter()
                .map(|b| {
                    let mut r = vec![b.path as f64];
                    r.extend(&b.lambda);
                    r
                })
                .collect();
            let mut header = vec!["path".to_string()];
            header.extend((0..c.k).map(|i| format!("lambda_{i}")));
            let csv = out.write_csv("blocks", &header, &rows)?;
            Ok(json!({
                "market": market.kind(),
                "grid_nodes": cfg.grid_nodes,
                "blocks": es.blocks,
                "verdict": es.verdict,
                "completeness": "NOT_APPLICABLE",
                "blocks_csv": file_name(&csv),
            }))
        }
    }
}

fn cmd_kernel(c: &Common, scenario: &MarketScenario, out: &Output) -> Result<Value> {
    let cfg = spectrum_config(c, DEFAULT_GRID);
    let sp = analyze_scenario(scenario, &cfg)?;
    let f = &sp.result.sections[0];
    let x_ref = scenario.domain().center();
    let kernel = extract_pricing_kernel(f, &sp.connection, &x_ref, KERNEL_CHECK_NODES)?;
    let rn = radon_nikodym_series(f, &sp.connection)?;
    let rows: Vec<Vec<f64>> = kernel
        .times
        .iter()
        .zip(&kernel.beta)
        .zip(&rn)
        .map(|((t, b), r)| vec![*t, *b, r.value, r.relative_spread])
        .collect();
    let header = ["time", "beta", "radon_nikodym", "relative_spread"].map(String::from);
    let csv = out.write_csv("series", &header, &rows)?;
    Ok(json!({
        "verdict": sp.verdict,
        "lambda_min": sp.result.lambda_min(),
        "epsilon_kernel": sp.epsilon_kernel,
        "x_ref": kernel.x_ref,
        "check_nodes": kernel.check_nodes,
        "check_residual": kernel.check_residual,
        "max_relative_spread": rn.iter().map(|r| r.relative_spread).fold(0.0, f64::max),
        "kernel_csv": file_name(&csv),
    }))
}

fn utility_function(u: &UtilityArgs) -> Result<UtilityFunction> {
    let f = match u.u {
        UtilityKind::Log => UtilityFunction::log(),
        UtilityKind::Power => UtilityFunction::power(u.gamma)?,
        UtilityKind::Exp => UtilityFunction::exponential(u.a)?,
    };
    Ok(f)
}

fn cmd_utility(u: &UtilityArgs, market: &Market, out: &Output) -> Result<Value> {
    let uf = utility_function(u).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let field = market.field();
    let times = field.times();
    let last = times[times.len() - 1];
    let horizon = match (u.horizon, market) {
        (Some(h), _) => h,
        (None, Market::Deterministic(_)) => last,
        (None, Market::Stochastic { .. }) => last.min(u.start + gauge_arb::utility::MAX_STOCHASTIC_HORIZON),
    };
    let grid = XGrid::uniform(field.domain(), u.common.grid.unwrap_or(UTILITY_GRID))?;
    let opt = maximize_expected_utility(field.as_ref(), &uf, u.start, horizon, &grid, Default::default())?;
    let n = grid.dim();
    let mut header = vec!["time".to_string()];
    header.extend(axis_header("x", n));
    header.push("foc_residual".into());
    let rows: Vec<Vec<f64>> = opt
        .step_times
        .iter()
        .zip(&opt.strategy)
        .zip(&opt.foc_residuals)
        .map(|((t, x), r)| {
            let mut row = vec![*t];
            row.extend(x);
            row.push(*r);
            row
        })
        .collect();
    let csv = out.write_csv("strategy", &header, &rows)?;
    Ok(json!({
        "market": market.kind(),
        "utility": uf,
        "start": u.start,
        "horizon": horizon,
        "value": opt.value,
        "verdict": opt.verdict,
        "flat": opt.flat,
        "on_boundary": opt.on_boundary,
        "foc_max": opt.foc_max,
        "grid_tolerance": opt.grid_tolerance,
        "starts": opt.starts,
        "sweeps": opt.sweeps,
        "strategy_csv": file_name(&csv),
    }))
}

// A failed section is reported in place; the other sections still run.
fn section(r: Result<Value>) -> Value {
    r.unwrap_or_else(|e| json!({"error": e.code(), "message": e.to_string()}))
}

fn cmd_report(c: &Common, market: &Market, doc: &ScenarioDoc) -> Result<Value> {
    let field = market.field();
    let curvature = section((|| {
        let grid = XGrid::uniform(field.domain(), c.grid.unwrap_or(CURVATURE_GRID))?;
        let cf = curvature_field(field.as_ref(), &grid)?;
        Ok(json!({"sup_norm": cf.sup_norm()}))
    })());
    let zc = section(cmd_zc(market).map(|mut v| {
        v.as_object_mut().map(|o| o.remove("times"));
        v
    }));
    let horizon = {
        let t = field.times();
        match market {
            Market::Deterministic(_) => t[t.len() - 1],
            Market::Stochastic { .. } => t[t.len() - 1].min(t[0] + gauge_arb::utility::MAX_STOCHASTIC_HORIZON),
        }
    };
    let utility = section((|| {
        let grid = XGrid::uniform(field.domain(), UTILITY_GRID)?;
        let opt = maximize_expected_utility(
            field.as_ref(),
            &UtilityFunction::log(),
            field.times()[0],
            horizon,
            &grid,
            Default::default(),
        )?;
        Ok(json!({"verdict": opt.verdict, "foc_max": opt.foc_max, "grid_tolerance": opt.grid_tolerance}))
    })());
    let mut body = json!({
        "market": market.kind(),
        "curvature": curvature,
        "zc_test": zc,
        "utility_log": utility,
    });
    match market {
        Market::Deterministic(s) => {
            body["spectrum"] = section((|| {
                let cfg = spectrum_config(c, DEFAULT_GRID);
                let sp = analyze_scenario(s, &cfg)?;
                Ok(json!({
                    "lambda": sp.result.eigenvalues,
                    "epsilon_kernel": sp.epsilon_kernel,
                    "verdict": sp.verdict,
                    "kernel_dim": sp.kernel_dim,
                    "completeness": is_complete(&sp.result, sp.epsilon_kernel)?,
                }))
            })());
        }
        Market::Stochastic { spec, ensemble, field } => {
            body["spectrum"] = section((|| {
                let es = analyze_ensemble(field, &spectrum_config(c, CURVATURE_GRID), c.blocks)?;
                Ok(json!({"verdict": es.verdict, "blocks": es.blocks}))
            })());
            body["novikov"] = section((|| {
                let x = doc.domain()?.center();
                Ok(serde_json::to_value(novikov_diagnostic(spec, &x, ensemble)?).expect("report serializes"))
            })());
        }
    }
    Ok(body)
}
