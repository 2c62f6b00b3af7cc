use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use swarmlab_core::bt::{mean_population, run_bt_replications, write_bt_csv, BtConfig, BtRunResult};
use swarmlab_core::lyapunov::{
    drift_scan, find_constants, parse_ratio, parse_shells, CertifierReport, Rates, ScanMode,
    Q,
};
use swarmlab_core::metrics::{
    average_replications, growth_slope, read_columns, render_svg, sojourn_stats,
    write_json, write_mean_series_csv, write_outputs, write_svg, Line, MeanSeries, OutputPaths,
};
use swarmlab_core::{run_scenario, InitSpec, Protocol, RunResult, ScenarioConfig, SojournStats};

use crate::{
    BtArgs, CliError, CliResult, Command, ConstantsArgs, OutputArgs, PlotArgs, ScanArgs,
    ScenarioArgs, SimulateArgs, SojournArgs, SweepArgs,
};

pub(crate) fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::BtSimulate(a) => bt_simulate(a),
        Command::SojournTable(a) => sojourn_table_cmd(a),
        Command::LyapunovConstants(a) => lyapunov_constants(a),
        Command::LyapunovScan(a) => lyapunov_scan(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    }
}

fn contract(key: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Contract(format!("invalid value for `{key}`: {why}"))
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Contract(format!("{}: {e}", path.display())))
}

fn parse<T: std::str::FromStr>(key: &str, s: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    s.trim().parse().map_err(|e| contract(key, e))
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',').filter(|x| !x.trim().is_empty()).map(|x| parse(key, x)).collect()
}

fn parse_window(s: &str) -> CliResult<(f64, f64)> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| contract("slope_window", "expected lo:hi"))?;
    Ok((parse("slope_window", lo)?, parse("slope_window", hi)?))
}

/// File values, then flags.
pub fn scenario_config(a: &ScenarioArgs) -> CliResult<ScenarioConfig> {
    let mut c: ScenarioConfig = match &a.config {
        Some(p) => read_toml(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(v) = &a.protocol {
        c.protocol = v.parse()?;
    }
    if let Some(v) = &a.init {
        c.init = v.parse()?;
    }
    macro_rules! set {
        ($($field:ident <- $flag:ident),*) => { $(if let Some(v) = a.$flag { c.$field = v; })* };
    }
    set!(k <- k, lambda <- lambda, us <- us, mu <- mu, horizon <- horizon,
         replications <- reps, rng_seed <- seed, sample_dt <- sample_dt, m <- m,
         warmup <- warmup, population_cap <- population_cap);
    if a.stop_after.is_some() {
        c.stop_after_departures = a.stop_after;
    }
    c.validate()?;
    Ok(c)
}

/// File values, then flags. `--lambda` is per second and must give a whole
/// number of arrivals per round.
pub fn bt_config(a: &BtArgs) -> CliResult<BtConfig> {
    let mut c: BtConfig = match &a.config {
        Some(p) => read_toml(p)?,
        None => BtConfig::default(),
    };
    if let Some(v) = &a.init {
        c.init = v.parse()?;
    }
    if let Some(v) = a.arrivals {
        c.arrivals_per_round = v;
    }
    if let Some(l) = a.lambda {
        let per_round = l * c.round_secs as f64;
        if !(per_round >= 0.0 && (per_round - per_round.round()).abs() < 1e-9) {
            return Err(contract(
                "lambda",
                format!("{l}/s is not a whole number of arrivals per {} s round", c.round_secs),
            ));
        }
        c.arrivals_per_round = per_round.round() as usize;
    }
    if let Some(h) = a.horizon {
        if !(h.is_finite() && h >= 0.0) {
            return Err(contract("horizon", "must be finite and non-negative"));
        }
        c.horizon_rounds = (h / c.round_secs as f64).ceil() as u64;
    }
    if a.gs {
        c.gs_enabled = true;
    }
    macro_rules! set {
        ($($field:ident <- $flag:ident),*) => { $(if let Some(v) = a.$flag { c.$field = v; })* };
    }
    set!(k <- k, horizon_rounds <- rounds, replications <- reps, rng_seed <- seed,
         neighbor_max <- neighbor_max, tracker_topup_threshold <- tracker_topup_threshold,
         tracker_response <- tracker_response, population_cap <- population_cap);
    c.validate()?;
    Ok(c)
}

fn run_all(c: &ScenarioConfig) -> CliResult<Vec<RunResult>> {
    let runs: swarmlab_core::Result<Vec<RunResult>> = (0..c.replications as u64)
        .into_par_iter()
        .map(|s| run_scenario(c, s, &mut []))
        .collect();
    Ok(runs?)
}

#[derive(Serialize)]
struct ReplicationSummary {
    stream: u64,
    exploded: bool,
    events: u64,
    final_t: f64,
    departures: usize,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    config: &'a ScenarioConfig,
    slope_window: (f64, f64),
    slope: Option<f64>,
    replications: Vec<ReplicationSummary>,
}

fn stem(out: &OutputArgs, default: &str) -> String {
    out.name.clone().unwrap_or_else(|| default.to_string())
}

fn write_mean_svg(path: &Path, title: &str, mean: &MeanSeries) -> CliResult<()> {
    let (pop, club) = (mean.population_points(), mean.largest_club_points());
    let svg = render_svg(
        title,
        &[
            Line { name: "population", color: "#1f77b4", points: &pop },
            Line { name: "largest club", color: "#2ca02c", points: &club },
        ],
    );
    Ok(write_svg(path, &svg)?)
}

/// Runs one scenario and writes per-replication and averaged artifacts.
fn simulate_to(c: &ScenarioConfig, out: &OutputArgs, name: &str, window: Option<(f64, f64)>) -> CliResult<Option<f64>> {
    let runs = run_all(c)?;
    for (i, r) in runs.iter().enumerate() {
        let mut paths = OutputPaths::in_dir(&out.out, &format!("{name}.rep{i}"), false);
        paths.summary = None;
        write_outputs(r, &(), &paths)?;
    }
    let complete = runs.iter().all(|r| !r.exploded);
    let window = window.unwrap_or((c.horizon / 2.0, c.horizon));
    let (mean, slope) = if complete {
        let mean = average_replications(&runs)?;
        let slope = growth_slope(&mean.population_points(), window.0, window.1).ok();
        (Some(mean), slope)
    } else {
        (None, None)
    };
    if let Some(mean) = &mean {
        write_mean_series_csv(&out.out.join(format!("{name}.mean.csv")), mean)?;
        if out.svg {
            write_mean_svg(&out.out.join(format!("{name}.svg")), name, mean)?;
        }
    }
    let summary = SimulateSummary {
        config: c,
        slope_window: window,
        slope,
        replications: runs
            .iter()
            .map(|r| ReplicationSummary {
                stream: r.provenance.stream,
                exploded: r.exploded,
                events: r.events,
                final_t: r.final_t,
                departures: r.sojourns.len(),
            })
            .collect(),
    };
    write_json(&out.out.join(format!("{name}.summary.json")), &summary)?;
    let final_pop = mean.as_ref().and_then(|m| m.population.last().copied());
    println!(
        "{name}: protocol={} k={} lambda={} reps={} final_mean_population={} slope[{}, {}]={} exploded={}",
        c.protocol,
        c.k,
        c.lambda,
        c.replications,
        final_pop.map_or("n/a".into(), |v| format!("{v:.1}")),
        window.0,
        window.1,
        slope.map_or("n/a".into(), |s| format!("{s:.4}")),
        !complete,
    );
    Ok(slope)
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let c = scenario_config(&a.scenario)?;
    let window = a.slope_window.as_deref().map(parse_window).transpose()?;
    let name = stem(&a.output, "simulate");
    simulate_to(&c, &a.output, &name, window)?;
    Ok(())
}

fn bt_simulate(a: BtArgs) -> CliResult<()> {
    let c = bt_config(&a)?;
    let runs: Vec<BtRunResult> = run_bt_replications(&c)?;
    let name = stem(&a.output, "bt");
    for (i, r) in runs.iter().enumerate() {
        write_bt_csv(&a.output.out.join(format!("{name}.rep{i}.csv")), &r.rows)?;
    }
    let pop = mean_population(&runs);
    let len = pop.len();
    let club: Vec<f64> = (0..len)
        .map(|i| runs.iter().map(|r| r.rows[i].largest_club_size as f64).sum::<f64>() / runs.len() as f64)
        .collect();
    let mean = MeanSeries {
        t: pop.iter().map(|p| p.0).collect(),
        population: pop.iter().map(|p| p.1).collect(),
        largest_club: club,
    };
    write_mean_series_csv(&a.output.out.join(format!("{name}.mean.csv")), &mean)?;
    if a.output.svg {
        write_mean_svg(&a.output.out.join(format!("{name}.svg")), &name, &mean)?;
    }
    let horizon = c.horizon_rounds as f64 * c.round_secs as f64;
    let window = match a.slope_window.as_deref() {
        Some(w) => parse_window(w)?,
        None => (horizon / 2.0, horizon),
    };
    let slope = growth_slope(&pop, window.0, window.1).ok();
    write_json(&a.output.out.join(format!("{name}.config.json")), &c)?;
    println!(
        "{name}: k={} arrivals/round={} gs={} reps={} final_mean_population={} slope[{}, {}]={} exploded={}",
        c.k,
        c.arrivals_per_round,
        c.gs_enabled,
        c.replications,
        pop.last().map_or("n/a".into(), |p| format!("{:.1}", p.1)),
        window.0,
        window.1,
        slope.map_or("n/a".into(), |s| format!("{s:.4}")),
        runs.iter().any(|r| r.exploded),
    );
    Ok(())
}

/// One protocol column of the sojourn table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub protocol: Protocol,
    /// Contact count; only meaningful for common chunk.
    pub m: usize,
}

impl TableEntry {
    pub fn label(&self) -> String {
        match self.protocol {
            Protocol::Cc => format!("cc m={}", self.m),
            p => p.to_string(),
        }
    }
}

impl std::str::FromStr for TableEntry {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        let (p, m) = match s.split_once(':') {
            Some((p, m)) => (p, parse::<usize>("protocols", m)?),
            None => (s, ScenarioConfig::default().m),
        };
        Ok(TableEntry {
            protocol: p.trim().parse()?,
            m,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SojournTableParams {
    pub entries: Vec<TableEntry>,
    pub ks: Vec<usize>,
    pub lambda: f64,
    pub us: f64,
    pub mu: f64,
    pub init: InitSpec,
    pub warmup: f64,
    pub departures: usize,
    pub reps: usize,
    pub seed: u64,
    pub horizon: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SojournRow {
    pub protocol: String,
    pub k: usize,
    #[serde(flatten)]
    pub stats: SojournStats,
}

/// Mean sojourn time for every (entry, k) pair, each from `reps` early-stopped
/// replications.
pub fn sojourn_table(p: &SojournTableParams) -> CliResult<Vec<SojournRow>> {
    let mut rows = Vec::new();
    for e in &p.entries {
        for &k in &p.ks {
            let c = ScenarioConfig {
                protocol: e.protocol,
                m: e.m,
                k,
                lambda: p.lambda,
                us: p.us,
                mu: p.mu,
                init: p.init.clone(),
                horizon: p.horizon,
                warmup: p.warmup,
                stop_after_departures: Some(p.departures),
                replications: p.reps,
                rng_seed: p.seed,
                sample_dt: p.horizon.max(1.0),
                ..ScenarioConfig::default()
            };
            c.validate()?;
            let runs = run_all(&c)?;
            let soj: Vec<_> = runs.into_iter().map(|r| r.sojourns).collect();
            rows.push(SojournRow {
                protocol: e.label(),
                k,
                stats: sojourn_stats(&soj, p.warmup, p.departures),
            });
        }
    }
    Ok(rows)
}

fn sojourn_table_cmd(a: SojournArgs) -> CliResult<()> {
    let params = SojournTableParams {
        entries: parse_list("protocols", &a.protocols)?,
        ks: parse_list("ks", &a.ks)?,
        lambda: a.lambda,
        us: a.us,
        mu: a.mu,
        init: a.init.parse()?,
        warmup: a.warmup,
        departures: a.departures,
        reps: a.reps,
        seed: a.seed,
        horizon: a.horizon,
    };
    let rows = sojourn_table(&params)?;
    let name = stem(&a.output, "sojourn_table");
    let path = a.output.out.join(format!("{name}.csv"));
    write_table_csv(&path, &rows)?;
    println!("{:<10} {:>5} {:>10} {:>21} {:>8}", "protocol", "k", "mean", "95% ci", "records");
    for r in &rows {
        println!(
            "{:<10} {:>5} {:>10.2} [{:>8.2}, {:>8.2}] {:>8}",
            r.protocol, r.k, r.stats.mean, r.stats.ci_low, r.stats.ci_high, r.stats.records
        );
    }
    Ok(())
}

fn write_table_csv(path: &Path, rows: &[SojournRow]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    let mut text = String::from("protocol,k,mean,ci_low,ci_high,runs,records,shortfall\n");
    for r in rows {
        let s = &r.stats;
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.protocol, r.k, s.mean, s.ci_low, s.ci_high, s.runs, s.records, s.shortfall
        ));
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn parse_preset(s: &str) -> CliResult<(Q, Q, Q)> {
    let v: Vec<Q> = s
        .split(',')
        .map(|x| parse_ratio(x).map_err(CliError::from))
        .collect::<CliResult<_>>()?;
    match v[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(contract("preset", "expected c1,c3,c4")),
    }
}

fn rates(lambda: &str, us: &str, mu: &str) -> CliResult<Rates> {
    Ok(Rates::new(parse_ratio(lambda)?, parse_ratio(us)?, parse_ratio(mu)?)?)
}

fn lyapunov_constants(a: ConstantsArgs) -> CliResult<()> {
    let r = rates(&a.lambda, &a.us, "1")?;
    let c = find_constants(&r, parse_preset(&a.preset)?)?;
    let report = CertifierReport::new(&r, &c, None);
    if a.json {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Contract(e.to_string()))?;
        println!("{text}");
    } else {
        println!("c1 = {}\nc2 = {}\nc3 = {}\nc4 = {}\np  = {}", c.c1, c.c2, c.c3, c.c4, c.p);
        for e in &report.conditions {
            println!("({:>2}) {:<5} {}", e.index, e.holds, e.condition);
        }
    }
    if !report.all_conditions_hold {
        return Err(CliError::Contract("not every condition holds".into()));
    }
    Ok(())
}

fn lyapunov_scan(a: ScanArgs) -> CliResult<()> {
    let r = rates(&a.lambda, &a.us, &a.mu)?;
    let c = find_constants(&r, parse_preset(&a.preset)?)?;
    let mode: ScanMode = a.mode.parse()?;
    let shells = parse_shells(&a.shells)?;
    let scan = drift_scan(&c, &r, &shells, mode);
    for m in &scan.shells {
        println!("s={:<8} max drift {:>14.6e} at {}", m.s, m.max_drift_approx, m.argmax);
    }
    match scan.s0 {
        Some(s0) => println!(
            "s0={s0} epsilon={} b={}",
            scan.epsilon_approx.map_or("n/a".into(), |e| format!("{e:.6}")),
            scan.b_bound_approx.map_or("n/a".into(), |b| format!("{b:.6}")),
        ),
        None => println!("no shell range with all maxima negative"),
    }
    let report = CertifierReport::new(&r, &c, Some(scan));
    let name = stem(&a.output, "certifier");
    write_json(&a.output.out.join(format!("{name}.json")), &report)?;
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    value: String,
    slope: Option<f64>,
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    let base = scenario_config(&a.scenario)?;
    let window = a.slope_window.as_deref().map(parse_window).transpose()?;
    let name = stem(&a.output, "sweep");
    let mut rows = Vec::new();
    let values: Vec<String> = a.values.split(',').map(|v| v.trim().to_string()).collect();
    for v in values.iter().filter(|v| !v.is_empty()) {
        let mut c = base.clone();
        match a.param.as_str() {
            "lambda" => c.lambda = parse("values", v)?,
            "k" => c.k = parse("values", v)?,
            other => return Err(contract("param", format!("expected lambda|k, got {other:?}"))),
        }
        c.validate()?;
        let slope = simulate_to(&c, &a.output, &format!("{name}.{}={v}", a.param), window)?;
        rows.push(SweepRow {
            value: v.clone(),
            slope,
        });
    }
    write_json(&a.output.out.join(format!("{name}.summary.json")), &rows)?;
    Ok(())
}

fn plot(a: PlotArgs) -> CliResult<()> {
    let cols: Vec<&str> = a.columns.split(',').map(str::trim).filter(|c| !c.is_empty()).collect();
    let data = read_columns(&a.input, &cols)?;
    const COLORS: [&str; 6] = ["#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b"];
    let lines: Vec<Line<'_>> = cols
        .iter()
        .zip(&data)
        .enumerate()
        .map(|(i, (name, pts))| Line {
            name,
            color: COLORS[i % COLORS.len()],
            points: pts,
        })
        .collect();
    let title = if a.title.is_empty() {
        a.input.display().to_string()
    } else {
        a.title.clone()
    };
    write_svg(&a.output, &render_svg(&title, &lines))?;
    Ok(())
}
