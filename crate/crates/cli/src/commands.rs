use std::fmt::Write as _;
use std::path::Path;

use hopcons_core::gains::{self, is_stable, DesignFile, GainMatrix, Strategy};
use hopcons_core::graph::{
    gen_clustered_random, gen_regular, hop_closure, max_hop, ClusterParams, Topology,
};
use hopcons_core::sim::{empirical_rate, generic_initial_state, simulate as run_simulation};
use hopcons_core::spectral::{conv_rate, stability_bound};
use hopcons_core::sweep::{rate_point, sweep as run_sweep, DelayModel};
use serde::Serialize;

use crate::config::{ExperimentConfig, GraphKind};
use crate::{CliError, ClosureCmd, DesignCmd, GraphCmd, RateCmd, SimulateCmd, SweepCmd};

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

fn read_graph(path: &Path) -> Result<Topology, CliError> {
    Ok(Topology::from_edge_list(&read(path)?)?)
}

/// Builds the base graph and a short description of where it came from.
fn build_graph(c: &ExperimentConfig) -> Result<(Topology, String), CliError> {
    match (&c.input, c.graph) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "give either --in or --type, not both".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "a base graph is required: --in or --type".into(),
        )),
        (Some(path), None) => Ok((read_graph(path)?, path.display().to_string())),
        (None, Some(kind)) => {
            let n = c.n.ok_or_else(|| {
                CliError::Usage(format!("--n is required for --type {}", kind.as_str()))
            })?;
            let seed = c.seed.unwrap_or(crate::config::DEFAULT_SEED);
            let g = match kind {
                GraphKind::Regular => gen_regular(n, c.degree.unwrap_or(3), seed)?,
                GraphKind::Ring => Topology::cycle(n)?,
                GraphKind::Path => Topology::path(n)?,
                GraphKind::Complete => Topology::complete(n)?,
                GraphKind::Star => Topology::star(n)?,
                GraphKind::Clustered => {
                    let mut params = ClusterParams::defaults_for(n);
                    if let Some(sizes) = &c.cluster_sizes {
                        params.sizes = sizes.clone();
                    }
                    if let Some(p) = c.p_intra {
                        params.p_intra = p;
                    }
                    if let Some(p) = c.p_inter {
                        params.p_inter = p;
                    }
                    gen_clustered_random(n, &params, seed)?
                }
            };
            let mut name = format!("{} n={n}", kind.as_str());
            if kind == GraphKind::Regular {
                let _ = write!(name, " degree={}", c.degree.unwrap_or(3));
            }
            Ok((g, name))
        }
    }
}

fn summary_line(g: &Topology) -> String {
    let diameter = match max_hop(g) {
        Ok(d) => d.to_string(),
        Err(_) => "inf (disconnected)".into(),
    };
    format!(
        "N={} edges={} d_max={} diameter={diameter}",
        g.n_nodes(),
        g.n_edges(),
        g.max_degree()
    )
}

pub fn parse_delay(spec: &str) -> Result<DelayModel, CliError> {
    match spec {
        "linear" => Ok(DelayModel::linear()),
        "quadratic" => Ok(DelayModel::quadratic()),
        _ => match spec.strip_prefix("table:") {
            Some(path) => Ok(DelayModel::table_from_text(&read(Path::new(path))?)?),
            None => Err(CliError::Usage(format!(
                "unknown delay model '{spec}' (expected linear, quadratic, or table:<path>)"
            ))),
        },
    }
}

pub fn parse_strategies(spec: &str) -> Result<Vec<Strategy>, CliError> {
    if spec == "all" {
        return Ok(Strategy::ALL.to_vec());
    }
    let mut out: Vec<Strategy> = Vec::new();
    for item in spec.split(',').map(str::trim) {
        let s = parse_strategy(item)?;
        if out.contains(&s) {
            return Err(CliError::Usage(format!("strategy '{item}' listed twice")));
        }
        out.push(s);
    }
    Ok(out)
}

fn parse_strategy(item: &str) -> Result<Strategy, CliError> {
    item.parse()
        .map_err(|_| CliError::Usage(format!("unknown strategy '{item}'")))
}

fn resolve_tau(tau: Option<usize>, delay: Option<&str>, hops: usize) -> Result<usize, CliError> {
    match (tau, delay) {
        (Some(0), _) => Err(CliError::Usage("--tau must be at least 1".into())),
        (Some(t), _) => Ok(t),
        (None, Some(d)) => Ok(parse_delay(d)?.tau(hops)?),
        (None, None) => Err(CliError::Usage("give --tau or --delay".into())),
    }
}

fn load_config(path: Option<&Path>, flags: ExperimentConfig) -> Result<ExperimentConfig, CliError> {
    let base = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    Ok(base.overlay(flags).materialize())
}

pub fn graph(cmd: GraphCmd) -> Result<(), CliError> {
    let mut flags = cmd.graph.to_config();
    flags.out = cmd.out;
    let config = load_config(cmd.config.as_deref(), flags)?;
    if let Some(path) = &cmd.save_config {
        config.save(path)?;
    }
    let (g, _) = build_graph(&config)?;
    if let Some(path) = &config.out {
        write(path, &g.to_edge_list())?;
    }
    println!("{}", summary_line(&g));
    Ok(())
}

pub fn closure(cmd: ClosureCmd) -> Result<(), CliError> {
    let g = read_graph(&cmd.input)?;
    let c = hop_closure(&g, cmd.hops)?;
    if let Some(path) = &cmd.out {
        write(path, &c.to_edge_list())?;
    }
    println!("{}", summary_line(&c));
    Ok(())
}

pub fn design(cmd: DesignCmd) -> Result<(), CliError> {
    let (g1, _) = build_graph(&cmd.graph.to_config().materialize())?;
    let strategy = parse_strategy(&cmd.strategy)?;
    let tau = resolve_tau(cmd.tau, cmd.delay.as_deref(), cmd.hops)?;
    let g = hop_closure(&g1, cmd.hops)?;
    let d = gains::design(&g, tau, strategy)?;
    if let Some(path) = &cmd.out {
        write(path, &to_json(&d.to_file()))?;
    }
    println!("strategy = {strategy}");
    println!("tau = {tau}");
    println!("scale = {}", d.scale);
    println!("lambda2 = {}", d.lambda2);
    println!("lambdaN = {}", d.lambda_n);
    println!("ubar = {}", stability_bound(tau));
    println!("R = {}", d.rate);
    println!("stable = {}", d.stable);
    Ok(())
}

#[derive(Serialize)]
struct GainRate {
    tau: usize,
    lambda2: f64,
    #[serde(rename = "lambdaN")]
    lambda_n: f64,
    ubar: f64,
    rate: f64,
    stable: bool,
}

fn load_gain(path: &Path) -> Result<(GainMatrix, DesignFile), CliError> {
    let file: DesignFile = serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::Input(format!("bad gain file {}: {e}", path.display())))?;
    Ok((GainMatrix::from_file(&file.matrix)?, file))
}

pub fn rate(cmd: RateCmd) -> Result<(), CliError> {
    if let Some(path) = &cmd.gain {
        let (k, file) = load_gain(path)?;
        let tau = cmd
            .tau
            .or(file.tau)
            .ok_or_else(|| CliError::Usage("gain file has no tau; give --tau".into()))?;
        let spec = k.spectrum()?;
        let report = GainRate {
            tau,
            lambda2: spec.lambda2().unwrap_or(0.0),
            lambda_n: spec.lambda_max().unwrap_or(0.0),
            ubar: stability_bound(tau),
            rate: conv_rate(&spec, tau)?,
            stable: is_stable(&k, tau)?,
        };
        print!("{}", to_json(&report));
        return Ok(());
    }
    let (g1, _) = build_graph(&cmd.graph.to_config().materialize())?;
    let strategy = parse_strategy(&cmd.strategy)?;
    let delays = match (cmd.tau, cmd.delay.as_deref()) {
        (Some(_), _) => {
            return Err(CliError::Usage(
                "a sweep cell takes its delay from --delay; use --tau only with --gain".into(),
            ))
        }
        (None, Some(d)) => parse_delay(d)?,
        (None, None) => DelayModel::linear(),
    };
    print!(
        "{}",
        to_json(&rate_point(&g1, cmd.hops, &delays, strategy)?)
    );
    Ok(())
}

pub fn sweep(cmd: SweepCmd) -> Result<(), CliError> {
    let mut flags = cmd.graph.to_config();
    flags.delay = cmd.delay;
    flags.strategies = cmd.strategies;
    flags.include_complete = cmd.include_complete;
    flags.out = cmd.out;
    flags.summary = cmd.summary;
    let mut config = load_config(cmd.config.as_deref(), flags)?;
    config.delay.get_or_insert_with(|| "linear".into());
    config.strategies.get_or_insert_with(|| "all".into());
    config.include_complete.get_or_insert(true);
    if let Some(path) = &cmd.save_config {
        config.save(path)?;
    }

    let (g1, base) = build_graph(&config)?;
    let delays = parse_delay(config.delay.as_deref().unwrap_or("linear"))?;
    let strategies = parse_strategies(config.strategies.as_deref().unwrap_or("all"))?;
    let mut result = run_sweep(
        &g1,
        &delays,
        &strategies,
        config.include_complete.unwrap_or(true),
    )?;
    result.base = base;
    result.seed = if config.input.is_none() {
        config.seed
    } else {
        None
    };
    if let Some(d) = &config.delay {
        result.delay = d.clone();
    }

    let csv = result.to_csv()?;
    let summary = to_json(&result.summary());
    if let Some(path) = &config.summary {
        write(path, &summary)?;
    }
    match &config.out {
        Some(path) => {
            write(path, &csv)?;
            print!("{summary}");
        }
        None => print!("{csv}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationMeta {
    tau: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    strategy: Option<String>,
    n: usize,
    horizon: usize,
    burn_in: usize,
    seed: u64,
    stable: bool,
    predicted_rate: f64,
    empirical_rate: Option<f64>,
    diverged: bool,
    sum_drift: f64,
}

pub fn simulate(cmd: SimulateCmd) -> Result<(), CliError> {
    let (k, file) = load_gain(&cmd.gain)?;
    let tau = cmd
        .tau
        .or(file.tau)
        .ok_or_else(|| CliError::Usage("gain file has no tau; give --tau".into()))?;
    if tau == 0 {
        return Err(CliError::Usage("--tau must be at least 1".into()));
    }
    if cmd.horizon < tau + 2 {
        return Err(CliError::Usage(format!(
            "--horizon {} must be at least tau + 2 = {}",
            cmd.horizon,
            tau + 2
        )));
    }
    let burn_in = cmd.burn_in.unwrap_or(cmd.horizon / 4);
    if 2 * burn_in >= cmd.horizon {
        return Err(CliError::Usage(
            "--burn-in must be below half the horizon".into(),
        ));
    }
    let stable = is_stable(&k, tau)?;
    if !stable && !cmd.allow_unstable {
        return Err(CliError::Input(format!(
            "gain is not stable for tau={tau}; pass --allow-unstable to run it anyway"
        )));
    }
    let predicted = conv_rate(&k.spectrum()?, tau)?;
    let x0 = generic_initial_state(&k, cmd.seed)?;
    let traj = run_simulation(&k, tau, &x0, cmd.horizon)?;
    let empirical = if stable {
        Some(empirical_rate(&traj, burn_in)?)
    } else {
        empirical_rate(&traj, burn_in).ok()
    };
    let d = traj.disagreement();
    let diverged = !d[cmd.horizon].is_finite() || d[cmd.horizon] > d[0];
    if diverged {
        eprintln!(
            "warning: trajectory diverges (disagreement {} -> {})",
            d[0], d[cmd.horizon]
        );
    }
    let meta = to_json(&SimulationMeta {
        tau,
        strategy: file.strategy.clone(),
        n: k.n(),
        horizon: cmd.horizon,
        burn_in,
        seed: cmd.seed,
        stable,
        predicted_rate: predicted,
        empirical_rate: empirical,
        diverged,
        sum_drift: traj.sum_drift(),
    });
    if let Some(path) = &cmd.meta {
        write(path, &meta)?;
    }
    match &cmd.out {
        Some(path) => {
            write(path, &traj.to_csv())?;
            print!("{meta}");
        }
        None => print!("{}", traj.to_csv()),
    }
    Ok(())
}
