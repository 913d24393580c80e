use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use eqnet_core::nets::network_parameter_bound;
use eqnet_core::{
    build_dense_net, induced_star_action, initialize, natural_action, pair_orbits, report_bounds, tensor_action,
    train, union_of_permutations, BoundsReport, Dataset, GridSpec, GroupAction, MlpSpec, Network64, NetworkSpec,
    PermutationGroup, Sampling, TrainReport, TrainStatus,
};
use eqnet_core::equi_linear::ParameterBound;
use eqnet_core::ParamCount;

use crate::failure::{Failure, Outcome, PROPERTY_FAILURE};
use crate::inputs::{self, config_hash, ensure_dir, load_group, resolve_spec, write_json, NetChoice, TrainFile};
use crate::verify;

fn print_json<T: Serialize>(value: &T) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct NetSummary {
    config_hash: String,
    spec: NetworkSpec,
    pattern_hash: String,
    params: ParamCount,
    realized_entries: usize,
    layer_widths: Vec<usize>,
    bounds: BoundsReport,
    parameter_bound: ParameterBound,
}

fn summarize(hash: String, spec: &NetworkSpec, net: &Network64) -> Outcome<NetSummary> {
    Ok(NetSummary {
        config_hash: hash,
        spec: spec.clone(),
        pattern_hash: net.pattern_hash(),
        params: net.param_count(),
        realized_entries: net.realized_entry_count(),
        layer_widths: net.layer_widths(),
        bounds: report_bounds(net),
        parameter_bound: network_parameter_bound(net)?,
    })
}

fn net_inputs(choice: &NetChoice, seed: u64) -> Outcome<(NetworkSpec, Network64, String)> {
    let (spec, _) = resolve_spec(choice, None)?;
    let net: Network64 = spec.build()?;
    let hash = config_hash("net", json!({ "spec": spec, "seed": seed }));
    Ok((spec, net, hash))
}

pub fn build(choice: &NetChoice, seed: u64, out: Option<&Path>) -> Outcome<ExitCode> {
    let (spec, mut net, hash) = net_inputs(choice, seed)?;
    initialize(&mut net, seed);
    let summary = summarize(hash, &spec, &net)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("net.json"), &spec)?;
        write_json(&dir.join("checkpoint.json"), &net.checkpoint())?;
        write_json(&dir.join("build.json"), &summary)?;
    }
    print_json(&summary)?;
    Ok(ExitCode::SUCCESS)
}

pub fn report_bounds_cmd(choice: &NetChoice, out: Option<&Path>) -> Outcome<ExitCode> {
    let (_, net, hash) = net_inputs(choice, 0)?;
    let report = json!({ "config_hash": hash, "bounds": report_bounds(&net) });
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("bounds.json"), &report)?;
    }
    print_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

pub fn count_params(choice: &NetChoice, out: Option<&Path>) -> Outcome<ExitCode> {
    let (_, net, hash) = net_inputs(choice, 0)?;
    let report = json!({
        "config_hash": hash,
        "params": net.param_count(),
        "realized_entries": net.realized_entry_count(),
        "layer_widths": net.layer_widths(),
        "parameter_bound": network_parameter_bound(&net)?,
    });
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("params.json"), &report)?;
    }
    print_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

pub fn verify(group_path: &Path, seed: u64, corrupt_tying: bool, out: Option<&Path>) -> Outcome<ExitCode> {
    let (spec, group) = load_group(group_path)?;
    let opts = verify::Options {
        seed,
        inputs: 100,
        corrupt_tying,
    };
    let checks = verify::run(&group, &opts)?;
    let pass = !checks.iter().any(verify::Check::failed);
    let hash = config_hash(
        "verify",
        json!({ "group": spec, "seed": seed, "corrupt_tying": corrupt_tying }),
    );
    let report = json!({
        "config_hash": hash,
        "group": { "degree": group.degree(), "order": group.order() },
        "checks": checks,
        "pass": pass,
    });
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("verify.json"), &report)?;
    }
    print_json(&report)?;
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(PROPERTY_FAILURE)
    })
}

/// `natural`, `star`, `tensor:<order>` or `union:<copies>`.
fn parse_action(name: &str, group: &Arc<PermutationGroup>) -> Outcome<GroupAction> {
    let (head, arg) = name.split_once(':').unwrap_or((name, ""));
    let count = || {
        arg.parse::<usize>()
            .map_err(|_| Failure::usage(format!("action {name:?} needs a positive count")))
    };
    Ok(match head {
        "natural" if arg.is_empty() => natural_action(group),
        "star" if arg.is_empty() => induced_star_action(group)?,
        "tensor" => tensor_action(group, count()?, 1)?,
        "union" => union_of_permutations(group, count()?)?,
        _ => return Err(Failure::usage(format!("unknown action {name:?}"))),
    })
}

pub fn export_pattern(group_path: &Path, input: &str, output: &str, out: &Path) -> Outcome<ExitCode> {
    let (_, group) = load_group(group_path)?;
    let pattern = pair_orbits(&parse_action(input, &group)?, &parse_action(output, &group)?)?;
    ensure_dir(out)?;
    let path = out.join("pattern.json");
    let mut text = serde_json::to_string(&pattern.to_export())?;
    text.push('\n');
    fs::write(&path, text)?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

pub struct TrainArgs {
    pub choice: NetChoice,
    pub train: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub epochs: Option<usize>,
    pub untied_baseline: bool,
}

#[derive(Serialize)]
struct RunSummary {
    model: &'static str,
    params: usize,
    weights: usize,
    status: TrainStatus,
    epochs_run: usize,
    initial_sup_error: f64,
    best_sup_error: f64,
    best_epoch: usize,
    final_train_mse: f64,
    final_equivariance_residual: f64,
}

impl RunSummary {
    fn new(model: &'static str, net: &Network64, r: &TrainReport) -> Self {
        let count = net.param_count();
        Self {
            model,
            params: count.total(),
            weights: count.weights,
            status: r.status,
            epochs_run: r.epochs_run,
            initial_sup_error: r.initial_sup_error,
            best_sup_error: r.best_sup_error,
            best_epoch: r.best_epoch,
            final_train_mse: r.final_train_mse,
            final_equivariance_residual: r.final_equivariance_residual,
        }
    }
}

fn dataset(file: &TrainFile, degree: usize, domain: [f64; 2], seed: u64) -> Outcome<Dataset> {
    let mut parts = Vec::new();
    if file.samples > 0 {
        parts.push(Dataset::sample(file.target, degree, domain, Sampling::Uniform { samples: file.samples }, seed)?);
    }
    if file.grid_points > 0 {
        let grid = Sampling::Grid {
            points_per_axis: file.grid_points,
        };
        parts.push(Dataset::sample(file.target, degree, domain, grid, seed)?);
    }
    let inputs = parts.iter().flat_map(|d| d.inputs().iter().cloned()).collect();
    let targets = parts.iter().flat_map(|d| d.targets().iter().cloned()).collect();
    Ok(Dataset::new(inputs, targets, parts[0].descriptor().clone())?)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn train_cmd(args: &TrainArgs) -> Outcome<ExitCode> {
    let started = unix_now();
    let mut file = inputs::load_train(args.train.as_deref())?;
    file.config.seed = args.seed;
    if let Some(e) = args.epochs {
        file.config.max_epochs = e;
    }
    let (spec, _) = resolve_spec(&args.choice, Some(file.target))?;
    let mut net: Network64 = spec.build()?;
    let n = net.input_dim();
    if net.output_dim() != file.target.output_dim(n) {
        return Err(Failure::usage(format!(
            "target {} has {} outputs but the net has {}",
            file.target.name(),
            file.target.output_dim(n),
            net.output_dim()
        )));
    }
    let domain = [spec.domain[0], spec.domain[1]];
    let data = dataset(&file, n, domain, args.seed)?;
    let grid = GridSpec {
        points_per_axis: file.eval_grid,
        lo: domain[0],
        hi: domain[1],
    };
    let target = file.target;
    let eval = move |x: &[f64]| target.eval(x);

    initialize(&mut net, args.seed);
    let report = train(&mut net, &data, &file.config, &eval, &grid)?;
    ensure_dir(&args.out)?;
    report.write_csv(fs::File::create(args.out.join("log.csv"))?)?;
    write_json(&args.out.join("checkpoint.json"), &net.checkpoint())?;
    write_json(&args.out.join("net.json"), &spec)?;

    let mut runs = vec![RunSummary::new("tied", &net, &report)];
    if args.untied_baseline {
        let mut dense: Network64 = build_dense_net(&MlpSpec::new(net.layer_widths()))?;
        initialize(&mut dense, args.seed);
        let r = train(&mut dense, &data, &file.config, &eval, &grid)?;
        r.write_csv(fs::File::create(args.out.join("log_untied.csv"))?)?;
        runs.push(RunSummary::new("untied", &dense, &r));
    }

    let hash = config_hash(
        "train",
        json!({ "spec": spec, "train": file, "seed": args.seed, "untied_baseline": args.untied_baseline }),
    );
    let summary = json!({
        "config_hash": hash,
        "target": target.name(),
        "dataset_size": data.len(),
        "status": report.status,
        "epochs_run": report.epochs_run,
        "initial_sup_error": report.initial_sup_error,
        "best_sup_error": report.best_sup_error,
        "divergence": report.divergence,
        "bounds": report_bounds(&net),
        "params": net.param_count(),
        "parameter_bound": network_parameter_bound(&net)?,
        "comparison": runs,
    });
    write_json(&args.out.join("summary.json"), &summary)?;
    // wall-clock data lives only in this sidecar
    write_json(
        &args.out.join("metadata.json"),
        &json!({ "started_unix": started, "finished_unix": unix_now(), "version": env!("CARGO_PKG_VERSION") }),
    )?;
    print_json(&summary)?;
    if report.status == TrainStatus::Diverged {
        let why = report.divergence.unwrap_or_default();
        return Err(Failure::runtime(format!("training diverged: {why}")));
    }
    Ok(ExitCode::SUCCESS)
}
