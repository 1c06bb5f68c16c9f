use std::path::{Path, PathBuf};

use predmarket::analysis::{abs_error_series, misclassification_grid, tail_std};
use predmarket::export::{
    self, TableSchema, AGENTS_SCHEMA, MISCLASSIFICATION_SCHEMA, REGION_SCHEMA, SWEEP_SCHEMA,
    TRAJECTORY_SCHEMA,
};
use predmarket::simulation::LATE_WINDOW;
use predmarket::theory::{
    ar2_coefficients, ar2_stable, calibrate_alpha, stability_region as region_map,
    steady_state_error, TheoryInputs, Verdict,
};
use predmarket::{
    run_batch, run_indexed, run_sweep, RunMetrics, SimConfig, Summary, SweepResult, Trajectory,
};
use serde::Serialize;

use crate::output::OutputDir;
use crate::plot::{HeatMap, LineChart, Series};
use crate::presets;
use crate::scenario::{ExperimentKind, Scenario};
use crate::{CliError, Common, Report};

const MISCLASSIFICATION_RESOLUTION: usize = 51;

const NOTES: [&str; 4] = [
    "sigma_eta is the per-step standard deviation of the outcome walk",
    "dominant_lag scans lags 0..=20 and picks the smallest slope p-value",
    "returns mark terminal holdings at eta_T and are divided by total initial capital",
    "replicate k of every configuration uses random streams derived from (master_seed, k)",
];

pub const METRICS_SCHEMA: TableSchema = TableSchema {
    file: "metrics.csv",
    description: "Run-level metrics for every replicate of a trajectory scenario.",
    columns: &[
        ("run", "replicate index"),
        ("metric", "metric name, as in sweep.csv"),
        ("metric_value", "value of the metric"),
    ],
};

pub const SUMMARY_SCHEMA: TableSchema = TableSchema {
    file: "summary.csv",
    description: "Per-cell mean and 95% empirical interval of each sweep metric.",
    columns: &[
        ("parameter", "swept parameter name"),
        ("value", "parameter value"),
        ("metric", "metric name"),
        ("mean", "mean over replicates"),
        ("lower", "2.5th percentile over replicates"),
        ("upper", "97.5th percentile over replicates"),
    ],
};

pub const WHALE_THEORY_SCHEMA: TableSchema = TableSchema {
    file: "theory.csv",
    description: "Predicted steady-state price error rho * (W - eta_0) against the simulated late-window error.",
    columns: &[
        ("rho", "whale capital share"),
        ("theory_error", "rho times the whale's valuation error"),
        ("late_error_mean", "mean signed price error over the last 25 steps"),
        ("late_error_lower", "2.5th percentile over replicates"),
        ("late_error_upper", "97.5th percentile over replicates"),
    ],
};

pub const STEADY_STATE_SCHEMA: TableSchema = TableSchema {
    file: "steady_state.csv",
    description: "Whale with half the capital and a fixed outcome, for several valuation errors.",
    columns: &[
        ("delta", "whale valuation minus the outcome"),
        ("theory_error", "0.5 * delta"),
        (
            "late_error_mean",
            "mean signed price error over the last 25 steps",
        ),
        ("late_error_lower", "2.5th percentile over replicates"),
        ("late_error_upper", "97.5th percentile over replicates"),
    ],
};

pub const ABS_ERROR_SCHEMA: TableSchema = TableSchema {
    file: "abs_error.csv",
    description:
        "Absolute price error |m_t - eta_t| across replicates, per herding level and step.",
    columns: &[
        ("h", "herding weight of every ordinary bettor"),
        ("t", "step"),
        ("mean", "mean over replicates"),
        ("lower", "2.5th percentile"),
        ("upper", "97.5th percentile"),
    ],
};

pub const SNAPSHOT_SCHEMA: TableSchema = TableSchema {
    file: "snapshots.csv",
    description: "The absolute-error table at t = 20, 50 and 100.",
    columns: &[
        ("h", "herding weight"),
        ("t", "step"),
        ("mean", "mean over replicates"),
        ("lower", "2.5th percentile"),
        ("upper", "97.5th percentile"),
    ],
};

pub const HERDING_THEORY_SCHEMA: TableSchema = TableSchema {
    file: "herding_theory.csv",
    description:
        "AR(2) error recursion for each herding level, from the first replicate's population.",
    columns: &[
        ("h", "herding weight"),
        (
            "alpha",
            "feedback gain c * lambda * m (1 - m), m the late-window mean price",
        ),
        ("S_w", "sum of w_i (1 - h_i) s_i"),
        ("H_B", "sum of w_i h_i"),
        ("a", "coefficient on delta_{t-1}"),
        ("b", "coefficient on delta_{t-2}"),
        ("spectral_radius", "largest root modulus"),
        ("verdict", "stable, marginal or unstable"),
    ],
};

pub const REGION_SUMMARY_SCHEMA: TableSchema = TableSchema {
    file: "region_summary.csv",
    description: "Share of the stability grid that is strictly stable, per alpha.",
    columns: &[
        ("alpha", "feedback gain"),
        ("resolution", "grid points per axis"),
        ("stable_fraction", "fraction of cells with verdict stable"),
    ],
};

#[derive(Serialize)]
struct Echo<'a, T: Serialize> {
    command: &'a str,
    version: &'static str,
    master_seed: u64,
    replications: usize,
    plots: bool,
    settings: T,
    notes: Vec<&'a str>,
}

struct Run {
    seed: u64,
    reps: usize,
    plots: bool,
    dir: OutputDir,
    lines: Vec<String>,
}

impl Run {
    fn start(common: &Common, default_out: &str, default_reps: usize) -> Result<Self, CliError> {
        let reps = common.reps.unwrap_or(default_reps);
        if reps == 0 {
            return Err(CliError::Config("--reps must be at least 1".into()));
        }
        let out = common
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(default_out));
        Ok(Run {
            seed: common.seed.unwrap_or(0),
            reps,
            plots: !common.no_plots,
            dir: OutputDir::create(&out)?,
            lines: Vec::new(),
        })
    }

    fn echo<T: Serialize>(
        &mut self,
        command: &str,
        settings: T,
        extra_notes: &[&str],
    ) -> Result<(), CliError> {
        let mut notes = NOTES.to_vec();
        notes.extend_from_slice(extra_notes);
        let echo = Echo {
            command,
            version: env!("CARGO_PKG_VERSION"),
            master_seed: self.seed,
            replications: self.reps,
            plots: self.plots,
            settings,
            notes,
        };
        self.dir.json("config.json", &echo)
    }

    fn svg(&mut self, name: &str, body: String) -> Result<(), CliError> {
        if self.plots {
            self.dir.text(name, &body)?;
        }
        Ok(())
    }

    fn finish(self, tables: &[&TableSchema]) -> Result<Report, CliError> {
        let mut dir = self.dir;
        dir.schema(tables)?;
        Ok(Report {
            out_dir: dir.path().to_path_buf(),
            files: dir.written().to_vec(),
            lines: self.lines,
        })
    }
}

fn summary_rows(result: &SweepResult) -> Vec<(&'static str, f64, &'static str, f64, f64, f64)> {
    let mut rows = Vec::new();
    for cell in &result.cells {
        for metric in RunMetrics::NAMES {
            if cell.values(metric).is_empty() {
                continue;
            }
            let s = cell.summary(metric);
            rows.push((
                result.parameter.name(),
                cell.value,
                metric,
                s.mean,
                s.lower,
                s.upper,
            ));
        }
    }
    rows
}

fn summary_series(name: &str, points: impl IntoIterator<Item = (f64, Summary)>) -> Series {
    let (mean, band): (Vec<_>, Vec<_>) = points
        .into_iter()
        .map(|(x, s)| ((x, s.mean), (x, s.lower, s.upper)))
        .unzip();
    Series::new(name, mean).with_band(band)
}

fn sweep_chart(result: &SweepResult, metric: &str, y_label: &str) -> LineChart {
    let name = result.parameter.name();
    LineChart {
        title: format!("{y_label} vs {name}"),
        x_label: name.to_string(),
        y_label: y_label.to_string(),
        series: vec![summary_series(
            "mean, 95% interval",
            result.cells.iter().map(|c| (c.value, c.summary(metric))),
        )],
    }
}

fn write_sweep_tables(run: &mut Run, result: &SweepResult, prefix: &str) -> Result<(), CliError> {
    export::write_sweep(result, run.dir.file(&format!("{prefix}sweep.csv"))?)?;
    let header: Vec<&str> = SUMMARY_SCHEMA.columns.iter().map(|c| c.0).collect();
    run.dir.csv(
        &format!("{prefix}summary.csv"),
        &header,
        summary_rows(result),
    )?;
    run.svg(
        &format!("{prefix}mse.svg"),
        sweep_chart(result, "mse", "MSE").render(),
    )?;
    run.svg(
        &format!("{prefix}dominant_lag.svg"),
        sweep_chart(result, "dominant_lag", "dominant lag").render(),
    )?;
    Ok(())
}

fn misclassification(run: &mut Run, traj: &Trajectory) -> Result<(), CliError> {
    let sigma_m = tail_std(&traj.prices(), LATE_WINDOW);
    let sigma_eta = tail_std(&traj.etas(), LATE_WINDOW);
    let grid = misclassification_grid(MISCLASSIFICATION_RESOLUTION, sigma_m, sigma_eta);
    export::write_misclassification(&grid, run.dir.file("misclassification.csv")?)?;
    run.lines.push(format!(
        "misclassification grid uses sigma_m = {sigma_m:.4}, sigma_eta = {sigma_eta:.4}"
    ));
    let map = HeatMap {
        title: "misclassification probability".into(),
        x_label: "market price m".into(),
        y_label: "outcome eta".into(),
        cells: grid,
        value_range: (0.0, 1.0),
        marker: None,
    };
    run.svg("misclassification.svg", map.render())
}

fn trajectory_chart(traj: &Trajectory) -> LineChart {
    let pick = |f: fn(&predmarket::StepRecord) -> f64| {
        traj.steps.iter().map(|s| (s.t as f64, f(s))).collect()
    };
    LineChart {
        title: "single run".into(),
        x_label: "t".into(),
        y_label: "probability".into(),
        series: vec![
            Series::new("price m", pick(|s| s.price)),
            Series::new("outcome eta", pick(|s| s.eta)),
            Series::new("mean valuation", pick(|s| s.mean_valuation)),
        ],
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn run_scenario(path: &Path, common: &Common) -> Result<Report, CliError> {
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = common.seed {
        scenario.simulation.master_seed = seed;
    }
    if let Some(reps) = common.reps {
        scenario.replications = reps;
    }
    if common.no_plots {
        scenario.plots = false;
    }
    if let Some(out) = &common.out {
        scenario.output_dir = Some(out.clone());
    }
    scenario.validate()?;
    let resolved = Common {
        seed: Some(scenario.simulation.master_seed),
        reps: Some(scenario.replications),
        out: Some(
            scenario
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("out/run")),
        ),
        threads: common.threads,
        no_plots: !scenario.plots,
    };
    let mut run = Run::start(&resolved, "out/run", 1)?;
    run.echo("run", &scenario, &[])?;
    let sim = &scenario.simulation;

    match scenario.experiment {
        ExperimentKind::Trajectory => {
            let traj = run_indexed(sim, 0)?;
            export::write_trajectory(&traj, run.dir.file("trajectory.csv")?)?;
            export::write_agents(&traj, run.dir.file("agents.csv")?)?;
            let metrics = run_batch(
                std::slice::from_ref(sim),
                run.reps,
                common.threads,
                RunMetrics::from_trajectory,
            )?
            .remove(0);
            let rows = metrics.iter().enumerate().flat_map(|(k, m)| {
                RunMetrics::NAMES
                    .into_iter()
                    .filter_map(move |name| m.get(name).map(|v| (k, name, v)))
            });
            run.dir
                .csv("metrics.csv", &["run", "metric", "metric_value"], rows)?;
            let mses: Vec<f64> = metrics.iter().map(|m| m.mse).collect();
            run.lines.push(format!(
                "{} run(s): mean MSE {:.5}, run 0 dominant lag {}",
                metrics.len(),
                mean(&mses),
                metrics[0].dominant_lag
            ));
            misclassification(&mut run, &traj)?;
            run.svg("trajectory.svg", trajectory_chart(&traj).render())?;
            run.finish(&[
                &TRAJECTORY_SCHEMA,
                &AGENTS_SCHEMA,
                &METRICS_SCHEMA,
                &MISCLASSIFICATION_SCHEMA,
            ])
        }
        ExperimentKind::Sweep => {
            let spec = scenario.sweep.as_ref().expect("validated").spec()?;
            let result = run_sweep(sim, &spec, run.reps, common.threads)?;
            write_sweep_tables(&mut run, &result, "")?;
            for cell in &result.cells {
                run.lines.push(format!(
                    "{} = {}: mean MSE {:.5}",
                    spec.parameter,
                    cell.value,
                    cell.summary("mse").mean
                ));
            }
            run.finish(&[&SWEEP_SCHEMA, &SUMMARY_SCHEMA])
        }
    }
}

pub fn sweep_attributes(common: &Common) -> Result<Report, CliError> {
    let mut run = Run::start(common, "out/sweep-attributes", presets::ATTRIBUTE_REPS)?;
    let base = SimConfig {
        master_seed: run.seed,
        ..SimConfig::default()
    };
    let sweeps = presets::attribute_sweeps();
    run.echo(
        "sweep-attributes",
        serde_json::json!({ "base": &base, "sweeps": &sweeps }),
        &["budget_std sweeps draw budgets from a normal around the default mean budget"],
    )?;
    for spec in &sweeps {
        let result = run_sweep(&base, spec, run.reps, common.threads)?;
        write_sweep_tables(&mut run, &result, &format!("{}/", spec.parameter))?;
        let means: Vec<String> = result
            .cells
            .iter()
            .map(|c| format!("{}:{:.4}", c.value, c.summary("mse").mean))
            .collect();
        run.lines
            .push(format!("{} MSE {}", spec.parameter, means.join(" ")));
    }
    let baseline = run_indexed(&base, 0)?;
    misclassification(&mut run, &baseline)?;
    let mut swept = SWEEP_SCHEMA;
    swept.file = "<parameter>/sweep.csv";
    let mut summary = SUMMARY_SCHEMA;
    summary.file = "<parameter>/summary.csv";
    run.finish(&[&swept, &summary, &MISCLASSIFICATION_SCHEMA])
}

pub fn sweep_whale(common: &Common) -> Result<Report, CliError> {
    let mut run = Run::start(common, "out/sweep-whale", presets::WHALE_REPS)?;
    let base = presets::expert_base(run.seed);
    let spec = presets::whale_grid();
    let steady: Vec<SimConfig> = presets::STEADY_STATE_DELTAS
        .iter()
        .map(|&d| presets::steady_state_config(run.seed, d))
        .collect();
    run.echo(
        "sweep-whale",
        serde_json::json!({
            "base": &base,
            "sweep": &spec,
            "whale_valuation": presets::WHALE_VALUATION,
            "steady_state": { "rho": presets::STEADY_STATE_RHO, "deltas": presets::STEADY_STATE_DELTAS, "configs": &steady },
        }),
        &["steady-state runs hold the outcome fixed (sigma_eta = 0)"],
    )?;

    let result = run_sweep(&base, &spec, run.reps, common.threads)?;
    write_sweep_tables(&mut run, &result, "")?;
    let delta = presets::WHALE_VALUATION - base.initial_price;
    let theory_rows: Vec<_> = result
        .cells
        .iter()
        .map(|c| {
            let s = c.summary("late_error");
            (
                c.value,
                steady_state_error(c.value, delta),
                s.mean,
                s.lower,
                s.upper,
            )
        })
        .collect();
    let header: Vec<&str> = WHALE_THEORY_SCHEMA.columns.iter().map(|c| c.0).collect();
    run.dir.csv("theory.csv", &header, &theory_rows)?;

    let returns = LineChart {
        title: "normalized returns vs whale share".into(),
        x_label: "rho".into(),
        y_label: "return / total capital".into(),
        series: vec![
            summary_series(
                "median non-whale",
                result
                    .cells
                    .iter()
                    .map(|c| (c.value, c.summary("median_return"))),
            ),
            summary_series(
                "whale",
                result
                    .cells
                    .iter()
                    .filter(|c| !c.values("whale_return").is_empty())
                    .map(|c| (c.value, c.summary("whale_return"))),
            ),
        ],
    };
    run.svg("returns.svg", returns.render())?;

    let late = run_batch(&steady, run.reps, common.threads, |t| {
        Ok(RunMetrics::from_trajectory(t)?.late_error)
    })?;
    let steady_rows: Vec<_> = presets::STEADY_STATE_DELTAS
        .iter()
        .zip(&late)
        .map(|(&d, errs)| {
            let s = Summary::of(errs);
            (
                d,
                steady_state_error(presets::STEADY_STATE_RHO, d),
                s.mean,
                s.lower,
                s.upper,
            )
        })
        .collect();
    let header: Vec<&str> = STEADY_STATE_SCHEMA.columns.iter().map(|c| c.0).collect();
    run.dir.csv("steady_state.csv", &header, &steady_rows)?;
    let chart = LineChart {
        title: format!("steady-state error, rho = {}", presets::STEADY_STATE_RHO),
        x_label: "whale valuation error".into(),
        y_label: "late-window price error".into(),
        series: vec![
            Series::new(
                "theory rho * delta",
                steady_rows.iter().map(|r| (r.0, r.1)).collect(),
            ),
            Series::new(
                "simulated",
                steady_rows.iter().map(|r| (r.0, r.2)).collect(),
            )
            .with_band(steady_rows.iter().map(|r| (r.0, r.3, r.4)).collect()),
        ],
    };
    run.svg("steady_state.svg", chart.render())?;

    for c in &result.cells {
        run.lines.push(format!(
            "rho = {:.1}: MSE {:.5}, median return {:+.2e}",
            c.value,
            c.summary("mse").mean,
            c.summary("median_return").mean
        ));
    }
    for r in &steady_rows {
        run.lines.push(format!(
            "delta = {:.2}: theory {:.4}, simulated {:.4}",
            r.0, r.1, r.2
        ));
    }
    run.finish(&[
        &SWEEP_SCHEMA,
        &SUMMARY_SCHEMA,
        &WHALE_THEORY_SCHEMA,
        &STEADY_STATE_SCHEMA,
    ])
}

/// Per-step absolute errors and the late-window mean price of one run.
type RecoveryRun = (Vec<f64>, f64);

pub fn herding_recovery(common: &Common, alpha_scale: f64) -> Result<Report, CliError> {
    if !(alpha_scale > 0.0) {
        return Err(CliError::Config("--alpha-scale must be positive".into()));
    }
    let mut run = Run::start(common, "out/herding-recovery", presets::HERDING_REPS)?;
    let configs: Vec<SimConfig> = presets::HERDING_LEVELS
        .iter()
        .map(|&h| presets::herding_config(run.seed, h))
        .collect();
    run.echo(
        "herding-recovery",
        serde_json::json!({ "herding_levels": presets::HERDING_LEVELS, "configs": &configs, "alpha_scale": alpha_scale }),
        &["recovery runs open with the price at the whale valuation and a fixed outcome (sigma_eta = 0)"],
    )?;

    let runs: Vec<Vec<RecoveryRun>> = run_batch(&configs, run.reps, common.threads, |t| {
        let prices = t.prices();
        let window = LATE_WINDOW.min(prices.len());
        Ok((abs_error_series(t), mean(&prices[prices.len() - window..])))
    })?;

    let mut curve_rows = Vec::new();
    let mut snapshot_rows = Vec::new();
    let mut theory_rows = Vec::new();
    let mut series = Vec::new();
    for ((&h, config), cell) in presets::HERDING_LEVELS.iter().zip(&configs).zip(&runs) {
        let mut points = Vec::new();
        for t in 1..=config.horizon {
            let at_t: Vec<f64> = cell.iter().map(|(err, _)| err[t - 1]).collect();
            let s = Summary::of(&at_t);
            curve_rows.push((h, t, s.mean, s.lower, s.upper));
            points.push((t as f64, s));
            if presets::SNAPSHOT_TIMES.contains(&t) {
                snapshot_rows.push((h, t, s.mean, s.lower, s.upper));
            }
        }
        series.push(summary_series(&format!("h = {h}"), points));

        let m_bar = mean(&cell.iter().map(|(_, m)| *m).collect::<Vec<_>>());
        let alpha = calibrate_alpha(config.lambda, m_bar, alpha_scale);
        let population = run_indexed(config, 0)?.initial_agents;
        let inputs = TheoryInputs::from_agents(alpha, &population)?;
        let coeffs = ar2_coefficients(&inputs);
        let verdict = ar2_stable(&coeffs).verdict;
        theory_rows.push((
            h,
            alpha,
            inputs.s_w(),
            inputs.h_bar(),
            coeffs.a,
            coeffs.b,
            coeffs.spectral_radius(),
            verdict.to_string(),
        ));
    }
    let header: Vec<&str> = ABS_ERROR_SCHEMA.columns.iter().map(|c| c.0).collect();
    run.dir.csv("abs_error.csv", &header, &curve_rows)?;
    let header: Vec<&str> = SNAPSHOT_SCHEMA.columns.iter().map(|c| c.0).collect();
    run.dir.csv("snapshots.csv", &header, &snapshot_rows)?;
    let header: Vec<&str> = HERDING_THEORY_SCHEMA.columns.iter().map(|c| c.0).collect();
    run.dir.csv("herding_theory.csv", &header, &theory_rows)?;
    let chart = LineChart {
        title: "recovery after a whale shock".into(),
        x_label: "t".into(),
        y_label: "|m - eta|".into(),
        series,
    };
    run.svg("abs_error.svg", chart.render())?;

    for r in &snapshot_rows {
        run.lines.push(format!(
            "h = {:.2}, t = {:3}: mean |error| {:.4}",
            r.0, r.1, r.2
        ));
    }
    for r in &theory_rows {
        run.lines.push(format!(
            "h = {:.2}: alpha {:.4}, spectral radius {:.4} ({})",
            r.0, r.1, r.6, r.7
        ));
    }
    run.finish(&[&ABS_ERROR_SCHEMA, &SNAPSHOT_SCHEMA, &HERDING_THEORY_SCHEMA])
}

pub fn stability_region(
    alphas: &[f64],
    resolution: usize,
    out: Option<PathBuf>,
    plots: bool,
) -> Result<Report, CliError> {
    if alphas.is_empty() {
        return Err(CliError::Config("--alphas needs at least one value".into()));
    }
    let common = Common {
        seed: None,
        reps: None,
        out,
        threads: 0,
        no_plots: !plots,
    };
    let mut run = Run::start(&common, "out/stability-region", 1)?;
    run.echo(
        "stability-region",
        serde_json::json!({ "alphas": alphas, "resolution": resolution }),
        &["deterministic; seed and replications are unused"],
    )?;
    let mut summary = Vec::new();
    for &alpha in alphas {
        let region = region_map(alpha, resolution)?;
        export::write_region(&region, run.dir.file(&format!("region_alpha_{alpha}.csv"))?)?;
        let map = HeatMap {
            title: format!("AR(2) stability, alpha = {alpha}"),
            x_label: "H_B".into(),
            y_label: "S_w".into(),
            cells: region
                .cells
                .iter()
                .map(|c| {
                    let v = match c.verdict {
                        Verdict::Stable => 0.0,
                        Verdict::Marginal => 0.5,
                        Verdict::Unstable => 1.0,
                    };
                    (c.h_bar, c.s_w, v)
                })
                .collect(),
            value_range: (0.0, 1.0),
            marker: Some((1.0, 0.0, "h = 1".into())),
        };
        run.svg(&format!("region_alpha_{alpha}.svg"), map.render())?;
        run.lines.push(format!(
            "alpha = {alpha}: stable fraction {:.4}",
            region.stable_fraction()
        ));
        summary.push((alpha, resolution, region.stable_fraction()));
    }
    let header: Vec<&str> = REGION_SUMMARY_SCHEMA.columns.iter().map(|c| c.0).collect();
    run.dir.csv("region_summary.csv", &header, &summary)?;
    run.finish(&[&REGION_SCHEMA, &REGION_SUMMARY_SCHEMA])
}
