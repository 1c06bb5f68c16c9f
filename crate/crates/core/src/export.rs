//! CSV writers for trajectories, agents, sweeps and theory grids, plus a
//! markdown description of every table.

use std::io::Write;

use crate::analysis::{agent_returns, Resolution};
use crate::error::Result;
use crate::simulation::{RunMetrics, SweepResult, Trajectory};
use crate::theory::StabilityRegion;

pub struct TableSchema {
    pub file: &'static str,
    pub description: &'static str,
    pub columns: &'static [(&'static str, &'static str)],
}

pub const TRAJECTORY_SCHEMA: TableSchema = TableSchema {
    file: "trajectory.csv",
    description: "One row per step of a single run.",
    columns: &[
        ("t", "step index, 1-based"),
        ("m", "market price after the step's update"),
        ("eta", "true outcome probability after the step"),
        ("D", "net demand: signed sum of submitted order volumes"),
        ("K", "gross volume: sum of absolute order volumes"),
        (
            "mean_valuation",
            "mean valuation of non-whale bettors when orders were placed",
        ),
        (
            "total_contracts",
            "open interest: total long contracts held",
        ),
    ],
};

pub const AGENTS_SCHEMA: TableSchema = TableSchema {
    file: "agents.csv",
    description: "Traits and terminal state of every bettor in a single run.",
    columns: &[
        ("id", "agent index; a whale is always last"),
        ("is_whale", "true for the fixed-valuation whale"),
        ("stubbornness", "weight on the previous valuation"),
        (
            "expertise",
            "signal precision; signal variance is 1 - expertise",
        ),
        ("bias", "offset subtracted from each signal"),
        ("risk_aversion", "CRRA coefficient"),
        ("herding", "weight on the posted price"),
        ("initial_budget", "cash at t = 0"),
        ("budget", "cash at t = T"),
        ("holdings", "contracts at t = T, negative when short"),
        ("valuation", "valuation at t = T"),
        ("return", "budget + holdings * eta_T - initial_budget"),
    ],
};

pub const SWEEP_SCHEMA: TableSchema = TableSchema {
    file: "sweep.csv",
    description: "Long-format run metrics, one row per (value, run, metric).",
    columns: &[
        ("parameter", "swept parameter name"),
        ("value", "parameter value of the cell"),
        (
            "run",
            "replicate index; replicate k uses the same random streams in every cell",
        ),
        (
            "metric",
            "mse, dominant_lag, terminal_error, late_error, median_return or whale_return",
        ),
        ("metric_value", "value of the metric"),
    ],
};

pub const REGION_SCHEMA: TableSchema = TableSchema {
    file: "region_alpha_<alpha>.csv",
    description: "AR(2) stability over a grid of aggregate herding and stubbornness.",
    columns: &[
        ("H_B", "budget-weighted herding"),
        ("S_w", "budget-weighted non-herding stubbornness"),
        (
            "stable_flag",
            "1 when both characteristic roots lie strictly inside the unit circle",
        ),
        ("verdict", "stable, marginal or unstable"),
    ],
};

pub const MISCLASSIFICATION_SCHEMA: TableSchema = TableSchema {
    file: "misclassification.csv",
    description: "Probability that price and outcome fall on opposite sides of 1/2.",
    columns: &[
        ("m", "market price"),
        ("eta", "true outcome probability"),
        ("probability", "misclassification probability"),
    ],
};

pub const ALL_SCHEMAS: [&TableSchema; 5] = [
    &TRAJECTORY_SCHEMA,
    &AGENTS_SCHEMA,
    &SWEEP_SCHEMA,
    &REGION_SCHEMA,
    &MISCLASSIFICATION_SCHEMA,
];

/// Renders schemas as markdown sections.
pub fn schema_markdown(schemas: &[&TableSchema]) -> String {
    let mut out = String::from("# Output tables\n");
    for s in schemas {
        out.push_str(&format!(
            "\n## `{}`\n\n{}\n\n| column | meaning |\n|---|---|\n",
            s.file, s.description
        ));
        for (name, meaning) in s.columns {
            out.push_str(&format!("| `{name}` | {meaning} |\n"));
        }
    }
    out
}

fn header<W: Write>(w: &mut csv::Writer<W>, schema: &TableSchema) -> Result<()> {
    w.write_record(schema.columns.iter().map(|(c, _)| *c))?;
    Ok(())
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    header(&mut w, &TRAJECTORY_SCHEMA)?;
    for s in &traj.steps {
        w.serialize((
            s.t,
            s.price,
            s.eta,
            s.net_demand,
            s.gross_volume,
            s.mean_valuation,
            s.total_contracts,
        ))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_agents<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    header(&mut w, &AGENTS_SCHEMA)?;
    let profit = agent_returns(traj, Resolution::MarkToOutcome);
    for (a, r) in traj.final_agents.iter().zip(&profit.returns) {
        let t = &a.traits;
        w.serialize((
            a.id,
            t.is_whale,
            t.stubbornness,
            t.expertise,
            t.bias,
            t.risk_aversion,
            t.herding,
            a.initial_budget,
            a.state.budget,
            a.state.holdings,
            a.state.valuation,
            r,
        ))?;
    }
    w.flush()?;
    Ok(())
}

/// Long format; metrics that are absent for a run (a whale return without a
/// whale) are skipped.
pub fn write_sweep<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    header(&mut w, &SWEEP_SCHEMA)?;
    let name = result.parameter.name();
    for cell in &result.cells {
        for (run, metrics) in cell.runs.iter().enumerate() {
            for metric in RunMetrics::NAMES {
                if let Some(v) = metrics.get(metric) {
                    w.serialize((name, cell.value, run, metric, v))?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_region<W: Write>(region: &StabilityRegion, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    header(&mut w, &REGION_SCHEMA)?;
    for c in &region.cells {
        let flag = u8::from(c.verdict == crate::theory::Verdict::Stable);
        w.serialize((c.h_bar, c.s_w, flag, c.verdict.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_misclassification<W: Write>(grid: &[(f64, f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    header(&mut w, &MISCLASSIFICATION_SCHEMA)?;
    for row in grid {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
