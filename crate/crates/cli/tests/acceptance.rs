//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any of them fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use predmarket::agents::{
    expected_utility, feasible_order_bounds, optimal_order, optimal_order_log,
};
use predmarket::analysis::abs_error_series;
use predmarket::export::write_trajectory;
use predmarket::market::{match_orders, settle_fills, OrderBook};
use predmarket::simulation::LATE_WINDOW;
use predmarket::theory::{ar2_stable, Ar2Coefficients, Verdict};
use predmarket::{
    run_batch, run_sweep, Agent, AgentState, AgentTraits, RunMetrics, SimConfig, Summary,
    SweepParameter, SweepSpec,
};
use predmarket_cli::presets;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0;
const THREADS: usize = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn late_errors(configs: &[SimConfig], reps: usize) -> Vec<Vec<f64>> {
    run_batch(configs, reps, THREADS, |t| {
        Ok(RunMetrics::from_trajectory(t)?.late_error)
    })
    .unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn steady_state_whale() -> Outcome {
    let configs: Vec<SimConfig> = presets::STEADY_STATE_DELTAS
        .iter()
        .map(|&d| presets::steady_state_config(SEED, d))
        .collect();
    let errors = late_errors(&configs, 100);
    let mut pass = true;
    let mut parts = Vec::new();
    for (&d, errs) in presets::STEADY_STATE_DELTAS.iter().zip(&errors) {
        let predicted = presets::STEADY_STATE_RHO * d;
        let observed = mean(errs);
        pass &= (observed - predicted).abs() <= 0.03;
        parts.push(format!("d={d}: {observed:.4} vs {predicted:.3}"));
    }
    Outcome::new(pass, parts.join(", "))
}

fn whale_threshold() -> Outcome {
    let spec = presets::whale_grid();
    let result = run_sweep(&presets::expert_base(SEED), &spec, 100, THREADS).unwrap();
    let mses: Vec<f64> = result.cells.iter().map(|c| c.summary("mse").mean).collect();
    let at = |rho: f64| {
        mses[spec
            .values
            .iter()
            .position(|&v| (v - rho).abs() < 1e-9)
            .unwrap()]
    };
    let rank = spearman(&spec.values, &mses);
    let high = at(0.8) / at(0.0);
    let low = at(0.1) / at(0.0);
    Outcome::new(
        rank > 0.9 && high >= 3.0 && low <= 1.5,
        format!("spearman {rank:.3}, MSE(0.8)/MSE(0) {high:.2}, MSE(0.1)/MSE(0) {low:.2}"),
    )
}

fn attribute_robustness() -> Outcome {
    let base = SimConfig {
        master_seed: SEED,
        ..SimConfig::default()
    };
    assert_eq!(base.population.stubbornness.mean(), 0.3);
    let baseline = mean(
        &run_batch(std::slice::from_ref(&base), 30, THREADS, |t| {
            Ok(RunMetrics::from_trajectory(t)?.mse)
        })
        .unwrap()[0],
    );
    let stubborn = run_sweep(
        &base,
        &SweepSpec {
            parameter: SweepParameter::Stubbornness,
            values: vec![0.5, 0.95],
        },
        30,
        THREADS,
    )
    .unwrap();
    let s05 = stubborn.cells[0].summary("mse").mean;
    let s095 = stubborn.cells[1].summary("mse").mean;
    let expertise = run_sweep(
        &base,
        &SweepSpec {
            parameter: SweepParameter::Expertise,
            values: predmarket::simulation::grid(0.0, 1.0, 0.1),
        },
        30,
        THREADS,
    )
    .unwrap();
    let e_mse: Vec<f64> = expertise
        .cells
        .iter()
        .map(|c| c.summary("mse").mean)
        .collect();
    let argmin = (0..e_mse.len())
        .min_by(|&a, &b| e_mse[a].total_cmp(&e_mse[b]))
        .unwrap();
    let best_e = expertise.cells[argmin].value;
    let pass = (0.001..=0.15).contains(&baseline)
        && s05 <= 2.0 * baseline
        && s095 > 2.0 * baseline
        && best_e == 1.0;
    Outcome::new(
        pass,
        format!(
            "baseline {baseline:.4}, s=0.5 {s05:.4}, s=0.95 {s095:.4}, expertise minimum at e={best_e} ({:.4})",
            e_mse[argmin]
        ),
    )
}

fn herding_recovery() -> Outcome {
    let configs: Vec<SimConfig> = presets::HERDING_LEVELS
        .iter()
        .map(|&h| presets::herding_config(SEED, h))
        .collect();
    let runs = run_batch(&configs, 100, THREADS, |t| {
        let e = abs_error_series(t);
        Ok((e[19], e[99]))
    })
    .unwrap();
    let at20: Vec<f64> = runs
        .iter()
        .map(|r| mean(&r.iter().map(|p| p.0).collect::<Vec<_>>()))
        .collect();
    let at100: Vec<f64> = runs
        .iter()
        .map(|r| mean(&r.iter().map(|p| p.1).collect::<Vec<_>>()))
        .collect();
    let h1 = at100[4];
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, &h) in presets::HERDING_LEVELS.iter().enumerate() {
        if h <= 0.75 {
            pass &= h1 > at100[k];
        }
        if h <= 0.5 {
            pass &= at100[k] < at20[k];
        }
        parts.push(format!("h={h}: {:.4}->{:.4}", at20[k], at100[k]));
    }
    Outcome::new(pass, parts.join(", "))
}

/// Root moduli straight from the characteristic polynomial.
fn root_verdict(a: f64, b: f64) -> Verdict {
    let disc = a * a + 4.0 * b;
    let radius = if disc >= 0.0 {
        let s = disc.sqrt();
        ((a + s) / 2.0).abs().max(((a - s) / 2.0).abs())
    } else {
        (-b).sqrt()
    };
    if radius < 1.0 {
        Verdict::Stable
    } else if radius > 1.0 {
        Verdict::Unstable
    } else {
        Verdict::Marginal
    }
}

fn ar2_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut interior, mut agree) = (0, 0);
    for _ in 0..10_000 {
        let alpha = rng.random_range(0.0..1.0);
        let s_w = rng.random_range(0.0..=1.0);
        let h_bar = rng.random_range(0.0..=1.0);
        let c = Ar2Coefficients::from_aggregates(alpha, s_w, h_bar);
        let report = ar2_stable(&c);
        if report.boundary_gap() > 1e-6 {
            interior += 1;
            agree += (report.verdict == root_verdict(c.a, c.b)) as usize;
        }
    }
    let spot = Ar2Coefficients::from_aggregates(0.1, 0.3, 0.0);
    let mut roots: Vec<f64> = spot.roots.iter().map(|r| r.re).collect();
    roots.sort_by(f64::total_cmp);
    let spot_ok = (roots[0] - 0.3).abs() < 1e-12
        && (roots[1] - 0.9).abs() < 1e-12
        && spot.roots.iter().all(|r| r.im == 0.0);
    Outcome::new(
        agree == interior && spot_ok,
        format!("{agree}/{interior} interior cases agree, spot roots {roots:?}"),
    )
}

fn optimizer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..1_000 {
        let b = rng.random_range(1.0..1_000.0);
        let c = rng.random_range(-0.5 * b..b);
        let v = rng.random_range(0.0..=1.0);
        let m = rng.random_range(0.01..0.99);
        let r = rng.random_range(0.0..=1.0);
        let x = optimal_order(b, c, v, m, r);
        let eu = expected_utility(x, b, c, v, m, r).unwrap();
        let (lo, hi) = feasible_order_bounds(b, c, m);
        let grid_best = (0..10_000)
            .filter_map(|k| {
                expected_utility(lo + (hi - lo) * k as f64 / 9_999.0, b, c, v, m, r).ok()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let shortfall = grid_best - eu;
        worst = worst.max(shortfall);
        failures += (shortfall > 1e-6) as usize;
    }
    let mut log_gap: f64 = 0.0;
    for _ in 0..1_000 {
        let b = rng.random_range(1.0..1_000.0);
        let c = rng.random_range(-0.5 * b..b);
        let v = rng.random_range(0.0..=1.0);
        let m = rng.random_range(0.01..0.99);
        let closed = optimal_order_log(b, c, v, m).unwrap();
        log_gap = log_gap.max((optimal_order(b, c, v, m, 1.0) - closed).abs());
    }
    Outcome::new(
        failures == 0 && log_gap <= 1e-6,
        format!("{failures} grid shortfalls over 1e-6 (worst {worst:.2e}), log closed form gap {log_gap:.2e}"),
    )
}

fn agent(id: usize, budget: f64, holdings: f64) -> Agent {
    Agent {
        id,
        traits: AgentTraits {
            stubbornness: 0.0,
            expertise: 0.5,
            bias: 0.0,
            risk_aversion: 0.5,
            herding: 0.0,
            is_whale: false,
        },
        state: AgentState {
            budget,
            holdings,
            valuation: 0.5,
        },
        initial_budget: budget,
    }
}

fn trajectory_csv(config: &SimConfig, reps: usize, threads: usize) -> Vec<Vec<u8>> {
    run_batch(std::slice::from_ref(config), reps, threads, |t| {
        let mut buf = Vec::new();
        write_trajectory(t, &mut buf)?;
        Ok(buf)
    })
    .unwrap()
    .remove(0)
}

fn conservation_and_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut broken = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(2..20);
        let price = rng.random_range(0.01..0.99);
        let mut agents: Vec<Agent> = (0..n)
            .map(|i| {
                agent(
                    i,
                    rng.random_range(50.0..500.0),
                    rng.random_range(-20.0..20.0),
                )
            })
            .collect();
        let mut book = OrderBook::new();
        for i in 0..n {
            let cap = agents[i].state.budget / price;
            book.push(i, rng.random_range(-cap..cap));
        }
        let cash: f64 = agents.iter().map(|a| a.state.budget).sum();
        let held: f64 = agents.iter().map(|a| a.state.holdings).sum();
        let fills = match_orders(&book, price, &mut rng);
        settle_fills(&mut agents, &fills, price).unwrap();
        let cash2: f64 = agents.iter().map(|a| a.state.budget).sum();
        let held2: f64 = agents.iter().map(|a| a.state.holdings).sum();
        if (cash2 - cash).abs() > 1e-9 * cash.abs().max(1.0)
            || (held2 - held).abs() > 1e-9 * (1.0 + held.abs())
        {
            broken += 1;
        }
    }

    let config = presets::whale_config(SEED, 0.3);
    let serial = trajectory_csv(&config, 8, 1);
    let same_in_process = [2, 4, 8]
        .iter()
        .all(|&t| trajectory_csv(&config, 8, t) == serial);

    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{"simulation": {"master_seed": 7}, "replications": 6, "plots": false}"#,
    )
    .unwrap();
    let cli_run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_predmarket"))
            .arg("run")
            .arg(&scenario)
            .args(["--threads", threads, "--out"])
            .arg(&out)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        (
            std::fs::read(out.join("trajectory.csv")).unwrap(),
            std::fs::read(out.join("metrics.csv")).unwrap(),
        )
    };
    let same_cli = cli_run("1") == cli_run("4");
    Outcome::new(
        broken == 0 && same_in_process && same_cli,
        format!(
            "{broken} of 10000 books broke conservation, in-process thread counts identical: {same_in_process}, CLI --threads 1 vs 4 identical: {same_cli}"
        ),
    )
}

fn expert_profit() -> Outcome {
    let configs: Vec<SimConfig> = [0.3, 0.5]
        .iter()
        .map(|&rho| presets::whale_config(SEED, rho))
        .collect();
    let returns = run_batch(&configs, 100, THREADS, |t| {
        Ok(RunMetrics::from_trajectory(t)?.median_return)
    })
    .unwrap();
    let positive: Vec<usize> = returns
        .iter()
        .map(|r| r.iter().filter(|&&x| x > 0.0).count())
        .collect();
    let medians: Vec<f64> = returns.iter().map(|r| Summary::of(r).mean).collect();
    Outcome::new(
        positive.iter().all(|&p| p >= 90),
        format!(
            "positive runs: rho=0.3 {}/100, rho=0.5 {}/100 (mean of medians {:+.2e}, {:+.2e})",
            positive[0], positive[1], medians[0], medians[1]
        ),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "steady-state whale error",
            budget: Duration::from_secs(120),
            check: steady_state_whale,
        },
        Criterion {
            id: 2,
            name: "whale threshold",
            budget: Duration::from_secs(600),
            check: whale_threshold,
        },
        Criterion {
            id: 3,
            name: "attribute robustness",
            budget: Duration::from_secs(900),
            check: attribute_robustness,
        },
        Criterion {
            id: 4,
            name: "herding recovery",
            budget: Duration::from_secs(600),
            check: herding_recovery,
        },
        Criterion {
            id: 5,
            name: "AR(2) stability equivalence",
            budget: Duration::from_secs(1),
            check: ar2_equivalence,
        },
        Criterion {
            id: 6,
            name: "optimizer oracle",
            budget: Duration::from_secs(30),
            check: optimizer_oracle,
        },
        Criterion {
            id: 7,
            name: "conservation and determinism",
            budget: Duration::from_secs(60),
            check: conservation_and_determinism,
        },
        Criterion {
            id: 8,
            name: "expert profit under distortion",
            budget: Duration::from_secs(300),
            check: expert_profit,
        },
    ];
    assert_eq!(LATE_WINDOW, 25);
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let pass = outcome.pass && elapsed <= c.budget;
        failed += !pass as usize;
        println!(
            "{} [{}] {}: {} ({:.2}s of {}s)",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            outcome.detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
