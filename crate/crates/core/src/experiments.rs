//! Desk-scale reproductions: the toy-saddle trajectories, the growth of the
//! negative-eigenspace component, and the divergence-iteration table.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::format::{csv_num, csv_writer};
use crate::optimizers::{
    run_gradient_descent, run_heavy_ball, run_until_escape, IterationTrace, MomentumRun, PreviousPoint, TraceColumns,
};
use crate::problems::{sample_problem, single_negative_problem, toy_problem, GradientOracle, Projector};
use crate::rates::{b_limit, predicted_escape_iters};
use crate::rng;
use crate::schedules::MomentumSchedule;

/// Steepest descent and heavy-ball on the toy saddle from a shared start.
#[derive(Debug, Clone)]
pub struct ToyFigure {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub thin: usize,
    pub steepest_descent: IterationTrace,
    pub heavy_ball: IterationTrace,
}

pub fn toy_figure(delta: f64, alpha: f64, beta: f64, x0: [f64; 2], iters: usize, thin: usize) -> Result<ToyFigure> {
    if thin == 0 {
        return Err(domain("thin must be at least 1"));
    }
    let p = toy_problem(delta)?;
    let start = DVector::from_column_slice(&x0);
    Ok(ToyFigure {
        delta,
        alpha,
        beta,
        thin,
        steepest_descent: run_gradient_descent(&p, alpha, &start, iters)?,
        heavy_ball: run_heavy_ball(&p, alpha, beta, &start, PreviousPoint::EqualToX0, iters)?,
    })
}

impl ToyFigure {
    /// Thinned `(k, x₁, x₂)` points of a trace.
    pub fn points(&self, trace: &IterationTrace) -> Vec<(usize, f64, f64)> {
        trace
            .iterates
            .iter()
            .enumerate()
            .step_by(self.thin)
            .map(|(k, x)| (k, x[0], x[1]))
            .collect()
    }

    /// One CSV with a `method` column; the steepest-descent block comes first.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv_writer(w);
        let mut header = vec!["method".to_string(), "iter".to_string()];
        header.extend(TraceColumns::Coordinates.header(2));
        header.extend(["f".to_string(), "grad_norm".to_string()]);
        out.write_record(&header)?;
        for (label, trace) in [("steepest_descent", &self.steepest_descent), ("heavy_ball", &self.heavy_ball)] {
            for row in trace.csv_rows(&TraceColumns::Coordinates, self.thin) {
                out.write_record(std::iter::once(label.to_string()).chain(row))?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Settings for the negative-eigenspace growth experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegspaceSpec {
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
    pub iters: usize,
    /// `γ̂` in `β = 1 − αδ − γ̂` for the heavy-ball series.
    pub gamma_hat: f64,
    /// Overrides the heavy-ball `β` when set.
    pub beta: Option<f64>,
}

impl Default for NegspaceSpec {
    fn default() -> Self {
        Self {
            n: 100,
            delta: 1e-2,
            seed: 1,
            iters: 1000,
            gamma_hat: 0.0,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegspaceRow {
    pub k: usize,
    pub gradient_descent: f64,
    pub heavy_ball: f64,
    pub accelerated: f64,
    pub predictor: f64,
}

/// `‖P x^k‖` along the negative eigenvector for each method, plus the
/// geometric series `‖P x¹‖ (1 + b̄)^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegspaceResult {
    pub spec: NegspaceSpec,
    pub lipschitz: f64,
    pub alpha_gd: f64,
    pub alpha_hb: f64,
    pub beta_hb: f64,
    pub alpha_ag: f64,
    pub bar_b: f64,
    pub rows: Vec<NegspaceRow>,
}

impl NegspaceResult {
    /// First `k` at which the accelerated series reaches `threshold`.
    pub fn accelerated_escape(&self, threshold: f64) -> Option<usize> {
        self.rows.iter().position(|r| r.accelerated >= threshold)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv_writer(w);
        out.write_record(["iter", "gradient_descent", "heavy_ball", "accelerated", "bbar_predictor"])?;
        for r in &self.rows {
            out.write_record([
                r.k.to_string(),
                csv_num(r.gradient_descent),
                csv_num(r.heavy_ball),
                csv_num(r.accelerated),
                csv_num(r.predictor),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn projection_series<O: GradientOracle + ?Sized>(
    oracle: &O,
    alpha: f64,
    schedule: &MomentumSchedule,
    x0: &DVector<f64>,
    projector: &Projector,
    iters: usize,
) -> Result<Vec<f64>> {
    let mut run = MomentumRun::new(oracle, alpha, schedule, x0, PreviousPoint::EqualToX0)?;
    let mut out = Vec::with_capacity(iters + 1);
    out.push(projector.norm(x0));
    for _ in 0..iters {
        if run.step()? {
            out.push(projector.norm(run.current()));
        } else {
            out.push(f64::NAN);
        }
    }
    Ok(out)
}

/// Gradient descent (`α = 1/L`), heavy-ball (`α = 1/L`, `β = 1 − αδ − γ̂`)
/// and Nesterov's accelerated method (`α = 0.99/L`) on a problem with a
/// single negative eigenvalue `−δ`, from a start uniform in the unit ball.
pub fn negspace_experiment(spec: &NegspaceSpec) -> Result<NegspaceResult> {
    let mut r = rng::from_seed(spec.seed);
    let problem = single_negative_problem(&mut r, spec.n, spec.delta)?;
    let x0 = rng::unit_ball(&mut r, spec.n);
    let l = problem.lipschitz();
    let projector = problem.negative_projector();

    let alpha_gd = 1.0 / l;
    let alpha_ag = 0.99 / l;
    let beta_hb = match spec.beta {
        Some(b) => b,
        None => MomentumSchedule::Toy {
            alpha: alpha_gd,
            delta: spec.delta,
            gamma_hat: spec.gamma_hat,
        }
        .params(1)?
        .0,
    };

    let gd = projection_series(&problem, alpha_gd, &MomentumSchedule::gradient_descent(), &x0, &projector, spec.iters)?;
    let hb = projection_series(&problem, alpha_gd, &MomentumSchedule::heavy_ball(beta_hb), &x0, &projector, spec.iters)?;
    let ag = projection_series(&problem, alpha_ag, &MomentumSchedule::Nesterov, &x0, &projector, spec.iters)?;
    let bar_b = b_limit(problem.lambda_min(), alpha_ag, 1.0, 1.0)?.bar_b;
    let p0 = projector.norm(&x0);

    let rows = (0..=spec.iters)
        .map(|k| NegspaceRow {
            k,
            gradient_descent: gd[k],
            heavy_ball: hb[k],
            accelerated: ag[k],
            predictor: p0 * (1.0 + bar_b).powf(k as f64),
        })
        .collect();
    Ok(NegspaceResult {
        spec: spec.clone(),
        lipschitz: l,
        alpha_gd,
        alpha_hb: alpha_gd,
        beta_hb,
        alpha_ag,
        bar_b,
        rows,
    })
}

/// Settings for the divergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub ns: Vec<usize>,
    pub deltas: Vec<f64>,
    /// Number of negative eigenvalues per problem.
    pub p: usize,
    pub trials: usize,
    pub seed: u64,
    /// Per-trial cap; trials hitting it are censored.
    pub max_iters: usize,
}

impl Default for TableSpec {
    fn default() -> Self {
        Self {
            ns: vec![100, 1000],
            deltas: vec![1e-2, 1e-3],
            p: 5,
            trials: 100,
            seed: 1,
            max_iters: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableMethod {
    SteepestDescent,
    AcceleratedGradient,
    BbarRate,
}

impl TableMethod {
    pub const ALL: [TableMethod; 3] = [
        TableMethod::SteepestDescent,
        TableMethod::AcceleratedGradient,
        TableMethod::BbarRate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TableMethod::SteepestDescent => "steepest_descent",
            TableMethod::AcceleratedGradient => "accelerated_gradient",
            TableMethod::BbarRate => "bbar_rate",
        }
    }
}

/// Iteration counts of one trial; `None` marks a censored run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub delta: f64,
    pub trial: usize,
    pub initial_projection: f64,
    pub steepest_descent: Option<usize>,
    pub accelerated_gradient: Option<usize>,
    pub bbar_rate: Option<usize>,
}

impl TrialRecord {
    pub fn iters(&self, m: TableMethod) -> Option<usize> {
        match m {
            TableMethod::SteepestDescent => self.steepest_descent,
            TableMethod::AcceleratedGradient => self.accelerated_gradient,
            TableMethod::BbarRate => self.bbar_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n: usize,
    pub delta: f64,
    pub method: TableMethod,
    /// Mean over uncensored trials.
    pub avg_iters: f64,
    pub max_iters: usize,
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub spec: TableSpec,
    pub rows: Vec<TableRow>,
    #[serde(skip)]
    pub trials: Vec<TrialRecord>,
    pub warnings: Vec<String>,
}

impl TableResult {
    pub fn row(&self, n: usize, delta: f64, method: TableMethod) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.n == n && r.delta == delta && r.method == method)
    }

    pub fn cell_trials(&self, n: usize, delta: f64) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter(move |t| t.n == n && t.delta == delta)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per trial followed by one summary row per `(n, δ, method)`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv_writer(w);
        out.write_record([
            "row",
            "n",
            "delta",
            "trial",
            "initial_projection",
            "steepest_descent",
            "accelerated_gradient",
            "bbar_rate",
            "method",
            "avg_iters",
            "max_iters",
            "censored",
        ])?;
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        for t in &self.trials {
            out.write_record([
                "trial".to_string(),
                t.n.to_string(),
                csv_num(t.delta),
                t.trial.to_string(),
                csv_num(t.initial_projection),
                opt(t.steepest_descent),
                opt(t.accelerated_gradient),
                opt(t.bbar_rate),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        for r in &self.rows {
            out.write_record([
                "summary".to_string(),
                r.n.to_string(),
                csv_num(r.delta),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                r.method.name().to_string(),
                csv_num(r.avg_iters),
                r.max_iters.to_string(),
                r.censored.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn run_trial(spec: &TableSpec, cell: usize, n: usize, delta: f64, trial: usize) -> Result<TrialRecord> {
    let mut r = rng::trial_stream(spec.seed, cell as u32, trial as u32);
    let problem = sample_problem(&mut r, n, spec.p, delta)?;
    let x0 = rng::unit_ball(&mut r, n);
    let l = problem.lipschitz();
    let projector = problem.negative_projector();
    let threshold = n as f64;

    let sd = run_until_escape(
        &problem,
        1.0 / l,
        &MomentumSchedule::gradient_descent(),
        &x0,
        PreviousPoint::EqualToX0,
        &projector,
        threshold,
        spec.max_iters,
    )?;
    let alpha_ag = 0.99 / l;
    let ag = run_until_escape(
        &problem,
        alpha_ag,
        &MomentumSchedule::Nesterov,
        &x0,
        PreviousPoint::EqualToX0,
        &projector,
        threshold,
        spec.max_iters,
    )?;
    let bar_b = b_limit(problem.lambda_min(), alpha_ag, 1.0, 1.0)?.bar_b;
    let predicted = if sd.initial_projection > 0.0 {
        Some(predicted_escape_iters(bar_b, sd.initial_projection, threshold)?).filter(|&k| k <= spec.max_iters)
    } else {
        None
    };
    Ok(TrialRecord {
        n,
        delta,
        trial,
        initial_projection: sd.initial_projection,
        steepest_descent: sd.steps,
        accelerated_gradient: ag.steps,
        bbar_rate: predicted,
    })
}

/// Runs every `(n, δ)` cell with `trials` seeded random problems each.
///
/// Trial `t` of cell `c` draws its problem and start from its own stream,
/// so results do not depend on how rayon schedules the work.
pub fn divergence_table(spec: &TableSpec) -> Result<TableResult> {
    if spec.trials == 0 {
        return Err(domain("trials must be at least 1"));
    }
    let cells: Vec<(usize, usize, f64)> = spec
        .ns
        .iter()
        .flat_map(|&n| spec.deltas.iter().map(move |&d| (n, d)))
        .enumerate()
        .map(|(c, (n, d))| (c, n, d))
        .collect();
    let jobs: Vec<(usize, usize, f64, usize)> = cells
        .iter()
        .flat_map(|&(c, n, d)| (0..spec.trials).map(move |t| (c, n, d, t)))
        .collect();
    let trials: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(c, n, d, t)| run_trial(spec, c, n, d, t))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &(_, n, d) in &cells {
        for m in TableMethod::ALL {
            let counts: Vec<usize> = trials
                .iter()
                .filter(|t| t.n == n && t.delta == d)
                .filter_map(|t| t.iters(m))
                .collect();
            let censored = spec.trials - counts.len();
            if censored > 0 {
                warnings.push(format!(
                    "n={n}, delta={d}, {}: {censored} trial(s) censored at {} iterations",
                    m.name(),
                    spec.max_iters
                ));
            }
            let avg = if counts.is_empty() {
                f64::NAN
            } else {
                counts.iter().sum::<usize>() as f64 / counts.len() as f64
            };
            rows.push(TableRow {
                n,
                delta: d,
                method: m,
                avg_iters: avg,
                max_iters: counts.iter().copied().max().unwrap_or(0),
                censored,
            });
        }
    }
    Ok(TableResult {
        spec: spec.clone(),
        rows,
        trials,
        warnings,
    })
}

/// Settings for the toy-saddle figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub x0: [f64; 2],
    pub iters: usize,
    pub thin: usize,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            delta: 0.02,
            alpha: 0.75,
            beta: 0.985,
            x0: [0.25, 0.01],
            iters: 500,
            thin: 5,
        }
    }
}

/// Any of the three experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    ToyFigure(ToySpec),
    NegspacePlot(NegspaceSpec),
    DivergenceTable(TableSpec),
}

/// Output of [`ExperimentSpec::run`].
#[derive(Debug, Clone)]
pub enum ExperimentOutput {
    ToyFigure(ToyFigure),
    NegspacePlot(NegspaceResult),
    DivergenceTable(TableResult),
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(domain(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            ExperimentSpec::ToyFigure(t) => {
                positive("delta", t.delta)?;
                positive("alpha", t.alpha)?;
                if t.thin == 0 {
                    return Err(domain("thin must be at least 1"));
                }
            }
            ExperimentSpec::NegspacePlot(s) => {
                positive("delta", s.delta)?;
                if s.n < 2 {
                    return Err(domain("need n >= 2"));
                }
            }
            ExperimentSpec::DivergenceTable(s) => {
                if s.trials == 0 {
                    return Err(domain("trials must be at least 1"));
                }
                if s.ns.is_empty() || s.deltas.is_empty() {
                    return Err(domain("need at least one n and one delta"));
                }
                for &d in &s.deltas {
                    positive("delta", d)?;
                }
            }
        }
        Ok(())
    }

    pub fn run(&self) -> Result<ExperimentOutput> {
        self.validate()?;
        Ok(match self {
            ExperimentSpec::ToyFigure(t) => {
                ExperimentOutput::ToyFigure(toy_figure(t.delta, t.alpha, t.beta, t.x0, t.iters, t.thin)?)
            }
            ExperimentSpec::NegspacePlot(s) => ExperimentOutput::NegspacePlot(negspace_experiment(s)?),
            ExperimentSpec::DivergenceTable(s) => ExperimentOutput::DivergenceTable(divergence_table(s)?),
        })
    }
}

impl ExperimentOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        match self {
            ExperimentOutput::ToyFigure(f) => f.write_csv(w),
            ExperimentOutput::NegspacePlot(r) => r.write_csv(w),
            ExperimentOutput::DivergenceTable(t) => t.write_csv(w),
        }
    }
}
