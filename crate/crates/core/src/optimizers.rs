//! Gradient descent, heavy-ball and the general accelerated framework.
//!
//! Indexing follows the framework: the run starts from `x¹` (here
//! `iterates[0]`) with a companion previous point `x⁰` that equals `x¹`
//! unless a perturbation is requested. `iterates[k]` is the point after `k`
//! steps, and step `k` uses the schedule values `(β_k, γ_k)`.

use std::io::Write;

use nalgebra::DVector;

use crate::error::{domain, Result};
use crate::format::{csv_num, csv_writer};
use crate::problems::{check_dim, GradientOracle, Projector};
use crate::rng;
use crate::schedules::{MomentumSchedule, ParamStream};

/// Any coordinate beyond this magnitude ends the run as divergent.
pub const DIVERGENCE_CUTOFF: f64 = 1e100;

/// How the point preceding the start is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreviousPoint {
    /// `x⁰ = x¹` (no initial momentum).
    EqualToX0,
    /// `x⁰ = x¹ + ε y`, `y` with i.i.d. standard normal entries drawn from `seed`.
    Perturbed { eps: f64, seed: u64 },
}

impl PreviousPoint {
    pub fn resolve(&self, x0: &DVector<f64>) -> Result<DVector<f64>> {
        match *self {
            PreviousPoint::EqualToX0 => Ok(x0.clone()),
            PreviousPoint::Perturbed { eps, seed } => {
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(domain(format!("perturbation must be positive, got {eps}")));
                }
                let mut r = rng::from_seed(seed);
                Ok(x0 + rng::gaussian_vector(&mut r, x0.len()) * eps)
            }
        }
    }
}

/// Everything needed to run the framework.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub schedule: MomentumSchedule,
    pub x0: DVector<f64>,
    pub previous: PreviousPoint,
    pub max_iters: usize,
}

impl RunConfig {
    pub fn run<O: GradientOracle + ?Sized>(&self, oracle: &O) -> Result<IterationTrace> {
        run_accelerated(oracle, self.alpha, &self.schedule, &self.x0, self.previous, self.max_iters)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("stepsize must be positive, got {alpha}")))
    }
}

fn is_divergent(x: &DVector<f64>) -> bool {
    x.iter().any(|v| !(v.abs() <= DIVERGENCE_CUTOFF))
}

/// Record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// The point before the start (`x⁰` in the framework's indexing).
    pub previous: DVector<f64>,
    /// `iterates[k]` is the point after `k` steps; `iterates[0]` is the start.
    pub iterates: Vec<DVector<f64>>,
    /// `f` at each iterate.
    pub values: Vec<f64>,
    /// `‖∇f‖` at each iterate.
    pub grad_norms: Vec<f64>,
    /// The run stopped early because an iterate exceeded [`DIVERGENCE_CUTOFF`].
    pub diverged: bool,
}

impl IterationTrace {
    fn start<O: GradientOracle + ?Sized>(oracle: &O, x0: &DVector<f64>, previous: DVector<f64>) -> Self {
        let mut t = Self {
            previous,
            iterates: Vec::new(),
            values: Vec::new(),
            grad_norms: Vec::new(),
            diverged: false,
        };
        let g = oracle.gradient_at(x0);
        t.push(oracle, x0.clone(), &g);
        t
    }

    fn push<O: GradientOracle + ?Sized>(&mut self, oracle: &O, x: DVector<f64>, grad: &DVector<f64>) {
        self.values.push(oracle.value_at(&x));
        self.grad_norms.push(grad.norm());
        self.iterates.push(x);
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn last(&self) -> &DVector<f64> {
        self.iterates.last().expect("trace holds the start point")
    }

    /// Series of coordinate `i` over the run.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.iterates.iter().map(|x| x[i]).collect()
    }

    /// `‖P x^k‖` for every iterate.
    pub fn projection_norms(&self, projector: &Projector) -> Vec<f64> {
        self.iterates.iter().map(|x| projector.norm(x)).collect()
    }

    /// Writes CSV rows `iter, <columns…>, f, grad_norm`, keeping every
    /// `thin`-th iterate.
    pub fn write_csv<W: Write>(&self, w: W, columns: &TraceColumns, thin: usize) -> Result<()> {
        let mut out = csv_writer(w);
        let mut header = vec!["iter".to_string()];
        header.extend(columns.header(self.iterates[0].len()));
        header.extend(["f".to_string(), "grad_norm".to_string()]);
        out.write_record(&header)?;
        for row in self.csv_rows(columns, thin) {
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub(crate) fn csv_rows(&self, columns: &TraceColumns, thin: usize) -> Vec<Vec<String>> {
        let thin = thin.max(1);
        (0..self.iterates.len())
            .step_by(thin)
            .map(|k| {
                let x = &self.iterates[k];
                let mut row = vec![k.to_string()];
                match columns {
                    TraceColumns::Coordinates => row.extend(x.iter().map(|&v| csv_num(v))),
                    TraceColumns::Projection(p) => row.push(csv_num(p.norm(x))),
                }
                row.push(csv_num(self.values[k]));
                row.push(csv_num(self.grad_norms[k]));
                row
            })
            .collect()
    }
}

/// What to emit per iterate in CSV exports.
#[derive(Debug, Clone)]
pub enum TraceColumns {
    Coordinates,
    Projection(Projector),
}

impl TraceColumns {
    pub(crate) fn header(&self, n: usize) -> Vec<String> {
        match self {
            TraceColumns::Coordinates => (1..=n).map(|i| format!("x{i}")).collect(),
            TraceColumns::Projection(_) => vec!["proj_norm".to_string()],
        }
    }
}

/// Steepest descent `x^{k+1} = x^k − α∇f(x^k)`.
pub fn run_gradient_descent<O: GradientOracle + ?Sized>(
    oracle: &O,
    alpha: f64,
    x0: &DVector<f64>,
    max_iters: usize,
) -> Result<IterationTrace> {
    check_alpha(alpha)?;
    check_dim(oracle.dim(), x0)?;
    let mut trace = IterationTrace::start(oracle, x0, x0.clone());
    let mut grad = oracle.gradient_at(x0);
    for _ in 0..max_iters {
        let next = trace.last() - &grad * alpha;
        if is_divergent(&next) {
            trace.diverged = true;
            break;
        }
        grad = oracle.gradient_at(&next);
        trace.push(oracle, next, &grad);
    }
    Ok(trace)
}

/// Heavy-ball `x^{k+1} = x^k − α∇f(x^k) + β(x^k − x^{k−1})`.
pub fn run_heavy_ball<O: GradientOracle + ?Sized>(
    oracle: &O,
    alpha: f64,
    beta: f64,
    x0: &DVector<f64>,
    previous: PreviousPoint,
    max_iters: usize,
) -> Result<IterationTrace> {
    check_alpha(alpha)?;
    check_dim(oracle.dim(), x0)?;
    if !(0.0..1.0).contains(&beta) {
        return Err(domain(format!("heavy-ball needs beta in [0, 1), got {beta}")));
    }
    let mut prev = previous.resolve(x0)?;
    let mut trace = IterationTrace::start(oracle, x0, prev.clone());
    let mut grad = oracle.gradient_at(x0);
    for _ in 0..max_iters {
        let x = trace.last();
        let next = x - &grad * alpha + (x - &prev) * beta;
        if is_divergent(&next) {
            trace.diverged = true;
            break;
        }
        prev = x.clone();
        grad = oracle.gradient_at(&next);
        trace.push(oracle, next, &grad);
    }
    Ok(trace)
}

/// The general framework: `y^k = x^k + γ_k(x^k − x^{k−1})`,
/// `x^{k+1} = x^k + β_k(x^k − x^{k−1}) − α∇f(y^k)`.
pub fn run_accelerated<O: GradientOracle + ?Sized>(
    oracle: &O,
    alpha: f64,
    schedule: &MomentumSchedule,
    x0: &DVector<f64>,
    previous: PreviousPoint,
    max_iters: usize,
) -> Result<IterationTrace> {
    let mut run = MomentumRun::new(oracle, alpha, schedule, x0, previous)?;
    let mut trace = IterationTrace::start(oracle, x0, run.previous().clone());
    for _ in 0..max_iters {
        if !run.step()? {
            trace.diverged = true;
            break;
        }
        let g = oracle.gradient_at(run.current());
        trace.push(oracle, run.current().clone(), &g);
    }
    Ok(trace)
}

/// Step-by-step driver for the framework that keeps only the last two points.
pub struct MomentumRun<'a, O: GradientOracle + ?Sized> {
    oracle: &'a O,
    alpha: f64,
    params: ParamStream,
    prev: DVector<f64>,
    curr: DVector<f64>,
    steps: usize,
    diverged: bool,
}

impl<'a, O: GradientOracle + ?Sized> MomentumRun<'a, O> {
    pub fn new(
        oracle: &'a O,
        alpha: f64,
        schedule: &MomentumSchedule,
        x0: &DVector<f64>,
        previous: PreviousPoint,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        check_dim(oracle.dim(), x0)?;
        Ok(Self {
            oracle,
            alpha,
            params: schedule.stream(),
            prev: previous.resolve(x0)?,
            curr: x0.clone(),
            steps: 0,
            diverged: false,
        })
    }

    /// Advances one step. Returns `Ok(false)` once the run has diverged; the
    /// state then stays at the last finite iterate.
    pub fn step(&mut self) -> Result<bool> {
        if self.diverged {
            return Ok(false);
        }
        let (beta, gamma) = self.params.next().expect("parameter stream is infinite")?;
        let d = &self.curr - &self.prev;
        let y = &self.curr + &d * gamma;
        let g = self.oracle.gradient_at(&y);
        let next = &self.curr + &d * beta - g * self.alpha;
        if is_divergent(&next) {
            self.diverged = true;
            return Ok(false);
        }
        self.prev = std::mem::replace(&mut self.curr, next);
        self.steps += 1;
        Ok(true)
    }

    pub fn current(&self) -> &DVector<f64> {
        &self.curr
    }

    pub fn previous(&self) -> &DVector<f64> {
        &self.prev
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }
}

/// Smallest `k` with `‖P x^k‖ ≥ threshold`, if reached within the trace.
pub fn escape_time(trace: &IterationTrace, projector: &Projector, threshold: f64) -> Option<usize> {
    trace.iterates.iter().position(|x| projector.norm(x) >= threshold)
}

/// Result of a run that stops at the first escape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeOutcome {
    /// Steps until `‖P x^k‖ ≥ threshold`; `None` if censored or divergent first.
    pub steps: Option<usize>,
    pub diverged: bool,
    /// `‖P x¹‖` at the start.
    pub initial_projection: f64,
}

/// Runs the framework until the projection reaches `threshold` or
/// `max_iters` steps have been taken, without storing the trajectory.
#[allow(clippy::too_many_arguments)]
pub fn run_until_escape<O: GradientOracle + ?Sized>(
    oracle: &O,
    alpha: f64,
    schedule: &MomentumSchedule,
    x0: &DVector<f64>,
    previous: PreviousPoint,
    projector: &Projector,
    threshold: f64,
    max_iters: usize,
) -> Result<EscapeOutcome> {
    if !(threshold > 0.0) {
        return Err(domain(format!("threshold must be positive, got {threshold}")));
    }
    let mut run = MomentumRun::new(oracle, alpha, schedule, x0, previous)?;
    let initial_projection = projector.norm(x0);
    let mut outcome = EscapeOutcome {
        steps: None,
        diverged: false,
        initial_projection,
    };
    if initial_projection >= threshold {
        outcome.steps = Some(0);
        return Ok(outcome);
    }
    while run.steps() < max_iters {
        if !run.step()? {
            outcome.diverged = true;
            break;
        }
        if projector.norm(run.current()) >= threshold {
            outcome.steps = Some(run.steps());
            break;
        }
    }
    Ok(outcome)
}
