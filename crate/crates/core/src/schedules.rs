//! Momentum schedules `(β_k, γ_k)` for the accelerated framework.
//!
//! `β_k` weights the momentum step and `γ_k` shifts the point where the
//! gradient is evaluated. Both must lie in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Rule producing `(β_k, γ_k)` for `k = 1, 2, …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MomentumSchedule {
    /// Fixed `(β, γ)`.
    Constant { beta: f64, gamma: f64 },
    /// Heavy-ball with Polyak's constant `β = (√L − √m)/(√L + √m)`, `γ = 0`.
    Polyak {
        m: f64,
        #[serde(rename = "L")]
        l: f64,
    },
    /// `β_k = γ_k = (t_{k−1} − 1)/t_k` with Nesterov's `t_k`.
    Nesterov,
    /// `β_k = γ_k = (k − 1)/(k + η + 1)`.
    Attouch { eta: f64 },
    /// Heavy-ball on the toy saddle: `γ = 0`, `β = 1 − αδ − γ̂`.
    Toy {
        alpha: f64,
        delta: f64,
        gamma_hat: f64,
    },
}

impl MomentumSchedule {
    pub fn gradient_descent() -> Self {
        MomentumSchedule::Constant {
            beta: 0.0,
            gamma: 0.0,
        }
    }

    pub fn heavy_ball(beta: f64) -> Self {
        MomentumSchedule::Constant { beta, gamma: 0.0 }
    }

    /// `(β_k, γ_k)` for a single `k ≥ 1`. For [`Nesterov`](Self::Nesterov)
    /// this recomputes `t_0..t_k`; use [`stream`](Self::stream) inside loops.
    pub fn params(&self, k: usize) -> Result<(f64, f64)> {
        if k == 0 {
            return Err(domain("schedule index starts at k = 1"));
        }
        let raw = match *self {
            MomentumSchedule::Nesterov => {
                let t = nesterov_t(k);
                let b = tk_ratio(t.values[k - 1], t.values[k]);
                (b, b)
            }
            _ => self.closed_form(k),
        };
        check_unit(raw, self, k)
    }

    /// Streaming generator of `(β_k, γ_k)`, `k = 1, 2, …`.
    pub fn stream(&self) -> ParamStream {
        ParamStream {
            schedule: *self,
            k: 0,
            t_prev: 1.0,
        }
    }

    fn closed_form(&self, k: usize) -> (f64, f64) {
        match *self {
            MomentumSchedule::Constant { beta, gamma } => (beta, gamma),
            MomentumSchedule::Polyak { m, l } => (polyak_beta(m, l), 0.0),
            MomentumSchedule::Attouch { eta } => {
                let k = k as f64;
                let b = (k - 1.0) / (k + eta + 1.0);
                (b, b)
            }
            MomentumSchedule::Toy {
                alpha,
                delta,
                gamma_hat,
            } => (1.0 - alpha * delta - gamma_hat, 0.0),
            MomentumSchedule::Nesterov => unreachable!("nesterov is stateful"),
        }
    }

    /// Limits `(β̄, γ̄)` as `k → ∞`.
    pub fn limits(&self) -> (f64, f64) {
        match *self {
            MomentumSchedule::Nesterov | MomentumSchedule::Attouch { .. } => (1.0, 1.0),
            _ => self.closed_form(1),
        }
    }

    /// Whether both sequences are nondecreasing in `k`.
    pub fn is_nondecreasing(&self) -> bool {
        match *self {
            MomentumSchedule::Attouch { eta } => eta > -2.0,
            _ => true,
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match *self {
            MomentumSchedule::Constant { beta, gamma } => format!("constant:{beta},{gamma}"),
            MomentumSchedule::Polyak { m, l } => format!("polyak:{m},{l}"),
            MomentumSchedule::Nesterov => "nesterov".to_string(),
            MomentumSchedule::Attouch { eta } => format!("attouch:{eta}"),
            MomentumSchedule::Toy {
                alpha,
                delta,
                gamma_hat,
            } => format!("toy:{alpha},{delta},{gamma_hat}"),
        }
    }
}

fn check_unit((b, g): (f64, f64), s: &MomentumSchedule, k: usize) -> Result<(f64, f64)> {
    let ok = |v: f64| (0.0..=1.0).contains(&v);
    if ok(b) && ok(g) {
        Ok((b, g))
    } else {
        Err(Error::Config(format!(
            "schedule {} gives beta={b}, gamma={g} at k={k}; both must lie in [0, 1]",
            s.label()
        )))
    }
}

/// Iterator over `(β_k, γ_k)` starting at `k = 1`.
#[derive(Debug, Clone)]
pub struct ParamStream {
    schedule: MomentumSchedule,
    k: usize,
    t_prev: f64,
}

impl ParamStream {
    /// Index of the next value to be produced.
    pub fn next_k(&self) -> usize {
        self.k + 1
    }
}

impl Iterator for ParamStream {
    type Item = Result<(f64, f64)>;

    fn next(&mut self) -> Option<Self::Item> {
        self.k += 1;
        let raw = match self.schedule {
            MomentumSchedule::Nesterov => {
                let t = tk_next(self.t_prev);
                let b = tk_ratio(self.t_prev, t);
                self.t_prev = t;
                (b, b)
            }
            _ => self.schedule.closed_form(self.k),
        };
        Some(check_unit(raw, &self.schedule, self.k))
    }
}

/// `t_k = (√(4t_{k−1}² + 1) + 1)/2`.
fn tk_next(t: f64) -> f64 {
    ((4.0 * t * t + 1.0).sqrt() + 1.0) / 2.0
}

fn tk_ratio(t_prev: f64, t: f64) -> f64 {
    (t_prev - 1.0) / t
}

/// Nesterov's sequence `t_0 = 1, …, t_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TkSequence {
    pub values: Vec<f64>,
}

impl TkSequence {
    /// `(t_{k−1} − 1)/t_k` for `k ≥ 1`.
    pub fn ratio(&self, k: usize) -> f64 {
        tk_ratio(self.values[k - 1], self.values[k])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn nesterov_t(k_max: usize) -> TkSequence {
    let mut values = Vec::with_capacity(k_max + 1);
    values.push(1.0);
    for k in 1..=k_max {
        values.push(tk_next(values[k - 1]));
    }
    TkSequence { values }
}

/// Polyak's heavy-ball constants for a strongly convex quadratic with
/// spectrum in `[m, L]`: `α = 4/(√L + √m)²`, `β = (√L − √m)/(√L + √m)`.
pub fn polyak_params(m: f64, l: f64) -> Result<(f64, f64)> {
    if !(m > 0.0) || !(l >= m) || !l.is_finite() {
        return Err(domain(format!("polyak parameters need 0 < m <= L, got m={m}, L={l}")));
    }
    let (sl, sm) = (l.sqrt(), m.sqrt());
    Ok((4.0 / ((sl + sm) * (sl + sm)), polyak_beta(m, l)))
}

fn polyak_beta(m: f64, l: f64) -> f64 {
    let (sl, sm) = (l.sqrt(), m.sqrt());
    (sl - sm) / (sl + sm)
}

/// Outcome of the numerical checks on `t_k` and its ratio sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TkReport {
    pub k_max: usize,
    /// `max_k |t_k² − t_k − t_{k−1}²| / t_k²`.
    pub identity_max_err: f64,
    pub identity_ok: bool,
    /// `t_k ≥ (k+1)/2` for every `k`.
    pub bound_ok: bool,
    /// Ratio `(t_{k−1} − 1)/t_k` nonnegative and nondecreasing.
    pub ratio_monotone: bool,
    /// Ratio within `[1 − 2/(t_{k−1} + 1), 1]` for every `k`.
    pub ratio_bounds_ok: bool,
    /// Ratio at `k = K`.
    pub final_ratio: f64,
    /// `1 − ratio` at `k = K`.
    pub ratio_gap: f64,
}

impl TkReport {
    pub fn passed(&self) -> bool {
        self.identity_ok && self.bound_ok && self.ratio_monotone && self.ratio_bounds_ok
    }
}

pub const TK_IDENTITY_TOL: f64 = 1e-9;

pub fn verify_tk_properties(k_max: usize) -> Result<TkReport> {
    if k_max < 2 {
        return Err(domain(format!("need K >= 2, got {k_max}")));
    }
    let t = nesterov_t(k_max);
    let mut identity_max_err = 0.0f64;
    let mut bound_ok = true;
    let mut ratio_monotone = true;
    let mut ratio_bounds_ok = true;
    let mut prev_ratio = f64::NEG_INFINITY;
    for k in 1..=k_max {
        let (tp, tk) = (t.values[k - 1], t.values[k]);
        identity_max_err = identity_max_err.max(((tk * tk - tk) - tp * tp).abs() / (tk * tk));
        bound_ok &= tk >= (k as f64 + 1.0) / 2.0;
        let r = t.ratio(k);
        ratio_monotone &= r >= 0.0 && r >= prev_ratio;
        ratio_bounds_ok &= r >= 1.0 - 2.0 / (tp + 1.0) && r <= 1.0;
        prev_ratio = r;
    }
    Ok(TkReport {
        k_max,
        identity_max_err,
        identity_ok: identity_max_err <= TK_IDENTITY_TOL,
        bound_ok,
        ratio_monotone,
        ratio_bounds_ok,
        final_ratio: prev_ratio,
        ratio_gap: 1.0 - prev_ratio,
    })
}
