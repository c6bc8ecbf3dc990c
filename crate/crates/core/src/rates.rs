//! Per-coordinate divergence rates of the accelerated framework on
//! negative-curvature directions of a quadratic.
//!
//! For `λ < 0` and `a = α|λ|`, the coordinate obeys
//! `x^{k+1} = x⁰ ∏_{m=0}^{k} (1 + b_m)` with `b_0 = 0` and
//! `b_k = (β_k + γ_k a)(1 − 1/(1 + b_{k−1})) + a`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::schedules::MomentumSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct RateSequence {
    pub lambda: f64,
    pub alpha: f64,
    pub schedule: MomentumSchedule,
    /// `b_0, …, b_K`.
    pub values: Vec<f64>,
}

impl RateSequence {
    pub fn k_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("b_0 is always present")
    }
}

pub fn b_sequence(lambda: f64, alpha: f64, schedule: &MomentumSchedule, k_max: usize) -> Result<RateSequence> {
    if !(lambda < 0.0) {
        return Err(domain(format!("rates are defined for lambda < 0, got {lambda}")));
    }
    if !(alpha > 0.0) {
        return Err(domain(format!("stepsize must be positive, got {alpha}")));
    }
    if k_max < 1 {
        return Err(domain("need K >= 1"));
    }
    let a = alpha * lambda.abs();
    let mut values = Vec::with_capacity(k_max + 1);
    values.push(0.0);
    let mut b = 0.0;
    for params in schedule.stream().take(k_max) {
        let (beta, gamma) = params?;
        b = (beta + gamma * a) * (1.0 - 1.0 / (1.0 + b)) + a;
        values.push(b);
    }
    Ok(RateSequence {
        lambda,
        alpha,
        schedule: *schedule,
        values,
    })
}

/// `x⁰ ∏_{m=0}^{k} (1 + b_m)`, the coordinate after `k` steps.
pub fn product_reconstruction(x0: f64, rate: &RateSequence, k: usize) -> Result<f64> {
    if k > rate.k_max() {
        return Err(domain(format!("k = {k} exceeds the sequence length K = {}", rate.k_max())));
    }
    Ok(rate.values[..=k].iter().fold(x0, |acc, b| acc * (1.0 + b)))
}

/// All reconstructions `k = 0..=K` at once.
pub fn product_series(x0: f64, rate: &RateSequence) -> Vec<f64> {
    rate.values
        .iter()
        .scan(x0, |acc, b| {
            *acc *= 1.0 + b;
            Some(*acc)
        })
        .collect()
}

/// Limit `b̄` of the rate sequence for schedules converging to `(β̄, γ̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLimit {
    pub bar_b: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta_bar: f64,
    pub gamma_bar: f64,
}

impl RateLimit {
    /// `|a + (1 + a + β̄ + γ̄a)b̄ − 2b̄ − b̄²|`.
    pub fn residual(&self) -> f64 {
        let a = self.alpha * self.lambda.abs();
        let b = self.bar_b;
        (a + (1.0 + a + self.beta_bar + self.gamma_bar * a) * b - 2.0 * b - b * b).abs()
    }
}

/// Nonnegative root of `b² + (1 − β̄ − a(1 + γ̄))b − a = 0`, `a = α|λ|`.
pub fn b_limit(lambda: f64, alpha: f64, beta_bar: f64, gamma_bar: f64) -> Result<RateLimit> {
    if !(lambda < 0.0) {
        return Err(domain(format!("rates are defined for lambda < 0, got {lambda}")));
    }
    if !(alpha > 0.0) {
        return Err(domain(format!("stepsize must be positive, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&beta_bar) || !(0.0..=1.0).contains(&gamma_bar) {
        return Err(domain(format!(
            "limits must lie in [0, 1], got beta={beta_bar}, gamma={gamma_bar}"
        )));
    }
    let a = alpha * lambda.abs();
    let c = beta_bar - 1.0 + a * (1.0 + gamma_bar);
    let root = (c * c + 4.0 * a).sqrt();
    let bar_b = if c >= 0.0 { 0.5 * (c + root) } else { 2.0 * a / (root - c) };
    Ok(RateLimit {
        bar_b,
        lambda,
        alpha,
        beta_bar,
        gamma_bar,
    })
}

/// Closed-form sufficient iteration counts for `|x₂| ≥ 1` on the toy saddle
/// from `x⁰ = (1, ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscapeBounds {
    /// `⌈|log ε|/(δα)⌉` for gradient descent.
    pub gd_bound: usize,
    /// Smallest `k` with `k + 1 ≥ log(2/ε)/√(3δ)` for heavy-ball with
    /// `α = 3`, `β = 1 − 3δ`.
    pub hb_bound: usize,
}

pub fn escape_bounds(delta: f64, alpha: f64, epsilon: f64) -> Result<EscapeBounds> {
    if !(delta > 0.0 && delta < 1.0) || !(epsilon > 0.0 && epsilon <= 1.0) || !(alpha > 0.0) {
        return Err(domain(format!(
            "need delta in (0,1), epsilon in (0,1], alpha > 0; got {delta}, {epsilon}, {alpha}"
        )));
    }
    let gd = epsilon.ln().abs() / (delta * alpha);
    let hb = (2.0 / epsilon).ln() / (3.0 * delta).sqrt();
    Ok(EscapeBounds {
        gd_bound: gd.ceil() as usize,
        hb_bound: (hb.ceil() as usize).saturating_sub(1),
    })
}

/// Smallest `k` with `p (1 + b̄)^k ≥ threshold`.
pub fn predicted_escape_iters(bar_b: f64, initial_projection: f64, threshold: f64) -> Result<usize> {
    if !(bar_b > 0.0) || !(initial_projection > 0.0) || !(threshold > 0.0) {
        return Err(domain(format!(
            "need positive rate, projection and threshold; got {bar_b}, {initial_projection}, {threshold}"
        )));
    }
    if initial_projection >= threshold {
        return Ok(0);
    }
    let growth = |k: usize| initial_projection * (1.0 + bar_b).powf(k as f64);
    let mut k = ((threshold / initial_projection).ln() / bar_b.ln_1p()).ceil().max(0.0) as usize;
    while growth(k) < threshold {
        k += 1;
    }
    while k > 0 && growth(k - 1) >= threshold {
        k -= 1;
    }
    Ok(k)
}

/// JSON summary of one rate computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub lambda: f64,
    pub alpha: f64,
    pub schedule: MomentumSchedule,
    pub b_final: f64,
    pub b_limit: f64,
    pub predicted_escape_iters: usize,
}

pub fn rate_report(
    lambda: f64,
    alpha: f64,
    schedule: &MomentumSchedule,
    k_max: usize,
    initial_projection: f64,
    threshold: f64,
) -> Result<RateReport> {
    let seq = b_sequence(lambda, alpha, schedule, k_max)?;
    let (bb, gb) = schedule.limits();
    let lim = b_limit(lambda, alpha, bb, gb)?;
    Ok(RateReport {
        lambda,
        alpha,
        schedule: *schedule,
        b_final: seq.last(),
        b_limit: lim.bar_b,
        predicted_escape_iters: predicted_escape_iters(lim.bar_b, initial_projection, threshold)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{run_accelerated, PreviousPoint};
    use crate::problems::QuadraticProblem;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;

    const SCHEDULES: [MomentumSchedule; 4] = [
        MomentumSchedule::Nesterov,
        MomentumSchedule::Attouch { eta: 2.0 },
        MomentumSchedule::Constant { beta: 0.9, gamma: 0.0 },
        MomentumSchedule::Constant { beta: 0.6, gamma: 0.6 },
    ];

    #[test]
    fn first_terms() {
        for s in SCHEDULES {
            let r = b_sequence(-0.2, 0.5, &s, 5).unwrap();
            assert_eq!(r.values[0], 0.0);
            assert_eq!(r.values[1], 0.1);
        }
        let gd = b_sequence(-0.3, 0.5, &MomentumSchedule::gradient_descent(), 50).unwrap();
        assert!(gd.values[1..].iter().all(|&b| b == 0.15));
    }

    #[test]
    fn rejects_nonnegative_lambda() {
        assert!(b_sequence(0.0, 1.0, &MomentumSchedule::Nesterov, 3).is_err());
        assert!(b_limit(0.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn nesterov_monotone_and_tracking() {
        let r = b_sequence(-0.01, 1.0, &MomentumSchedule::Nesterov, 10_000).unwrap();
        assert!(r.values[1..].windows(2).all(|w| w[1] >= w[0]));
        let lim = b_limit(-0.01, 1.0, 1.0, 1.0).unwrap();
        assert!(r.last() < lim.bar_b);
        // Against the fixed point for the current parameters the lag is tiny.
        let (bk, gk) = MomentumSchedule::Nesterov.params(10_000).unwrap();
        let frozen = b_limit(-0.01, 1.0, bk, gk).unwrap();
        assert!((r.last() - frozen.bar_b).abs() <= 1e-6);
    }

    #[test]
    fn constant_schedules_converge_geometrically() {
        for (bb, gb) in [(0.9, 0.0), (0.5, 0.5), (0.99, 0.0)] {
            let s = MomentumSchedule::Constant { beta: bb, gamma: gb };
            let r = b_sequence(-0.01, 1.0, &s, 10_000).unwrap();
            let lim = b_limit(-0.01, 1.0, bb, gb).unwrap();
            assert!((r.last() - lim.bar_b).abs() <= 1e-12);
        }
    }

    #[test]
    fn reconstruction_small_k() {
        let r = b_sequence(-0.05, 0.8, &MomentumSchedule::Nesterov, 10).unwrap();
        assert_eq!(product_reconstruction(2.5, &r, 0).unwrap(), 2.5);
        assert_abs_diff_eq!(product_reconstruction(2.5, &r, 1).unwrap(), 1.04 * 2.5, epsilon = 1e-15);
        assert!(product_reconstruction(2.5, &r, 11).is_err());
        let series = product_series(2.5, &r);
        for (k, &x) in series.iter().enumerate() {
            assert_eq!(x, product_reconstruction(2.5, &r, k).unwrap());
        }
    }

    #[test]
    fn reconstruction_matches_simulation() {
        let lambda = -0.01;
        let alpha = 0.99;
        let p = QuadraticProblem::diagonal(vec![1.0, 0.3, lambda]).unwrap();
        let x0 = DVector::from_column_slice(&[0.2, -0.1, 0.05]);
        let t = run_accelerated(&p, alpha, &MomentumSchedule::Nesterov, &x0, PreviousPoint::EqualToX0, 200).unwrap();
        let r = b_sequence(lambda, alpha, &MomentumSchedule::Nesterov, 200).unwrap();
        for (k, rec) in product_series(0.05, &r).into_iter().enumerate() {
            let sim = t.iterates[k][2];
            assert!((rec - sim).abs() <= 1e-10 * sim.abs(), "k={k}: {rec} vs {sim}");
        }
    }

    #[test]
    fn limit_special_cases() {
        let a: f64 = 0.01;
        let acc = b_limit(-0.01, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(acc.bar_b, a + a.sqrt() * (1.0 + a).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(acc.bar_b, 0.1104988, epsilon = 1e-7);
        let hb = b_limit(-0.01, 1.0, 1.0 - a, 0.0).unwrap();
        assert_abs_diff_eq!(hb.bar_b, a.sqrt(), epsilon = 1e-15);
        let gd = b_limit(-0.01, 1.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(gd.bar_b, a, epsilon = 1e-15);
        for l in [acc, hb, gd] {
            assert!(l.residual() <= 1e-12);
        }
    }

    #[test]
    fn bounds_examples() {
        let b = escape_bounds(0.02, 1.0, 0.01).unwrap();
        assert_eq!(b.gd_bound, 231);
        assert_eq!(b.hb_bound, 21);
        assert_eq!(escape_bounds(0.02, 1.0, 1.0).unwrap().gd_bound, 0);
        assert!(escape_bounds(1.5, 1.0, 0.1).is_err());
    }

    #[test]
    fn predicted_iters_examples() {
        assert_eq!(predicted_escape_iters(0.3, 1.0, 1.0).unwrap(), 0);
        assert_eq!(predicted_escape_iters(0.110499, 0.1, 100.0).unwrap(), 66);
        let direct = (1000f64.ln() / 1.110499f64.ln()).ceil() as usize;
        assert_eq!(direct, 66);
        assert!(predicted_escape_iters(0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn report_json_keys() {
        let r = rate_report(-0.01, 0.99, &MomentumSchedule::Nesterov, 100, 0.1, 100.0).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let keys = ["\"lambda\"", "\"alpha\"", "\"schedule\"", "\"b_final\"", "\"b_limit\"", "\"predicted_escape_iters\""];
        let mut last = 0;
        for k in keys {
            let pos = s.find(k).unwrap();
            assert!(pos >= last);
            last = pos;
        }
    }

    proptest! {
        #[test]
        fn monotone_and_floor(log_a in -4.0f64..0.0, which in 0usize..4) {
            let a = 10f64.powf(log_a);
            let s = SCHEDULES[which];
            let r = b_sequence(-a, 1.0, &s, 400).unwrap();
            for w in r.values[1..].windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            prop_assert!(r.values[1..].iter().all(|&b| b >= a));
        }

        #[test]
        fn dominance(log_a in -6.0f64..=0.0) {
            let a = 10f64.powf(log_a);
            let acc = b_limit(-a, 1.0, 1.0, 1.0).unwrap().bar_b;
            prop_assert!(acc >= a.sqrt());
            prop_assert!(a.sqrt() >= a);
        }

        #[test]
        fn limit_residual(log_a in -6.0f64..1.0, bb in 0.0f64..=1.0, gb in 0.0f64..=1.0) {
            let a = 10f64.powf(log_a);
            let l = b_limit(-a, 1.0, bb, gb).unwrap();
            prop_assert!(l.bar_b >= 0.0);
            prop_assert!(l.residual() <= 1e-12 * (1.0 + l.bar_b * l.bar_b));
        }
    }
}
