//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion
//! and exits nonzero if any fails.
//!
//! Run with `cargo test -p accel-saddle --test acceptance`. Pass `-- --full`
//! to include the n = 1000 table cells.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use accel_saddle::experiments::{divergence_table, TableMethod, TableSpec};
use accel_saddle::optimizers::{
    escape_time, run_accelerated, run_gradient_descent, run_heavy_ball, MomentumRun, PreviousPoint,
};
use accel_saddle::problems::{random_problem, sample_problem, toy_problem, Projector, QuadraticProblem};
use accel_saddle::rates::{b_limit, b_sequence, escape_bounds, product_reconstruction};
use accel_saddle::rng;
use accel_saddle::schedules::{verify_tk_properties, MomentumSchedule};
use accel_saddle::spectral::{apply_g, block_eigenvalues, invert_g, param_conditions};
use nalgebra::DVector;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

fn gd_closed_form() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut r = rng::stream(seed, 0);
        let p = sample_problem(&mut r, 20, 2, 1e-2).unwrap();
        let x0 = rng::gaussian_vector(&mut r, 20);
        let alpha = 0.5 / p.lipschitz();
        let t = run_gradient_descent(&p, alpha, &x0, 100).unwrap();
        for (k, x) in t.iterates.iter().enumerate() {
            for (i, &lam) in p.eigenvalues().iter().enumerate() {
                let expect = (1.0 - alpha * lam).powi(k as i32) * x0[i];
                worst = worst.max(rel(x[i], expect));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max rel err {worst:.2e} (tol 1e-12), {:.0} ms", elapsed.as_secs_f64() * 1e3),
    )
}

fn product_formula() -> Outcome {
    let schedules = [
        MomentumSchedule::Nesterov,
        MomentumSchedule::Attouch { eta: 2.0 },
        MomentumSchedule::Constant { beta: 0.9, gamma: 0.5 },
    ];
    let x0 = 1e-3;
    let mut worst = 0.0f64;
    for s in &schedules {
        for lambda in [-1e-3, -1e-2, -0.1] {
            for alpha in [0.1, 0.99] {
                let p = QuadraticProblem::diagonal(vec![1.0, lambda]).unwrap();
                let start = DVector::from_column_slice(&[0.3, x0]);
                let t = run_accelerated(&p, alpha, s, &start, PreviousPoint::EqualToX0, 200).unwrap();
                let rate = b_sequence(lambda, alpha, s, 200).unwrap();
                for k in 0..=200 {
                    let pred = product_reconstruction(x0, &rate, k).unwrap();
                    worst = worst.max(rel(t.iterates[k][1], pred));
                }
            }
        }
    }
    outcome(worst <= 1e-10, format!("max rel err {worst:.2e} over 18 configurations (tol 1e-10)"))
}

fn spectral_trichotomy() -> Outcome {
    let mut r = rng::from_seed(3);
    let lambda1: f64 = 1.0;
    let (mut neg, mut zero, mut pos) = (0, 0, 0);
    let mut failures = Vec::new();
    let mut worst_identity = 0.0f64;
    let mut worst_zero = 0.0f64;
    for draw in 0..1000 {
        let alpha = r.random_range(1e-3..4.0 / lambda1);
        let lo = (-1.0 + alpha * lambda1 / 2.0).max(0.0);
        let beta = r.random_range(lo..1.0);
        if beta <= lo || !param_conditions(alpha, beta, lambda1).ok {
            continue;
        }
        let lambda = match draw % 3 {
            0 => r.random_range(-1.0..0.0),
            1 => 0.0,
            _ => r.random_range(0.0..=lambda1),
        };
        let pair = block_eigenvalues(lambda, alpha, beta);
        let tr = pair.trace() - (1.0 + beta - alpha * lambda);
        let det = pair.det() - beta;
        worst_identity = worst_identity.max(tr.norm()).max(det.norm());
        let (hi, lo_) = (pair.mu_hi.norm(), pair.mu_lo.norm());
        if lambda > 0.0 {
            pos += 1;
            if !(hi < 1.0 && lo_ < 1.0) {
                failures.push(format!("λ={lambda} α={alpha} β={beta}: |μ| = {hi}, {lo_}"));
            }
        } else if lambda == 0.0 {
            zero += 1;
            let d = (pair.mu_hi.re - 1.0).abs().max((pair.mu_lo.re - beta).abs());
            let d = d.max(pair.mu_hi.im.abs()).max(pair.mu_lo.im.abs());
            worst_zero = worst_zero.max(d);
        } else {
            neg += 1;
            let ok = pair.is_real && pair.mu_lo.re > 0.0 && pair.mu_lo.re < 1.0 && pair.mu_hi.re > 1.0;
            if !ok {
                failures.push(format!("λ={lambda} α={alpha} β={beta}: μ = {}, {}", pair.mu_hi, pair.mu_lo));
            }
        }
    }
    let count = neg + zero + pos;
    let pass = count == 1000 && failures.is_empty() && worst_identity <= 1e-12 && worst_zero <= 1e-12;
    let mut detail = format!(
        "{count} draws ({neg} neg, {zero} zero, {pos} pos), root identity err {worst_identity:.1e}, λ=0 err {worst_zero:.1e}"
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!(", {} failures, e.g. {f}", failures.len()));
    }
    outcome(pass, detail)
}

fn toy_escape_bounds() -> Outcome {
    let start = Instant::now();
    let (delta, eps) = (0.02, 0.01);
    let p = toy_problem(delta).unwrap();
    let axis = Projector::Coordinates(vec![1]);
    let x0 = DVector::from_column_slice(&[1.0, eps]);

    let gd_bound = escape_bounds(delta, 1.0, eps).unwrap().gd_bound;
    let gd = run_gradient_descent(&p, 1.0, &x0, 1000).unwrap();
    let gd_escape = escape_time(&gd, &axis, 1.0);

    let alpha = 3.0;
    let hb_bound = escape_bounds(delta, alpha, eps).unwrap().hb_bound;
    let hb = run_heavy_ball(&p, alpha, 1.0 - 3.0 * delta, &x0, PreviousPoint::EqualToX0, 1000).unwrap();
    let hb_escape = escape_time(&hb, &axis, 1.0);

    let growth = 1.0 + (3.0 * delta).sqrt();
    let mut lower_ok = true;
    let mut min_margin = f64::INFINITY;
    for k in 0..=hb_escape.unwrap_or(0) {
        let bound = 0.5 * eps * growth.powi(k as i32 + 1);
        let x2 = hb.iterates[k][1];
        min_margin = min_margin.min((x2 - bound) / bound);
        if x2 < bound * (1.0 - 1e-12) {
            lower_ok = false;
        }
    }
    let elapsed = start.elapsed();
    let gd_ok = gd_escape.is_some_and(|k| k <= gd_bound);
    let hb_ok = hb_escape.is_some_and(|k| k <= hb_bound);
    outcome(
        gd_ok && hb_ok && lower_ok && elapsed < Duration::from_secs(1),
        format!(
            "GD escape {gd_escape:?} vs bound {gd_bound} [{}]; heavy-ball escape {hb_escape:?} vs bound {hb_bound} [{}]; \
             lower bound [{}] (min rel margin {min_margin:.1e}); {:.1} ms",
            ok(gd_ok),
            ok(hb_ok),
            ok(lower_ok),
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "violated"
    }
}

fn rate_limits() -> Outcome {
    let k_max = 10_000;
    let mut conv_ok = true;
    let mut parts = Vec::new();
    for a in [1e-4, 1e-2, 1.0] {
        for (name, s) in [
            ("nesterov", MomentumSchedule::Nesterov),
            ("attouch:2", MomentumSchedule::Attouch { eta: 2.0 }),
        ] {
            let seq = b_sequence(-a, 1.0, &s, k_max).unwrap();
            let (bb, gb) = s.limits();
            let lim = b_limit(-a, 1.0, bb, gb).unwrap().bar_b;
            let gap = (seq.last() - lim).abs();
            conv_ok &= gap <= 1e-6;
            parts.push(format!("{name} a={a:e}: {gap:.1e}"));
        }
    }
    let mut special = 0.0f64;
    for a in [1e-4, 1e-2, 1.0, 0.37] {
        let s = |bb: f64, gb: f64| b_limit(-a, 1.0, bb, gb).unwrap().bar_b;
        special = special.max(rel(s(1.0, 1.0), a + a.sqrt() * (1.0 + a).sqrt()));
        if a < 1.0 {
            special = special.max(rel(s(1.0 - a, 0.0), a.sqrt()));
        }
        special = special.max(rel(s(0.0, 0.0), a));
    }
    let special_ok = special <= 1e-12;
    outcome(
        conv_ok && special_ok,
        format!(
            "|b_K - b̄| at K=1e4 [{}]: {}; special cases [{}] max rel err {special:.1e}",
            ok(conv_ok),
            parts.join(", "),
            ok(special_ok)
        ),
    )
}

struct TableTarget {
    n: usize,
    sd_lo: f64,
    sd_hi: f64,
    ag_lo: f64,
    ag_hi: f64,
}

fn check_table(n: usize, targets: [TableTarget; 2], ratio_checks: bool) -> Outcome {
    let start = Instant::now();
    let spec = TableSpec {
        ns: vec![n],
        deltas: vec![1e-2, 1e-3],
        trials: 100,
        seed: 1,
        ..TableSpec::default()
    };
    let res = divergence_table(&spec).unwrap();
    let elapsed = start.elapsed();
    let mut pass = res.warnings.is_empty();
    let mut parts = Vec::new();
    let mut avgs = Vec::new();
    for (delta, t) in [1e-2, 1e-3].into_iter().zip(&targets) {
        debug_assert_eq!(t.n, n);
        let sd = res.row(n, delta, TableMethod::SteepestDescent).unwrap().avg_iters;
        let ag = res.row(n, delta, TableMethod::AcceleratedGradient).unwrap().avg_iters;
        let bb = res.row(n, delta, TableMethod::BbarRate).unwrap().avg_iters;
        let sd_ok = (t.sd_lo..=t.sd_hi).contains(&sd);
        let ag_ok = (t.ag_lo..=t.ag_hi).contains(&ag);
        pass &= sd_ok && ag_ok;
        parts.push(format!(
            "δ={delta:e}: SD {sd:.1} in [{:.1}, {:.1}] [{}], AG {ag:.1} in [{:.1}, {:.1}] [{}], b̄ {bb:.1}",
            t.sd_lo,
            t.sd_hi,
            ok(sd_ok),
            t.ag_lo,
            t.ag_hi,
            ok(ag_ok)
        ));
        avgs.push((sd, ag));
    }
    let ordered = res
        .trials
        .iter()
        .all(|t| matches!((t.accelerated_gradient, t.steepest_descent), (Some(a), Some(s)) if a < s));
    pass &= ordered;
    parts.push(format!("AG < SD every trial [{}]", ok(ordered)));
    if ratio_checks {
        let sd_ratio = avgs[1].0 / avgs[0].0;
        let ag_ratio = avgs[1].1 / avgs[0].1;
        let r_ok = (7.0..=13.0).contains(&sd_ratio) && (2.5..=5.0).contains(&ag_ratio);
        pass &= r_ok;
        parts.push(format!("δ-ratios SD {sd_ratio:.2} AG {ag_ratio:.2} [{}]", ok(r_ok)));
        let t_ok = elapsed < Duration::from_secs(300);
        pass &= t_ok;
    }
    parts.push(format!("{:.1} s", elapsed.as_secs_f64()));
    outcome(pass, parts.join("; "))
}

fn table_desk_scale() -> Outcome {
    check_table(
        100,
        [
            TableTarget {
                n: 100,
                sd_lo: 300.0,
                sd_hi: 460.0,
                ag_lo: 55.0,
                ag_hi: 90.0,
            },
            TableTarget {
                n: 100,
                sd_lo: 2700.0,
                sd_hi: 5000.0,
                ag_lo: 190.0,
                ag_hi: 310.0,
            },
        ],
        true,
    )
}

fn table_large() -> Outcome {
    let band = |x: f64| (0.7 * x, 1.3 * x);
    let (a, b) = (band(582.0), band(99.0));
    let (c, d) = (band(5775.0), band(332.0));
    check_table(
        1000,
        [
            TableTarget {
                n: 1000,
                sd_lo: a.0,
                sd_hi: a.1,
                ag_lo: b.0,
                ag_hi: b.1,
            },
            TableTarget {
                n: 1000,
                sd_lo: c.0,
                sd_hi: c.1,
                ag_lo: d.0,
                ag_hi: d.1,
            },
        ],
        false,
    )
}

fn tk_suite() -> Outcome {
    let r = verify_tk_properties(100_000).unwrap();
    let pass = r.passed() && r.identity_max_err <= 1e-9 && r.final_ratio > 0.9999;
    outcome(
        pass,
        format!(
            "K=1e5: identity err {:.1e}, lower bound [{}], monotone [{}], ratio bounds [{}], final ratio {:.6}",
            r.identity_max_err,
            ok(r.bound_ok),
            ok(r.ratio_monotone),
            ok(r.ratio_bounds_ok),
            r.final_ratio
        ),
    )
}

fn saddle_avoidance() -> Outcome {
    let (delta, alpha, beta, k_max) = (0.02, 0.75, 0.985, 10_000);
    let p = toy_problem(delta).unwrap();
    let schedule = MomentumSchedule::heavy_ball(beta);
    let mut converged = 0;
    for trial in 0..1000u64 {
        let mut r = rng::stream(8, trial);
        let x0 = rng::unit_sphere(&mut r, 2);
        let prev = PreviousPoint::Perturbed {
            eps: 1e-6,
            seed: 1_000_000 + trial,
        };
        let mut run = MomentumRun::new(&p, alpha, &schedule, &x0, prev).unwrap();
        while run.steps() < k_max && run.step().unwrap() {}
        if !run.diverged() && run.current().norm() <= 1e-8 {
            converged += 1;
        }
    }
    let mut axis_worst = 0.0f64;
    for c in [0.25, 1.0, -3.0] {
        let x0 = DVector::from_column_slice(&[c, 0.0]);
        let t = run_heavy_ball(&p, alpha, beta, &x0, PreviousPoint::EqualToX0, k_max).unwrap();
        axis_worst = axis_worst.max(t.last().norm());
    }
    outcome(
        converged == 0 && axis_worst <= 1e-8,
        format!("{converged}/1000 random runs reached ‖x^K‖ ≤ 1e-8; axis starts end at ‖x^K‖ ≤ {axis_worst:.1e}"),
    )
}

fn diffeomorphism() -> Outcome {
    let p = QuadraticProblem::rotated(random_problem(10, 3, 0.05, 11).unwrap().eigenvalues().to_vec(), 12).unwrap();
    let (alpha, beta) = (0.8 / p.lipschitz(), 0.9);
    let mut r = rng::from_seed(13);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let z1 = rng::gaussian_vector(&mut r, 10);
        let z2 = rng::gaussian_vector(&mut r, 10);
        let (y1, y2) = apply_g(&p, alpha, beta, &z1, &z2).unwrap();
        let (w1, w2) = invert_g(&p, alpha, beta, &y1, &y2).unwrap();
        let err = ((w1 - &z1).norm_squared() + (w2 - &z2).norm_squared()).sqrt()
            / (z1.norm_squared() + z2.norm_squared()).sqrt();
        worst = worst.max(err);
    }
    // Critical points: the origin, and the kernel of a singular Hessian.
    let singular = QuadraticProblem::diagonal(vec![1.0, 0.0, -0.5]).unwrap();
    let mut fixed = true;
    for (prob, x) in [
        (&p, DVector::zeros(10)),
        (&singular, DVector::from_column_slice(&[0.0, 2.5, 0.0])),
    ] {
        let (a, b) = apply_g(prob, alpha, beta, &x, &x).unwrap();
        fixed &= a == x && b == x;
    }
    outcome(
        worst <= 1e-10 && fixed,
        format!("G⁻¹∘G max rel err {worst:.1e} over 100 points (tol 1e-10); critical points fixed [{}]", ok(fixed)),
    )
}

fn main() -> ExitCode {
    let full = std::env::args().any(|a| a == "--full");
    let mut criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1", gd_closed_form),
        ("2", product_formula),
        ("3", spectral_trichotomy),
        ("4", toy_escape_bounds),
        ("5", rate_limits),
        ("6", table_desk_scale),
        ("7", tk_suite),
        ("8", saddle_avoidance),
        ("9", diffeomorphism),
    ];
    if full {
        criteria.insert(6, ("6 (n=1000)", table_large));
    }
    let mut failed = 0;
    for (id, f) in criteria {
        let o = f();
        println!("criterion {id}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{failed} criterion check(s) failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
