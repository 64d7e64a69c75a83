use std::f64::consts::PI;

use olla_core::baselines::{cghmc_step, clangevin_step, HmcState, NewtonConfig, SlackState};
use olla_core::field::{Affine, SquaredDistance, Zero};
use olla_core::olla::{olla_step, trace_terms_full, trace_terms_hutch, ChainState, StepOutcome};
use olla_core::sampler::{run_chain, SamplerConfig, Schedule};
use olla_core::{ConstraintSet, OllaConfig, Problem, RngStream};
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::Arc;

fn sphere(d: usize) -> ConstraintSet {
    ConstraintSet::empty().with_equality(SquaredDistance::sphere(vec![0.0; d], 1.0))
}

fn on_sphere(d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = 1.0;
    x
}

#[test]
fn normals_pass_kolmogorov_smirnov() {
    let mut rng = RngStream::new(31, 4);
    let n = 20_000;
    let mut z: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    z.sort_by(f64::total_cmp);
    let phi = Normal::new(0.0, 1.0).unwrap();
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = phi.cdf(v);
            (c - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - c)
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic
    assert!(d < 1.63 / (n as f64).sqrt(), "KS statistic {d}");
}

#[test]
fn hutchinson_is_unbiased_for_the_sphere_trace() {
    let d = 10;
    let cs = sphere(d);
    let x = on_sphere(d);
    let frame = cs.frame(&x, 1e-10).unwrap();
    // ∇²h = 2I and Π has rank d − 1
    let exact = trace_terms_full(&cs, &frame, &x).unwrap()[0];
    assert!((exact - 2.0 * (d - 1) as f64).abs() < 1e-12);

    let mut rng = RngStream::new(5, 0);
    let n = 4000;
    let est: Vec<f64> = (0..n)
        .map(|_| trace_terms_hutch(&cs, &frame, &x, 1, &mut rng).unwrap()[0])
        .collect();
    let mean = est.iter().sum::<f64>() / n as f64;
    let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - exact).abs() < 4.0 * se, "mean {mean}, se {se}");
    // Gaussian probes: Var = 2‖ΠH‖_F² = 8(d − 1)
    assert!(
        (var / (8.0 * (d - 1) as f64) - 1.0).abs() < 0.15,
        "variance {var}"
    );
}

#[test]
fn linear_equality_decays_exactly_geometrically() {
    let d = 4;
    let cs = ConstraintSet::empty().with_equality(Affine::coordinate(d, 0, 1.0, 0.0));
    let cfg = OllaConfig::full_trace(10.0, 1.0, 0.01);
    let mut s = ChainState::new(vec![0.7, 0.3, -1.0, 2.0], RngStream::new(3, 0));
    for k in 1..=200 {
        assert_eq!(
            olla_step(&mut s, &cs, &Zero, &cfg).unwrap(),
            StepOutcome::Advanced
        );
        let want = 0.7 * 0.9f64.powi(k);
        assert!(
            ((s.x[0] - want) / want).abs() < 1e-12,
            "step {k}: {} vs {want}",
            s.x[0]
        );
    }
    // the tangential coordinates did diffuse
    assert_ne!(s.x[1], 0.3);
}

#[test]
fn inequality_lands_after_the_predicted_time() {
    let cs = ConstraintSet::empty().with_inequality(Affine::coordinate(2, 0, 1.0, 0.0));
    let (alpha, eps, dt) = (10.0, 1.0, 1e-4);
    let cfg = OllaConfig::full_trace(alpha, eps, dt);
    let mut s = ChainState::new(vec![1.0, 0.0], RngStream::new(8, 0));
    let mut first = None;
    let (mut excess, mut after) = (0.0, 0usize);
    for k in 1..=3000 {
        olla_step(&mut s, &cs, &Zero, &cfg).unwrap();
        match first {
            None if s.x[0] <= 0.0 => first = Some(k),
            Some(_) => {
                excess += s.x[0].max(0.0);
                after += 1;
            }
            None => {}
        }
    }
    // (g + ε) decays by (1 − αΔt) per step from 2ε
    let predicted = (2.0f64).ln() / -(1.0 - alpha * dt).ln();
    let k = first.expect("never landed") as f64;
    assert!(
        (k - predicted).abs() <= 1.0,
        "landed at {k}, predicted {predicted}"
    );
    // single noise kicks may cross the boundary, but are landed again at once
    let mean_excess = excess / after as f64;
    assert!(
        mean_excess <= alpha * eps * dt * 10.0,
        "mean g⁺ after landing {mean_excess}"
    );
}

#[test]
fn olla_samples_the_uniform_sphere() {
    let problem = Problem {
        name: "sphere".into(),
        dim: 3,
        potential: Arc::new(Zero),
        constraints: sphere(3),
        feasible_point: on_sphere(3),
        init_noise: 0.0,
        observables: vec![],
    };
    let cfg = SamplerConfig::Olla(OllaConfig::full_trace(50.0, 1.0, 1e-3));
    let sched = Schedule::new(1500, 1499, 1).unwrap();
    let chains = 300;
    let (mut z, mut z2) = (0.0, 0.0);
    for c in 0..chains {
        let run = run_chain(&problem, &cfg, &sched, RngStream::new(17, c)).unwrap();
        let x = &run.retained[0].x;
        z += x[2];
        z2 += x[2] * x[2];
    }
    let (z, z2) = (z / chains as f64, z2 / chains as f64);
    // uniform on S²: E z = 0 (sd 1/√(3n)), E z² = 1/3 (sd √(4/45n))
    assert!(z.abs() < 4.0 / (3.0 * chains as f64).sqrt(), "E z = {z}");
    assert!(
        (z2 - 1.0 / 3.0).abs() < 4.0 * (4.0 / 45.0 / chains as f64).sqrt(),
        "E z² = {z2}"
    );
}

#[test]
fn clangevin_stays_within_tolerance() {
    let cs = sphere(2).with_inequality(Affine::coordinate(2, 1, -1.0, -0.2));
    let newton = NewtonConfig::new(10, 1e-8, 0.0);
    let x0 = vec![0.0, 1.0];
    let mut s = SlackState::new(&cs, x0, RngStream::new(2, 0)).unwrap();
    let mut accepted = 0;
    for _ in 0..2000 {
        if clangevin_step(&mut s, &Zero, &cs, 1e-3, &newton).unwrap() {
            accepted += 1;
        }
        let h = cs.eval_equalities(&s.x).unwrap()[0];
        let g = cs.eval_inequalities(&s.x).unwrap()[0];
        assert!(h.abs() <= 1e-8, "h = {h}");
        assert!(g <= 1e-8, "g = {g}");
    }
    assert!(accepted > 1900, "{accepted}");
}

#[test]
fn cghmc_samples_the_uniform_circle() {
    let cs = sphere(2);
    let newton = NewtonConfig::new(20, 1e-10, 0.0);
    let bins = 8;
    let chains = 400;
    let mut counts = vec![0usize; bins];
    for c in 0..chains {
        let mut s = HmcState::cghmc(&cs, &[1.0, 0.0], RngStream::new(23, c)).unwrap();
        for _ in 0..200 {
            cghmc_step(&mut s, &Zero, &cs, 0.1, 1.0, &newton).unwrap();
            assert!(cs.eval_equalities(&s.y).unwrap()[0].abs() <= 1e-10);
        }
        let theta = s.y[1].atan2(s.y[0]) + PI;
        counts[((theta / (2.0 * PI) * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let e = chains as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
    // 0.1% critical value of χ² with 7 degrees of freedom
    assert!(chi2 < 24.32, "χ² = {chi2}, counts {counts:?}");
}
