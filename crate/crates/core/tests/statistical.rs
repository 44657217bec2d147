//! Monte Carlo and paired-seed properties with fixed seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tslab::distcheck::mc_anticoncentration;
use tslab::estimators::{glm_estimate, rls_estimate, ConfidenceParams, LinkFunction};
use tslab::experiment::ExperimentConfig;
use tslab::linalg::{DesignState, Vector};
use tslab::policies::{glm_ts_select, ts_select};
use tslab::samplers::special::reg_inc_beta;
use tslab::samplers::{
    cap_probability, gaussian_p, gaussian_tail_at_one, uniform_ball_p, unit_direction,
};
use tslab::{ArmSet, TsDistribution};

fn e1(d: usize) -> Vector {
    let mut u = Vector::zeros(d);
    u[0] = 1.0;
    u
}

#[test]
fn cap_probability_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for d in [2, 3, 5, 10, 20, 50] {
        let dist = TsDistribution::uniform_ball(d).unwrap();
        let w = mc_anticoncentration(&dist, &e1(d), 100_000, &mut rng).unwrap();
        let exact = cap_probability(d).unwrap();
        assert!(w.contains(exact), "d = {d}: {w:?} vs {exact}");
    }
}

#[test]
fn sphere_level_matches_closed_form() {
    // For η uniform on the sphere of radius √d, P(η₁ ≥ 1) = ½·I_{1−1/d}((d−1)/2, ½).
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for d in [3, 5, 10] {
        let df = d as f64;
        let exact = 0.5 * reg_inc_beta(1.0 - 1.0 / df, (df - 1.0) / 2.0, 0.5).unwrap();
        let dist = TsDistribution::uniform_sphere(d).unwrap();
        let w = mc_anticoncentration(&dist, &e1(d), 100_000, &mut rng).unwrap();
        assert!(w.contains(exact), "d = {d}: {w:?} vs {exact}");
    }
}

#[test]
fn closed_form_levels_have_slack() {
    assert!(gaussian_tail_at_one() >= 1.5 * gaussian_p());
    assert!(cap_probability(2).unwrap() >= 6.0 * uniform_ball_p());
}

fn hard_instance(policy: &str) -> ExperimentConfig {
    let (c1, s1) = (0.1f64.cos(), 0.1f64.sin());
    let (c3, s3) = (0.3f64.cos(), 0.3f64.sin());
    ExperimentConfig::from_toml(&format!(
        r#"
problem = "linear"
dim = 2
horizon = 1000
r = 0.1
s = 1.0
lambda = 1.0
delta = 0.1
seeds = 50
master_seed = 77
[arms]
kind = "finite"
arms = [[1.0, 0.0], [{c1:?}, {s1:?}]]
[theta_star]
kind = "explicit"
values = [{c3:?}, {s3:?}]
[policy]
kind = "{policy}"
"#
    ))
    .unwrap()
}

#[test]
fn lin_ts_beats_greedy_on_hard_instance() {
    let ts = hard_instance("lin_ts").run().unwrap();
    let greedy = hard_instance("greedy").run().unwrap();
    let mean = |runs: &[(u32, tslab::TrajectoryRecord)]| {
        runs.iter().map(|(_, r)| r.summary.cum_regret).sum::<f64>() / runs.len() as f64
    };
    let (m_ts, m_greedy) = (mean(&ts), mean(&greedy));
    assert!(m_ts < m_greedy, "LinTS {m_ts} vs greedy {m_greedy}");
    // Greedy never leaves the first arm once it has been played.
    assert!(greedy
        .iter()
        .all(|(_, r)| r.ledger.steps.iter().all(|s| s.arm_index == Some(0))));
}

#[test]
fn unit_ball_lin_ts_regret_decays() {
    let cfg = ExperimentConfig::from_toml(
        r#"
problem = "linear"
dim = 2
horizon = 1000
r = 0.5
s = 1.0
lambda = 1.0
delta = 0.1
seeds = 10
master_seed = 5
[arms]
kind = "unit_ball"
[theta_star]
kind = "explicit"
values = [0.6, 0.8]
[policy]
kind = "lin_ts"
"#,
    )
    .unwrap();
    for (_, rec) in cfg.run().unwrap() {
        assert!(rec.summary.cum_regret > 0.0);
        let late: f64 = rec.ledger.steps[500..].iter().map(|s| s.inst_regret).sum();
        let early: f64 = rec.ledger.steps[..500].iter().map(|s| s.inst_regret).sum();
        assert!(
            late < early,
            "regret should decay: early {early}, late {late}"
        );
    }
}

#[test]
fn identity_link_glm_ts_matches_linear_ts() {
    let d = 3;
    let lambda = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let theta = Vector::from_vec(vec![0.3, -0.5, 0.4]);
    let set = ArmSet::finite((0..30).map(|_| unit_direction(d, &mut rng)).collect()).unwrap();
    let arms = set.arms().unwrap().to_vec();
    let mut state = DesignState::new(d, lambda).unwrap();
    let mut history = Vec::new();
    for i in 0..60 {
        let x = arms[i % arms.len()].clone();
        let r = x.dot(&theta) + 0.1 * ((i * 7 % 11) as f64 - 5.0) / 5.0;
        state.absorb(&x, r).unwrap();
        history.push((x, r));
    }
    let link = LinkFunction::identity();
    let glm = glm_estimate(&history, &link, lambda, 1e-12, 100).unwrap();
    let rls = rls_estimate(&state);
    assert!((&glm - &rls).amax() < 1e-6, "{glm} vs {rls}");

    let params = ConfidenceParams::new(d, 0.1, 1.0, lambda, 0.1, 1000).unwrap();
    let dist = TsDistribution::gaussian(d).unwrap();
    let mut agree = 0;
    for seed in 0..200 {
        let a = ts_select(
            &state,
            &params,
            &dist,
            &set,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        let b = glm_ts_select(
            &state,
            &params,
            &dist,
            &link,
            &glm,
            &set,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        assert_eq!(a.eta, b.eta);
        agree += usize::from(a.arm_index == b.arm_index);
    }
    assert!(agree >= 199, "{agree}/200");
}
