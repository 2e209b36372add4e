use std::collections::HashMap;

use epi_infer_core::context::{derive_seed, execute_with};
use epi_infer_core::dist::Distribution;
use epi_infer_core::models::{
    final_size_oracle, reed_frost_step, EpiSettings, EpidemicPath, InterventionPolicy, ModelConfig,
    TransmissionParam,
};
use epi_infer_core::{Address, ExecutionMode, Value};
use proptest::prelude::*;

fn bind(pairs: &[(&str, f64)]) -> ExecutionMode {
    let b: HashMap<Address, Value> = pairs
        .iter()
        .map(|(l, v)| (Address::new(*l, 0), Value::Real(*v)))
        .collect();
    ExecutionMode::redirect(b)
}

fn path(model: &ModelConfig, mode: ExecutionMode, seed: u64) -> EpidemicPath {
    execute_with(mode, seed, |ctx| model.simulate(ctx))
        .unwrap()
        .result
        .expect("epidemic model")
}

fn ibm(n: u64, i0: u64, days: u32, k: u32, p_c: f64) -> ModelConfig {
    let mut s = EpiSettings::sir(n, i0, days);
    s.contacts_per_day = Some(k);
    s.per_contact_transmission = Some(TransmissionParam::Fixed(p_c));
    ModelConfig::Ibm(s)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn assert_conserved(p: &EpidemicPath, n: u64) {
    for d in 0..p.days() {
        assert_eq!(p.susceptible[d] + p.infectious[d] + p.recovered[d], n, "day {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sir_conserves_population(
        n in 1u64..5000,
        i0_frac in 0.0..1.0f64,
        days in 0u32..60,
        steps in 1u32..5,
        c in 0.0..=1.0f64,
        v in 0.0..=1.0f64,
        start in 0u32..60,
        seed in any::<u64>(),
    ) {
        let i0 = ((n as f64 * i0_frac) as u64).clamp(1, n);
        let mut s = EpiSettings::sir(n, i0, days);
        s.dt = 1.0 / steps as f64;
        s.policy = InterventionPolicy::new(start.min(days), c, v);
        let m = ModelConfig::Sir(s);
        m.validate().unwrap();
        let p = path(&m, ExecutionMode::Record, seed);
        prop_assert_eq!(p.days(), days as usize + 1);
        assert_conserved(&p, n);
        prop_assert_eq!(p.new_infections[0], 0);
        // Every new infection leaves S.
        for d in 1..p.days() {
            prop_assert_eq!(p.susceptible[d - 1] - p.susceptible[d], p.new_infections[d]);
        }
    }

    #[test]
    fn chain_binomial_step_conserves(
        s in 0u64..10_000, i in 0u64..10_000, r in 0u64..10_000,
        beta in 0.0..5.0f64, gamma in 0.0..5.0f64, seed in any::<u64>(),
    ) {
        let n = s + i + r;
        prop_assume!(n > 0);
        let (s2, i2, r2, new_inf) = execute_with(ExecutionMode::Record, seed, |ctx| {
            reed_frost_step(ctx, s, i, r, beta, gamma, 1.0, n)
        }).unwrap().result;
        prop_assert_eq!(s2 + i2 + r2, n);
        prop_assert_eq!(s - s2, new_inf);
        prop_assert!(r2 >= r);
    }

    #[test]
    fn ibm_conserves_population(
        n in 1u64..200, i0_frac in 0.0..1.0f64, days in 0u32..15, k in 1u32..6,
        p_c in 0.0..=1.0f64, v in 0.0..=1.0f64, seed in any::<u64>(),
    ) {
        let i0 = ((n as f64 * i0_frac) as u64).clamp(1, n);
        let mut m = ibm(n, i0, days, k, p_c);
        m.epi_mut().unwrap().policy = InterventionPolicy::new(0, 0.0, v);
        let p = path(&m, ExecutionMode::Record, seed);
        assert_conserved(&p, n);
        let eligible = n - i0;
        prop_assert_eq!(p.recovered[0], ((v * eligible as f64).round() as u64).min(eligible));
    }
}

#[test]
fn ibm_without_transmission_only_declines() {
    let m = ibm(50, 10, 40, 4, 0.0);
    for seed in 0..10 {
        let p = path(&m, ExecutionMode::Record, seed);
        assert!(p.infectious.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(p.total_cases(), 0);
    }
}

/// Exact distribution of day-1 new infections with one infectious agent
/// making `k` uniform contacts among `n` agents: enumerate every contact
/// tuple, and for each tuple convolve the independent per-target outcomes.
fn enumerate_day_one(n: usize, k: usize, p: f64) -> Vec<f64> {
    let mut dist = vec![0.0; n];
    let tuples = n.pow(k as u32);
    for code in 0..tuples {
        let mut hits = vec![0u32; n];
        let mut c = code;
        for _ in 0..k {
            hits[c % n] += 1;
            c /= n;
        }
        // Agent 0 is the index case; the others start susceptible.
        let mut conv = vec![1.0];
        for &m in &hits[1..] {
            let q = 1.0 - (1.0 - p).powi(m as i32);
            let mut next = vec![0.0; conv.len() + 1];
            for (j, w) in conv.iter().enumerate() {
                next[j] += w * (1.0 - q);
                next[j + 1] += w * q;
            }
            conv = next;
        }
        for (j, w) in conv.iter().enumerate() {
            dist[j] += w / tuples as f64;
        }
    }
    dist
}

#[test]
fn ibm_day_one_matches_exact_enumeration() {
    let reps = 40_000u64;
    for n in 2..=5usize {
        let p_c = 0.6;
        let exact = enumerate_day_one(n, n - 1, p_c);
        assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let m = ibm(n as u64, 1, 1, n as u32 - 1, p_c);
        let mut counts = vec![0u64; n];
        for r in 0..reps {
            let p = path(&m, bind(&[("gamma", 0.1)]), derive_seed(n as u64, r));
            counts[p.new_infections[1] as usize] += 1;
        }
        for (j, &c) in counts.iter().enumerate() {
            let f = c as f64 / reps as f64;
            let se = (exact[j] * (1.0 - exact[j]) / reps as f64).sqrt().max(1e-9);
            assert!(
                (f - exact[j]).abs() <= 4.0 * se,
                "N={n}, {j} new: empirical {f} vs exact {}",
                exact[j]
            );
        }
        // Marginal per-susceptible infection probability.
        let per_agent = 1.0 - (1.0 - p_c / n as f64).powi(n as i32 - 1);
        let mean_new: f64 = exact.iter().enumerate().map(|(j, w)| j as f64 * w).sum();
        assert!((mean_new / (n - 1) as f64 - per_agent).abs() < 1e-12);
    }
}

#[test]
fn ibm_and_sir_agree_under_matched_hazard() {
    let (n, i0, days, k, p_c, gamma) = (2000u64, 10u64, 150u32, 5u32, 0.05, 0.1);
    let beta = -(k as f64) * n as f64 * (1.0 - p_c / n as f64).ln();
    let sir = ModelConfig::Sir(EpiSettings::sir(n, i0, days));
    let agent = ibm(n, i0, days, k, p_c);
    let reps = 50;
    let attack = |m: &ModelConfig, mode: fn(f64, f64) -> ExecutionMode| -> Vec<f64> {
        (0..reps)
            .map(|r| path(m, mode(beta, gamma), derive_seed(77, r)).total_cases() as f64 / n as f64)
            .collect()
    };
    let sir_attack = attack(&sir, |b, g| bind(&[("beta", b), ("gamma", g)]));
    let ibm_attack = attack(&agent, |_, g| bind(&[("gamma", g)]));
    let (ms, ss) = mean_se(&sir_attack);
    let (mi, si) = mean_se(&ibm_attack);
    let combined = (ss * ss + si * si).sqrt();
    assert!(
        (ms - mi).abs() <= 3.0 * combined,
        "SIR {ms} +- {ss} vs IBM {mi} +- {si}"
    );
}

#[test]
fn contact_reduction_lowers_attack_rate() {
    let base = EpiSettings::sir(5000, 10, 120);
    let open = ModelConfig::Sir(base.clone());
    let reduced = open.with_policy(InterventionPolicy::new(0, 0.8, 0.0));
    let vaccinated = open.with_policy(InterventionPolicy::new(0, 0.0, 0.6));
    let mode = || bind(&[("beta", 0.4), ("gamma", 0.1)]);
    let cases = |m: &ModelConfig| -> Vec<f64> {
        (0..200).map(|r| path(m, mode(), derive_seed(3, r)).total_cases() as f64).collect()
    };
    let (mo, so) = mean_se(&cases(&open));
    for other in [&reduced, &vaccinated] {
        let (mr, sr) = mean_se(&cases(other));
        assert!(mo - mr > 3.0 * (so * so + sr * sr).sqrt(), "{mo} vs {mr}");
    }
}

#[test]
fn full_lockdown_and_full_vaccination_stop_spread() {
    let base = ModelConfig::Sir(EpiSettings::sir(1000, 10, 50));
    for policy in [InterventionPolicy::new(0, 1.0, 0.0), InterventionPolicy::new(0, 0.0, 1.0)] {
        let m = base.with_policy(policy);
        for seed in 0..20 {
            let p = path(&m, ExecutionMode::Record, seed);
            assert!(p.new_infections.iter().all(|&x| x == 0));
        }
    }
}

#[test]
fn sub_daily_steps_refine_toward_final_size() {
    // At dt -> 0 the chain-binomial recursion approaches the continuous-time
    // model whose final size solves z = 1 - exp(-R0 z).
    let r0: f64 = 3.0;
    let oracle = final_size_oracle(r0);
    let mut s = EpiSettings::sir(200_000, 100, 400);
    s.dt = 0.05;
    let m = ModelConfig::Sir(s);
    let attack: Vec<f64> = (0..5)
        .map(|r| path(&m, bind(&[("beta", 0.3), ("gamma", 0.1)]), r).total_cases() as f64 / 200_000.0)
        .collect();
    let (mean, _) = mean_se(&attack);
    assert!((mean - oracle).abs() < 0.005, "{mean} vs {oracle}");
}

#[test]
fn horizon_zero_has_only_day_zero() {
    let m = ModelConfig::Sir(EpiSettings::sir(100, 3, 0));
    let t = execute_with(ExecutionMode::Record, 1, |ctx| model_trace(&m, ctx)).unwrap();
    assert_eq!(t.result.days(), 1);
    let labels: Vec<_> = t.trace.entries.iter().map(|e| e.address.label.as_str()).collect();
    assert_eq!(labels, vec!["beta", "gamma"]);
    assert_eq!(t.trace.outputs["icu"], Value::Vector(vec![0.0]));
}

fn model_trace(m: &ModelConfig, ctx: &mut epi_infer_core::Context) -> Result<EpidemicPath, epi_infer_core::ExecError> {
    m.simulate(ctx).map(|p| p.unwrap())
}

#[test]
fn latent_transmission_prior_is_sampled() {
    let mut m = ibm(30, 2, 5, 3, 0.0);
    m.epi_mut().unwrap().per_contact_transmission =
        Some(TransmissionParam::Latent(Distribution::beta(2.0, 5.0).unwrap()));
    m.validate().unwrap();
    let t = execute_with(ExecutionMode::Record, 9, |ctx| model_trace(&m, ctx)).unwrap().trace;
    assert_eq!(t.entries[1].address, Address::new("p_c", 0));
    use epi_infer_core::Model;
    assert_eq!(m.latent_labels().unwrap(), vec!["gamma", "p_c"]);
}
