use epi_infer_core::dist::{DistError, Distribution, Family};
use epi_infer_core::Value;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 100_000;

/// Closed-form mean and variance, written out independently of the library.
fn oracle_moments(d: &Distribution) -> (f64, f64) {
    match d.family() {
        Family::Uniform { low, high } => (0.5 * (low + high), (high - low) * (high - low) / 12.0),
        Family::Normal { mean, std } => (*mean, std * std),
        Family::LogNormal { mu, sigma } => {
            let m = (mu + sigma * sigma / 2.0).exp();
            (m, m * m * ((sigma * sigma).exp() - 1.0))
        }
        Family::Beta { alpha, beta } => {
            let m = alpha / (alpha + beta);
            (m, m * (1.0 - m) / (alpha + beta + 1.0))
        }
        Family::Gamma { shape, rate } => (shape / rate, shape / rate / rate),
        Family::Bernoulli { p } => (*p, p * (1.0 - p)),
        Family::Binomial { n, p } => (*n as f64 * p, *n as f64 * p * (1.0 - p)),
        Family::Categorical { probs } => {
            let total: f64 = probs.iter().sum();
            let m: f64 = probs.iter().enumerate().map(|(i, p)| i as f64 * p / total).sum();
            let m2: f64 = probs.iter().enumerate().map(|(i, p)| (i * i) as f64 * p / total).sum();
            (m, m2 - m * m)
        }
        Family::Poisson { rate } => (*rate, *rate),
    }
}

fn to_f64(v: &Value) -> f64 {
    match v {
        Value::Bool(b) => *b as u8 as f64,
        other => other.as_f64().expect("scalar"),
    }
}

fn families() -> Vec<Distribution> {
    vec![
        Distribution::uniform(-1.0, 3.0).unwrap(),
        Distribution::normal(5.0, 1.0).unwrap(),
        Distribution::log_normal(0.2, 0.5).unwrap(),
        Distribution::beta(2.0, 5.0).unwrap(),
        Distribution::gamma(3.0, 2.0).unwrap(),
        Distribution::bernoulli(0.3).unwrap(),
        Distribution::binomial(40, 0.25).unwrap(),
        Distribution::categorical(vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
        Distribution::poisson(4.5).unwrap(),
    ]
}

#[test]
fn sample_moments_within_four_standard_errors() {
    for (k, d) in families().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
        let xs: Vec<f64> = (0..DRAWS).map(|_| to_f64(&d.sample(&mut rng))).collect();
        let n = DRAWS as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (m, v) = oracle_moments(&d);
        let se_mean = (v / n).sqrt();
        assert!(
            (mean - m).abs() <= 4.0 * se_mean,
            "{}: mean {mean} vs {m} (se {se_mean})",
            d.family_name()
        );
        // Standard error of the sample variance via the fourth central moment.
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let se_var = ((m4 - var * var) / n).sqrt();
        assert!(
            (var - v).abs() <= 4.0 * se_var,
            "{}: variance {var} vs {v} (se {se_var})",
            d.family_name()
        );
    }
}

#[test]
fn normal_five_one_mean() {
    let d = Distribution::normal(5.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mean = (0..DRAWS).map(|_| to_f64(&d.sample(&mut rng))).sum::<f64>() / DRAWS as f64;
    assert!((mean - 5.0).abs() <= 0.013, "{mean}");
}

#[test]
fn discrete_masses_sum_to_one() {
    let cases: Vec<(Distribution, Vec<Value>)> = vec![
        (Distribution::bernoulli(0.3).unwrap(), vec![Value::Bool(false), Value::Bool(true)]),
        (Distribution::binomial(12, 0.4).unwrap(), (0..=12).map(Value::Int).collect()),
        (Distribution::categorical(vec![0.2, 0.0, 0.8]).unwrap(), (0..3).map(Value::Int).collect()),
        (Distribution::poisson(3.0).unwrap(), (0..200).map(Value::Int).collect()),
    ];
    for (d, support) in cases {
        let total: f64 = support.iter().map(|v| d.log_prob(v).unwrap().exp()).sum();
        assert!((total - 1.0).abs() < 1e-12, "{}: {total}", d.family_name());
    }
}

/// Trapezoid rule over a grid fine enough for the smooth densities used.
fn integrate(d: &Distribution, lo: f64, hi: f64) -> f64 {
    let steps = 400_000;
    let h = (hi - lo) / steps as f64;
    let f = |x: f64| d.log_prob(&Value::Real(x)).unwrap().exp();
    let mut s = 0.5 * (f(lo) + f(hi));
    for i in 1..steps {
        s += f(lo + i as f64 * h);
    }
    s * h
}

#[test]
fn continuous_densities_integrate_to_one() {
    let cases = [
        (Distribution::normal(1.0, 2.0).unwrap(), -20.0, 22.0),
        (Distribution::log_normal(0.0, 0.5).unwrap(), 1e-9, 30.0),
        (Distribution::beta(2.0, 3.0).unwrap(), 0.0, 1.0),
        (Distribution::gamma(2.5, 1.5).unwrap(), 0.0, 60.0),
    ];
    for (d, lo, hi) in cases {
        let total = integrate(&d, lo, hi);
        assert!((total - 1.0).abs() < 1e-6, "{}: {total}", d.family_name());
    }
}

#[test]
fn degenerate_masses() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(Distribution::bernoulli(1.0).unwrap().sample(&mut rng), Value::Bool(true));
    assert_eq!(Distribution::categorical(vec![0.0, 0.0, 1.0]).unwrap().sample(&mut rng), Value::Int(2));
}

#[test]
fn invalid_parameters_rejected() {
    let bad: Vec<Result<Distribution, DistError>> = vec![
        Distribution::uniform(1.0, 1.0),
        Distribution::normal(0.0, 0.0),
        Distribution::normal(f64::NAN, 1.0),
        Distribution::log_normal(0.0, -1.0),
        Distribution::beta(0.0, 1.0),
        Distribution::gamma(1.0, 0.0),
        Distribution::bernoulli(1.5),
        Distribution::binomial(3, -0.1),
        Distribution::categorical(vec![]),
        Distribution::categorical(vec![0.0, 0.0]),
        Distribution::categorical(vec![-1.0, 2.0]),
        Distribution::poisson(-1.0),
    ];
    for r in bad {
        assert!(matches!(r, Err(DistError::InvalidParameters { .. })), "{r:?}");
    }
}

#[test]
fn json_form_validates() {
    let d: Distribution = serde_json::from_str(r#"{"family":"poisson","params":{"rate":2.0}}"#).unwrap();
    assert_eq!(d, Distribution::poisson(2.0).unwrap());
    assert!(serde_json::from_str::<Distribution>(r#"{"family":"poisson","params":{"rate":-2.0}}"#).is_err());
    let ln = serde_json::to_string(&Distribution::log_normal(0.0, 1.0).unwrap()).unwrap();
    assert_eq!(ln, r#"{"family":"log_normal","params":{"mu":0.0,"sigma":1.0}}"#);
}

fn any_distribution() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (-10.0..10.0f64, 0.01..10.0f64).prop_map(|(a, w)| Distribution::uniform(a, a + w).unwrap()),
        (-10.0..10.0f64, 0.01..10.0f64).prop_map(|(m, s)| Distribution::normal(m, s).unwrap()),
        (-2.0..2.0f64, 0.05..2.0f64).prop_map(|(m, s)| Distribution::log_normal(m, s).unwrap()),
        (0.1..20.0f64, 0.1..20.0f64).prop_map(|(a, b)| Distribution::beta(a, b).unwrap()),
        (0.1..20.0f64, 0.1..20.0f64).prop_map(|(a, b)| Distribution::gamma(a, b).unwrap()),
        (0.0..=1.0f64).prop_map(|p| Distribution::bernoulli(p).unwrap()),
        (0u64..10_000, 0.0..=1.0f64).prop_map(|(n, p)| Distribution::binomial(n, p).unwrap()),
        proptest::collection::vec(0.0..5.0f64, 1..8)
            .prop_filter("positive mass", |w| w.iter().sum::<f64>() > 0.0)
            .prop_map(|w| Distribution::categorical(w).unwrap()),
        (0.01..1000.0f64).prop_map(|r| Distribution::poisson(r).unwrap()),
    ]
}

proptest! {
    #[test]
    fn draws_lie_in_support(d in any_distribution(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..16 {
            let v = d.sample(&mut rng);
            let lp = d.log_prob(&v).unwrap();
            prop_assert!(lp.is_finite(), "{} drew {v} with log_prob {lp}", d.family_name());
        }
    }

    #[test]
    fn json_round_trip(d in any_distribution()) {
        let text = serde_json::to_string(&d).unwrap();
        let back: Distribution = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, d);
    }
}
