//! Built-in epidemic simulators written against the execution context.

mod config;
mod demo;
mod ibm;
mod sir;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;

pub use config::{ConfigError, EpiSettings, IcuSettings, ModelConfig, TransmissionParam};
pub use demo::{BetaBernoulli, NormalNormal};
pub use ibm::{simulate_ibm, IbmConfig};
pub use sir::{infection_probability, recovery_probability, reed_frost_step, simulate_sir, SirConfig};

/// Priors over the calibrated rates (per day).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiPriors {
    #[serde(default = "default_beta_prior")]
    pub beta: Distribution,
    #[serde(default = "default_gamma_prior")]
    pub gamma: Distribution,
}

fn default_beta_prior() -> Distribution {
    Distribution::uniform(0.05, 1.0).expect("valid default")
}

fn default_gamma_prior() -> Distribution {
    Distribution::uniform(0.05, 0.5).expect("valid default")
}

impl Default for EpiPriors {
    fn default() -> Self {
        Self {
            beta: default_beta_prior(),
            gamma: default_gamma_prior(),
        }
    }
}

/// Containment actions applied to a run: all-or-nothing vaccination at day 0
/// and a multiplicative contact reduction from `start_day` onward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InterventionPolicy {
    #[serde(default)]
    pub start_day: u32,
    #[serde(default)]
    pub contact_reduction: f64,
    #[serde(default)]
    pub vaccination_coverage: f64,
}

impl InterventionPolicy {
    pub fn new(start_day: u32, contact_reduction: f64, vaccination_coverage: f64) -> Self {
        Self {
            start_day,
            contact_reduction,
            vaccination_coverage,
        }
    }

    /// Multiplier on transmission during `day`.
    pub fn transmission_factor(&self, day: u32) -> f64 {
        if day >= self.start_day {
            1.0 - self.contact_reduction
        } else {
            1.0
        }
    }

    /// Number of initial susceptibles made immune at day 0.
    pub fn vaccinated(&self, population: u64, initial_infected: u64) -> u64 {
        let eligible = population - initial_infected;
        ((self.vaccination_coverage * eligible as f64).round() as u64).min(eligible)
    }

    /// Lexicographic order on (start_day, contact_reduction, vaccination_coverage).
    pub fn lexicographic_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.start_day
            .cmp(&other.start_day)
            .then(self.contact_reduction.total_cmp(&other.contact_reduction))
            .then(self.vaccination_coverage.total_cmp(&other.vaccination_coverage))
    }
}

/// One observed daily case count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub day: u32,
    pub count: u64,
}

/// Observed case counts keyed by day, kept sorted by day.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationSeries(Vec<Observation>);

impl ObservationSeries {
    pub fn new(mut points: Vec<Observation>) -> Self {
        points.sort_by_key(|o| o.day);
        Self(points)
    }

    /// Treats `counts[t]` as the count on day `t + 1`.
    pub fn from_daily(counts: &[u64]) -> Self {
        Self(
            counts
                .iter()
                .enumerate()
                .map(|(i, &count)| Observation {
                    day: i as u32 + 1,
                    count,
                })
                .collect(),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Observation> {
        self.0.iter()
    }

    pub fn get(&self, day: u32) -> Option<u64> {
        self.0
            .binary_search_by_key(&day, |o| o.day)
            .ok()
            .map(|i| self.0[i].count)
    }

    pub fn check_days(&self, horizon_days: u32) -> Result<(), String> {
        let mut sorted = self.0.clone();
        sorted.sort_by_key(|o| o.day);
        for w in sorted.windows(2) {
            if w[0].day == w[1].day {
                return Err(format!("data: day {} appears more than once", w[0].day));
            }
        }
        match sorted.iter().find(|o| o.day == 0 || o.day > horizon_days) {
            Some(o) => Err(format!(
                "data: day {} outside [1, {horizon_days}]",
                o.day
            )),
            None => Ok(()),
        }
    }
}

/// Per-day series produced by one epidemic run (length `horizon_days + 1`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EpidemicPath {
    pub susceptible: Vec<u64>,
    pub infectious: Vec<u64>,
    pub recovered: Vec<u64>,
    pub new_infections: Vec<u64>,
    pub icu: Vec<u64>,
}

impl EpidemicPath {
    pub fn days(&self) -> usize {
        self.susceptible.len()
    }

    pub fn total_cases(&self) -> u64 {
        self.new_infections.iter().sum()
    }

    /// First day on which daily new infections peak, and the peak height.
    pub fn peak(&self) -> (u64, u64) {
        peak_of(self.new_infections.iter().copied().enumerate().map(|(d, c)| (d as u64, c)))
    }

    pub(crate) fn push_day(&mut self, s: u64, i: u64, r: u64, new_infections: u64) {
        self.susceptible.push(s);
        self.infectious.push(i);
        self.recovered.push(r);
        self.new_infections.push(new_infections);
    }
}

pub(crate) fn peak_of(days: impl Iterator<Item = (u64, u64)>) -> (u64, u64) {
    let mut best = (0, 0);
    for (day, count) in days {
        if count > best.1 {
            best = (day, count);
        }
    }
    best
}

/// Hard outcome constraint: ICU occupancy never exceeds capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeConstraint {
    pub icu_capacity: u64,
}

/// ICU occupancy proxy: `round(rho * I_t)`, half away from zero.
pub fn icu_series(infectious: &[u64], rho: f64) -> Vec<u64> {
    infectious
        .iter()
        .map(|&i| (rho * i as f64).round() as u64)
        .collect()
}

pub fn constraint_satisfied(path: &EpidemicPath, constraint: &OutcomeConstraint, rho: f64) -> bool {
    icu_series(&path.infectious, rho)
        .into_iter()
        .all(|icu| icu <= constraint.icu_capacity)
}

/// Final epidemic size `z` of the deterministic SIR limit, solving
/// `z = 1 - exp(-r0 z)` by fixed-point iteration from 0.99.
pub fn final_size_oracle(r0: f64) -> f64 {
    if !(r0 > 1.0) {
        return 0.0;
    }
    let mut z: f64 = 0.99;
    for _ in 0..100_000 {
        let next = -(-r0 * z).exp_m1();
        if (next - z).abs() < 1e-15 {
            return next;
        }
        z = next;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_with_infectious(i: Vec<u64>) -> EpidemicPath {
        let n = i.len();
        EpidemicPath {
            susceptible: vec![0; n],
            infectious: i,
            recovered: vec![0; n],
            new_infections: vec![0; n],
            icu: vec![0; n],
        }
    }

    #[test]
    fn icu_rounding() {
        assert_eq!(icu_series(&[37], 0.05), vec![2]);
        assert_eq!(icu_series(&[10], 0.05), vec![1]); // 0.5 rounds away from zero
        assert_eq!(icu_series(&[3, 9], 0.0), vec![0, 0]);
        assert_eq!(icu_series(&[3, 9], 1.0), vec![3, 9]);
    }

    #[test]
    fn constraint_cases() {
        let p = path_with_infectious(vec![10, 100, 50]);
        assert!(!constraint_satisfied(&p, &OutcomeConstraint { icu_capacity: 4 }, 0.05));
        assert!(constraint_satisfied(&p, &OutcomeConstraint { icu_capacity: 5 }, 0.05));
        let z = path_with_infectious(vec![0, 0]);
        assert!(constraint_satisfied(&z, &OutcomeConstraint { icu_capacity: 1 }, 0.05));
    }

    #[test]
    fn final_size_values() {
        assert!((final_size_oracle(3.0) - 0.940479).abs() < 1e-6);
        assert_eq!(final_size_oracle(1.0), 0.0);
        assert_eq!(final_size_oracle(0.5), 0.0);
        assert!((final_size_oracle(1e6) - 1.0).abs() < 1e-12);
        let z = final_size_oracle(2.0);
        assert!((z - (1.0 - (-2.0 * z).exp())).abs() < 1e-9);
    }

    #[test]
    fn observation_days_checked() {
        let s = ObservationSeries::new(vec![Observation { day: 3, count: 1 }]);
        assert!(s.check_days(3).is_ok());
        assert!(s.check_days(2).is_err());
        let zero = ObservationSeries::new(vec![Observation { day: 0, count: 1 }]);
        assert!(zero.check_days(5).is_err());
        let dup = ObservationSeries::new(vec![
            Observation { day: 1, count: 1 },
            Observation { day: 1, count: 2 },
        ]);
        assert!(dup.check_days(5).is_err());
    }

    #[test]
    fn policy_helpers() {
        let p = InterventionPolicy::new(5, 0.4, 0.5);
        assert_eq!(p.transmission_factor(4), 1.0);
        assert!((p.transmission_factor(5) - 0.6).abs() < 1e-15);
        assert_eq!(p.vaccinated(101, 1), 50);
        assert_eq!(InterventionPolicy::new(0, 0.0, 1.0).vaccinated(10, 3), 7);
    }
}
