//! Stochastic individual-based model with uniform random mixing.

use crate::context::{Context, ExecError};
use crate::dist::Distribution;

use super::config::TransmissionParam;
use super::sir::{finish_path, observe_cases, recovery_probability};
use super::{EpiPriors, EpidemicPath, InterventionPolicy, ObservationSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct IbmConfig {
    pub population: u64,
    pub initial_infected: u64,
    pub horizon_days: u32,
    pub contacts_per_day: u32,
    pub per_contact_transmission: TransmissionParam,
}

impl IbmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.population == 0 {
            return Err("population must be positive".into());
        }
        if self.population > u32::MAX as u64 {
            return Err("population too large for the individual-based model".into());
        }
        if self.initial_infected == 0 || self.initial_infected > self.population {
            return Err(format!(
                "initial_infected must lie in [1, population={}], got {}",
                self.population, self.initial_infected
            ));
        }
        if self.contacts_per_day == 0 {
            return Err("contacts_per_day must be at least 1".into());
        }
        self.per_contact_transmission.validate()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Susceptible,
    Infectious,
    Recovered,
}

/// Runs the individual-based model.
///
/// Agents `0..I0` start infectious; `round(v (N - I0))` of the rest are drawn
/// uniformly without replacement (`immune` sites) and start recovered. Each
/// day every agent infectious at the start of the day draws `k` contacts with
/// replacement (`contact` sites, `floor(Uniform(0, N))`); a contact that is
/// still susceptible is infected with probability `p_c (1 - c(t))`
/// (`transmit` sites). Then each of those agents recovers with probability
/// `1 - exp(-gamma)` (`recover` sites).
pub fn simulate_ibm(
    ctx: &mut Context,
    config: &IbmConfig,
    priors: &EpiPriors,
    policy: &InterventionPolicy,
    data: Option<&ObservationSeries>,
    rho: f64,
) -> Result<EpidemicPath, ExecError> {
    config.validate().map_err(ExecError::Config)?;
    if let Some(data) = data {
        data.check_days(config.horizon_days).map_err(ExecError::Config)?;
    }
    let n = config.population as usize;
    let i0 = config.initial_infected as usize;
    let gamma = ctx.sample_real("gamma", &priors.gamma)?;
    let p_contact = match &config.per_contact_transmission {
        TransmissionParam::Fixed(p) => *p,
        TransmissionParam::Latent(prior) => ctx.sample_real("p_c", prior)?,
    };

    let mut state = vec![State::Susceptible; n];
    state[..i0].fill(State::Infectious);

    // Partial Fisher-Yates over the initially susceptible agents.
    let vaccinated = policy.vaccinated(config.population, config.initial_infected) as usize;
    let mut pool: Vec<usize> = (i0..n).collect();
    for chosen in 0..vaccinated {
        let remaining = pool.len() - chosen;
        let pick = uniform_index(ctx, "immune", remaining)?;
        pool.swap(chosen, chosen + pick);
        state[pool[chosen]] = State::Recovered;
    }

    let mut path = EpidemicPath::default();
    let count = |state: &[State]| {
        let mut c = (0u64, 0u64, 0u64);
        for s in state {
            match s {
                State::Susceptible => c.0 += 1,
                State::Infectious => c.1 += 1,
                State::Recovered => c.2 += 1,
            }
        }
        c
    };
    let (s, i, r) = count(&state);
    path.push_day(s, i, r, 0);

    let p_recover = Distribution::bernoulli(recovery_probability(gamma, 1.0))?;
    for day in 0..config.horizon_days {
        let p_transmit = Distribution::bernoulli((p_contact * policy.transmission_factor(day)).clamp(0.0, 1.0))?;
        let infectious: Vec<usize> = (0..n).filter(|&a| state[a] == State::Infectious).collect();
        let mut new_today = 0u64;
        for _ in &infectious {
            for _ in 0..config.contacts_per_day {
                let contact = uniform_index(ctx, "contact", n)?;
                if state[contact] == State::Susceptible && ctx.sample_bool("transmit", &p_transmit)? {
                    state[contact] = State::Infectious;
                    new_today += 1;
                }
            }
        }
        for &a in &infectious {
            if ctx.sample_bool("recover", &p_recover)? {
                state[a] = State::Recovered;
            }
        }
        let (s, i, r) = count(&state);
        path.push_day(s, i, r, new_today);
        if let Some(count) = data.and_then(|d| d.get(day + 1)) {
            observe_cases(ctx, new_today, count)?;
        }
    }
    finish_path(ctx, &mut path, rho)?;
    Ok(path)
}

fn uniform_index(ctx: &mut Context, label: &str, len: usize) -> Result<usize, ExecError> {
    let x = ctx.sample_real(label, &Distribution::uniform(0.0, len as f64)?)?;
    Ok((x.floor() as usize).min(len - 1))
}
