//! Chain-binomial (Reed–Frost style) SIR model.

use crate::context::{Context, ExecError};
use crate::dist::Distribution;

use super::{icu_series, EpiPriors, EpidemicPath, InterventionPolicy, ObservationSeries};

/// Population-level settings of a chain-binomial run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirConfig {
    pub population: u64,
    pub initial_infected: u64,
    pub horizon_days: u32,
    /// Step length in days; `1 / dt` must be an integer.
    pub dt: f64,
}

impl SirConfig {
    pub fn new(population: u64, initial_infected: u64, horizon_days: u32) -> Self {
        Self {
            population,
            initial_infected,
            horizon_days,
            dt: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.population == 0 {
            return Err("population must be positive".into());
        }
        if self.initial_infected == 0 || self.initial_infected > self.population {
            return Err(format!(
                "initial_infected must lie in [1, population={}], got {}",
                self.population, self.initial_infected
            ));
        }
        steps_per_day(self.dt)?;
        Ok(())
    }

    pub(crate) fn steps_per_day(&self) -> u32 {
        steps_per_day(self.dt).expect("validated")
    }
}

pub(crate) fn steps_per_day(dt: f64) -> Result<u32, String> {
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(format!("dt must lie in (0, 1], got {dt}"));
    }
    let steps = (1.0 / dt).round();
    if (steps * dt - 1.0).abs() > 1e-9 {
        return Err(format!("1/dt must be an integer, got dt = {dt}"));
    }
    Ok(steps as u32)
}

/// Per-step infection probability of one susceptible: `1 - exp(-beta I dt / N)`.
pub fn infection_probability(beta_eff: f64, infectious: u64, dt: f64, population: u64) -> f64 {
    if infectious == 0 || beta_eff == 0.0 {
        return 0.0;
    }
    let hazard = beta_eff * infectious as f64 * dt / population as f64;
    (-(-hazard).exp_m1()).clamp(0.0, 1.0)
}

/// Per-step recovery probability of one infectious: `1 - exp(-gamma dt)`.
pub fn recovery_probability(gamma: f64, dt: f64) -> f64 {
    (-(-gamma * dt).exp_m1()).clamp(0.0, 1.0)
}

/// One chain-binomial step. Returns `(S', I', R', new_infections)`.
#[allow(clippy::too_many_arguments)]
pub fn reed_frost_step(
    ctx: &mut Context,
    s: u64,
    i: u64,
    r: u64,
    beta_eff: f64,
    gamma: f64,
    dt: f64,
    population: u64,
) -> Result<(u64, u64, u64, u64), ExecError> {
    debug_assert_eq!(s + i + r, population);
    let p_inf = infection_probability(beta_eff, i, dt, population);
    let new_inf = ctx.sample_int("step_inf", &Distribution::binomial(s, p_inf)?)? as u64;
    let p_rec = recovery_probability(gamma, dt);
    let rec = ctx.sample_int("step_rec", &Distribution::binomial(i, p_rec)?)? as u64;
    Ok((s - new_inf, i + new_inf - rec, r + rec, new_inf))
}

/// Runs the chain-binomial SIR model.
///
/// Latent sites: `beta`, `gamma`, then `step_inf`/`step_rec` once per step.
/// Each observed day adds an `obs` site scored under
/// `Poisson(new_infections + 0.1)`. Records the outputs `total_cases`,
/// `peak_day`, `peak_height` and `icu`.
pub fn simulate_sir(
    ctx: &mut Context,
    config: &SirConfig,
    priors: &EpiPriors,
    policy: &InterventionPolicy,
    data: Option<&ObservationSeries>,
    rho: f64,
) -> Result<EpidemicPath, ExecError> {
    config.validate().map_err(ExecError::Config)?;
    if let Some(data) = data {
        data.check_days(config.horizon_days).map_err(ExecError::Config)?;
    }
    let n = config.population;
    let beta = ctx.sample_real("beta", &priors.beta)?;
    let gamma = ctx.sample_real("gamma", &priors.gamma)?;

    let vaccinated = policy.vaccinated(n, config.initial_infected);
    let (mut s, mut i, mut r) = (
        n - config.initial_infected - vaccinated,
        config.initial_infected,
        vaccinated,
    );
    let mut path = EpidemicPath::default();
    path.push_day(s, i, r, 0);

    let steps = config.steps_per_day();
    for day in 0..config.horizon_days {
        let beta_eff = beta * policy.transmission_factor(day);
        let mut new_today = 0;
        for _ in 0..steps {
            let (s2, i2, r2, new_inf) = reed_frost_step(ctx, s, i, r, beta_eff, gamma, config.dt, n)?;
            (s, i, r) = (s2, i2, r2);
            new_today += new_inf;
        }
        path.push_day(s, i, r, new_today);
        if let Some(count) = data.and_then(|d| d.get(day + 1)) {
            observe_cases(ctx, new_today, count)?;
        }
    }
    finish_path(ctx, &mut path, rho)?;
    Ok(path)
}

pub(crate) fn observe_cases(ctx: &mut Context, simulated: u64, observed: u64) -> Result<(), ExecError> {
    let noise = Distribution::poisson(simulated as f64 + 0.1)?;
    ctx.observe("obs", &noise, observed as i64)
}

pub(crate) fn finish_path(ctx: &mut Context, path: &mut EpidemicPath, rho: f64) -> Result<(), ExecError> {
    path.icu = icu_series(&path.infectious, rho);
    let (peak_day, peak_height) = path.peak();
    ctx.set_output("total_cases", path.total_cases())?;
    ctx.set_output("peak_day", peak_day)?;
    ctx.set_output("peak_height", peak_height)?;
    ctx.set_output(
        "icu",
        path.icu.iter().map(|&x| x as f64).collect::<Vec<f64>>(),
    )?;
    Ok(())
}
