//! Mass-action kinetics: induced ODE right-hand side, trajectory
//! integration, and synthetic observations with seeded multiplicative noise.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::ObservationSet;
use crate::mechanism::{Mechanism, RateAssignment};
use crate::ode::{self, OdeOptions};
use crate::{Error, Result};

/// Name of the sampling RNG, recorded in output metadata so any dataset can
/// be regenerated from its seed on another platform.
pub const RNG_ALGORITHM: &str = "chacha12";

struct StepKinetics {
    alpha: Vec<(usize, i32)>,
    beta: Vec<(usize, i32)>,
    gamma: Vec<(usize, f64)>,
    k_forward: f64,
    k_backward: f64,
}

/// A mechanism with rates bound, preprocessed for fast rhs evaluation.
pub struct KineticSystem {
    names: Vec<String>,
    m: usize,
    steps: Vec<StepKinetics>,
}

impl KineticSystem {
    pub fn new(mech: &Mechanism, rates: &RateAssignment) -> Result<Self> {
        if rates.k_plus.len() != mech.r() || rates.k_minus.len() != mech.r() {
            return Err(Error::Mechanism(format!(
                "rate vectors must have length R = {}",
                mech.r()
            )));
        }
        let steps = mech
            .steps()
            .iter()
            .enumerate()
            .map(|(r, step)| StepKinetics {
                alpha: step
                    .reactant
                    .terms()
                    .iter()
                    .map(|&(s, e)| (s, e as i32))
                    .collect(),
                beta: step
                    .product
                    .terms()
                    .iter()
                    .map(|&(s, e)| (s, e as i32))
                    .collect(),
                gamma: {
                    let mut col: Vec<(usize, f64)> = Vec::new();
                    for &(s, e) in step.product.terms() {
                        col.push((s, e as f64));
                    }
                    for &(s, e) in step.reactant.terms() {
                        match col.iter_mut().find(|(t, _)| *t == s) {
                            Some((_, v)) => *v -= e as f64,
                            None => col.push((s, -(e as f64))),
                        }
                    }
                    col.retain(|&(_, v)| v != 0.0);
                    col.sort_by_key(|&(s, _)| s);
                    col
                },
                k_forward: rates.k_plus[r],
                k_backward: rates.k_minus[r],
            })
            .collect();
        Ok(KineticSystem {
            names: mech.species_names().to_vec(),
            m: mech.m(),
            steps,
        })
    }

    pub fn species_names(&self) -> &[String] {
        &self.names
    }

    /// gamma (k+ c^alpha - k- c^beta), with 0^0 = 1.
    pub fn rhs(&self, c: &[f64], out: &mut [f64]) {
        debug_assert_eq!(c.len(), self.m);
        out.fill(0.0);
        for step in &self.steps {
            let rate = step.k_forward * monomial(c, &step.alpha)
                - step.k_backward * monomial(c, &step.beta);
            for &(s, g) in &step.gamma {
                out[s] += g * rate;
            }
        }
    }

    pub fn rhs_vec(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.rhs(c, &mut out);
        out
    }

    /// Per-step net rates k+ c^alpha - k- c^beta; all zero exactly at a
    /// detailed-balanced stationary point.
    pub fn step_rates(&self, c: &[f64]) -> Vec<f64> {
        self.steps
            .iter()
            .map(|step| {
                step.k_forward * monomial(c, &step.alpha)
                    - step.k_backward * monomial(c, &step.beta)
            })
            .collect()
    }

    /// Integrates from c0 and samples the trajectory at `sample_times`.
    pub fn integrate(
        &self,
        c0: &[f64],
        t_end: f64,
        sample_times: &[f64],
        opts: &OdeOptions,
    ) -> Result<Trajectory> {
        if c0.len() != self.m {
            return Err(Error::Mechanism(format!(
                "initial state must have length M = {}",
                self.m
            )));
        }
        let states = ode::integrate(
            |_t, y, dy| self.rhs(y, dy),
            0.0,
            c0,
            t_end,
            sample_times,
            opts,
        )?;
        Ok(Trajectory {
            names: self.names.clone(),
            times: sample_times.to_vec(),
            states,
        })
    }
}

fn monomial(c: &[f64], exponents: &[(usize, i32)]) -> f64 {
    exponents
        .iter()
        .map(|&(s, e)| c[s].powi(e))
        .product()
}

/// Concentrations sampled along an integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Multiplicative Gaussian observation noise.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub relative_sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(relative_sigma: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&relative_sigma) {
            return Err(Error::Config(format!(
                "relative noise must be in [0, 1), got {}",
                relative_sigma
            )));
        }
        Ok(NoiseSpec {
            relative_sigma,
            seed,
        })
    }
}

/// Observations value = true (1 + sigma e), e standard normal, drawn in
/// row-major (time, species) order; draws that would turn a value negative
/// are redrawn, preserving positivity without the bias of clamping.
pub fn sample_with_noise(traj: &Trajectory, noise: &NoiseSpec) -> ObservationSet {
    let mut rng = ChaCha12Rng::seed_from_u64(noise.seed);
    let values = traj
        .states
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    debug_assert!(v >= 0.0, "trajectory value below zero");
                    loop {
                        let eps: f64 = StandardNormal.sample(&mut rng);
                        let noisy = v * (1.0 + noise.relative_sigma * eps);
                        if noisy >= 0.0 {
                            return Some(noisy);
                        }
                    }
                })
                .collect()
        })
        .collect();
    ObservationSet {
        times: traj.times.clone(),
        species: traj.names.clone(),
        values,
        init: None,
        time_label: None,
        value_label: None,
    }
}

/// Partially specified rates, as parsed from "k1=0.1,km1=0.1,k2=1". Keys are
/// k<r> and km<r> (k-<r> also accepted), 1-indexed in step order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSpec {
    pub k_plus: Vec<Option<f64>>,
    pub k_minus: Vec<Option<f64>>,
}

impl RateSpec {
    pub fn parse(mech: &Mechanism, text: &str) -> Result<Self> {
        let mut spec = RateSpec {
            k_plus: vec![None; mech.r()],
            k_minus: vec![None; mech.r()],
        };
        for (key, value) in crate::data::parse_pairs(text)? {
            let (slot, index_text) = if let Some(rest) =
                key.strip_prefix("km").or_else(|| key.strip_prefix("k-"))
            {
                (&mut spec.k_minus, rest)
            } else if let Some(rest) = key.strip_prefix('k') {
                (&mut spec.k_plus, rest)
            } else {
                return Err(Error::Config(format!("unknown rate key {:?}", key)));
            };
            let index: usize = index_text
                .parse()
                .map_err(|_| Error::Config(format!("unknown rate key {:?}", key)))?;
            if index < 1 || index > mech.r() {
                return Err(Error::Config(format!(
                    "rate key {:?} out of range: mechanism has {} steps",
                    key,
                    mech.r()
                )));
            }
            let parsed: f64 = value
                .parse()
                .map_err(|_| Error::Config(format!("bad numeric value for {:?}", key)))?;
            if slot[index - 1].replace(parsed).is_some() {
                return Err(Error::Config(format!("duplicate rate key {:?}", key)));
            }
        }
        for (r, step) in mech.steps().iter().enumerate() {
            if !step.reversible && spec.k_minus[r].is_some() {
                return Err(Error::Config(format!(
                    "step {} is irreversible, k-{} not allowed",
                    r + 1,
                    r + 1
                )));
            }
        }
        Ok(spec)
    }

    /// Missing coefficient names, in coefficient order.
    pub fn missing(&self, mech: &Mechanism) -> Vec<String> {
        let mut missing = Vec::new();
        for (r, step) in mech.steps().iter().enumerate() {
            if self.k_plus[r].is_none() {
                missing.push(format!("k{}", r + 1));
            }
            if step.reversible && self.k_minus[r].is_none() {
                missing.push(format!("k-{}", r + 1));
            }
        }
        missing
    }

    /// All coefficients present: build the validated assignment.
    pub fn complete(&self, mech: &Mechanism) -> Result<RateAssignment> {
        let missing = self.missing(mech);
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "missing rate coefficients: {}",
                missing.join(", ")
            )));
        }
        let k_plus: Vec<f64> = self.k_plus.iter().map(|v| v.unwrap()).collect();
        let k_minus: Vec<f64> = self
            .k_minus
            .iter()
            .map(|v| v.unwrap_or(0.0))
            .collect();
        RateAssignment::new(mech, k_plus, k_minus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn siml_system() -> (Mechanism, RateAssignment) {
        let mech = Mechanism::parse("X <=> Y; 2 X <=> X + Y").unwrap();
        let rates = RateAssignment::new(&mech, vec![0.1, 1.0], vec![0.1, 1.0]).unwrap();
        (mech, rates)
    }

    fn grid(n: usize, t_end: f64) -> Vec<f64> {
        (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
    }

    #[test]
    fn rhs_value_at_reference_point() {
        let (mech, rates) = siml_system();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        let dc = sys.rhs_vec(&[2.0, 3.0]);
        assert!((dc[0] - 2.1).abs() < 1e-12);
        assert!((dc[1] + 2.1).abs() < 1e-12);
    }

    #[test]
    fn rhs_zero_at_detailed_balance_point() {
        // equilibrium (2.5, 2.5): each step balances individually
        let (mech, rates) = siml_system();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        for rate in sys.step_rates(&[2.5, 2.5]) {
            assert!(rate.abs() < 1e-14);
        }
        assert!(sys.rhs_vec(&[2.5, 2.5]).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn rhs_honors_zero_power_convention() {
        // X -> Y at c = 0 must give 0 flux, not NaN; 2X <=> X+Y at x=0
        // evaluates 0^2 and 0*y cleanly
        let mech = Mechanism::parse("2 X <=> X + Y").unwrap();
        let rates = RateAssignment::new(&mech, vec![1.0], vec![1.0]).unwrap();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        let dc = sys.rhs_vec(&[0.0, 2.0]);
        assert_eq!(dc, vec![0.0, 0.0]);
    }

    #[test]
    fn mass_conservation_along_trajectory() {
        let (mech, rates) = siml_system();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        let traj = sys
            .integrate(&[2.0, 3.0], 10.0, &grid(100, 10.0), &OdeOptions::default())
            .unwrap();
        for state in &traj.states {
            assert!((state[0] + state[1] - 5.0).abs() < 1e-7);
        }
    }

    #[test]
    fn trajectory_reaches_equilibrium() {
        let (mech, rates) = siml_system();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        let traj = sys
            .integrate(&[2.0, 3.0], 100.0, &[100.0], &OdeOptions::default())
            .unwrap();
        let end = &traj.states[0];
        for rate in sys.step_rates(end) {
            assert!(rate.abs() < 1e-6);
        }
    }

    #[test]
    fn rhs_is_derivative_of_flow() {
        let (mech, rates) = siml_system();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        let c0 = [2.0, 3.0];
        let expected = sys.rhs_vec(&c0);
        let mut previous: Option<f64> = None;
        for &h in &[1e-2, 1e-3, 1e-4] {
            let traj = sys
                .integrate(&c0, h, &[h], &OdeOptions::default())
                .unwrap();
            let fd = (traj.states[0][0] - c0[0]) / h;
            let err = (fd - expected[0]).abs();
            if let Some(prev) = previous {
                assert!(err < prev, "finite difference not improving");
            }
            previous = Some(err);
        }
        assert!(previous.unwrap() < 1e-3);
    }

    #[test]
    fn noise_zero_is_identity_and_seeds_are_reproducible() {
        let (mech, rates) = siml_system();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        let traj = sys
            .integrate(&[2.0, 3.0], 1.0, &grid(10, 1.0), &OdeOptions::default())
            .unwrap();

        let clean = sample_with_noise(&traj, &NoiseSpec::new(0.0, 7).unwrap());
        for (row, state) in clean.values.iter().zip(&traj.states) {
            for (obs, truth) in row.iter().zip(state) {
                assert_eq!(obs.unwrap(), *truth);
            }
        }

        let a = sample_with_noise(&traj, &NoiseSpec::new(0.02, 42).unwrap());
        let b = sample_with_noise(&traj, &NoiseSpec::new(0.02, 42).unwrap());
        assert_eq!(a.values, b.values);
        let c = sample_with_noise(&traj, &NoiseSpec::new(0.02, 43).unwrap());
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn noise_scale_matches_sigma() {
        let (mech, rates) = siml_system();
        let sys = KineticSystem::new(&mech, &rates).unwrap();
        let traj = sys
            .integrate(&[2.0, 3.0], 10.0, &grid(49, 10.0), &OdeOptions::default())
            .unwrap();
        let noisy = sample_with_noise(&traj, &NoiseSpec::new(0.02, 11).unwrap());
        let mut ratios = Vec::new();
        for (row, state) in noisy.values.iter().zip(&traj.states) {
            for (obs, truth) in row.iter().zip(state) {
                ratios.push(obs.unwrap() / truth - 1.0);
            }
        }
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(ratios.len() == 100);
        assert!((0.015..=0.025).contains(&sd), "sd = {}", sd);
    }

    #[test]
    fn rate_spec_parses_both_minus_spellings() {
        let mech = Mechanism::parse("X <=> Y; 2 X <=> X + Y").unwrap();
        let a = RateSpec::parse(&mech, "k1=0.1,km1=0.1,k2=1,km2=1").unwrap();
        let b = RateSpec::parse(&mech, "k1=0.1,k-1=0.1,k2=1,k-2=1").unwrap();
        assert_eq!(a, b);
        let rates = a.complete(&mech).unwrap();
        assert_eq!(rates.k_plus, vec![0.1, 1.0]);
        assert_eq!(rates.k_minus, vec![0.1, 1.0]);
    }

    #[test]
    fn rate_spec_reports_missing_and_rejects_bad_keys() {
        let mech = Mechanism::parse("X <=> Y; 2 X <=> X + Y").unwrap();
        let spec = RateSpec::parse(&mech, "k1=0.1,k2=1,km2=1").unwrap();
        assert_eq!(spec.missing(&mech), vec!["k-1"]);
        assert!(spec.complete(&mech).is_err());

        assert!(RateSpec::parse(&mech, "k3=1").is_err());
        assert!(RateSpec::parse(&mech, "q1=1").is_err());
        assert!(RateSpec::parse(&mech, "k1=1,k1=2").is_err());
        let chain = Mechanism::parse("X -> Y").unwrap();
        assert!(RateSpec::parse(&chain, "k1=1,km1=2").is_err());
    }
}
