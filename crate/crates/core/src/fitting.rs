//! Rate-coefficient estimation from concentration-time data.
//!
//! Coefficients are fitted in log space by default so they stay positive;
//! the detailed-balance parametrization replaces the backward coefficients
//! by equilibrium-constant coordinates so every iterate satisfies the
//! Wegscheider conditions exactly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::analysis::{classify_db, DbConstraint};
use crate::data::ObservationSet;
use crate::kinetics::KineticSystem;
use crate::linalg::{primitive_integer, RatMatrix};
use crate::lm::{self, LmOptions};
use crate::mechanism::{Mechanism, RateAssignment};
use crate::ode::OdeOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Unit,
    Relative,
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    pub mechanism: Mechanism,
    pub data: ObservationSet,
    pub weighting: Weighting,
    pub db_constrained: bool,
    /// Estimate initial concentrations that are neither pinned by the data
    /// set nor observed at t = 0.
    pub fit_init: bool,
    /// Fit plain coefficient values instead of their logs; diagnostic mode
    /// that admits negative estimates.
    pub allow_negative: bool,
    pub ode: OdeOptions,
    pub lm: LmOptions,
}

#[derive(Debug, Clone)]
pub struct StartSpec {
    /// Explicit first start; all coefficients 1 when absent.
    pub rates: Option<RateAssignment>,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec {
            rates: None,
            n_starts: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Reported parameter names: rate coefficients, then estimated initial
    /// concentrations as c0(<species>).
    pub names: Vec<String>,
    /// Estimates in natural units.
    pub estimates: Vec<f64>,
    /// Delta-method standard errors in natural units; None without degrees
    /// of freedom or when the final Jacobian is unusable.
    pub std_errors: Option<Vec<f64>>,
    pub correlation: Option<Vec<Vec<f64>>>,
    pub rates: RateAssignment,
    pub init_estimates: Vec<(String, f64)>,
    pub rss: f64,
    pub n: usize,
    pub p: usize,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_starts: usize,
    /// Index of the winning start point (0 is the user-supplied or default
    /// start).
    pub start_index: usize,
    pub rank_deficient: bool,
    /// Largest detailed-balance condition violation of the fitted
    /// coefficients; None when the mechanism has irreversible steps.
    pub db_violation: Option<f64>,
}

pub fn aic(n: usize, p: usize, rss: f64) -> f64 {
    let n_f = n as f64;
    n_f * (rss / n_f).ln() + 2.0 * p as f64
}

pub fn bic(n: usize, p: usize, rss: f64) -> f64 {
    let n_f = n as f64;
    n_f * (rss / n_f).ln() + p as f64 * n_f.ln()
}

/// Integer basis of the attainable log equilibrium-constant vectors
/// ln(k+/k-): the row space of gamma. Returns `rank(gamma)` rows of length
/// R.
pub fn equilibrium_basis(mech: &Mechanism) -> Vec<Vec<i64>> {
    let mut mat = RatMatrix::from_int_columns(&mech.gamma_columns());
    let pivots = mat.rref();
    (0..pivots.len())
        .map(|i| primitive_integer(mat.row(i)))
        .collect()
}

/// Completes a detailed-balanced rate assignment: all forward coefficients
/// and enough backward ones must be given to pin the equilibrium constants;
/// the remaining backward coefficients follow from the Wegscheider
/// conditions.
pub fn db_complete(mech: &Mechanism, spec: &crate::kinetics::RateSpec) -> Result<RateAssignment> {
    classify_db(mech)?;
    let r = mech.r();
    let mut k_plus = Vec::with_capacity(r);
    for (i, v) in spec.k_plus.iter().enumerate() {
        match v {
            Some(v) => k_plus.push(*v),
            None => {
                return Err(Error::Fit(format!(
                    "k{} is required; detailed-balance completion only fills backward coefficients",
                    i + 1
                )))
            }
        }
    }
    let basis = equilibrium_basis(mech);
    let s = basis.len();
    let known: Vec<usize> = (0..r).filter(|&i| spec.k_minus[i].is_some()).collect();

    // the known rows of the basis must span all s coordinates
    let known_columns: Vec<Vec<i64>> = known
        .iter()
        .map(|&row| basis.iter().map(|b| b[row]).collect())
        .collect();
    if crate::linalg::rank_of_columns(&known_columns) < s {
        return Err(Error::Fit(format!(
            "backward coefficients pin only part of the equilibrium constants; \
             {} independent values are needed",
            s
        )));
    }

    let a = DMatrix::from_fn(known.len(), s, |i, j| basis[j][known[i]] as f64);
    let b = DVector::from_iterator(
        known.len(),
        known
            .iter()
            .map(|&row| (k_plus[row] / spec.k_minus[row].unwrap()).ln()),
    );
    let nu = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let residual = (&a * &nu - &b).amax();
    if residual > 1e-9 {
        return Err(Error::Fit(format!(
            "supplied coefficients violate detailed balance (residual {:.2e})",
            residual
        )));
    }

    let mut k_minus = vec![0.0; r];
    for row in 0..r {
        k_minus[row] = match spec.k_minus[row] {
            Some(v) => v,
            None => {
                let ln_keq: f64 = (0..s).map(|j| basis[j][row] as f64 * nu[j]).sum();
                k_plus[row] * (-ln_keq).exp()
            }
        };
    }
    RateAssignment::new(mech, k_plus, k_minus)
}

/// Detailed-balance condition violations |sum_r a_r ln(k+_r / k-_r)| of an
/// assignment, one per condition.
pub fn db_violations(
    mech: &Mechanism,
    rates: &RateAssignment,
) -> Result<Vec<(DbConstraint, f64)>> {
    let (_, conditions) = classify_db(mech)?;
    Ok(conditions
        .into_iter()
        .map(|c| {
            let v: f64 = c
                .exponents
                .iter()
                .enumerate()
                .map(|(r, &a)| a as f64 * (rates.k_plus[r] / rates.k_minus[r]).ln())
                .sum();
            (c, v.abs())
        })
        .collect())
}

/// Post-hoc detailed-balance check of a freely fitted assignment: the
/// conditions whose violation exceeds tol. Empty means detailed balance
/// holds within tolerance.
pub fn check_db_posthoc(
    mech: &Mechanism,
    rates: &RateAssignment,
    tol: f64,
) -> Result<Vec<(DbConstraint, f64)>> {
    Ok(db_violations(mech, rates)?
        .into_iter()
        .filter(|(_, v)| !(*v <= tol))
        .collect())
}

enum InitValue {
    Fixed(f64),
    Theta(usize),
}

struct Prepared<'a> {
    problem: &'a FitProblem,
    /// Mechanism species index per data column.
    obs_species: Vec<usize>,
    /// Per mechanism species.
    init: Vec<InitValue>,
    init_names: Vec<String>,
    /// Basis rows for the detailed-balance parametrization.
    basis: Option<Vec<Vec<i64>>>,
    n_rate_theta: usize,
    n_coefficients: usize,
    p: usize,
    n: usize,
}

impl FitProblem {
    pub fn new(mechanism: Mechanism, data: ObservationSet) -> Self {
        FitProblem {
            mechanism,
            data,
            weighting: Weighting::Unit,
            db_constrained: false,
            fit_init: false,
            allow_negative: false,
            ode: OdeOptions::default(),
            lm: LmOptions::default(),
        }
    }

    fn prepare(&self) -> Result<Prepared<'_>> {
        self.data.validate()?;
        let names = self.mechanism.species_names();
        let mut obs_species = Vec::with_capacity(self.data.species.len());
        for column in &self.data.species {
            match names.iter().position(|n| n == column) {
                Some(i) => obs_species.push(i),
                None => {
                    return Err(Error::Fit(format!(
                        "data column {} is not a species of the mechanism",
                        column
                    )))
                }
            }
        }

        let basis = if self.db_constrained {
            classify_db(&self.mechanism)?;
            Some(equilibrium_basis(&self.mechanism))
        } else {
            None
        };
        let n_coefficients = RateAssignment::coefficient_names(&self.mechanism).len();
        let n_rate_theta = match &basis {
            Some(b) => self.mechanism.r() + b.len(),
            None => n_coefficients,
        };

        let mut init = Vec::with_capacity(names.len());
        let mut init_names = Vec::new();
        let mut next_theta = n_rate_theta;
        for (i, name) in names.iter().enumerate() {
            let pinned = self
                .data
                .init
                .as_ref()
                .and_then(|init| init.iter().find(|(n, _)| n == name))
                .map(|(_, v)| *v);
            let at_zero = self
                .data
                .species
                .iter()
                .position(|c| c == name)
                .and_then(|col| {
                    self.data
                        .times
                        .iter()
                        .position(|&t| t == 0.0)
                        .and_then(|row| self.data.values[row][col])
                });
            match pinned.or(at_zero) {
                Some(v) => init.push(InitValue::Fixed(v)),
                None if self.fit_init => {
                    init.push(InitValue::Theta(next_theta));
                    init_names.push(format!("c0({})", name));
                    next_theta += 1;
                    let _ = i;
                }
                None => {
                    return Err(Error::Fit(format!(
                        "initial concentration of {} is unknown; provide t = 0 data, an init \
                         entry, or fit-init",
                        name
                    )))
                }
            }
        }

        let n = self.data.n_observations();
        let p = next_theta;
        if n < p {
            return Err(Error::Fit(format!(
                "{} observations cannot determine {} parameters",
                n, p
            )));
        }
        Ok(Prepared {
            problem: self,
            obs_species,
            init,
            init_names,
            basis,
            n_rate_theta,
            n_coefficients,
            p,
            n,
        })
    }
}

impl Prepared<'_> {
    fn decode_rates(&self, theta: &[f64]) -> Option<RateAssignment> {
        let mech = &self.problem.mechanism;
        match &self.basis {
            Some(basis) => {
                let r = mech.r();
                // under allow_negative the forward block is plain-valued and
                // the reconstruction carries its sign to k-
                let k_plus: Vec<f64> = if self.problem.allow_negative {
                    theta[..r].to_vec()
                } else {
                    theta[..r].iter().map(|t| t.exp()).collect()
                };
                let mut k_minus = Vec::with_capacity(r);
                for row in 0..r {
                    let ln_keq: f64 = basis
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b[row] as f64 * theta[r + j])
                        .sum();
                    k_minus.push(k_plus[row] * (-ln_keq).exp());
                }
                if self.problem.allow_negative {
                    Some(RateAssignment { k_plus, k_minus })
                } else {
                    RateAssignment::new(mech, k_plus, k_minus).ok()
                }
            }
            None if self.problem.allow_negative => {
                RateAssignment::from_flat(mech, &theta[..self.n_coefficients]).ok()
            }
            None => {
                let flat: Vec<f64> = theta[..self.n_coefficients]
                    .iter()
                    .map(|t| t.exp())
                    .collect();
                RateAssignment::from_flat(mech, &flat).ok()
            }
        }
    }

    fn initial_state(&self, theta: &[f64]) -> Vec<f64> {
        self.init
            .iter()
            .map(|iv| match iv {
                InitValue::Fixed(v) => *v,
                InitValue::Theta(i) if self.problem.allow_negative => theta[*i],
                InitValue::Theta(i) => theta[*i].exp(),
            })
            .collect()
    }

    fn residuals(&self, theta: &[f64]) -> Option<DVector<f64>> {
        let data = &self.problem.data;
        let rates = self.decode_rates(theta)?;
        let system = KineticSystem::new(&self.problem.mechanism, &rates).ok()?;
        let c0 = self.initial_state(theta);
        let t_end = *data.times.last().expect("validated data is non-empty");
        let traj = system
            .integrate(&c0, t_end, &data.times, &self.problem.ode)
            .ok()?;
        let mut out = Vec::with_capacity(self.n);
        for (row, values) in data.values.iter().enumerate() {
            for (col, value) in values.iter().enumerate() {
                if let Some(obs) = value {
                    let model = traj.states[row][self.obs_species[col]];
                    let residual = match self.problem.weighting {
                        Weighting::Unit => model - obs,
                        Weighting::Relative => (model - obs) / obs.max(1e-12),
                    };
                    out.push(residual);
                }
            }
        }
        debug_assert_eq!(out.len(), self.n);
        Some(DVector::from_vec(out))
    }

    fn encode(&self, rates: &RateAssignment, init_values: &[f64]) -> Vec<f64> {
        let mech = &self.problem.mechanism;
        let mut theta = Vec::with_capacity(self.p);
        match &self.basis {
            Some(basis) => {
                let r = mech.r();
                for row in 0..r {
                    theta.push(if self.problem.allow_negative {
                        rates.k_plus[row]
                    } else {
                        rates.k_plus[row].ln()
                    });
                }
                // project the assignment's log equilibrium constants onto
                // the basis (exact when the assignment satisfies detailed
                // balance, least squares otherwise)
                let s = basis.len();
                let a = DMatrix::from_fn(r, s, |i, j| basis[j][i] as f64);
                let b = DVector::from_iterator(
                    r,
                    (0..r).map(|row| (rates.k_plus[row] / rates.k_minus[row]).ln()),
                );
                let nu = a
                    .svd(true, true)
                    .solve(&b, 1e-12)
                    .expect("least-squares projection is always solvable");
                theta.extend(nu.iter());
            }
            None if self.problem.allow_negative => theta.extend(rates.flat(mech)),
            None => theta.extend(rates.flat(mech).iter().map(|k| k.ln())),
        }
        for v in init_values {
            theta.push(if self.problem.allow_negative {
                *v
            } else {
                v.ln()
            });
        }
        theta
    }

    /// Jacobian of the reported natural-unit values (flat coefficients,
    /// then estimated initial concentrations) with respect to theta, for
    /// delta-method error propagation.
    fn natural_jacobian(&self, theta: &[f64], rates: &RateAssignment) -> DMatrix<f64> {
        let natural = self.problem.allow_negative;
        let total = self.n_coefficients + self.init_names.len();
        let mut j = DMatrix::zeros(total, self.p);
        match &self.basis {
            Some(basis) => {
                let r = self.problem.mechanism.r();
                for row in 0..r {
                    let ln_keq: f64 = basis
                        .iter()
                        .enumerate()
                        .map(|(i, b)| b[row] as f64 * theta[r + i])
                        .sum();
                    let plus = 2 * row;
                    let minus = 2 * row + 1;
                    if natural {
                        j[(plus, row)] = 1.0;
                        j[(minus, row)] = (-ln_keq).exp();
                    } else {
                        j[(plus, row)] = rates.k_plus[row];
                        j[(minus, row)] = rates.k_minus[row];
                    }
                    for (i, b) in basis.iter().enumerate() {
                        j[(minus, r + i)] = -(b[row] as f64) * rates.k_minus[row];
                    }
                }
            }
            None => {
                let flat = rates.flat(&self.problem.mechanism);
                for (i, v) in flat.iter().enumerate() {
                    j[(i, i)] = if natural { 1.0 } else { *v };
                }
            }
        }
        for i in 0..self.init_names.len() {
            let col = self.n_rate_theta + i;
            j[(self.n_coefficients + i, col)] = if natural { 1.0 } else { theta[col].exp() };
        }
        j
    }
}

fn default_start(mech: &Mechanism) -> RateAssignment {
    let k_plus = vec![1.0; mech.r()];
    let k_minus = mech
        .steps()
        .iter()
        .map(|s| if s.reversible { 1.0 } else { 0.0 })
        .collect();
    RateAssignment::new(mech, k_plus, k_minus).expect("unit coefficients are valid")
}

/// Draws a coefficient value log-uniform over [1e-3, 1e3].
fn draw(rng: &mut ChaCha12Rng) -> f64 {
    10f64.powf(rng.random_range(-3.0..3.0))
}

pub fn fit(problem: &FitProblem, starts: &StartSpec) -> Result<FitResult> {
    let prepared = problem.prepare()?;
    let mech = &problem.mechanism;
    if starts.n_starts == 0 {
        return Err(Error::Fit("at least one start is required".into()));
    }

    let first_rates = starts.rates.clone().unwrap_or_else(|| default_start(mech));
    if !problem.allow_negative {
        let bad = first_rates
            .flat(mech)
            .into_iter()
            .any(|v| !v.is_finite() || v <= 0.0);
        if bad {
            return Err(Error::Fit(
                "starting rates must be positive and finite in the log \
                 parametrization (set allow_negative for signed fits)"
                    .into(),
            ));
        }
    }
    let n_init = prepared.init_names.len();
    let mut start_points = vec![prepared.encode(&first_rates, &vec![1.0; n_init])];
    let mut rng = ChaCha12Rng::seed_from_u64(starts.seed);
    for _ in 1..starts.n_starts {
        let flat: Vec<f64> = (0..prepared.n_coefficients).map(|_| draw(&mut rng)).collect();
        let rates = RateAssignment::from_flat(mech, &flat).expect("draws are positive");
        let inits: Vec<f64> = (0..n_init).map(|_| draw(&mut rng)).collect();
        start_points.push(prepared.encode(&rates, &inits));
    }

    let mut best: Option<(usize, lm::LmResult)> = None;
    let mut errors = Vec::new();
    for (index, theta0) in start_points.iter().enumerate() {
        match lm::minimize(|t| prepared.residuals(t), theta0, &problem.lm) {
            Ok(result) => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => match (result.converged, b.converged) {
                        (true, false) => true,
                        (false, true) => false,
                        _ => result.rss < b.rss,
                    },
                };
                if better {
                    best = Some((index, result));
                }
            }
            Err(e) => errors.push(e),
        }
    }
    let (start_index, best) = best.ok_or_else(|| {
        Error::Fit(format!(
            "no start was evaluable ({} attempts; first error: {})",
            start_points.len(),
            errors
                .first()
                .map(|e| e.to_string())
                .unwrap_or_else(|| "none".into())
        ))
    })?;

    let rates = prepared
        .decode_rates(&best.theta)
        .ok_or_else(|| Error::Fit("optimum does not decode to a rate assignment".into()))?;
    let init_estimates: Vec<(String, f64)> = {
        let c0 = prepared.initial_state(&best.theta);
        prepared
            .init
            .iter()
            .zip(mech.species_names())
            .filter(|(iv, _)| matches!(iv, InitValue::Theta(_)))
            .map(|(iv, name)| match iv {
                InitValue::Theta(_) => {
                    let idx = mech
                        .species_names()
                        .iter()
                        .position(|n| n == name)
                        .expect("name comes from the list");
                    (name.clone(), c0[idx])
                }
                InitValue::Fixed(_) => unreachable!(),
            })
            .collect()
    };

    let mut names = RateAssignment::coefficient_names(mech);
    names.extend(prepared.init_names.iter().cloned());
    let mut estimates = rates.flat(mech);
    estimates.extend(init_estimates.iter().map(|(_, v)| *v));

    // propagate the theta covariance to natural units
    let mut std_errors = None;
    let mut correlation = None;
    let mut rank_deficient = false;
    if let Some(cov) = lm::covariance(&best.jacobian, best.rss) {
        rank_deficient = cov.rank_deficient;
        let g = prepared.natural_jacobian(best.theta.as_slice(), &rates);
        let total = g.nrows();
        let cov_out = &g * &cov.matrix * g.transpose();
        let se: Vec<f64> = (0..total).map(|i| cov_out[(i, i)].max(0.0).sqrt()).collect();
        let corr: Vec<Vec<f64>> = (0..total)
            .map(|i| {
                (0..total)
                    .map(|j| {
                        if i == j {
                            1.0
                        } else {
                            let d = (cov_out[(i, i)] * cov_out[(j, j)]).sqrt();
                            if d > 0.0 {
                                (cov_out[(i, j)] / d).clamp(-1.0, 1.0)
                            } else {
                                0.0
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        std_errors = Some(se);
        correlation = Some(corr);
    }

    let db_violation = db_violations(mech, &rates)
        .ok()
        .map(|v| v.into_iter().map(|(_, x)| x).fold(0.0f64, f64::max));

    Ok(FitResult {
        names,
        estimates,
        std_errors,
        correlation,
        rates,
        init_estimates,
        rss: best.rss,
        n: prepared.n,
        p: prepared.p,
        aic: aic(prepared.n, prepared.p, best.rss),
        bic: bic(prepared.n, prepared.p, best.rss),
        converged: best.converged,
        iterations: best.iterations,
        n_starts: starts.n_starts,
        start_index,
        rank_deficient,
        db_violation,
    })
}

/// Reports the fit parameter count without fitting: rate parameters plus
/// any estimated initial concentrations.
pub fn parameter_count(problem: &FitProblem) -> Result<usize> {
    Ok(problem.prepare()?.p)
}

/// Integrates the fitted model on a dense grid joined with the observation
/// times, for plot emission.
pub fn fitted_trajectory(
    problem: &FitProblem,
    result: &FitResult,
    grid_points: usize,
) -> Result<crate::kinetics::Trajectory> {
    let prepared = problem.prepare()?;
    let data = &problem.data;
    let t_end = *data.times.last().expect("validated data is non-empty");
    let mut times: Vec<f64> = data.times.clone();
    for i in 0..=grid_points {
        times.push(t_end * i as f64 / grid_points.max(1) as f64);
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    times.dedup();
    let system = KineticSystem::new(&problem.mechanism, &result.rates)?;
    let mut c0: Vec<f64> = prepared
        .init
        .iter()
        .map(|iv| match iv {
            InitValue::Fixed(v) => *v,
            InitValue::Theta(_) => f64::NAN,
        })
        .collect();
    for (name, v) in &result.init_estimates {
        let idx = problem
            .mechanism
            .species_names()
            .iter()
            .position(|n| n == name)
            .expect("estimated init names are species");
        c0[idx] = *v;
    }
    system.integrate(&c0, t_end, &times, &problem.ode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::read_csv;
    use crate::kinetics::RateSpec;

    fn chain() -> Mechanism {
        Mechanism::parse("X -> Y; Y -> Z").unwrap()
    }

    fn synthetic(mech: &Mechanism, rates: &RateAssignment, c0: &[f64], t_end: f64) -> ObservationSet {
        let system = KineticSystem::new(mech, rates).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| t_end * i as f64 / 20.0).collect();
        let traj = system
            .integrate(c0, t_end, &grid, &OdeOptions::default())
            .unwrap();
        ObservationSet {
            times: traj.times.clone(),
            species: traj.names.clone(),
            values: traj
                .states
                .iter()
                .map(|row| row.iter().map(|&v| Some(v)).collect())
                .collect(),
            init: None,
            time_label: None,
            value_label: None,
        }
    }

    #[test]
    fn chain_rates_recovered_from_clean_data() {
        let mech = chain();
        let truth = RateAssignment::new(&mech, vec![0.5, 0.2], vec![0.0, 0.0]).unwrap();
        let data = synthetic(&mech, &truth, &[2.0, 0.0, 0.0], 8.0);
        let problem = FitProblem::new(mech, data);
        let result = fit(&problem, &StartSpec::default()).unwrap();
        assert!(result.converged);
        assert!((result.rates.k_plus[0] - 0.5).abs() < 1e-6);
        assert!((result.rates.k_plus[1] - 0.2).abs() < 1e-6);
        assert!(result.rss < 1e-14);
        assert_eq!(result.p, 2);
        assert_eq!(result.n, 63);
    }

    #[test]
    fn relative_weighting_recovers_the_same_truth() {
        let mech = chain();
        let truth = RateAssignment::new(&mech, vec![0.5, 0.2], vec![0.0, 0.0]).unwrap();
        let data = synthetic(&mech, &truth, &[2.0, 0.0, 0.0], 8.0);
        let mut problem = FitProblem::new(mech, data);
        problem.weighting = Weighting::Relative;
        let result = fit(&problem, &StartSpec::default()).unwrap();
        assert!(result.converged);
        assert!((result.rates.k_plus[0] - 0.5).abs() < 1e-5);
        assert!((result.rates.k_plus[1] - 0.2).abs() < 1e-5);
    }

    #[test]
    fn salicylic_fit_matches_reference_values() {
        let problem = FitProblem::new(chain(), crate::data::fixture_salicylic());
        let result = fit(&problem, &StartSpec::default()).unwrap();
        assert!(result.converged);
        assert!(
            (result.rates.k_plus[0] - 0.0786482).abs() < 2e-3,
            "k1 = {}",
            result.rates.k_plus[0]
        );
        assert!(
            (result.rates.k_plus[1] - 0.181337).abs() < 6e-3,
            "k2 = {}",
            result.rates.k_plus[1]
        );
        let se = result.std_errors.unwrap();
        assert!(se[0] > 0.0 && se[0] < 0.01, "se(k1) = {}", se[0]);
        assert_eq!(result.n, 20);
        assert_eq!(result.p, 2);
    }

    #[test]
    fn db_parametrization_satisfies_conditions_at_every_decode() {
        let mech = Mechanism::parse("X <=> Y; 2 X <=> X + Y").unwrap();
        let data = crate::data::fixture_sim_m2r2();
        let mut problem = FitProblem::new(mech.clone(), data);
        problem.db_constrained = true;
        let result = fit(&problem, &StartSpec::default()).unwrap();
        // one Wegscheider condition removes one of the four coefficients
        assert_eq!(result.p, 3);
        assert!(result.db_violation.unwrap() < 1e-12);
        assert!(result.converged);
        assert_eq!(result.names, vec!["k1", "k-1", "k2", "k-2"]);
        assert_eq!(result.estimates.len(), 4);
        // the constraint ties the fitted equilibrium constants together
        let keq_ratio = (result.rates.k_plus[0] / result.rates.k_minus[0])
            / (result.rates.k_plus[1] / result.rates.k_minus[1]);
        assert!((keq_ratio - 1.0).abs() < 1e-9, "ratio = {keq_ratio}");
    }

    #[test]
    fn udb_mechanism_has_vacuous_constraints() {
        let mech = Mechanism::parse("X <=> Y").unwrap();
        let truth = RateAssignment::new(&mech, vec![0.4], vec![0.7]).unwrap();
        let data = synthetic(&mech, &truth, &[1.0, 0.0], 5.0);
        let mut problem = FitProblem::new(mech.clone(), data.clone());
        problem.db_constrained = true;
        let constrained = fit(&problem, &StartSpec::default()).unwrap();
        assert_eq!(constrained.p, 2);
        let free = fit(&FitProblem::new(mech, data), &StartSpec::default()).unwrap();
        assert!((constrained.rss - free.rss).abs() < 1e-12);
        assert!((constrained.rates.k_plus[0] - 0.4).abs() < 1e-6);
        assert!((constrained.rates.k_minus[0] - 0.7).abs() < 1e-6);
    }

    #[test]
    fn db_completion_fills_backward_coefficients() {
        let mech = Mechanism::parse("X <=> Y; 2 X <=> X + Y").unwrap();
        let spec = RateSpec::parse(&mech, "k1=1,km1=1,k2=2").unwrap();
        let rates = db_complete(&mech, &spec).unwrap();
        assert!((rates.k_minus[1] - 2.0).abs() < 1e-12);

        // inconsistent full assignment is rejected
        let bad = RateSpec::parse(&mech, "k1=1,km1=1,k2=2,km2=1").unwrap();
        assert!(db_complete(&mech, &bad).is_err());

        // underdetermined equilibrium constants are rejected
        let tri = Mechanism::parse("X <=> Y; Y <=> Z; X <=> Z").unwrap();
        let partial = RateSpec::parse(&tri, "k1=1,k2=1,k3=1,km1=2").unwrap();
        assert!(db_complete(&tri, &partial).is_err());
    }

    #[test]
    fn wegscheider_violation_is_log_two() {
        let mech = Mechanism::parse("X <=> Y; 2 X <=> X + Y").unwrap();
        let rates = RateAssignment::new(&mech, vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let violations = db_violations(&mech, &rates).unwrap();
        assert_eq!(violations.len(), 1);
        assert!((violations[0].1 - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn too_few_observations_is_an_error() {
        let mech = chain();
        let data = read_csv("t,X\n0,1\n".as_bytes()).unwrap();
        let mut set = data;
        set.init = Some(vec![
            ("X".into(), 1.0),
            ("Y".into(), 0.0),
            ("Z".into(), 0.0),
        ]);
        let problem = FitProblem::new(mech, set);
        assert!(fit(&problem, &StartSpec::default()).is_err());
    }

    #[test]
    fn unknown_initial_concentration_is_an_error_without_fit_init() {
        let mech = chain();
        // no t = 0 row and no init
        let set = read_csv("t,X,Y,Z\n1,0.5,0.1,0.05\n2,0.3,0.2,0.1\n3,0.2,0.2,0.2\n".as_bytes())
            .unwrap();
        let problem = FitProblem::new(mech, set);
        let err = fit(&problem, &StartSpec::default()).unwrap_err();
        assert!(err.to_string().contains("initial concentration"), "{}", err);
    }

    #[test]
    fn fit_init_estimates_the_missing_start() {
        let mech = chain();
        let truth = RateAssignment::new(&mech, vec![0.5, 0.2], vec![0.0, 0.0]).unwrap();
        let mut data = synthetic(&mech, &truth, &[2.0, 0.0, 0.0], 8.0);
        // hide everything before t > 0 for X and pin Y, Z starts only
        data.times.remove(0);
        data.values.remove(0);
        data.init = Some(vec![("Y".into(), 0.0), ("Z".into(), 0.0)]);
        let mut problem = FitProblem::new(mech, data);
        problem.fit_init = true;
        let result = fit(&problem, &StartSpec::default()).unwrap();
        assert!(result.converged);
        assert_eq!(result.p, 3);
        assert_eq!(result.init_estimates.len(), 1);
        assert_eq!(result.init_estimates[0].0, "X");
        assert!((result.init_estimates[0].1 - 2.0).abs() < 1e-5);
        assert!(result.names.contains(&"c0(X)".to_string()));
    }

    #[test]
    fn information_criteria_formulas() {
        let a = aic(20, 2, 1e-6);
        let b = bic(20, 2, 1e-6);
        let expected_a = 20.0 * (1e-6f64 / 20.0).ln() + 4.0;
        let expected_b = 20.0 * (1e-6f64 / 20.0).ln() + 2.0 * 20f64.ln();
        assert!((a - expected_a).abs() < 1e-12);
        assert!((b - expected_b).abs() < 1e-12);
        assert!(b > a);
    }

    #[test]
    fn multi_start_is_deterministic_and_helps() {
        let mech = chain();
        let truth = RateAssignment::new(&mech, vec![0.5, 0.2], vec![0.0, 0.0]).unwrap();
        let data = synthetic(&mech, &truth, &[2.0, 0.0, 0.0], 8.0);
        let problem = FitProblem::new(mech, data);
        let starts = StartSpec {
            rates: None,
            n_starts: 4,
            seed: 7,
        };
        let a = fit(&problem, &starts).unwrap();
        let b = fit(&problem, &starts).unwrap();
        assert_eq!(a.estimates, b.estimates);
        assert_eq!(a.n_starts, 4);
        assert!(a.converged);
    }

    #[test]
    fn equilibrium_basis_spans_the_row_space() {
        let mech = Mechanism::parse("X <=> Y; 2 X <=> X + Y").unwrap();
        let basis = equilibrium_basis(&mech);
        assert_eq!(basis, vec![vec![1, 1]]);
        let tri = Mechanism::parse("X <=> Y; Y <=> Z; X <=> Z").unwrap();
        let tri_basis = equilibrium_basis(&tri);
        assert_eq!(tri_basis.len(), 2);
    }

    #[test]
    fn allow_negative_fits_in_natural_units() {
        let mech = chain();
        let truth = RateAssignment::new(&mech, vec![0.5, 0.2], vec![0.0, 0.0]).unwrap();
        let data = synthetic(&mech, &truth, &[2.0, 0.0, 0.0], 8.0);
        let mut problem = FitProblem::new(mech, data);
        problem.allow_negative = true;
        let result = fit(&problem, &StartSpec::default()).unwrap();
        assert!(result.converged);
        assert!((result.rates.k_plus[0] - 0.5).abs() < 1e-6);
    }
}
