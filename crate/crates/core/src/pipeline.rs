//! End-to-end mechanism screening: enumerate candidates, fit each against a
//! dataset, rank by an information criterion, persist restartable results.
//!
//! Results go to a JSON-lines file: one meta line describing the run, then
//! one record per candidate in enumeration order. The file is a pure
//! function of (config, data): reruns and any worker count produce the same
//! bytes. Ranking is recomputed from records, never persisted.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::analysis::{summarize, DbClass, NetworkSummary};
use crate::data::ObservationSet;
use crate::enumeration::{enumerate_mechanisms, EnumerationFilter};
use crate::fitting::{fit, FitProblem, FitResult, StartSpec, Weighting};
use crate::kinetics::RNG_ALGORITHM;
use crate::lm::LmOptions;
use crate::mechanism::{Mechanism, RateAssignment};
use crate::ode::OdeOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Criterion {
    #[default]
    Aic,
    Bic,
    Rss,
}

impl Criterion {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            "rss" => Ok(Criterion::Rss),
            other => Err(Error::Config(format!(
                "unknown criterion {:?} (expected aic, bic or rss)",
                other
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::Rss => "rss",
        }
    }

    pub fn value(self, fit: &FitRecord) -> f64 {
        match self {
            Criterion::Aic => fit.aic,
            Criterion::Bic => fit.bic,
            Criterion::Rss => fit.rss,
        }
    }
}

/// Everything a screen run needs besides the dataset itself.
#[derive(Debug, Clone)]
pub struct ScreenConfig {
    pub species: usize,
    pub steps: usize,
    pub filter: EnumerationFilter,
    /// CDB candidates are fitted in the detailed-balance parametrization;
    /// UDB candidates have vacuous conditions and are fitted freely.
    pub db_constrained: bool,
    pub weighting: Weighting,
    pub fit_init: bool,
    pub allow_negative: bool,
    pub ode: OdeOptions,
    pub lm: LmOptions,
    /// Uniform value for every starting coefficient; all ones when absent.
    pub start_value: Option<f64>,
    pub n_starts: usize,
    pub seed: u64,
    pub criterion: Criterion,
    pub top_k: usize,
    /// Hard bound on the candidate count, checked before any fit starts.
    pub cap: u128,
    pub workers: usize,
    pub output: PathBuf,
    pub resume: bool,
    /// Data source as the user named it (path or fixture:...); echoed into
    /// the meta line so `rank --plots` can reload it.
    pub data_label: String,
}

impl ScreenConfig {
    pub fn new(species: usize, steps: usize, output: PathBuf, data_label: String) -> Self {
        ScreenConfig {
            species,
            steps,
            filter: EnumerationFilter::default(),
            db_constrained: false,
            weighting: Weighting::Unit,
            fit_init: false,
            allow_negative: false,
            ode: OdeOptions::default(),
            lm: LmOptions::default(),
            start_value: None,
            n_starts: 1,
            seed: 0,
            criterion: Criterion::Aic,
            top_k: 10,
            cap: 1_000_000,
            workers: 1,
            output,
            resume: false,
            data_label,
        }
    }

    fn meta(&self) -> ScreenMeta {
        ScreenMeta {
            version: 1,
            species: self.species,
            steps: self.steps,
            exact_species: self.filter.exact_species,
            mass_conserving: self.filter.mass_conserving,
            db_class: self.filter.db_class.map(|c| c.to_string()),
            db_constrained: self.db_constrained,
            weighting: match self.weighting {
                Weighting::Unit => "unit".into(),
                Weighting::Relative => "relative".into(),
            },
            fit_init: self.fit_init,
            allow_negative: self.allow_negative,
            start_value: self.start_value,
            n_starts: self.n_starts,
            seed: self.seed,
            rng: RNG_ALGORITHM.into(),
            data: self.data_label.clone(),
        }
    }
}

/// Run identity persisted as the first line of the output file. Resume
/// refuses a file whose meta differs: its records came from other fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenMeta {
    pub version: u32,
    pub species: usize,
    pub steps: usize,
    pub exact_species: bool,
    pub mass_conserving: bool,
    pub db_class: Option<String>,
    pub db_constrained: bool,
    pub weighting: String,
    pub fit_init: bool,
    pub allow_negative: bool,
    pub start_value: Option<f64>,
    pub n_starts: usize,
    pub seed: u64,
    pub rng: String,
    pub data: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub n: usize,
    pub l: usize,
    pub s: usize,
    pub deficiency: usize,
    pub reversible: bool,
    pub weakly_reversible: bool,
    pub mass_conserving: bool,
    pub db_class: String,
    pub n_circuit_conditions: usize,
    pub n_forest_conditions: usize,
}

impl From<&NetworkSummary> for NetworkRecord {
    fn from(s: &NetworkSummary) -> Self {
        NetworkRecord {
            n: s.n,
            l: s.l,
            s: s.s,
            deficiency: s.deficiency,
            reversible: s.reversible,
            weakly_reversible: s.weakly_reversible,
            mass_conserving: s.mass_conserving,
            db_class: match s.db_class {
                Some(DbClass::Udb) => "UDB".into(),
                Some(DbClass::Cdb) => "CDB".into(),
                None => "NOT_APPLICABLE".into(),
            },
            n_circuit_conditions: s.n_circuit_conditions,
            n_forest_conditions: s.n_forest_conditions,
        }
    }
}

/// Fit outcome in persistable form (mirrors FitResult).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub correlation: Option<Vec<Vec<f64>>>,
    pub init_estimates: Vec<(String, f64)>,
    pub rss: f64,
    pub n: usize,
    pub p: usize,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_starts: usize,
    pub start_index: usize,
    pub rank_deficient: bool,
    pub db_violation: Option<f64>,
}

impl FitRecord {
    fn from_result(r: &FitResult) -> Self {
        FitRecord {
            names: r.names.clone(),
            estimates: r.estimates.clone(),
            std_errors: r.std_errors.clone(),
            correlation: r.correlation.clone(),
            init_estimates: r.init_estimates.clone(),
            rss: r.rss,
            n: r.n,
            p: r.p,
            aic: r.aic,
            bic: r.bic,
            converged: r.converged,
            iterations: r.iterations,
            n_starts: r.n_starts,
            start_index: r.start_index,
            rank_deficient: r.rank_deficient,
            db_violation: r.db_violation,
        }
    }

    /// Rebuilds a FitResult for plot emission. The coefficient estimates
    /// come first in `estimates`, init estimates after.
    pub fn to_result(&self, mech: &Mechanism) -> Result<FitResult> {
        let rates = RateAssignment::from_flat(mech, &self.estimates[..mech.p()])?;
        Ok(FitResult {
            names: self.names.clone(),
            estimates: self.estimates.clone(),
            std_errors: self.std_errors.clone(),
            correlation: self.correlation.clone(),
            rates,
            init_estimates: self.init_estimates.clone(),
            rss: self.rss,
            n: self.n,
            p: self.p,
            aic: self.aic,
            bic: self.bic,
            converged: self.converged,
            iterations: self.iterations,
            n_starts: self.n_starts,
            start_index: self.start_index,
            rank_deficient: self.rank_deficient,
            db_violation: self.db_violation,
        })
    }

    /// JSON cannot carry non-finite numbers; a fit that reports any is
    /// recorded as failed instead of corrupting the file.
    fn all_finite(&self) -> bool {
        let vecs_ok = self.estimates.iter().all(|v| v.is_finite())
            && self
                .std_errors
                .iter()
                .flatten()
                .all(|v| v.is_finite())
            && self
                .correlation
                .iter()
                .flatten()
                .flatten()
                .all(|v| v.is_finite())
            && self.init_estimates.iter().all(|(_, v)| v.is_finite());
        vecs_ok && self.rss.is_finite() && self.aic.is_finite() && self.bic.is_finite()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreenRecord {
    /// Candidate position in enumeration order.
    pub index: u64,
    pub id: String,
    pub mechanism: String,
    pub network: NetworkRecord,
    pub fit: Option<FitRecord>,
    pub fit_error: Option<String>,
    /// 1-based rank among converged fits; set by ranking, never persisted.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rank: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: ScreenMeta,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    record: ScreenRecord,
}

/// All records of a finished screen in enumeration order, ranks marked on
/// converged fits.
#[derive(Debug)]
pub struct ScreenOutcome {
    pub records: Vec<ScreenRecord>,
    pub n_candidates: usize,
    pub n_reused: usize,
    pub n_converged: usize,
}

fn uniform_start(mech: &Mechanism, value: f64) -> Result<RateAssignment> {
    let k_plus = vec![value; mech.r()];
    let k_minus = mech
        .steps()
        .iter()
        .map(|s| if s.reversible { value } else { 0.0 })
        .collect();
    RateAssignment::new(mech, k_plus, k_minus)
}

fn fit_candidate(
    config: &ScreenConfig,
    data: &ObservationSet,
    index: usize,
    mech: &Mechanism,
) -> ScreenRecord {
    let summary = summarize(mech);
    let mut problem = FitProblem::new(mech.clone(), data.clone());
    problem.weighting = config.weighting;
    // constraints only bind CDB candidates; UDB conditions are vacuous
    problem.db_constrained = config.db_constrained && summary.db_class == Some(DbClass::Cdb);
    problem.fit_init = config.fit_init;
    problem.allow_negative = config.allow_negative;
    problem.ode = config.ode.clone();
    problem.lm = config.lm.clone();
    let starts = StartSpec {
        rates: config
            .start_value
            .map(|v| uniform_start(mech, v).expect("start value validated")),
        n_starts: config.n_starts,
        seed: config.seed,
    };
    let (fit_rec, fit_error) = match fit(&problem, &starts) {
        Ok(result) => {
            let rec = FitRecord::from_result(&result);
            if rec.all_finite() {
                (Some(rec), None)
            } else {
                (None, Some("fit produced non-finite values".to_string()))
            }
        }
        Err(e) => (None, Some(e.to_string())),
    };
    ScreenRecord {
        index: index as u64,
        id: mech.canonical_id(),
        mechanism: mech.serialize(),
        network: NetworkRecord::from(&summary),
        fit: fit_rec,
        fit_error,
        rank: None,
    }
}

/// Indices of converged records in rank order: criterion ascending, then
/// fewer parameters, then canonical id.
pub fn rank_indices(records: &[ScreenRecord], criterion: Criterion) -> Vec<usize> {
    let mut ranked: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.fit.as_ref().is_some_and(|f| f.converged))
        .map(|(i, _)| i)
        .collect();
    ranked.sort_by(|&a, &b| {
        let fa = records[a].fit.as_ref().expect("filtered to fitted");
        let fb = records[b].fit.as_ref().expect("filtered to fitted");
        criterion
            .value(fa)
            .partial_cmp(&criterion.value(fb))
            .expect("criterion values are never NaN")
            .then(fa.p.cmp(&fb.p))
            .then(records[a].id.cmp(&records[b].id))
    });
    ranked
}

fn read_existing(path: &Path, expect: &ScreenMeta) -> Result<BTreeMap<u64, ScreenRecord>> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let first = match lines.next() {
        Some(line) => line?,
        None => return Ok(BTreeMap::new()), // empty file: treat as fresh
    };
    let meta: MetaLine = serde_json::from_str(&first)
        .map_err(|_| Error::Config(format!("{}: not a screen output file", path.display())))?;
    if meta.meta != *expect {
        return Err(Error::Config(format!(
            "{}: existing results come from a different configuration; \
             remove the file or rerun without --resume",
            path.display()
        )));
    }
    let mut records = BTreeMap::new();
    for line in lines {
        let line = line?;
        // a truncated tail (killed mid-write) is dropped and refitted
        match serde_json::from_str::<RecordLine>(&line) {
            Ok(rl) => {
                records.insert(rl.record.index, rl.record);
            }
            Err(_) => break,
        }
    }
    Ok(records)
}

fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Fits every candidate against the data and returns all records with
/// converged fits ranked. Candidates already in the output file (resume)
/// are reused without refitting.
pub fn screen(config: &ScreenConfig, data: &ObservationSet) -> Result<ScreenOutcome> {
    if config.top_k == 0 {
        return Err(Error::Config("top_k must be at least 1".into()));
    }
    if config.n_starts == 0 {
        return Err(Error::Config("n_starts must be at least 1".into()));
    }
    if let Some(v) = config.start_value {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Config(format!(
                "start value must be positive and finite, got {}",
                v
            )));
        }
    }
    data.validate()?;

    // materialize candidates, enforcing the cap before any fitting
    let mut candidates = Vec::new();
    for mech in enumerate_mechanisms(config.species, config.steps, config.filter.clone())? {
        if candidates.len() as u128 >= config.cap {
            return Err(Error::CapExceeded {
                count: candidates.len() as u128 + 1,
                cap: config.cap,
            });
        }
        candidates.push(mech);
    }
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }

    let meta = config.meta();
    let mut reused = if config.resume && config.output.exists() {
        read_existing(&config.output, &meta)?
    } else {
        BTreeMap::new()
    };
    // ignore stale records beyond the candidate list and id mismatches
    reused.retain(|&index, rec| {
        candidates
            .get(index as usize)
            .is_some_and(|m| m.canonical_id() == rec.id)
    });
    let n_reused = reused.len();

    // rewrite the file so a truncated tail never precedes appended records
    let file = std::fs::File::create(&config.output)?;
    let mut out = BufWriter::new(file);
    write_line(&mut out, &MetaLine { meta })?;
    for rec in reused.values() {
        write_line(&mut out, &RecordLine { record: rec.clone() })?;
    }

    let pending: Vec<usize> = (0..candidates.len())
        .filter(|i| !reused.contains_key(&(*i as u64)))
        .collect();
    let mut fitted: BTreeMap<u64, ScreenRecord> = BTreeMap::new();
    let workers = config.workers.max(1).min(pending.len().max(1));
    if workers <= 1 {
        for &i in &pending {
            let record = fit_candidate(config, data, i, &candidates[i]);
            write_line(&mut out, &RecordLine { record: record.clone() })?;
            fitted.insert(i as u64, record);
        }
    } else {
        let cursor = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<ScreenRecord>();
        std::thread::scope(|scope| -> Result<()> {
            for _ in 0..workers {
                let tx = tx.clone();
                let cursor = &cursor;
                let pending = &pending;
                let candidates = &candidates;
                scope.spawn(move || loop {
                    let slot = cursor.fetch_add(1, Ordering::Relaxed);
                    let Some(&i) = pending.get(slot) else { break };
                    let record = fit_candidate(config, data, i, &candidates[i]);
                    if tx.send(record).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            // flush completions in pending order so any worker count
            // produces the same bytes
            let mut buffer: BTreeMap<u64, ScreenRecord> = BTreeMap::new();
            let mut next = 0usize;
            for record in rx {
                buffer.insert(record.index, record);
                while next < pending.len() {
                    let want = pending[next] as u64;
                    let Some(record) = buffer.remove(&want) else { break };
                    write_line(&mut out, &RecordLine { record: record.clone() })?;
                    fitted.insert(want, record);
                    next += 1;
                }
            }
            Ok(())
        })?;
    }
    drop(out);

    let mut records: Vec<ScreenRecord> = reused
        .into_values()
        .chain(fitted.into_values())
        .collect();
    records.sort_by_key(|r| r.index);

    let ranked = rank_indices(&records, config.criterion);
    let n_converged = ranked.len();
    for (pos, &i) in ranked.iter().enumerate() {
        records[i].rank = Some(pos + 1);
    }

    Ok(ScreenOutcome {
        n_candidates: candidates.len(),
        n_reused,
        n_converged,
        records,
    })
}

/// Loads a results file back: the meta line and all complete records in
/// index order.
pub fn load_results(path: &Path) -> Result<(ScreenMeta, Vec<ScreenRecord>)> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty results file", path.display())))??;
    let meta: MetaLine = serde_json::from_str(&first)
        .map_err(|_| Error::Data(format!("{}: not a screen output file", path.display())))?;
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        match serde_json::from_str::<RecordLine>(&line) {
            Ok(rl) => records.push(rl.record),
            Err(_) => break, // tolerate a truncated tail
        }
    }
    records.sort_by_key(|r| r.index);
    Ok((meta.meta, records))
}

/// All M! orderings of the irreversible chain s1 -> s2 -> ... -> sM over
/// the given species, deduplicated by canonical id.
pub fn permuted_consecutive(species: &[String]) -> Result<Vec<Mechanism>> {
    let m = species.len();
    if m < 2 {
        return Err(Error::Mechanism(
            "permuted chains need at least two species".into(),
        ));
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    loop {
        let text = order
            .windows(2)
            .map(|w| format!("{} -> {}", species[w[0]], species[w[1]]))
            .collect::<Vec<_>>()
            .join("; ");
        let mech = Mechanism::parse_with_species(&text, species)?;
        if seen.insert(mech.canonical_id()) {
            out.push(mech);
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(out)
}

/// Lexicographic successor in place; false once the order is descending.
fn next_permutation(order: &mut [usize]) -> bool {
    let n = order.len();
    let Some(i) = (0..n - 1).rev().find(|&i| order[i] < order[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| order[j] > order[i]).expect("exists");
    order.swap(i, j);
    order[i + 1..].reverse();
    true
}

#[derive(Debug, Clone)]
pub struct RankRow {
    pub rank: usize,
    pub id: String,
    pub mechanism: String,
    pub value: f64,
    pub delta: f64,
    pub rss: f64,
    pub p: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct RankReport {
    pub criterion: Criterion,
    pub rows: Vec<RankRow>,
    pub n_records: usize,
    pub n_converged: usize,
}

/// Deterministic ranking table over the records: top_k converged fits by
/// the criterion, with distances to the best.
pub fn rank_report(records: &[ScreenRecord], criterion: Criterion, top_k: usize) -> RankReport {
    let ranked = rank_indices(records, criterion);
    let best = ranked
        .first()
        .map(|&i| criterion.value(records[i].fit.as_ref().expect("ranked")));
    let rows = ranked
        .iter()
        .take(top_k)
        .enumerate()
        .map(|(pos, &i)| {
            let fit = records[i].fit.as_ref().expect("ranked records are fitted");
            let value = criterion.value(fit);
            RankRow {
                rank: pos + 1,
                id: records[i].id.clone(),
                mechanism: records[i].mechanism.clone(),
                value,
                delta: value - best.expect("rows exist only when best exists"),
                rss: fit.rss,
                p: fit.p,
                converged: fit.converged,
            }
        })
        .collect();
    RankReport {
        criterion,
        n_records: records.len(),
        n_converged: ranked.len(),
        rows,
    }
}

impl RankReport {
    /// Plain text table, columns aligned, one row per ranked record.
    pub fn render(&self) -> String {
        let name = self.criterion.name();
        let mut out = String::new();
        out.push_str(&format!(
            "{:<4} {:<30} {:>12} {:>10} {:>12} {:>3} {:>9}  mechanism\n",
            "rank",
            "id",
            name,
            format!("d{}", name),
            "rss",
            "p",
            "converged"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<4} {:<30} {:>12.6} {:>10.6} {:>12.6e} {:>3} {:>9}  {}\n",
                row.rank,
                row.id,
                row.value,
                row.delta,
                row.rss,
                row.p,
                row.converged,
                row.mechanism
            ));
        }
        out.push_str(&format!(
            "{} of {} records converged\n",
            self.n_converged, self.n_records
        ));
        out
    }
}

/// Writes observed-vs-fitted plot data for the top rows: one CSV per
/// observed species per row, named rank<NN>-<species>.csv.
pub fn write_rank_plots(
    report: &RankReport,
    records: &[ScreenRecord],
    data: &ObservationSet,
    dir: &Path,
    grid_points: usize,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for row in &report.rows {
        let record = records
            .iter()
            .find(|r| r.id == row.id)
            .expect("report rows come from records");
        let mech = Mechanism::parse(&record.mechanism)?;
        let fit = record.fit.as_ref().expect("ranked records are fitted");
        let result = fit.to_result(&mech)?;
        let mut problem = FitProblem::new(mech, data.clone());
        problem.fit_init = !fit.init_estimates.is_empty();
        let traj = crate::fitting::fitted_trajectory(&problem, &result, grid_points)?;
        let prefix = format!("rank{:02}-", row.rank);
        written.extend(crate::data::emit_plot_data(data, &traj, dir, &prefix)?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trimmed_fixture(n_points: usize) -> ObservationSet {
        let mut set = crate::data::fixture_sim_m2r2();
        set.times.truncate(n_points);
        set.values.truncate(n_points);
        set
    }

    fn test_config(dir: &Path, name: &str) -> ScreenConfig {
        let mut config = ScreenConfig::new(
            2,
            2,
            dir.join(name),
            "fixture:sim-m2r2".into(),
        );
        config.filter.mass_conserving = true;
        config.db_constrained = true;
        config
    }

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("crn-pipeline-{}", tag));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn screen_fits_all_candidates_and_ranks_converged() {
        let dir = temp_dir("basic");
        let config = test_config(&dir, "basic.jsonl");
        let data = trimmed_fixture(31);
        let outcome = screen(&config, &data).unwrap();
        assert_eq!(outcome.n_candidates, 3);
        assert_eq!(outcome.records.len(), 3);
        // ranks are 1..=n_converged and the criterion is non-decreasing
        let ranked: Vec<&ScreenRecord> = {
            let mut v: Vec<&ScreenRecord> =
                outcome.records.iter().filter(|r| r.rank.is_some()).collect();
            v.sort_by_key(|r| r.rank.unwrap());
            v
        };
        assert_eq!(ranked.len(), outcome.n_converged);
        assert!(outcome.n_converged >= 2);
        for (i, rec) in ranked.iter().enumerate() {
            assert_eq!(rec.rank, Some(i + 1));
        }
        for pair in ranked.windows(2) {
            let a = pair[0].fit.as_ref().unwrap().aic;
            let b = pair[1].fit.as_ref().unwrap().aic;
            assert!(a <= b);
        }
        // constrained mode: every CDB candidate fitted with 3 parameters
        for rec in &outcome.records {
            if rec.network.db_class == "CDB" {
                if let Some(fit) = &rec.fit {
                    assert_eq!(fit.p, 3);
                }
            }
        }
        let (meta, records) = load_results(&config.output).unwrap();
        assert_eq!(meta, config.meta());
        assert_eq!(records.len(), 3);
    }

    #[test]
    fn rerun_is_byte_identical_and_resume_refits_nothing() {
        let dir = temp_dir("determinism");
        let config = test_config(&dir, "det.jsonl");
        let data = trimmed_fixture(31);
        screen(&config, &data).unwrap();
        let first = std::fs::read(&config.output).unwrap();

        // fresh rerun overwrites with identical bytes
        screen(&config, &data).unwrap();
        assert_eq!(first, std::fs::read(&config.output).unwrap());

        // parallel run produces the same bytes
        let mut parallel = config.clone();
        parallel.workers = 4;
        screen(&parallel, &data).unwrap();
        assert_eq!(first, std::fs::read(&config.output).unwrap());

        // truncate to meta + first record + garbage tail, then resume
        let text = String::from_utf8(first.clone()).unwrap();
        let mut lines = text.lines();
        let kept = format!(
            "{}\n{}\n{{\"record\":{{\"index\":2,\"id\":\"trunc",
            lines.next().unwrap(),
            lines.next().unwrap()
        );
        std::fs::write(&config.output, kept).unwrap();
        let mut resume = config.clone();
        resume.resume = true;
        let outcome = screen(&resume, &data).unwrap();
        assert_eq!(outcome.n_reused, 1);
        assert_eq!(outcome.records.len(), 3);
        assert_eq!(first, std::fs::read(&config.output).unwrap());

        // resume under a different configuration is refused
        let mut other = resume.clone();
        other.criterion = Criterion::Rss; // not part of run identity: fine
        screen(&other, &data).unwrap();
        let mut conflicting = resume;
        conflicting.allow_negative = true;
        let err = screen(&conflicting, &data).unwrap_err();
        assert!(err.to_string().contains("different configuration"));
    }

    #[test]
    fn cap_and_empty_filters_are_reported() {
        let dir = temp_dir("guards");
        let mut config = test_config(&dir, "guards.jsonl");
        config.cap = 2;
        let data = trimmed_fixture(31);
        match screen(&config, &data) {
            Err(Error::CapExceeded { cap: 2, .. }) => {}
            other => panic!("expected cap error, got {:?}", other.map(|o| o.n_candidates)),
        }

        let mut empty = test_config(&dir, "empty.jsonl");
        empty.filter.db_class = Some(DbClass::Udb);
        match screen(&empty, &data) {
            Err(Error::EmptyCandidates) => {}
            other => panic!("expected empty error, got {:?}", other.map(|o| o.n_candidates)),
        }
    }

    #[test]
    fn permuted_chains_cover_all_orderings() {
        let names: Vec<String> = ["X", "Y", "Z"].iter().map(|s| s.to_string()).collect();
        let mechs = permuted_consecutive(&names).unwrap();
        assert_eq!(mechs.len(), 6);
        let ids: Vec<String> = mechs.iter().map(|m| m.canonical_id()).collect();
        let xyz = Mechanism::parse("X -> Y; Y -> Z").unwrap().canonical_id();
        let xzy = Mechanism::parse("X -> Z; Z -> Y").unwrap().canonical_id();
        assert!(ids.contains(&xyz));
        assert!(ids.contains(&xzy));
        // every chain has the same structural profile
        for mech in &mechs {
            let s = summarize(mech);
            assert_eq!((s.n, s.l, s.s, s.deficiency), (3, 1, 2, 0));
            assert!(!s.reversible);
        }

        let two: Vec<String> = ["X", "Y"].iter().map(|s| s.to_string()).collect();
        assert_eq!(permuted_consecutive(&two).unwrap().len(), 2);
        assert!(permuted_consecutive(&two[..1]).is_err());
    }

    #[test]
    fn rank_report_orders_and_measures_deltas() {
        let dir = temp_dir("report");
        let config = test_config(&dir, "report.jsonl");
        let data = trimmed_fixture(31);
        let outcome = screen(&config, &data).unwrap();
        let report = rank_report(&outcome.records, Criterion::Aic, 10);
        assert_eq!(report.rows.len(), outcome.n_converged);
        assert_eq!(report.rows[0].delta, 0.0);
        for pair in report.rows.windows(2) {
            assert!(pair[0].value <= pair[1].value);
            assert!(pair[1].delta >= 0.0);
        }
        let top1 = rank_report(&outcome.records, Criterion::Rss, 1);
        assert_eq!(top1.rows.len(), 1);
        let rendered = report.render();
        assert!(rendered.contains("rank"));
        assert!(rendered.contains("aic"));

        let plots_dir = dir.join("plots");
        let files = write_rank_plots(&report, &outcome.records, &data, &plots_dir, 50).unwrap();
        assert_eq!(files.len(), 2 * report.rows.len());
        let first = std::fs::read_to_string(&files[0]).unwrap();
        assert!(first.starts_with("t,observed,fitted"));
    }
}
