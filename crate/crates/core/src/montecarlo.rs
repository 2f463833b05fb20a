//! Repeated simulate-calibrate-evaluate experiments.
//!
//! Trial `t` derives its seeds from the master seed as
//! `mix_seed(master, t, 0)` for the layout, `mix_seed(master, t, 1)` for the
//! observation noise and `mix_seed(master, t, 2)` for annealing, so trials
//! are independent and the table does not depend on execution order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align, calibration_error, rmse};
use crate::crlb::crlb_report;
use crate::engine::{run, GardeConfig};
use crate::error::{GardeError, Result};
use crate::geometry::{distance, Geometry, ObservationSet};
use crate::sim::{generate_scenario, mix_seed, synthesize_observations, NoiseModel, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    WithAnnealing,
    WithoutAnnealing,
    IterationSweep,
}

/// Plot-ready `(x, y)` pairs.
pub type Curve = Vec<(f64, f64)>;

fn default_variants() -> Vec<Variant> {
    vec![Variant::WithAnnealing]
}

fn default_sweep() -> Vec<usize> {
    vec![0, 1, 2, 5, 10, 30]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub scenario: Scenario,
    pub noise: NoiseModel,
    #[serde(default)]
    pub garde: GardeConfig,
    pub trials: usize,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_sweep")]
    pub sweep_iterations: Vec<usize>,
    /// Master seed; defaults to the scenario seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl MonteCarloConfig {
    pub fn master_seed(&self) -> u64 {
        self.seed.unwrap_or(self.scenario.rng_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(GardeError::Config("trials must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(GardeError::Config("at least one variant required".into()));
        }
        self.scenario.validate()?;
        self.noise.validate()?;
        self.garde.validate()
    }
}

/// One GARDE run within a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub trial: usize,
    /// `annealing`, `plain`, or `sweep` / `sweep_annealing` for iteration sweeps.
    pub variant: String,
    pub iterations: usize,
    pub annealing: usize,
    /// Node calibration error after optimal rigid alignment, meters.
    pub node_error: Option<f64>,
    pub source_error: Option<f64>,
    pub geometry_error: Option<f64>,
    pub fit_score: Option<f64>,
    /// Largest |d̂ - d| over all observations.
    pub max_error_full: f64,
    /// Largest |d̂ - d| over the observations of the selected sources.
    pub max_error_subset: Option<f64>,
    /// Per-class RMSE after aligning the whole geometry to the truth.
    pub node_rmse: Option<f64>,
    pub source_rmse: Option<f64>,
    /// Root-mean-square Cramér–Rao bound per class at the true geometry.
    pub node_crlb: Option<f64>,
    pub source_crlb: Option<f64>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub records: Vec<RunRecord>,
    /// Trials whose setup (layout or observations) failed.
    pub failed_trials: usize,
}

struct RunSpec {
    label: &'static str,
    iterations: usize,
    annealing: usize,
}

fn run_specs(config: &MonteCarloConfig) -> Vec<RunSpec> {
    let mut specs = Vec::new();
    for v in &config.variants {
        match v {
            Variant::WithAnnealing => specs.push(RunSpec {
                label: "annealing",
                iterations: config.garde.num_iterations,
                annealing: config.garde.num_annealing,
            }),
            Variant::WithoutAnnealing => specs.push(RunSpec {
                label: "plain",
                iterations: config.garde.num_iterations,
                annealing: 0,
            }),
            Variant::IterationSweep => {
                for &it in &config.sweep_iterations {
                    specs.push(RunSpec { label: "sweep", iterations: it, annealing: 0 });
                    specs.push(RunSpec {
                        label: "sweep_annealing",
                        iterations: it,
                        annealing: config.garde.num_annealing,
                    });
                }
            }
        }
    }
    specs
}

fn max_abs_error(truth: &Geometry, obs: &ObservationSet, sources: Option<&[usize]>) -> f64 {
    let keep = |k: usize| sources.is_none_or(|s| s.binary_search(&k).is_ok());
    obs.iter_valid()
        .filter(|&(_, k, _)| keep(k))
        .map(|(n, k, d)| (d - distance(truth.nodes[n], truth.sources[k])).abs())
        .fold(0.0, f64::max)
}

/// Layout and observations of one trial.
pub fn trial_instance(config: &MonteCarloConfig, trial: usize) -> Result<(Geometry, ObservationSet)> {
    let master = config.master_seed();
    let scenario = Scenario {
        rng_seed: mix_seed(master, trial as u64, 0),
        ..config.scenario.clone()
    };
    let truth = generate_scenario(&scenario)?;
    let obs = synthesize_observations(&truth, &config.noise, mix_seed(master, trial as u64, 1))?;
    Ok((truth, obs))
}

fn run_trial(config: &MonteCarloConfig, specs: &[RunSpec], trial: usize) -> Option<Vec<RunRecord>> {
    let (truth, obs) = trial_instance(config, trial).ok()?;
    let sigma = config.noise.effective_sigma(&truth, &obs);
    let (src_bounds, node_bounds) = crlb_report(&truth, sigma, Some(&obs)).ok()?;
    let max_error_full = max_abs_error(&truth, &obs, None);
    let seed = mix_seed(config.master_seed(), trial as u64, 2);

    let records = specs
        .iter()
        .map(|spec| {
            let garde = GardeConfig {
                num_iterations: spec.iterations,
                num_annealing: spec.annealing,
                rng_seed: seed,
                ..config.garde.clone()
            };
            let mut rec = RunRecord {
                trial,
                variant: spec.label.to_string(),
                iterations: spec.iterations,
                annealing: spec.annealing,
                node_error: None,
                source_error: None,
                geometry_error: None,
                fit_score: None,
                max_error_full,
                max_error_subset: None,
                node_rmse: None,
                source_rmse: None,
                node_crlb: node_bounds.rms_bound(),
                source_crlb: src_bounds.rms_bound(),
                error: None,
            };
            let evaluated = run(&obs, &garde).and_then(|res| {
                let est = &res.geometry;
                let node_error = calibration_error(&est.nodes, &truth.nodes, true)?;
                let source_error = calibration_error(&est.sources, &truth.sources, true)?;
                let (_, aligned) = align(&est.all_points(), &truth.all_points(), true)?;
                let n = truth.node_count();
                Ok((res, node_error, source_error, aligned, n))
            });
            match evaluated {
                Ok((res, node_error, source_error, aligned, n)) => {
                    rec.node_error = Some(node_error);
                    rec.source_error = Some(source_error);
                    rec.geometry_error = Some(rmse(&aligned, &truth.all_points()));
                    rec.node_rmse = Some(rmse(&aligned[..n], &truth.nodes));
                    rec.source_rmse = Some(rmse(&aligned[n..], &truth.sources));
                    rec.fit_score = Some(res.fit_score);
                    rec.max_error_subset =
                        Some(max_abs_error(&truth, &obs, Some(&res.selected_sources)));
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect();
    Some(records)
}

/// Runs `config.trials` independent trials. Failed trial setups are counted
/// and skipped; failed GARDE runs are kept as rows with an error message.
pub fn run_montecarlo(config: &MonteCarloConfig) -> Result<ExperimentTable> {
    config.validate()?;
    let specs = run_specs(config);
    let per_trial: Vec<Option<Vec<RunRecord>>> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, &specs, t))
        .collect();
    let failed_trials = per_trial.iter().filter(|r| r.is_none()).count();
    let records = per_trial.into_iter().flatten().flatten().collect();
    Ok(ExperimentTable {
        records,
        failed_trials,
    })
}

/// Aggregate statistics of one variant label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub iterations: usize,
    pub annealing: usize,
    pub runs: usize,
    pub failed_runs: usize,
    pub mean_node_error: Option<f64>,
    pub median_node_error: Option<f64>,
    pub max_node_error: Option<f64>,
    pub mean_source_error: Option<f64>,
    /// Pooled empirical RMSE and pooled bound per class.
    pub node_rmse: Option<f64>,
    pub node_crlb: Option<f64>,
    pub source_rmse: Option<f64>,
    pub source_crlb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub failed_trials: usize,
    pub failed_runs: usize,
    pub max_node_error: Option<f64>,
    pub max_geometry_error: Option<f64>,
    pub variants: Vec<VariantSummary>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn rms(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt())
}

pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
}

fn max(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::max)
}

impl ExperimentTable {
    /// Successful records of one variant label and iteration/annealing setting.
    pub fn runs<'a>(
        &'a self,
        variant: &'a str,
        iterations: usize,
    ) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.variant == variant && r.iterations == iterations && r.succeeded())
    }

    /// Distinct (variant, iterations, annealing) settings in first-seen order.
    fn settings(&self) -> Vec<(String, usize, usize)> {
        let mut out: Vec<(String, usize, usize)> = Vec::new();
        for r in &self.records {
            let key = (r.variant.clone(), r.iterations, r.annealing);
            if !out.contains(&key) {
                out.push(key);
            }
        }
        out
    }

    pub fn summary(&self) -> Summary {
        let trials = {
            let mut t: Vec<usize> = self.records.iter().map(|r| r.trial).collect();
            t.dedup();
            t.len()
        };
        let ok: Vec<&RunRecord> = self.records.iter().filter(|r| r.succeeded()).collect();
        let node_errors: Vec<f64> = ok.iter().filter_map(|r| r.node_error).collect();
        let geometry_errors: Vec<f64> = ok.iter().filter_map(|r| r.geometry_error).collect();
        let variants = self
            .settings()
            .into_iter()
            .map(|(variant, iterations, annealing)| {
                let all: Vec<&RunRecord> = self
                    .records
                    .iter()
                    .filter(|r| r.variant == variant && r.iterations == iterations)
                    .collect();
                let good: Vec<&&RunRecord> = all.iter().filter(|r| r.succeeded()).collect();
                let col = |f: fn(&RunRecord) -> Option<f64>| -> Vec<f64> {
                    good.iter().filter_map(|r| f(r)).collect()
                };
                let ne = col(|r| r.node_error);
                VariantSummary {
                    variant,
                    iterations,
                    annealing,
                    runs: all.len(),
                    failed_runs: all.len() - good.len(),
                    mean_node_error: mean(&ne),
                    median_node_error: median(&ne),
                    max_node_error: max(&ne),
                    mean_source_error: mean(&col(|r| r.source_error)),
                    node_rmse: rms(&col(|r| r.node_rmse)),
                    node_crlb: rms(&col(|r| r.node_crlb)),
                    source_rmse: rms(&col(|r| r.source_rmse)),
                    source_crlb: rms(&col(|r| r.source_crlb)),
                }
            })
            .collect();
        Summary {
            trials,
            failed_trials: self.failed_trials,
            failed_runs: self.records.len() - ok.len(),
            max_node_error: max(&node_errors),
            max_geometry_error: max(&geometry_errors),
            variants,
        }
    }

    /// Empirical CDF points `(value, fraction ≤ value)` of the largest range
    /// error, over the full observation set and over the selected subset,
    /// taken from the first variant present.
    pub fn max_error_cdfs(&self) -> (Curve, Curve) {
        let Some(first) = self.records.iter().find(|r| r.succeeded()) else {
            return (Vec::new(), Vec::new());
        };
        let rows: Vec<&RunRecord> = self
            .runs(&first.variant, first.iterations)
            .collect();
        let full: Vec<f64> = rows.iter().map(|r| r.max_error_full).collect();
        let subset: Vec<f64> = rows.iter().filter_map(|r| r.max_error_subset).collect();
        (empirical_cdf(&full), empirical_cdf(&subset))
    }

    /// Mean node calibration error against iteration count for one label.
    pub fn error_vs_iterations(&self, variant: &str) -> Vec<(usize, f64)> {
        let mut its: Vec<usize> = self
            .records
            .iter()
            .filter(|r| r.variant == variant)
            .map(|r| r.iterations)
            .collect();
        its.sort_unstable();
        its.dedup();
        its.into_iter()
            .filter_map(|it| {
                let e: Vec<f64> = self.runs(variant, it).filter_map(|r| r.node_error).collect();
                mean(&e).map(|m| (it, m))
            })
            .collect()
    }

    /// Per-trial `(bound, empirical RMSE)` pairs for nodes and sources, from
    /// the first variant present.
    pub fn rmse_vs_crlb(&self) -> (Curve, Curve) {
        let Some(first) = self.records.iter().find(|r| r.succeeded()) else {
            return (Vec::new(), Vec::new());
        };
        let rows: Vec<&RunRecord> = self.runs(&first.variant, first.iterations).collect();
        let nodes = rows
            .iter()
            .filter_map(|r| Some((r.node_crlb?, r.node_rmse?)))
            .collect();
        let sources = rows
            .iter()
            .filter_map(|r| Some((r.source_crlb?, r.source_rmse?)))
            .collect();
        (nodes, sources)
    }
}

/// Sorted values paired with their empirical CDF `i / n`.
pub fn empirical_cdf(values: &[f64]) -> Curve {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect()
}
