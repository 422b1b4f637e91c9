//! MRMR-prefiltered binary horse herd gene selection.
//!
//! A run discretizes the data, keeps the top-m MRMR genes, then searches
//! masks over those genes with a binary herd. Fitness is
//! `alpha * ACC + (1 - alpha) * |N - S| / N`, where ACC is stratified
//! cross-validated accuracy of the configured classifier on the masked
//! genes, N the filtered gene count and S the number of selected genes.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use parking_lot::Mutex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binarize::{binarize_s, binarize_v, x_shaped_update, Family, TransferFunctionKind};
use crate::classifiers::{cv_accuracy, ClassifierSpec};
use crate::dataset::{discretize, stratified_k_fold, subset, Dataset, Discretization, FoldPlan, GeneMask};
use crate::error::{Error, Result};
use crate::filters::mrmr_select;
use crate::hoa::{assign_age_classes, herd_guides, horse_velocity, ranks_from_order, HerdParams};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectorConfig {
    /// Accuracy weight; the gene-count weight is `1 - alpha_w`.
    pub alpha_w: f64,
    pub tf: TransferFunctionKind,
    pub n_horses: usize,
    pub max_iter: usize,
    pub mrmr_top_m: usize,
    pub classifier: ClassifierSpec,
    pub cv_folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub discretization: Discretization,
    pub herd: HerdParams,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            alpha_w: 0.99,
            tf: TransferFunctionKind::X,
            n_horses: 35,
            max_iter: 60,
            mrmr_top_m: 50,
            classifier: ClassifierSpec::default(),
            cv_folds: 10,
            repeats: 20,
            seed: 0,
            discretization: Discretization::default(),
            herd: HerdParams::default(),
        }
    }
}

impl SelectorConfig {
    pub fn beta_w(&self) -> f64 {
        1.0 - self.alpha_w
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha_w) {
            return Err(Error::InvalidParameter(format!(
                "alpha_w must lie in [0, 1], got {}",
                self.alpha_w
            )));
        }
        if self.n_horses < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 horses, got {}",
                self.n_horses
            )));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidParameter("repeats must be >= 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidParameter("cv_folds must be >= 2".into()));
        }
        self.classifier.validate()?;
        self.herd.validate()
    }
}

/// Weighted accuracy / compactness score.
pub fn fitness_value(accuracy: f64, selected: usize, total: usize, alpha_w: f64) -> f64 {
    let n = total as f64;
    alpha_w * accuracy + (1.0 - alpha_w) * (n - selected as f64).abs() / n
}

/// Empty masks are evaluated as the top-ranked filtered gene alone.
pub fn repair(mask: &mut GeneMask) -> bool {
    if mask.none_selected() && !mask.is_empty() {
        mask.set(0, true);
        true
    } else {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub accuracy: f64,
}

/// Memoized fitness over a fixed fold plan.
pub struct FitnessEvaluator<'a> {
    filtered: &'a Dataset,
    classifier: ClassifierSpec,
    plan: FoldPlan,
    alpha_w: f64,
    cache: Mutex<HashMap<Vec<u64>, Evaluation>>,
    computed: AtomicUsize,
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(filtered: &'a Dataset, classifier: ClassifierSpec, plan: FoldPlan, alpha_w: f64) -> Self {
        Self {
            filtered,
            classifier,
            plan,
            alpha_w,
            cache: Mutex::new(HashMap::new()),
            computed: AtomicUsize::new(0),
        }
    }

    pub fn evaluate(&self, mask: &GeneMask) -> Result<Evaluation> {
        let mut mask = mask.clone();
        repair(&mut mask);
        let key = mask.packed();
        if let Some(e) = self.cache.lock().get(&key) {
            return Ok(*e);
        }
        let data = subset(self.filtered, &mask)?;
        let accuracy = cv_accuracy(&data, &self.classifier, &self.plan)?;
        let e = Evaluation {
            fitness: fitness_value(accuracy, mask.selected_count(), mask.len(), self.alpha_w),
            accuracy,
        };
        self.computed.fetch_add(1, Ordering::Relaxed);
        self.cache.lock().insert(key, e);
        Ok(e)
    }

    pub fn fitness(&self, mask: &GeneMask) -> Result<f64> {
        self.evaluate(mask).map(|e| e.fitness)
    }

    /// Number of distinct masks actually cross-validated.
    pub fn computed(&self) -> usize {
        self.computed.load(Ordering::Relaxed)
    }
}

/// One-off fitness of `mask` over `filtered` with the given fold plan.
pub fn fitness(mask: &GeneMask, filtered: &Dataset, cfg: &SelectorConfig, plan: &FoldPlan) -> Result<f64> {
    if mask.len() != filtered.n_genes() {
        return Err(Error::LengthMismatch {
            left: mask.len(),
            right: filtered.n_genes(),
        });
    }
    FitnessEvaluator::new(filtered, cfg.classifier, plan.clone(), cfg.alpha_w).fitness(mask)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub fitness: f64,
    pub n_selected: usize,
    /// Original dataset columns of this repeat's best mask, ascending.
    pub gene_indices: Vec<usize>,
    /// Best fitness after initialization (entry 0) and after each iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub repairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub best_accuracy: f64,
    pub mean_accuracy: f64,
    pub worst_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_genes: f64,
    pub std_genes: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

impl Summary {
    /// Best/mean/worst/sample-std of accuracy and mean/sample-std of gene
    /// counts over the repeats.
    pub fn from_repeats(per_repeat: &[RepeatRecord]) -> Self {
        let acc: Vec<f64> = per_repeat.iter().map(|r| r.accuracy).collect();
        let genes: Vec<f64> = per_repeat.iter().map(|r| r.n_selected as f64).collect();
        let (mean_accuracy, std_accuracy) = mean_std(&acc);
        let (mean_genes, std_genes) = mean_std(&genes);
        Self {
            best_accuracy: acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_accuracy,
            worst_accuracy: acc.iter().copied().fold(f64::INFINITY, f64::min),
            std_accuracy,
            mean_genes,
            std_genes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub dataset: String,
    pub config: SelectorConfig,
    /// Original column indices of the MRMR-filtered genes, in rank order.
    pub mrmr_order: Vec<usize>,
    /// Best mask over the filtered genes (bit `i` is `mrmr_order[i]`).
    pub best_mask: GeneMask,
    pub best_gene_indices: Vec<usize>,
    pub best_gene_names: Vec<String>,
    pub best_fitness: f64,
    pub best_accuracy: f64,
    pub best_repeat: usize,
    pub per_repeat: Vec<RepeatRecord>,
    pub summary: Summary,
    /// Wall time per repeat in seconds. Stored apart from the JSON result
    /// so seeded runs serialize identically.
    #[serde(skip)]
    pub runtime_secs: Vec<f64>,
}

/// Progress callback: `(repeat, iteration, best fitness so far)`.
pub type Progress<'a> = &'a (dyn Fn(usize, usize, f64) + Sync);

pub fn run_selection(d: &Dataset, cfg: &SelectorConfig) -> Result<SelectionResult> {
    run_selection_with_progress(d, cfg, None)
}

pub fn run_selection_with_progress(
    d: &Dataset,
    cfg: &SelectorConfig,
    progress: Option<Progress<'_>>,
) -> Result<SelectionResult> {
    cfg.validate()?;
    if cfg.mrmr_top_m == 0 || cfg.mrmr_top_m > d.n_genes() {
        return Err(Error::BadM {
            m: cfg.mrmr_top_m,
            n_genes: d.n_genes(),
        });
    }
    let disc = discretize(d, cfg.discretization)?;
    let ranking = mrmr_select(&disc, d.labels(), cfg.mrmr_top_m)?;
    let filtered = d.take_columns(&ranking.order);

    let outcomes = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let start = Instant::now();
            let out = run_repeat(&filtered, &ranking.order, cfg, r, progress)?;
            Ok((out, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    let best_repeat = (0..outcomes.len()).fold(0, |b, r| {
        if outcomes[r].0.record.fitness > outcomes[b].0.record.fitness {
            r
        } else {
            b
        }
    });
    let best = &outcomes[best_repeat].0;
    let best_mask = best.mask.clone();
    let best_gene_indices = best.record.gene_indices.clone();
    let best_gene_names = best_gene_indices
        .iter()
        .map(|&g| d.gene_names()[g].clone())
        .collect();
    let best_fitness = best.record.fitness;
    let best_accuracy = best.record.accuracy;
    let (records, runtime_secs): (Vec<RepeatRecord>, Vec<f64>) =
        outcomes.into_iter().map(|(o, t)| (o.record, t)).unzip();
    Ok(SelectionResult {
        dataset: d.name().to_string(),
        config: cfg.clone(),
        mrmr_order: ranking.order,
        best_mask,
        best_gene_indices,
        best_gene_names,
        best_fitness,
        best_accuracy,
        best_repeat,
        summary: Summary::from_repeats(&records),
        per_repeat: records,
        runtime_secs,
    })
}

struct RepeatOutcome {
    mask: GeneMask,
    record: RepeatRecord,
}

/// Seed of one repeat: its fold plan, initial herd and horse streams derive from it.
pub fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    rng::derive(seed, &[rng::label_of("repeat"), repeat as u64])
}

fn run_repeat(
    filtered: &Dataset,
    mrmr_order: &[usize],
    cfg: &SelectorConfig,
    repeat: usize,
    progress: Option<Progress<'_>>,
) -> Result<RepeatOutcome> {
    let seed = repeat_seed(cfg.seed, repeat);
    let plan = stratified_k_fold(filtered, cfg.cv_folds, rng::named(seed, "folds"))?;
    let evaluator = FitnessEvaluator::new(filtered, cfg.classifier, plan, cfg.alpha_w);
    let m = filtered.n_genes();
    let n = cfg.n_horses;
    let repairs = AtomicUsize::new(0);

    let mut init = rng::stream(seed, &[rng::label_of("init")]);
    let mut masks: Vec<GeneMask> = (0..n)
        .map(|_| GeneMask::new((0..m).map(|_| init.random::<bool>()).collect()))
        .collect();
    for mask in &mut masks {
        if repair(mask) {
            repairs.fetch_add(1, Ordering::Relaxed);
        }
    }
    let mut fitness: Vec<f64> = masks
        .par_iter()
        .map(|mask| evaluator.fitness(mask))
        .collect::<Result<_>>()?;

    let mut personal_best: Vec<(GeneMask, f64)> =
        masks.iter().cloned().zip(fitness.iter().copied()).collect();
    let first = (0..n).fold(0, |b, h| if fitness[h] > fitness[b] { h } else { b });
    let mut best = (masks[first].clone(), fitness[first]);
    let mut trace = Vec::with_capacity(cfg.max_iter + 1);
    trace.push(best.1);
    let mut coeffs = cfg.herd.coefficients;

    for iteration in 1..=cfg.max_iter {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
        let ages = assign_age_classes(&ranks_from_order(&order));
        coeffs.decay(&cfg.herd.reduction);
        let positions: Vec<Vec<f64>> = masks.iter().map(GeneMask::as_f64).collect();
        let guides = herd_guides(&positions, &order, &best.0.as_f64(), &cfg.herd);

        let updated: Vec<(GeneMask, f64)> = (0..n)
            .into_par_iter()
            .map(|h| {
                let mut rng = rng::stream(seed, &[rng::label_of("horse"), iteration as u64, h as u64]);
                let v = horse_velocity(ages[h], &positions[h], &guides, &coeffs, &cfg.herd, &mut rng);
                let mut next = match cfg.tf.family() {
                    Family::S => binarize_s(cfg.tf, &masks[h], &v, &mut rng)?,
                    Family::V => binarize_v(cfg.tf, &masks[h], &v, &mut rng)?,
                    Family::X => {
                        let mut f = |mask: &GeneMask| evaluator.fitness(mask);
                        x_shaped_update(&masks[h], &v, &mut f, &mut rng)?.new_bits
                    }
                };
                if repair(&mut next) {
                    repairs.fetch_add(1, Ordering::Relaxed);
                }
                let f = evaluator.fitness(&next)?;
                Ok((next, f))
            })
            .collect::<Result<_>>()?;

        for (h, (mask, f)) in updated.into_iter().enumerate() {
            if f > personal_best[h].1 {
                personal_best[h] = (mask.clone(), f);
            }
            if f > best.1 {
                best = (mask.clone(), f);
            }
            masks[h] = mask;
            fitness[h] = f;
        }
        trace.push(best.1);
        if let Some(p) = progress {
            p(repeat, iteration, best.1);
        }
    }

    let eval = evaluator.evaluate(&best.0)?;
    let mut gene_indices: Vec<usize> = best.0.indices().iter().map(|&i| mrmr_order[i]).collect();
    gene_indices.sort_unstable();
    Ok(RepeatOutcome {
        record: RepeatRecord {
            repeat,
            seed,
            accuracy: eval.accuracy,
            fitness: best.1,
            n_selected: best.0.selected_count(),
            gene_indices,
            trace,
            evaluations: evaluator.computed(),
            repairs: repairs.into_inner(),
        },
        mask: best.0,
    })
}

/// Runs the same configuration once per transfer function, with the same
/// seed so every run shares its prefilter, fold plans and initial herds.
pub fn compare_transfer_functions(
    d: &Dataset,
    cfg: &SelectorConfig,
    tfs: &[TransferFunctionKind],
) -> Result<Vec<SelectionResult>> {
    tfs.iter()
        .map(|&tf| {
            let cfg = SelectorConfig { tf, ..cfg.clone() };
            run_selection(d, &cfg)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Timing {
    runtime_secs: Vec<f64>,
}

pub const RESULT_FILE: &str = "result.json";
pub const TIMING_FILE: &str = "timing.json";
pub const SUMMARY_FILE: &str = "summary.csv";

pub const SUMMARY_HEADER: [&str; 9] = [
    "dataset",
    "tf",
    "best_acc",
    "mean_acc",
    "worst_acc",
    "std_acc",
    "mean_genes",
    "std_genes",
    "runtime_secs",
];

pub fn summary_row(res: &SelectionResult) -> Vec<String> {
    let s = &res.summary;
    let runtime = if res.runtime_secs.is_empty() {
        0.0
    } else {
        res.runtime_secs.iter().sum::<f64>() / res.runtime_secs.len() as f64
    };
    vec![
        res.dataset.clone(),
        res.config.tf.to_string(),
        format!("{:?}", s.best_accuracy),
        format!("{:?}", s.mean_accuracy),
        format!("{:?}", s.worst_accuracy),
        format!("{:?}", s.std_accuracy),
        format!("{:?}", s.mean_genes),
        format!("{:?}", s.std_genes),
        format!("{runtime:.3}"),
    ]
}

/// Writes `result.json`, `timing.json` and a one-row `summary.csv` into `dir`.
pub fn export_result(res: &SelectionResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(res)?;
    json.push('\n');
    std::fs::write(dir.join(RESULT_FILE), json)?;
    let timing = Timing {
        runtime_secs: res.runtime_secs.clone(),
    };
    std::fs::write(dir.join(TIMING_FILE), serde_json::to_string_pretty(&timing)? + "\n")?;
    let mut w = csv::Writer::from_path(dir.join(SUMMARY_FILE))?;
    w.write_record(SUMMARY_HEADER)?;
    w.write_record(summary_row(res))?;
    w.flush()?;
    Ok(())
}

/// Reads back what [`export_result`] wrote.
pub fn read_result(dir: impl AsRef<Path>) -> Result<SelectionResult> {
    let dir = dir.as_ref();
    let mut res: SelectionResult = serde_json::from_str(&std::fs::read_to_string(dir.join(RESULT_FILE))?)?;
    let timing_path = dir.join(TIMING_FILE);
    if timing_path.exists() {
        let t: Timing = serde_json::from_str(&std::fs::read_to_string(timing_path)?)?;
        res.runtime_secs = t.runtime_secs;
    }
    Ok(res)
}
