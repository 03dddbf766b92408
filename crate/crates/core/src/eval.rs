//! Confusion counts, metrics, the per-family comparison harness, selection rules and reports.

use std::cmp::Ordering;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use nnkit::train::{evaluate, predict, train_split};
use nnkit::{Sample, Tensor, TrainConfig};
use rayon::prelude::*;

use crate::corpus::{validation_partition, Dataset};
use crate::error::{Error, Result};
use crate::models::{build_architecture, label_for, ArchitectureId, Family, Featurizer, ModelInstance};
use crate::textprep::{fit_tfidf, preprocess, Stoplist, TokenSeq};

/// Binary confusion counts; label 1 is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("confusion over zero predictions"));
    }
    let mut c = ConfusionMatrix::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p != 0, y != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub loss: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Vanishing denominators yield 0.
pub fn metrics_from_confusion(c: &ConfusionMatrix, mean_loss: f64) -> MetricsReport {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    MetricsReport {
        accuracy: ratio(c.tp + c.tn, c.total()),
        loss: mean_loss,
        precision,
        recall,
        f1,
    }
}

/// Final-epoch training numbers and test metrics of one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMetrics {
    pub train_acc: f64,
    pub train_loss: f64,
    pub val_acc: Option<f64>,
    pub val_loss: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent for rows entered from published figures.
    pub test: Option<ConfusionMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub id: ArchitectureId,
    /// `Err` carries the failure message of a row whose training aborted.
    pub outcome: std::result::Result<RowMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub family: Family,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Highest validation accuracy, then lowest validation loss.
    ValFirst,
    /// Highest test F1, then highest precision.
    F1First,
}

impl SelectionRule {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Tinyformer => SelectionRule::F1First,
            _ => SelectionRule::ValFirst,
        }
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionRule::ValFirst => "val_first",
            SelectionRule::F1First => "f1_first",
        })
    }
}

impl FromStr for SelectionRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "val_first" => Ok(SelectionRule::ValFirst),
            "f1_first" => Ok(SelectionRule::F1First),
            _ => Err(format!("unknown selection rule `{s}` (expected val_first or f1_first)")),
        }
    }
}

/// Orders "better" rows first. A missing validation number ranks last.
fn compare(rule: SelectionRule, a: &RowMetrics, b: &RowMetrics) -> Ordering {
    let desc = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    let asc = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    match rule {
        SelectionRule::ValFirst => desc(a.val_acc, b.val_acc).then_with(|| asc(a.val_loss, b.val_loss)),
        SelectionRule::F1First => b.f1.total_cmp(&a.f1).then_with(|| b.precision.total_cmp(&a.precision)),
    }
}

/// Best successful row under `rule`; remaining ties go to the earlier catalog entry.
pub fn select_preferred(table: &ComparisonTable, rule: SelectionRule) -> Result<ArchitectureId> {
    select_from(table.rows.iter(), rule)
}

/// Like [`select_preferred`] but across rows of any families.
pub fn select_from<'a>(rows: impl IntoIterator<Item = &'a ComparisonRow>, rule: SelectionRule) -> Result<ArchitectureId> {
    rows.into_iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|m| (r.id, m)))
        .min_by(|(ia, a), (ib, b)| compare(rule, a, b).then_with(|| ia.catalog_index().cmp(&ib.catalog_index())))
        .map(|(id, _)| id)
        .ok_or(Error::Empty("no successful rows to select from"))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"))
}

/// Two aligned sections: training/validation numbers, then test precision/recall/F1.
pub fn render_table(table: &ComparisonTable) -> String {
    let id_width = table
        .rows
        .iter()
        .map(|r| r.id.to_string().len())
        .chain(["Architecture".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let section = |out: &mut String, title: &str, headers: &[&str], values: &dyn Fn(&RowMetrics) -> Vec<Option<f64>>| {
        let _ = writeln!(out, "{} {title}", table.family.as_str().to_uppercase());
        let _ = write!(out, "{:<id_width$}", "Architecture");
        for h in headers {
            let _ = write!(out, "  {h:>9}");
        }
        out.push('\n');
        for row in &table.rows {
            let _ = write!(out, "{:<id_width$}", row.id.to_string());
            match &row.outcome {
                Ok(m) => {
                    for v in values(m) {
                        let _ = write!(out, "  {:>9}", cell(v));
                    }
                }
                Err(e) => {
                    let _ = write!(out, "  error: {e}");
                }
            }
            out.push('\n');
        }
    };
    section(
        &mut out,
        "accuracy and loss (final epoch)",
        &["TrainAcc", "TrainLoss", "ValAcc", "ValLoss"],
        &|m| vec![Some(m.train_acc), Some(m.train_loss), m.val_acc, m.val_loss],
    );
    out.push('\n');
    section(
        &mut out,
        "precision, recall and F1 (test)",
        &["Precision", "Recall", "F1"],
        &|m| vec![Some(m.precision), Some(m.recall), Some(m.f1)],
    );
    out
}

/// One `id.metric=value` line per number, same rounding as [`render_table`].
pub fn render_kv(table: &ComparisonTable) -> String {
    let mut out = String::new();
    for row in &table.rows {
        let id = row.id;
        match &row.outcome {
            Ok(m) => {
                let fields = [
                    ("train_acc", Some(m.train_acc)),
                    ("train_loss", Some(m.train_loss)),
                    ("val_acc", m.val_acc),
                    ("val_loss", m.val_loss),
                    ("precision", Some(m.precision)),
                    ("recall", Some(m.recall)),
                    ("f1", Some(m.f1)),
                ];
                for (k, v) in fields {
                    if let Some(v) = v {
                        let _ = writeln!(out, "{id}.{k}={v:.4}");
                    }
                }
                if let Some(c) = m.test {
                    let _ = writeln!(out, "{id}.tp={}\n{id}.fp={}\n{id}.fn={}\n{id}.tn={}", c.tp, c.fp, c.fn_, c.tn);
                }
            }
            Err(e) => {
                let _ = writeln!(out, "{id}.error={}", e.replace('\n', " "));
            }
        }
    }
    out
}

/// A finished comparison with the fitted featurizer and every successfully trained model.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub table: ComparisonTable,
    pub featurizer: Featurizer,
    pub models: Vec<ModelInstance>,
}

impl Experiment {
    pub fn model(&self, id: ArchitectureId) -> Option<&ModelInstance> {
        self.models.iter().find(|m| m.id == id)
    }
}

/// Seed for building and shuffling one row.
pub fn row_seed(seed: u64, id: ArchitectureId) -> u64 {
    seed.wrapping_add(id.catalog_index() as u64)
}

fn samples(featurizer: &Featurizer, family: Family, docs: &[TokenSeq], labels: &[u8]) -> Result<Vec<(Tensor, f64)>> {
    let contract = featurizer.contract(family);
    docs.iter()
        .zip(labels)
        .map(|(d, &y)| Ok((featurizer.input(family, d).to_tensor(contract)?, f64::from(y))))
        .collect()
}

fn to_samples(pairs: &[(Tensor, f64)]) -> Vec<Sample> {
    pairs
        .iter()
        .map(|(input, target)| Sample {
            input: input.clone(),
            target: *target,
        })
        .collect()
}

/// Trains and tests every catalog variant of `family`.
///
/// `train` is split into fit/validation parts with `config.val_fraction` and `config.seed`;
/// the vectorizer sees only the fit part. Each row uses [`row_seed`] for initialization and
/// shuffling, and the family's learning rate. Rows run in parallel; a failing row is
/// recorded in the table and does not stop the others.
pub fn run_experiment(
    train: &Dataset,
    test: &Dataset,
    family: Family,
    config: &TrainConfig,
    stoplist: &Stoplist,
) -> Result<Experiment> {
    config.validate()?;
    let train_labels = train.labels()?;
    let test_labels = test.labels()?;
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let (fit, val) = validation_partition(train, config.val_fraction, config.seed)?;
    let docs = |ds: &Dataset| -> Vec<TokenSeq> { ds.iter().map(|r| preprocess(&r.text, stoplist)).collect() };
    let (fit_docs, val_docs, test_docs) = (docs(&fit), docs(&val), docs(test));
    let featurizer = Featurizer::new(fit_tfidf(&fit_docs)?);

    let fit_set = samples(&featurizer, family, &fit_docs, &fit.labels()?)?;
    let val_set = samples(&featurizer, family, &val_docs, &val.labels()?)?;
    let test_set = samples(&featurizer, family, &test_docs, &test_labels)?;
    debug_assert_eq!(fit_set.len() + val_set.len(), train_labels.len());

    let contract = featurizer.contract(family);
    let results: Vec<(ComparisonRow, Option<ModelInstance>)> = family
        .variants()
        .into_par_iter()
        .map(|id| {
            let seed = row_seed(config.seed, id);
            let mut row_cfg = config.clone();
            row_cfg.seed = seed;
            row_cfg.adam.lr = id.learning_rate();
            let outcome = build_architecture(id, contract, seed).and_then(|mut model| {
                let metrics = train_and_test(&mut model, &fit_set, &val_set, &test_set, &row_cfg)?;
                Ok((metrics, model))
            });
            match outcome {
                Ok((m, model)) => (ComparisonRow { id, outcome: Ok(m) }, Some(model)),
                Err(e) => {
                    log::warn!("{id} failed: {e}");
                    (
                        ComparisonRow {
                            id,
                            outcome: Err(e.to_string()),
                        },
                        None,
                    )
                }
            }
        })
        .collect();

    let (rows, models): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(Experiment {
        table: ComparisonTable { family, rows },
        featurizer,
        models: models.into_iter().flatten().collect(),
    })
}

fn train_and_test(
    model: &mut ModelInstance,
    fit: &[(Tensor, f64)],
    val: &[(Tensor, f64)],
    test: &[(Tensor, f64)],
    config: &TrainConfig,
) -> Result<RowMetrics> {
    let (fit, val) = (to_samples(fit), to_samples(val));
    let trace = train_split(&mut model.network, &fit, &val, config)?;
    let (train_acc, train_loss, val_acc, val_loss) = match trace.last() {
        Some(s) => (s.train_acc, s.train_loss, s.val_acc, s.val_loss),
        None => {
            let (a, l) = evaluate(&model.network, &fit, config.loss)?;
            let (va, vl) = if val.is_empty() {
                (None, None)
            } else {
                let (va, vl) = evaluate(&model.network, &val, config.loss)?;
                (Some(va), Some(vl))
            };
            (a, l, va, vl)
        }
    };

    let probs: Vec<f64> = test
        .iter()
        .map(|(x, _)| predict(&model.network, x))
        .collect::<nnkit::Result<_>>()?;
    let targets: Vec<f64> = test.iter().map(|(_, y)| *y).collect();
    let preds: Vec<u8> = probs.iter().map(|&p| label_for(p)).collect();
    let labels: Vec<u8> = targets.iter().map(|&y| u8::from(y >= 0.5)).collect();
    let c = confusion(&preds, &labels)?;
    let m = metrics_from_confusion(&c, config.loss.value(&probs, &targets)?);
    Ok(RowMetrics {
        train_acc,
        train_loss,
        val_acc,
        val_loss,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        test: Some(c),
    })
}
