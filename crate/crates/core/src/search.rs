//! Horizontal search: every model family under every feature configuration,
//! scored on accuracy, group disparities and the capped-lender simulation.
//!
//! Resample `r` draws its split from `derive(seed, [SPLIT, r])` and every
//! family fitted on that split uses `derive(seed, [MODEL, family, r])`, so
//! the race-aware and race-blind twins of a family share both their split
//! and their model seed. Disparities and the portfolio are computed on
//! resample 0; accuracy distributions use all resamples.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::{FeatureEncoder, FeatureMatrix, FeatureSet};
use crate::error::{Error, Result};
use crate::fairness::{self, Group, GroupRates, HeatmapBins, PredictionSet, TableRow};
use crate::frontier::{tradeoff_frontier, FeatureConfig, Frontier, TradeoffPoint};
use crate::ingest::{LoanOutcome, LoanRecord, RaceCategory};
use crate::models::{self, Hyperparams, ModelFamily, ModelSpec, DEFAULT_THRESHOLD};
use crate::seed;
use crate::sim::{self, Cents, GroupOutcome, LoanApplication};
use crate::split::{
    sample_and_split, DatasetSplit, SplitInfo, DEFAULT_SAMPLE_SIZE, DEFAULT_TRAIN_FRAC,
};

const SPLIT_TAG: u64 = 1;
const MODEL_TAG: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub cap: Cents,
    pub uniform_rate: f64,
    pub threshold: f64,
    /// Group whose simulated denial rate is the trade-off x-axis.
    pub impact_group: RaceCategory,
    pub comparison_groups: Vec<Group>,
    pub bins: HeatmapBins,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            cap: sim::DEFAULT_CAP,
            uniform_rate: 0.0,
            threshold: DEFAULT_THRESHOLD,
            impact_group: RaceCategory::Black,
            comparison_groups: vec![Group::Race(RaceCategory::Black), Group::PeopleOfColor],
            bins: HeatmapBins::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub families: Vec<ModelFamily>,
    pub feature_configs: Vec<FeatureConfig>,
    pub n_resamples: usize,
    pub seed: u64,
    pub sample_size: usize,
    pub train_frac: f64,
    pub sim: SimParams,
    /// Per-family hyperparameters; families not listed use their defaults.
    pub hyperparams: BTreeMap<ModelFamily, Hyperparams>,
}

impl SearchConfig {
    pub fn new(seed: u64) -> Self {
        SearchConfig {
            families: ModelFamily::ALL.to_vec(),
            feature_configs: FeatureConfig::ALL.to_vec(),
            n_resamples: 10,
            seed,
            sample_size: DEFAULT_SAMPLE_SIZE,
            train_frac: DEFAULT_TRAIN_FRAC,
            sim: SimParams::default(),
            hyperparams: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one model family is required".into(),
            ));
        }
        if self.feature_configs.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one feature config is required".into(),
            ));
        }
        if self.n_resamples == 0 {
            return Err(Error::InvalidParameter(
                "n_resamples must be at least 1".into(),
            ));
        }
        for (family, hp) in &self.hyperparams {
            let given = ModelSpec {
                hyperparams: hp.clone(),
                seed: 0,
            }
            .family();
            if given != *family {
                return Err(Error::InvalidParameter(format!(
                    "hyperparameters listed under {family} are for {given}"
                )));
            }
        }
        Ok(())
    }

    pub fn hyperparams_for(&self, family: ModelFamily) -> Hyperparams {
        self.hyperparams
            .get(&family)
            .cloned()
            .unwrap_or_else(|| family.default_hyperparams())
    }

    fn model_spec(&self, family: ModelFamily, resample: usize) -> ModelSpec {
        ModelSpec {
            hyperparams: self.hyperparams_for(family),
            seed: seed::derive(self.seed, &[MODEL_TAG, family as u64, resample as u64]),
        }
    }

    fn split(&self, records: &[LoanRecord], resample: usize) -> Result<DatasetSplit> {
        sample_and_split(
            records,
            self.sample_size,
            self.train_frac,
            seed::derive(self.seed, &[SPLIT_TAG, resample as u64]),
        )
    }

    /// Candidates in report order: families outer, feature configs inner.
    pub fn candidates(&self) -> Vec<(ModelFamily, FeatureConfig)> {
        self.families
            .iter()
            .flat_map(|&f| self.feature_configs.iter().map(move |&c| (f, c)))
            .collect()
    }
}

pub fn candidate_id(family: ModelFamily, config: FeatureConfig) -> String {
    format!("{family}/{config}")
}

/// Quartiles by linear interpolation between order statistics; outliers lie
/// outside `[q1 - 1.5 IQR, q3 + 1.5 IQR]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = v
            .iter()
            .copied()
            .filter(|x| (lo..=hi).contains(x))
            .collect();
        Some(BoxStats {
            n: v.len(),
            min: v[0],
            q1,
            median,
            q3,
            max: v[v.len() - 1],
            whisker_low: inside.first().copied().unwrap_or(median),
            whisker_high: inside.last().copied().unwrap_or(median),
            outliers: v.into_iter().filter(|x| !(lo..=hi).contains(x)).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPortfolio {
    pub applications: usize,
    pub denied: usize,
    pub denial_rate: Option<f64>,
}

impl From<GroupOutcome> for GroupPortfolio {
    fn from(o: GroupOutcome) -> Self {
        GroupPortfolio {
            applications: o.applications,
            denied: o.denied,
            denial_rate: o.denial_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSummary {
    pub cap: Cents,
    pub uniform_rate: f64,
    pub applications: usize,
    pub approved_count: usize,
    pub total_amount_approved: Cents,
    pub expected_value: f64,
    pub groups: BTreeMap<RaceCategory, GroupPortfolio>,
}

impl From<&sim::PortfolioResult> for PortfolioSummary {
    fn from(p: &sim::PortfolioResult) -> Self {
        PortfolioSummary {
            cap: p.cap,
            uniform_rate: p.uniform_rate,
            applications: p.approved.len() + p.denied.len(),
            approved_count: p.approved.len(),
            total_amount_approved: p.total_amount_approved,
            expected_value: p.expected_value,
            groups: p.groups.iter().map(|(g, o)| (*g, (*o).into())).collect(),
        }
    }
}

/// Everything computed from one model's scores on one test split.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSplit {
    pub accuracy: f64,
    pub predictions: PredictionSet,
    pub group_rates: Vec<GroupRates>,
    pub disparities: Vec<fairness::DisparityRow>,
    pub portfolio: sim::PortfolioResult,
}

impl ScoredSplit {
    pub fn impact_denial_pct(&self, group: RaceCategory) -> Option<f64> {
        sim::negative_impact(&self.portfolio, Group::Race(group)).map(|r| r * 100.0)
    }
}

pub fn applications(test: &[LoanRecord], scores: &[f64]) -> Vec<LoanApplication> {
    test.iter()
        .zip(scores)
        .map(|(r, &s)| LoanApplication {
            id: r.id,
            amount: Cents::from_units(r.loan_amount),
            repay_prob: 1.0 - s,
            group: r.race,
        })
        .collect()
}

/// Accuracy, group rates, disparities and portfolio for given test scores.
pub fn evaluate_scores(
    test: &[LoanRecord],
    scores: &[f64],
    params: &SimParams,
) -> Result<ScoredSplit> {
    if test.len() != scores.len() {
        return Err(Error::LengthMismatch(format!(
            "{} test rows but {} scores",
            test.len(),
            scores.len()
        )));
    }
    let labels: Vec<LoanOutcome> = test.iter().map(|r| r.outcome).collect();
    let races: Vec<RaceCategory> = test.iter().map(|r| r.race).collect();
    let predictions = models::threshold_classify(scores, params.threshold);
    let accuracy = models::accuracy(&predictions, &labels);
    let rates = |g| fairness::group_rates(&predictions, scores, &labels, &races, g);
    let white = rates(Group::Race(RaceCategory::White))?;
    let mut group_rates = vec![white.clone()];
    let mut disparities = Vec::new();
    for &g in &params.comparison_groups {
        let r = rates(g)?;
        disparities.push(fairness::disparities(&white, &r));
        group_rates.push(r);
    }
    let portfolio =
        sim::rank_and_approve(&applications(test, scores), params.cap, params.uniform_rate)?;
    Ok(ScoredSplit {
        accuracy,
        predictions: PredictionSet {
            predictions,
            scores: scores.to_vec(),
            labels,
            races,
        },
        group_rates,
        disparities,
        portfolio,
    })
}

fn encode_split(split: &DatasetSplit, set: FeatureSet) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let enc = FeatureEncoder::fit(&split.train, &split.test, set)?;
    Ok((enc.transform(&split.train), enc.transform(&split.test)))
}

fn fit_and_score(
    spec: &ModelSpec,
    train: &FeatureMatrix,
    split: &DatasetSplit,
    test: &FeatureMatrix,
) -> Result<Vec<f64>> {
    let labels: Vec<LoanOutcome> = split.train.iter().map(|r| r.outcome).collect();
    let model = models::fit(spec, train, &labels)?;
    models::predict_scores(&model, test)
}

/// Fit `spec` on the training side of `split` under `config` and evaluate it
/// on the test side.
pub fn evaluate_candidate(
    spec: &ModelSpec,
    config: FeatureConfig,
    split: &DatasetSplit,
    params: &SimParams,
) -> Result<ScoredSplit> {
    let (train, test) = encode_split(split, config.feature_set())?;
    let scores = fit_and_score(spec, &train, split, &test)?;
    evaluate_scores(&split.test, &scores, params)
}

/// Test accuracy of one family under one feature set on `n_resamples`
/// seeded splits.
pub fn accuracy_distribution(
    records: &[LoanRecord],
    config: &SearchConfig,
    family: ModelFamily,
    set: FeatureSet,
) -> Result<(Vec<f64>, BoxStats)> {
    let accs = (0..config.n_resamples)
        .map(|r| {
            let split = config.split(records, r)?;
            let (train, test) = encode_split(&split, set)?;
            let scores = fit_and_score(&config.model_spec(family, r), &train, &split, &test)?;
            let labels: Vec<LoanOutcome> = split.test.iter().map(|x| x.outcome).collect();
            Ok(models::accuracy(
                &models::threshold_classify(&scores, config.sim.threshold),
                &labels,
            ))
        })
        .collect::<Result<Vec<f64>>>()?;
    let stats = BoxStats::from_values(&accs).expect("n_resamples >= 1");
    Ok((accs, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDelta {
    pub resample: usize,
    pub split_fingerprint: String,
    pub aware_accuracy: f64,
    pub blind_accuracy: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub family: ModelFamily,
    pub pairs: Vec<PairedDelta>,
    pub stats: BoxStats,
}

/// Accuracy of the `aware` arm minus the `blind` arm, paired on each split.
pub fn race_inclusion_delta(
    records: &[LoanRecord],
    config: &SearchConfig,
    family: ModelFamily,
    aware: FeatureSet,
    blind: FeatureSet,
) -> Result<DeltaSummary> {
    let pairs = (0..config.n_resamples)
        .map(|r| {
            let split = config.split(records, r)?;
            let spec = config.model_spec(family, r);
            let labels: Vec<LoanOutcome> = split.test.iter().map(|x| x.outcome).collect();
            let acc = |set| -> Result<f64> {
                let (train, test) = encode_split(&split, set)?;
                let scores = fit_and_score(&spec, &train, &split, &test)?;
                Ok(models::accuracy(
                    &models::threshold_classify(&scores, config.sim.threshold),
                    &labels,
                ))
            };
            let (a, b) = (acc(aware)?, acc(blind)?);
            Ok(PairedDelta {
                resample: r,
                split_fingerprint: split.fingerprint(),
                aware_accuracy: a,
                blind_accuracy: b,
                delta: a - b,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(delta_summary(family, pairs))
}

fn delta_summary(family: ModelFamily, pairs: Vec<PairedDelta>) -> DeltaSummary {
    let deltas: Vec<f64> = pairs.iter().map(|p| p.delta).collect();
    DeltaSummary {
        family,
        stats: BoxStats::from_values(&deltas).expect("n_resamples >= 1"),
        pairs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub id: String,
    pub family: ModelFamily,
    pub feature_config: FeatureConfig,
    pub accuracies: Vec<f64>,
    pub accuracy_stats: BoxStats,
    pub group_rates: Vec<GroupRates>,
    pub disparities: Vec<TableRow>,
    pub portfolio: PortfolioSummary,
    pub tradeoff: TradeoffPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config: SearchConfig,
    /// Effective hyperparameters for every searched family.
    pub hyperparams: BTreeMap<ModelFamily, Hyperparams>,
    pub splits: Vec<SplitInfo>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub manifest: Manifest,
    pub candidates: Vec<CandidateResult>,
    pub failures: Vec<CandidateFailure>,
    pub deltas: Vec<DeltaSummary>,
    pub frontier: Frontier,
}

impl SearchReport {
    pub fn tradeoff_points(&self) -> Vec<&TradeoffPoint> {
        self.candidates.iter().map(|c| &c.tradeoff).collect()
    }

    pub fn candidate(
        &self,
        family: ModelFamily,
        config: FeatureConfig,
    ) -> Option<&CandidateResult> {
        self.candidates
            .iter()
            .find(|c| c.family == family && c.feature_config == config)
    }

    /// Undefined rates and disparities, as `candidate: what`.
    pub fn undefined_flags(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.candidates {
            for row in &c.disparities {
                for cell in row.cells.iter().filter(|cell| cell.value.is_none()) {
                    out.push(format!(
                        "{}: {} vs {} {} undefined",
                        c.id,
                        row.row.reference_group,
                        row.row.comparison_group,
                        cell.metric.tag()
                    ));
                }
            }
        }
        out
    }
}

const NOTES: [&str; 7] = [
    "Positive class is Denied; TPR, FPR and PPV are rates of the Denied label.",
    "Disparities are White minus comparison group, in percentage points; EO = (|FPR diff| + |TPR diff|) / 2.",
    "PCB and NCB compare mean predicted denial scores among truly denied and truly approved applicants.",
    "Undefined rates (zero denominators) are reported as null, never as 0.",
    "Race-blind candidates omit race, applicant sex and tract minority share.",
    "Simulated denial counts every application the capped lender did not approve; oversized loans are skipped and the scan continues.",
    "Portfolio, disparities and trade-off points come from resample 0; accuracy statistics use every resample.",
];

struct Fitted {
    accuracy: f64,
    scores: Vec<f64>,
}

/// Evaluate every configured candidate. Candidate failures are recorded and
/// the rest of the report is still produced.
pub fn run_horizontal_search(
    config: &SearchConfig,
    records: &[LoanRecord],
) -> Result<SearchReport> {
    config.validate()?;
    let splits = (0..config.n_resamples)
        .map(|r| config.split(records, r))
        .collect::<Result<Vec<_>>>()?;

    // Encodings are shared by all families.
    let encoded: BTreeMap<(FeatureConfig, usize), (FeatureMatrix, FeatureMatrix)> = config
        .feature_configs
        .par_iter()
        .flat_map(|&fc| (0..splits.len()).into_par_iter().map(move |r| (fc, r)))
        .map(|(fc, r)| encode_split(&splits[r], fc.feature_set()).map(|m| ((fc, r), m)))
        .collect::<Result<_>>()?;

    let jobs: Vec<(ModelFamily, FeatureConfig, usize)> = config
        .candidates()
        .into_iter()
        .flat_map(|(f, c)| (0..splits.len()).map(move |r| (f, c, r)))
        .collect();
    let fitted: Vec<Result<Fitted>> = jobs
        .par_iter()
        .map(|&(family, fc, r)| {
            let (train, test) = &encoded[&(fc, r)];
            let scores = fit_and_score(&config.model_spec(family, r), train, &splits[r], test)?;
            let labels: Vec<LoanOutcome> = splits[r].test.iter().map(|x| x.outcome).collect();
            let accuracy = models::accuracy(
                &models::threshold_classify(&scores, config.sim.threshold),
                &labels,
            );
            Ok(Fitted { accuracy, scores })
        })
        .collect();

    let mut by_job: BTreeMap<(ModelFamily, FeatureConfig), Vec<Result<Fitted>>> = BTreeMap::new();
    for ((f, c, _), res) in jobs.into_iter().zip(fitted) {
        by_job.entry((f, c)).or_default().push(res);
    }

    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    let mut accuracies: BTreeMap<(ModelFamily, FeatureConfig), Vec<f64>> = BTreeMap::new();
    for (family, fc) in config.candidates() {
        let id = candidate_id(family, fc);
        let runs = by_job.remove(&(family, fc)).unwrap_or_default();
        match assemble_candidate(config, &id, family, fc, runs, &splits[0]) {
            Ok(c) => {
                accuracies.insert((family, fc), c.accuracies.clone());
                candidates.push(c);
            }
            Err(e) => {
                log::warn!("candidate {id} failed: {e}");
                failures.push(CandidateFailure {
                    id,
                    error: e.to_string(),
                });
            }
        }
    }

    let deltas = config
        .families
        .iter()
        .filter_map(|&family| {
            let aware = accuracies.get(&(family, FeatureConfig::RaceAware))?;
            let blind = accuracies.get(&(family, FeatureConfig::RaceBlind))?;
            let pairs = aware
                .iter()
                .zip(blind)
                .enumerate()
                .map(|(r, (a, b))| PairedDelta {
                    resample: r,
                    split_fingerprint: splits[r].fingerprint(),
                    aware_accuracy: *a,
                    blind_accuracy: *b,
                    delta: a - b,
                })
                .collect();
            Some(delta_summary(family, pairs))
        })
        .collect();

    let points: Vec<TradeoffPoint> = candidates
        .iter()
        .map(|c: &CandidateResult| c.tradeoff.clone())
        .collect();
    let frontier = tradeoff_frontier(&points);
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        hyperparams: config
            .families
            .iter()
            .map(|&f| (f, config.hyperparams_for(f)))
            .collect(),
        splits: splits.iter().map(SplitInfo::from).collect(),
        notes: NOTES.iter().map(|s| s.to_string()).collect(),
    };
    Ok(SearchReport {
        manifest,
        candidates,
        failures,
        deltas,
        frontier,
    })
}

fn assemble_candidate(
    config: &SearchConfig,
    id: &str,
    family: ModelFamily,
    fc: FeatureConfig,
    runs: Vec<Result<Fitted>>,
    first_split: &DatasetSplit,
) -> Result<CandidateResult> {
    let runs = runs
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Candidate {
            candidate: id.to_string(),
            source: Box::new(e),
        })?;
    let accuracies: Vec<f64> = runs.iter().map(|f| f.accuracy).collect();
    let accuracy_stats = BoxStats::from_values(&accuracies).expect("n_resamples >= 1");
    let scored = evaluate_scores(&first_split.test, &runs[0].scores, &config.sim)?;
    let disparities = scored
        .disparities
        .iter()
        .map(|d| fairness::table_row(id, d.clone(), &config.sim.bins))
        .collect();
    let tradeoff = TradeoffPoint {
        candidate: id.to_string(),
        family,
        feature_config: fc,
        expected_value_millions: scored.portfolio.expected_value / 1e6,
        black_denial_pct: scored.impact_denial_pct(config.sim.impact_group),
        median_accuracy: accuracy_stats.median,
    };
    Ok(CandidateResult {
        id: id.to_string(),
        family,
        feature_config: fc,
        accuracies,
        accuracy_stats,
        group_rates: scored.group_rates,
        disparities,
        portfolio: (&scored.portfolio).into(),
        tradeoff,
    })
}
