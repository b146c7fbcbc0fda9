//! Cross-validated evaluation of binary models and the electrode ablation.

mod ablation;
mod folds;
mod metrics;

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{train_mdm, train_vector, ModelKind, ModelSpec, Pipeline, TrainedModel};
use crate::data::{EpochSet, Label};
use crate::error::{Error, Result};
use crate::features::{CspWdConfig, CspWdExtractor};
use crate::preprocess::{augment_analogy, AugmentConfig};
use crate::riemann::{trial_covariances, RiemannExtractor, SpdMatrix};
use crate::stats::{chance_level, class_distinctiveness};

pub use ablation::{run_ablation, AblationRow, AblationTable};
pub use folds::{stratified_folds, FoldPlan};
pub use metrics::{Confusion, Metrics};

/// One of the six unordered class pairs. The first class is the positive one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairId {
    #[serde(rename = "TG/PG")]
    TgPg,
    #[serde(rename = "TG/Open")]
    TgOpen,
    #[serde(rename = "TG/Rest")]
    TgRest,
    #[serde(rename = "PG/Open")]
    PgOpen,
    #[serde(rename = "PG/Rest")]
    PgRest,
    #[serde(rename = "Open/Rest")]
    OpenRest,
}

impl PairId {
    pub const ALL: [PairId; 6] = [
        PairId::TgPg,
        PairId::TgOpen,
        PairId::TgRest,
        PairId::PgOpen,
        PairId::PgRest,
        PairId::OpenRest,
    ];

    pub fn labels(self) -> (Label, Label) {
        match self {
            PairId::TgPg => (Label::TG, Label::PG),
            PairId::TgOpen => (Label::TG, Label::Open),
            PairId::TgRest => (Label::TG, Label::Rest),
            PairId::PgOpen => (Label::PG, Label::Open),
            PairId::PgRest => (Label::PG, Label::Rest),
            PairId::OpenRest => (Label::Open, Label::Rest),
        }
    }

    /// Accepts either order of the two classes.
    pub fn from_labels(a: Label, b: Label) -> Option<PairId> {
        PairId::ALL.into_iter().find(|p| {
            let (x, y) = p.labels();
            (x, y) == (a, b) || (y, x) == (a, b)
        })
    }

    pub fn name(self) -> String {
        let (a, b) = self.labels();
        format!("{a}/{b}")
    }

    pub fn involves_rest(self) -> bool {
        self.labels().1 == Label::Rest
    }
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for PairId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['/', '-'])
            .ok_or_else(|| Error::Parse(format!("pair `{s}` should look like TG/PG")))?;
        let (a, b) = (a.trim().parse()?, b.trim().parse()?);
        PairId::from_labels(a, b).ok_or_else(|| Error::Parse(format!("`{s}` is not a pair of distinct classes")))
    }
}

/// Where analogy augmentation sits relative to the split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentOrder {
    /// Only training folds are augmented; test folds hold originals.
    #[default]
    InFold,
    /// The whole pair is augmented before splitting.
    PaperOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    pub order: AugmentOrder,
    pub config: AugmentConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub cspwd: CspWdConfig,
    pub augment: Option<AugmentPlan>,
    pub k: usize,
    pub fold_seed: u64,
    /// Significance level for the chance-level column.
    pub alpha: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cspwd: CspWdConfig::default(),
            augment: None,
            k: 5,
            fold_seed: 0,
            alpha: 0.05,
        }
    }
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(salt.wrapping_add(1))
}

/// The trials of one pair with their fold plan and per-trial covariances.
#[derive(Debug, Clone)]
pub struct PairData {
    pub pair: PairId,
    pub set: EpochSet,
    pub covariances: Vec<SpdMatrix>,
    pub plan: FoldPlan,
}

pub fn prepare_pair(set: &EpochSet, pair: PairId, cfg: &EvalConfig) -> Result<PairData> {
    let (a, b) = pair.labels();
    let mut sub = set.filter_labels(&[a, b]);
    if sub.count(a) == 0 || sub.count(b) == 0 {
        return Err(Error::InsufficientData(format!("pair {pair} needs trials of both classes")));
    }
    if let Some(AugmentPlan {
        order: AugmentOrder::PaperOrder,
        config,
    }) = cfg.augment
    {
        sub = augment_analogy(&sub, &config)?;
    }
    let plan = stratified_folds(sub.labels(), cfg.k, cfg.fold_seed)?;
    Ok(PairData {
        pair,
        covariances: trial_covariances(&sub)?,
        set: sub,
        plan,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum FoldExtractor {
    CspWd(CspWdExtractor),
    Tangent(RiemannExtractor),
    /// MDM consumes covariances directly.
    Covariance,
}

/// Everything fitted on the training side of one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedFold {
    pub extractor: FoldExtractor,
    pub model: TrainedModel,
}

impl FittedFold {
    /// Hash of the bit patterns of every fitted number.
    pub fn fingerprint(&self) -> u64 {
        let mut values = Vec::new();
        match &self.extractor {
            FoldExtractor::CspWd(x) => {
                values.extend(x.csp.filters.iter());
                values.extend(x.csp.eigenvalues.iter());
            }
            FoldExtractor::Tangent(x) => values.extend(x.reference.matrix().iter()),
            FoldExtractor::Covariance => {}
        }
        values.extend(self.model.parameters());
        let mut h = DefaultHasher::new();
        for v in values {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn predict(&self, set: &EpochSet, covs: &[SpdMatrix]) -> Result<Vec<Label>> {
        let out = match &self.extractor {
            FoldExtractor::CspWd(x) => self.model.predict_features(&x.transform(set)?)?,
            FoldExtractor::Tangent(x) => self.model.predict_features(&x.transform(covs, set.labels())?)?,
            FoldExtractor::Covariance => self.model.predict_covariances(covs)?,
        };
        Ok(out.into_iter().map(|(l, _)| l).collect())
    }
}

fn check_both(labels: &[Label], pair: PairId, what: &str) -> Result<()> {
    let (a, b) = pair.labels();
    if !labels.contains(&a) || !labels.contains(&b) {
        return Err(Error::InsufficientData(format!("{what} of pair {pair} is missing a class")));
    }
    Ok(())
}

/// Training trials of `fold` and their covariances, grown by in-fold
/// augmentation when configured. Held-out trials are never read.
pub fn fold_training(data: &PairData, fold: usize, cfg: &EvalConfig) -> Result<(EpochSet, Vec<SpdMatrix>)> {
    let pair = data.pair.labels();
    let train_idx = data.plan.train_indices(fold);
    let train = data.set.subset(&train_idx);
    check_both(train.labels(), data.pair, "training fold")?;
    let mut covs: Vec<SpdMatrix> = train_idx.iter().map(|&i| data.covariances[i].clone()).collect();
    let Some(AugmentPlan {
        order: AugmentOrder::InFold,
        config,
    }) = cfg.augment
    else {
        return Ok((train, covs));
    };
    let scaled = (config.target_per_class as f64 * (data.plan.k - 1) as f64 / data.plan.k as f64).round() as usize;
    let target = scaled.max(train.count(pair.0)).max(train.count(pair.1));
    let fold_cfg = AugmentConfig {
        target_per_class: target,
        seed: mix_seed(config.seed, fold as u64),
        ..config
    };
    let grown = augment_analogy(&train, &fold_cfg)?;
    let extra = grown.subset(&(train.n_trials()..grown.n_trials()).collect::<Vec<_>>());
    covs.extend(trial_covariances(&extra)?);
    Ok((grown, covs))
}

/// Fits every model in `specs` on one training set, sharing the feature
/// extractors between models of the same pipeline.
pub fn fit_models(
    train: &EpochSet,
    covs: &[SpdMatrix],
    pair: (Label, Label),
    specs: &[ModelSpec],
    cfg: &EvalConfig,
) -> Result<Vec<FittedFold>> {
    let needs = |p: fn(&ModelKind) -> bool| specs.iter().any(|s| p(&s.kind));
    let cspwd = if needs(|k| k.pipeline() == Pipeline::CspWd) {
        let x = CspWdExtractor::fit(train, pair, &cfg.cspwd)?;
        let f = x.transform(train)?;
        Some((x, f))
    } else {
        None
    };
    let tangent = if needs(|k| k.pipeline() == Pipeline::Riemann && *k != ModelKind::Mdm) {
        let x = RiemannExtractor::fit(covs, pair)?;
        let f = x.transform(covs, train.labels())?;
        Some((x, f))
    } else {
        None
    };
    specs
        .iter()
        .map(|spec| {
            let (extractor, model) = match (spec.kind.pipeline(), spec.kind, &cspwd, &tangent) {
                (Pipeline::CspWd, _, Some((x, f)), _) => (FoldExtractor::CspWd(x.clone()), train_vector(spec, f, pair)?),
                (Pipeline::Riemann, ModelKind::Mdm, _, _) => {
                    (FoldExtractor::Covariance, train_mdm(covs, train.labels(), pair)?)
                }
                (Pipeline::Riemann, _, _, Some((x, f))) => {
                    (FoldExtractor::Tangent(x.clone()), train_vector(spec, f, pair)?)
                }
                _ => unreachable!("extractor prepared for every requested pipeline"),
            };
            Ok(FittedFold { extractor, model })
        })
        .collect()
}

/// Fits extractor and classifier on the training side of `fold`.
pub fn fit_fold(data: &PairData, fold: usize, spec: &ModelSpec, cfg: &EvalConfig) -> Result<FittedFold> {
    let (train, covs) = fold_training(data, fold, cfg)?;
    let mut fitted = fit_models(&train, &covs, data.pair.labels(), std::slice::from_ref(spec), cfg)?;
    Ok(fitted.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_test: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pair: PairId,
    pub pipeline: Pipeline,
    pub model: ModelKind,
    pub folds: Vec<FoldResult>,
    pub mean: Metrics,
    /// Accuracy needed to beat guessing over all held-out trials.
    pub chance_level: f64,
    pub class_dis: f64,
}

impl MetricsReport {
    pub fn n_test(&self) -> usize {
        self.folds.iter().map(|f| f.n_test).sum()
    }
}

/// Class distinctiveness of a prepared pair over its original trials.
pub fn pair_class_dis(data: &PairData) -> Result<f64> {
    let (a, b) = data.pair.labels();
    let pick = |l: Label| -> Vec<SpdMatrix> {
        data.set
            .labels()
            .iter()
            .zip(&data.covariances)
            .filter(|(x, _)| **x == l)
            .map(|(_, c)| c.clone())
            .collect()
    };
    class_distinctiveness(&pick(a), &pick(b))
}

/// Scores every spec on one fold.
fn run_fold(data: &PairData, fold: usize, specs: &[ModelSpec], cfg: &EvalConfig) -> Result<Vec<FoldResult>> {
    let test_idx = data.plan.test_indices(fold);
    let test = data.set.subset(test_idx);
    check_both(test.labels(), data.pair, "test fold")?;
    let test_covs: Vec<SpdMatrix> = test_idx.iter().map(|&i| data.covariances[i].clone()).collect();
    let (train, covs) = fold_training(data, fold, cfg)?;
    fit_models(&train, &covs, data.pair.labels(), specs, cfg)?
        .iter()
        .map(|fitted| {
            let predicted = fitted.predict(&test, &test_covs)?;
            let confusion = Confusion::count(&predicted, test.labels(), data.pair.labels().0)?;
            Ok(FoldResult {
                fold,
                n_test: test_idx.len(),
                confusion,
                metrics: Metrics::from_confusion(&confusion),
            })
        })
        .collect()
}

fn report(pair: PairId, spec: &ModelSpec, folds: Vec<FoldResult>, class_dis: f64, cfg: &EvalConfig) -> Result<MetricsReport> {
    let mean = Metrics::mean(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>());
    let n_test = folds.iter().map(|f| f.n_test).sum();
    Ok(MetricsReport {
        pair,
        pipeline: spec.kind.pipeline(),
        model: spec.kind,
        folds,
        mean,
        chance_level: chance_level(n_test, cfg.alpha)?,
        class_dis,
    })
}

/// Runs every fold of `data.plan` for one model.
pub fn evaluate_pair(data: &PairData, pipeline: Pipeline, spec: &ModelSpec, cfg: &EvalConfig) -> Result<MetricsReport> {
    if spec.kind.pipeline() != pipeline {
        return Err(Error::InvalidArgument(format!(
            "{} runs on the {} pipeline, not {}",
            spec.kind,
            spec.kind.pipeline().name(),
            pipeline.name()
        )));
    }
    let folds = (0..data.plan.k)
        .map(|f| Ok(run_fold(data, f, std::slice::from_ref(spec), cfg)?.remove(0)))
        .collect::<Result<Vec<_>>>()?;
    report(data.pair, spec, folds, pair_class_dis(data)?, cfg)
}

/// Every (pair, model) combination, in pair-major order regardless of how
/// the work is scheduled.
pub fn evaluate_grid(set: &EpochSet, pairs: &[PairId], specs: &[ModelSpec], cfg: &EvalConfig) -> Result<Vec<MetricsReport>> {
    for s in specs {
        s.validate()?;
    }
    let prepared: Vec<(PairData, f64)> = pairs
        .par_iter()
        .map(|&p| {
            let data = prepare_pair(set, p, cfg)?;
            let dis = pair_class_dis(&data)?;
            Ok((data, dis))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = prepared
        .iter()
        .enumerate()
        .flat_map(|(i, (d, _))| (0..d.plan.k).map(move |f| (i, f)))
        .collect();
    let per_fold: Vec<Vec<FoldResult>> = jobs
        .par_iter()
        .map(|&(i, f)| run_fold(&prepared[i].0, f, specs, cfg))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(prepared.len() * specs.len());
    let mut cursor = 0;
    for (data, dis) in &prepared {
        let folds = &per_fold[cursor..cursor + data.plan.k];
        cursor += data.plan.k;
        for (m, spec) in specs.iter().enumerate() {
            out.push(report(data.pair, spec, folds.iter().map(|f| f[m]).collect(), *dis, cfg)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SessionMeta;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Class-dependent channel scaling on white noise.
    fn scaled_set(per_class: usize, gains: [[f64; 4]; 2], seed: u64) -> EpochSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, s) = (4, 128);
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for _ in 0..per_class {
            for (c, l) in [Label::TG, Label::Rest].into_iter().enumerate() {
                labels.push(l);
                for ch in 0..e {
                    for _ in 0..s {
                        data.push(gains[c][ch] * rng.sample::<f64, _>(StandardNormal));
                    }
                }
            }
        }
        let names = ["C3", "Cz", "C4", "Pz"].map(String::from).to_vec();
        EpochSet::new(data, s, labels, 128.0, names, SessionMeta::default()).unwrap()
    }

    #[test]
    fn pair_names_round_trip() {
        for p in PairId::ALL {
            assert_eq!(p.name().parse::<PairId>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{}\"", p.name()));
        }
        assert_eq!("rest/open".parse::<PairId>().unwrap(), PairId::OpenRest);
        assert!("TG/TG".parse::<PairId>().is_err());
        assert_eq!(PairId::ALL.iter().filter(|p| p.involves_rest()).count(), 3);
    }

    #[test]
    fn separable_classes_score_high() {
        let set = scaled_set(30, [[3.0, 1.0, 0.3, 1.0], [0.3, 1.0, 3.0, 1.0]], 1);
        let cfg = EvalConfig::default();
        let data = prepare_pair(&set, PairId::TgRest, &cfg).unwrap();
        for kind in ModelKind::ALL {
            let r = evaluate_pair(&data, kind.pipeline(), &ModelSpec::new(kind), &cfg).unwrap();
            assert!(r.mean.accuracy >= 0.95, "{kind}: {}", r.mean.accuracy);
            let mean = r.folds.iter().map(|f| f.metrics.accuracy).sum::<f64>() / 5.0;
            assert!((mean - r.mean.accuracy).abs() < 1e-15);
            assert_eq!(r.n_test(), 60);
        }
    }

    #[test]
    fn identical_classes_score_near_half() {
        let set = scaled_set(60, [[1.0; 4], [1.0; 4]], 2);
        let cfg = EvalConfig::default();
        let data = prepare_pair(&set, PairId::TgRest, &cfg).unwrap();
        let r = evaluate_pair(&data, Pipeline::CspWd, &ModelSpec::new(ModelKind::Lda), &cfg).unwrap();
        assert!((r.mean.accuracy - 0.5).abs() <= 0.1, "{}", r.mean.accuracy);
    }

    #[test]
    fn pipeline_mismatch_rejected() {
        let set = scaled_set(10, [[1.0; 4], [2.0; 4]], 3);
        let cfg = EvalConfig::default();
        let data = prepare_pair(&set, PairId::TgRest, &cfg).unwrap();
        assert!(evaluate_pair(&data, Pipeline::CspWd, &ModelSpec::new(ModelKind::Mdm), &cfg).is_err());
        assert!(prepare_pair(&set, PairId::TgPg, &cfg).is_err());
    }

    #[test]
    fn held_out_mutation_leaves_fit_unchanged() {
        let set = scaled_set(20, [[2.0, 1.0, 0.5, 1.0], [0.5, 1.0, 2.0, 1.0]], 4);
        let cfg = EvalConfig {
            augment: Some(AugmentPlan {
                order: AugmentOrder::InFold,
                config: AugmentConfig::new(30, 7),
            }),
            ..EvalConfig::default()
        };
        let data = prepare_pair(&set, PairId::TgRest, &cfg).unwrap();
        let held = data.plan.test_indices(2).to_vec();
        let mut values = data.set.data().to_vec();
        let len = data.set.n_channels() * data.set.n_samples();
        for &t in &held {
            for v in &mut values[t * len..(t + 1) * len] {
                *v = *v * -7.0 + 1.0;
            }
        }
        let mutated = EpochSet::new(
            values,
            data.set.n_samples(),
            data.set.labels().to_vec(),
            data.set.sample_rate(),
            data.set.channels().to_vec(),
            SessionMeta::default(),
        )
        .unwrap();
        let other = prepare_pair(&mutated, PairId::TgRest, &cfg).unwrap();
        assert_eq!(other.plan, data.plan);
        for kind in [ModelKind::Lda, ModelKind::Mdm, ModelKind::TsSvm] {
            let spec = ModelSpec::new(kind);
            let a = fit_fold(&data, 2, &spec, &cfg).unwrap();
            let b = fit_fold(&other, 2, &spec, &cfg).unwrap();
            assert_eq!(a.fingerprint(), b.fingerprint(), "{kind}");
            let c = fit_fold(&other, 1, &spec, &cfg).unwrap();
            assert_ne!(a.fingerprint(), c.fingerprint());
        }
    }

    #[test]
    fn grid_order_is_pair_major() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels: Vec<Label> = Label::ALL.iter().flat_map(|&l| std::iter::repeat_n(l, 10)).collect();
        let data = (0..labels.len() * 3 * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let set = EpochSet::new(data, 64, labels, 128.0, ["C3", "Cz", "C4"].map(String::from).to_vec(), SessionMeta::default()).unwrap();
        let specs = [ModelSpec::new(ModelKind::Lda), ModelSpec::new(ModelKind::Mdm)];
        let out = evaluate_grid(&set, &PairId::ALL, &specs, &EvalConfig::default()).unwrap();
        assert_eq!(out.len(), 12);
        for (i, r) in out.iter().enumerate() {
            assert_eq!(r.pair, PairId::ALL[i / 2]);
            assert_eq!(r.model, specs[i % 2].kind);
        }
    }
}
