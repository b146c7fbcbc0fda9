use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_grid, EvalConfig, MetricsReport, PairId};
use crate::classify::{ModelKind, ModelSpec};
use crate::data::{EpochSet, Handedness};
use crate::error::{Error, Result};
use crate::layout::{resolve_combination, CombinationSpec, ElectrodeLayout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub combination: u8,
    pub n_channels: usize,
    pub pair: PairId,
    pub model: ModelKind,
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub class_dis: f64,
    /// Baseline accuracy minus this row's accuracy.
    pub drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub baseline: u8,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, combination: u8, pair: PairId, model: ModelKind) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| r.combination == combination && r.pair == pair && r.model == model)
    }

    /// Mean accuracy of a combination over all its rows.
    pub fn mean_accuracy(&self, combination: u8) -> Option<f64> {
        let acc: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.combination == combination)
            .map(|r| r.accuracy)
            .collect();
        (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64)
    }
}

/// Re-runs the whole evaluation on each electrode subset. Combination 0 must
/// be present; it is the reference for the drop column.
pub fn run_ablation(
    set: &EpochSet,
    combos: &[CombinationSpec],
    handedness: Handedness,
    pairs: &[PairId],
    specs: &[ModelSpec],
    cfg: &EvalConfig,
) -> Result<AblationTable> {
    if !combos.iter().any(|c| c.id == 0) {
        return Err(Error::InvalidArgument("ablation needs combination 0 as its baseline".into()));
    }
    let layout = ElectrodeLayout::new(set.channels().to_vec(), None)?;
    let subsets = combos
        .iter()
        .map(|c| {
            let names = resolve_combination(&layout, c, handedness)?;
            if names.is_empty() {
                return Err(Error::InvalidArgument(format!("combination {} selects no channels", c.id)));
            }
            set.select_electrodes(&names)
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<Vec<MetricsReport>> = subsets
        .par_iter()
        .map(|s| evaluate_grid(s, pairs, specs, cfg))
        .collect::<Result<_>>()?;
    let base_pos = combos.iter().position(|c| c.id == 0).unwrap_or_default();
    let baseline = &reports[base_pos];
    let mut rows = Vec::new();
    for ((combo, subset), reps) in combos.iter().zip(&subsets).zip(&reports) {
        for (r, b) in reps.iter().zip(baseline) {
            rows.push(AblationRow {
                combination: combo.id,
                n_channels: subset.n_channels(),
                pair: r.pair,
                model: r.model,
                accuracy: r.mean.accuracy,
                f1: r.mean.f1,
                precision: r.mean.precision,
                class_dis: r.class_dis,
                drop: b.mean.accuracy - r.mean.accuracy,
            });
        }
    }
    Ok(AblationTable { baseline: 0, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, SessionMeta};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn combo(id: u8, names: &[&str]) -> CombinationSpec {
        let v: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        CombinationSpec {
            id,
            members_right: v.clone(),
            members_left: v,
        }
    }

    /// Class difference lives on C3 only.
    fn planted(seed: u64) -> EpochSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = ["C3", "Cz", "C4", "O1", "O2"];
        let (s, per) = (128, 25);
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for _ in 0..per {
            for (l, g) in [(Label::TG, 3.0), (Label::Rest, 1.0)] {
                labels.push(l);
                for ch in 0..names.len() {
                    let gain = if ch == 0 { g } else { 1.0 };
                    data.extend((0..s).map(|_| gain * rng.sample::<f64, _>(StandardNormal)));
                }
            }
        }
        EpochSet::new(data, s, labels, 128.0, names.map(String::from).to_vec(), SessionMeta::default()).unwrap()
    }

    #[test]
    fn baseline_drop_is_zero_and_occipital_loses() {
        let set = planted(1);
        let combos = [combo(0, &["C3", "Cz", "C4", "O1", "O2"]), combo(2, &["C3", "Cz"]), combo(6, &["O1", "O2"])];
        let specs = [ModelSpec::new(ModelKind::Lda), ModelSpec::new(ModelKind::Mdm)];
        let t = run_ablation(&set, &combos, Handedness::Right, &[PairId::TgRest], &specs, &EvalConfig::default()).unwrap();
        assert_eq!(t.rows.len(), 6);
        for r in t.rows.iter().filter(|r| r.combination == 0) {
            assert_eq!(r.drop, 0.0);
        }
        let central = t.mean_accuracy(2).unwrap();
        let occipital = t.mean_accuracy(6).unwrap();
        assert!(central > occipital + 0.2, "{central} {occipital}");
        assert!((occipital - 0.5).abs() <= 0.15, "{occipital}");
    }

    #[test]
    fn requires_baseline_and_known_channels() {
        let set = planted(2);
        let specs = [ModelSpec::new(ModelKind::Lda)];
        let cfg = EvalConfig::default();
        assert!(run_ablation(&set, &[combo(2, &["C3"])], Handedness::Right, &[PairId::TgRest], &specs, &cfg).is_err());
        let bad = [combo(0, &["C3", "Cz"]), combo(3, &["FC5"])];
        assert!(run_ablation(&set, &bad, Handedness::Right, &[PairId::TgRest], &specs, &cfg).is_err());
    }
}
