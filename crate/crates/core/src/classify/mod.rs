//! The six binary classifiers behind one train/predict contract.
//!
//! Scores are signed: positive means the first class of the pair. They are
//! not calibrated probabilities.

pub mod lda;
pub mod mdm;
pub mod mlp;
pub mod svm;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::persist::{expect_len, read_blob, write_blob};
use crate::riemann::{matrix_log, SpdMatrix};

pub use lda::LdaModel;
pub use mdm::MdmModel;
pub use mlp::{MlpModel, MlpShape};
pub use svm::{auto_gamma, rbf_kernel, Kernel, SvmModel};

/// Feature pipeline a model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    CspWd,
    Riemann,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::CspWd => "csp-wd",
            Pipeline::Riemann => "riemann",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Lda,
    SvmLinear,
    SvmRbf,
    Mlp,
    Mdm,
    TsSvm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Lda,
        ModelKind::SvmLinear,
        ModelKind::SvmRbf,
        ModelKind::Mlp,
        ModelKind::Mdm,
        ModelKind::TsSvm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lda => "lda",
            ModelKind::SvmLinear => "svm-linear",
            ModelKind::SvmRbf => "svm-rbf",
            ModelKind::Mlp => "mlp",
            ModelKind::Mdm => "mdm",
            ModelKind::TsSvm => "ts-svm",
        }
    }

    pub fn pipeline(self) -> Pipeline {
        match self {
            ModelKind::Mdm | ModelKind::TsSvm => Pipeline::Riemann,
            _ => Pipeline::CspWd,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// SVM cost.
    pub c: f64,
    /// RBF width; `None` picks [`auto_gamma`] from the training data.
    pub gamma: Option<f64>,
    pub hidden: usize,
    pub max_epochs: usize,
    /// SMO stopping tolerance on the maximal violating pair.
    pub tolerance: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            c: 1.0,
            gamma: None,
            hidden: 15,
            max_epochs: 150,
            tolerance: 1e-3,
            max_iter: 1_000_000,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument(format!("C must be positive, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::InvalidArgument(format!("gamma must be positive, got {g}")));
            }
        }
        if self.hidden == 0 {
            return Err(Error::InvalidArgument("hidden layer needs at least one unit".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Params {
    Lda(LdaModel),
    Svm(SvmModel),
    Mlp(MlpModel),
    Mdm(MdmModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub pair: (Label, Label),
    /// Feature length, or covariance size for MDM.
    pub dim: usize,
    params: Params,
}

/// Input accepted by [`TrainedModel::predict`].
#[derive(Debug, Clone, Copy)]
pub enum Sample<'a> {
    Features(&'a [f64]),
    Covariance(&'a SpdMatrix),
}

/// `+1` for the first class, `−1` for the second.
fn signed_targets(labels: &[Label], pair: (Label, Label)) -> Result<Vec<f64>> {
    if pair.0 == pair.1 {
        return Err(Error::InvalidArgument("pair needs two distinct classes".into()));
    }
    let y: Vec<f64> = labels
        .iter()
        .map(|&l| {
            if l == pair.0 {
                Ok(1.0)
            } else if l == pair.1 {
                Ok(-1.0)
            } else {
                Err(Error::InvalidArgument(format!("label {l} outside pair {}/{}", pair.0, pair.1)))
            }
        })
        .collect::<Result<_>>()?;
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::InsufficientData("training data holds a single class".into()));
    }
    Ok(y)
}

/// Trains any feature-vector model (everything except MDM).
pub fn train_vector(spec: &ModelSpec, x: &FeatureMatrix, pair: (Label, Label)) -> Result<TrainedModel> {
    spec.validate()?;
    let y = signed_targets(&x.labels, pair)?;
    if x.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invariant("non-finite feature".into()));
    }
    let points: Vec<Vec<f64>> = (0..x.n_trials()).map(|i| x.column(i)).collect();
    let svm = |kernel| SvmModel::fit(&points, &y, kernel, spec.c, spec.tolerance, spec.max_iter);
    let rbf = || Kernel::Rbf {
        gamma: spec.gamma.unwrap_or_else(|| auto_gamma(&points)),
    };
    let params = match spec.kind {
        ModelKind::Lda => Params::Lda(LdaModel::fit(&points, &y)?),
        ModelKind::SvmLinear => Params::Svm(svm(Kernel::Linear)?),
        ModelKind::SvmRbf | ModelKind::TsSvm => Params::Svm(svm(rbf())?),
        ModelKind::Mlp => {
            let y01: Vec<f64> = y.iter().map(|&t| if t > 0.0 { 1.0 } else { 0.0 }).collect();
            Params::Mlp(MlpModel::fit(&points, &y01, spec.hidden, spec.max_epochs, spec.seed)?)
        }
        ModelKind::Mdm => {
            return Err(Error::InvalidArgument("MDM trains on covariances, not feature vectors".into()))
        }
    };
    Ok(TrainedModel {
        kind: spec.kind,
        pair,
        dim: x.n_features(),
        params,
    })
}

pub fn train_mdm(covs: &[SpdMatrix], labels: &[Label], pair: (Label, Label)) -> Result<TrainedModel> {
    if covs.len() != labels.len() {
        return Err(Error::DimensionMismatch("covariances vs labels".into()));
    }
    let y = signed_targets(labels, pair)?;
    let mut logs = [Vec::new(), Vec::new()];
    for (c, t) in covs.iter().zip(&y) {
        logs[usize::from(*t < 0.0)].push(matrix_log(c));
    }
    Ok(TrainedModel {
        kind: ModelKind::Mdm,
        pair,
        dim: covs[0].dim(),
        params: Params::Mdm(MdmModel::from_logs(&logs[0], &logs[1])?),
    })
}

impl TrainedModel {
    /// Label and signed score. Zero scores go to the first class.
    pub fn predict(&self, x: Sample<'_>) -> Result<(Label, f64)> {
        let score = match (&self.params, x) {
            (Params::Mdm(m), Sample::Covariance(c)) => {
                self.check_dim(c.dim())?;
                m.decision(c)
            }
            (Params::Mdm(_), Sample::Features(_)) => {
                return Err(Error::InvalidArgument("MDM expects a covariance".into()))
            }
            (_, Sample::Covariance(_)) => {
                return Err(Error::InvalidArgument(format!("{} expects a feature vector", self.kind)))
            }
            (p, Sample::Features(v)) => {
                self.check_dim(v.len())?;
                match p {
                    Params::Lda(m) => m.decision(v),
                    Params::Svm(m) => m.decision(v),
                    Params::Mlp(m) => m.logit(v),
                    Params::Mdm(_) => unreachable!(),
                }
            }
        };
        let label = if score >= 0.0 { self.pair.0 } else { self.pair.1 };
        Ok((label, score))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch(format!("input of size {got}, model expects {}", self.dim)));
        }
        Ok(())
    }

    pub fn predict_features(&self, x: &FeatureMatrix) -> Result<Vec<(Label, f64)>> {
        (0..x.n_trials()).map(|i| self.predict(Sample::Features(&x.column(i)))).collect()
    }

    pub fn predict_covariances(&self, covs: &[SpdMatrix]) -> Result<Vec<(Label, f64)>> {
        covs.iter().map(|c| self.predict(Sample::Covariance(c))).collect()
    }

    /// All fitted numbers in a fixed order, for hashing and serialization.
    pub fn parameters(&self) -> Vec<f64> {
        match &self.params {
            Params::Lda(m) => {
                let mut v = m.w.clone();
                v.push(m.b);
                v
            }
            Params::Svm(m) => {
                let mut v = vec![match m.kernel {
                    Kernel::Linear => 0.0,
                    Kernel::Rbf { gamma } => gamma,
                }];
                v.extend(&m.coef);
                v.push(m.rho);
                v.extend(m.support.iter().flatten());
                v
            }
            Params::Mlp(m) => {
                let mut v = m.mean.clone();
                v.extend(&m.scale);
                v.extend(&m.theta);
                v
            }
            Params::Mdm(m) => {
                let mut v = m.log_means[0].as_slice().to_vec();
                v.extend(m.log_means[1].as_slice());
                v
            }
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (n_support, hidden) = match &self.params {
            Params::Svm(m) => (m.support.len(), 0),
            Params::Mlp(m) => (0, m.shape.hidden),
            _ => (0, 0),
        };
        let header = ModelHeader {
            format: "gripdecode-model".into(),
            kind: self.kind,
            pair: self.pair,
            dim: self.dim,
            n_support,
            hidden,
        };
        write_blob(&header, &self.parameters())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, v): (ModelHeader, Vec<f64>) = read_blob(bytes)?;
        if h.format != "gripdecode-model" {
            return Err(Error::MalformedHeader("not a model file".into()));
        }
        let d = h.dim;
        let params = match h.kind {
            ModelKind::Lda => {
                expect_len(&v, d + 1)?;
                Params::Lda(LdaModel {
                    w: v[..d].to_vec(),
                    b: v[d],
                })
            }
            ModelKind::SvmLinear | ModelKind::SvmRbf | ModelKind::TsSvm => {
                let s = h.n_support;
                expect_len(&v, 1 + s + 1 + s * d)?;
                let kernel = if h.kind == ModelKind::SvmLinear {
                    Kernel::Linear
                } else {
                    Kernel::Rbf { gamma: v[0] }
                };
                Params::Svm(SvmModel {
                    kernel,
                    coef: v[1..1 + s].to_vec(),
                    rho: v[1 + s],
                    support: v[2 + s..].chunks(d.max(1)).map(<[f64]>::to_vec).collect(),
                })
            }
            ModelKind::Mlp => {
                let shape = MlpShape {
                    inputs: d,
                    hidden: h.hidden,
                };
                expect_len(&v, 2 * d + shape.n_params())?;
                Params::Mlp(MlpModel {
                    shape,
                    mean: v[..d].to_vec(),
                    scale: v[d..2 * d].to_vec(),
                    theta: v[2 * d..].to_vec(),
                })
            }
            ModelKind::Mdm => {
                expect_len(&v, 2 * d * d)?;
                Params::Mdm(MdmModel {
                    log_means: [
                        DMatrix::from_column_slice(d, d, &v[..d * d]),
                        DMatrix::from_column_slice(d, d, &v[d * d..]),
                    ],
                })
            }
        };
        Ok(Self {
            kind: h.kind,
            pair: h.pair,
            dim: d,
            params,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    kind: ModelKind,
    pair: (Label, Label),
    dim: usize,
    n_support: usize,
    hidden: usize,
}
