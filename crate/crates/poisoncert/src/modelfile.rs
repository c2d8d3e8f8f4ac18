//! On-disk model format: a JSON document that, together with the training
//! dataset it was fitted on, reconstructs the exact model.
//!
//! Index lists keep the files small; halfspace normals are embedded so the
//! expensive sweep never reruns at load time.

use serde::{Deserialize, Serialize};

use crate::core::{AdversaryClass, CertValue, CertifiedPrediction, Dataset, Prediction};
use crate::error::{invalid, Result};
use crate::exactcert::{knn_rob_add, knn_rob_remove, knn_rob_replace};
use crate::geometry::SphereTask;
use crate::learners::{train, Hypothesis, KnnModel, LearnerSpec};
use crate::robust::{EnsembleManifest, EnsembleModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelFile {
    Halfspace {
        spec: LearnerSpec,
        omega: Vec<f64>,
    },
    Knn {
        spec: LearnerSpec,
        k: usize,
        indices: Vec<usize>,
    },
    Table {
        spec: LearnerSpec,
        indices: Vec<usize>,
    },
    Wr {
        base: LearnerSpec,
        subsample: Vec<usize>,
        /// Embedded halfspace normal when the base is a halfspace.
        omega: Option<Vec<f64>>,
    },
    Ensemble {
        manifest: EnsembleManifest,
    },
}

/// A model instantiated against its training dataset.
pub enum LoadedModel {
    Plain(Hypothesis),
    Ensemble(EnsembleModel),
}

impl LoadedModel {
    pub fn predict(&self, x: &[f64]) -> Prediction {
        match self {
            LoadedModel::Plain(h) => h.predict(x),
            LoadedModel::Ensemble(e) => e.predict(x),
        }
    }

    pub fn hypothesis(&self) -> Option<&Hypothesis> {
        match self {
            LoadedModel::Plain(h) => Some(h),
            LoadedModel::Ensemble(_) => None,
        }
    }
}

impl ModelFile {
    /// Reconstructs the model. `data` must be the dataset the model was
    /// trained on.
    pub fn instantiate(&self, data: &Dataset) -> Result<LoadedModel> {
        match self {
            ModelFile::Halfspace { omega, .. } => Ok(LoadedModel::Plain(Hypothesis::Halfspace(
                crate::learners::HalfspaceModel::new(omega.clone())?,
            ))),
            ModelFile::Knn { k, indices, .. } => Ok(LoadedModel::Plain(Hypothesis::Knn(
                KnnModel::fit(data.subset(indices)?, *k)?,
            ))),
            ModelFile::Table { spec, indices } => {
                Ok(LoadedModel::Plain(train(spec, &data.subset(indices)?)?))
            }
            ModelFile::Wr { base, subsample, omega } => {
                if let Some(w) = omega {
                    return Ok(LoadedModel::Plain(Hypothesis::Halfspace(
                        crate::learners::HalfspaceModel::new(w.clone())?,
                    )));
                }
                Ok(LoadedModel::Plain(train(base, &data.subset(subsample)?)?))
            }
            ModelFile::Ensemble { manifest } => {
                Ok(LoadedModel::Ensemble(EnsembleModel::from_manifest(manifest, data)?))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<ModelFile> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

/// A K-NN model viewed as a certifying predictor: its exact robustness
/// values double as certificates (replace, flip, and add-remove share the
/// margin value; add and remove use their exact searches).
pub struct KnnCertifier {
    model: KnnModel,
    class: AdversaryClass,
}

impl KnnCertifier {
    pub fn new(data: &Dataset, k: usize, class: AdversaryClass) -> Result<Self> {
        Ok(KnnCertifier { model: KnnModel::fit(data.clone(), k)?, class })
    }
}

impl crate::core::CertifyingPredictor for KnnCertifier {
    fn certify(&self, x: &[f64]) -> CertifiedPrediction {
        let pred = self.model.predict(x);
        let Prediction::Label(y) = pred else {
            return CertifiedPrediction::new(pred, CertValue::Finite(0));
        };
        // Robustness of the *predicted* label: certificates bound budget to
        // change the prediction, correct or not.
        let (data, k) = (self.model.data(), self.model.k());
        let as_example = crate::core::Example::new(x.to_vec(), y).expect("finite query");
        let cert = match self.class {
            AdversaryClass::Replace | AdversaryClass::Flip | AdversaryClass::AddRemove => {
                knn_rob_replace(data, k, &as_example).map(CertValue::Finite)
            }
            AdversaryClass::Add => knn_rob_add(data, k, &as_example).map(CertValue::Finite),
            AdversaryClass::Remove => knn_rob_remove(data, k, &as_example).map(|r| match r {
                crate::core::Robustness::At(v) => CertValue::Finite(v),
                crate::core::Robustness::Infinite => CertValue::Infinite,
                crate::core::Robustness::MoreThan(_) => unreachable!(),
            }),
        };
        CertifiedPrediction::new(pred, cert.unwrap_or(CertValue::Finite(0)))
    }
}

/// A learned halfspace viewed as a certifying predictor for the replacing
/// adversary on the uniform sphere.
pub struct HalfspaceCertifier {
    pub omega: Vec<f64>,
    pub task: SphereTask,
    pub m: usize,
}

impl HalfspaceCertifier {
    pub fn new(omega: Vec<f64>, task: SphereTask, m: usize) -> Result<Self> {
        if omega.len() != task.d {
            return Err(invalid("omega dimension mismatch with task"));
        }
        Ok(HalfspaceCertifier { omega, task, m })
    }
}

impl crate::core::CertifyingPredictor for HalfspaceCertifier {
    fn certify(&self, x: &[f64]) -> CertifiedPrediction {
        let h = crate::learners::HalfspaceModel::new(self.omega.clone()).expect("unit normal");
        let pred = h.predict(x);
        let cert = crate::geometry::halfspace_cert(&self.task, &self.omega, x, self.m)
            .map(CertValue::Finite)
            .unwrap_or(CertValue::Finite(0));
        CertifiedPrediction::new(pred, cert)
    }
}
