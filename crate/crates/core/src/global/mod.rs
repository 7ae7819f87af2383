//! Global regressors: the flow parameters `(M, AoA, p_i)` map to complete wall
//! snapshots. All of them scale the parameters with a [`Scaler`] fitted on
//! the training conditions.

mod field_mlp;
mod isomap;
mod knn;
mod pod;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use field_mlp::{field_mlp_fit, field_mlp_predict, FieldMlpModel, FieldMlpSpec, FieldNet, FULL_SCALE_FIELD_HIDDEN};
pub use isomap::{
    classical_mds, double_center, isomap_dim_scan, isomap_fit, isomap_predict, snapshot_geodesics, Embedding,
    IsomapModel, IsomapSpec, IsomapVariable,
};
pub use knn::{
    blend, idw_neighbors, knn_fit, knn_predict, knn_select_k, KSelection, KnnModel, KnnSpec, Neighbors,
    ZERO_DIST_TOL,
};
pub use pod::{energy_rank, pod_fit, pod_predict, PodBasis, PodModel, PodSpec};

use crate::dataset::{Dataset, Scaler, WallField};
use crate::error::{Error, Result};
use crate::flow::FlowCondition;
use crate::numerics::{rbf_fit, select_shape_loocv, Kernel, RbfModel};

/// RBF settings for latent maps. Without a fixed `shape`, the candidate with
/// the smallest leave-one-out error is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbfSpec {
    pub kernel: Kernel,
    pub shape: Option<f64>,
    pub shape_candidates: Vec<f64>,
    pub reg: f64,
}

impl Default for RbfSpec {
    fn default() -> Self {
        RbfSpec {
            kernel: Kernel::Multiquadric,
            shape: None,
            shape_candidates: vec![0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
            reg: 0.0,
        }
    }
}

impl RbfSpec {
    pub fn fit(&self, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<RbfModel> {
        let shape = match self.shape {
            Some(s) => s,
            None => select_shape_loocv(x, z, self.kernel, &self.shape_candidates, self.reg)?.shape,
        };
        rbf_fit(x, z, self.kernel, shape, self.reg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GlobalSpec {
    Knn(KnnSpec),
    PodRbf(PodSpec),
    IsomapRbf(IsomapSpec),
    MlpGlobal(FieldMlpSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalModel {
    Knn(KnnModel),
    PodRbf(PodModel),
    IsomapRbf(IsomapModel),
    MlpGlobal(FieldMlpModel),
}

impl GlobalModel {
    /// Fits on `train_ids`. Only the field MLP uses `validation_ids`, for
    /// best-epoch selection; the other models fit on the union of both.
    pub fn fit(
        spec: &GlobalSpec,
        ds: &Dataset,
        train_ids: &[String],
        validation_ids: &[String],
    ) -> Result<Self> {
        if let GlobalSpec::MlpGlobal(s) = spec {
            let (x, y) = ds.assemble_global(train_ids)?;
            let model = if validation_ids.is_empty() {
                field_mlp_fit(s, &x, &y, None)?
            } else {
                let (vx, vy) = ds.assemble_global(validation_ids)?;
                field_mlp_fit(s, &x, &y, Some((&vx, &vy)))?
            };
            return Ok(GlobalModel::MlpGlobal(model));
        }
        let ids: Vec<String> = train_ids.iter().chain(validation_ids).cloned().collect();
        let (x, y) = ds.assemble_global(&ids)?;
        Ok(match spec {
            GlobalSpec::Knn(s) => GlobalModel::Knn(knn_fit(s, &x, y)?),
            GlobalSpec::PodRbf(s) => GlobalModel::PodRbf(pod_fit(s, &x, &y)?),
            GlobalSpec::IsomapRbf(s) => GlobalModel::IsomapRbf(isomap_fit(s, &x, y)?),
            GlobalSpec::MlpGlobal(_) => unreachable!(),
        })
    }

    /// `n_p x 4` snapshot at one condition.
    pub fn predict(&self, p: &[f64; 3]) -> Result<DMatrix<f64>> {
        let out = match self {
            GlobalModel::Knn(m) => knn_predict(m, p),
            GlobalModel::PodRbf(m) => pod_predict(m, p),
            GlobalModel::IsomapRbf(m) => isomap_predict(m, p),
            GlobalModel::MlpGlobal(m) => field_mlp_predict(m, p)?,
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite prediction at p = {p:?}")));
        }
        Ok(out)
    }

    pub fn predict_fields(&self, conds: &[&FlowCondition]) -> Result<BTreeMap<String, WallField>> {
        conds
            .iter()
            .map(|c| {
                let values = self.predict(&c.params())?;
                Ok((c.id.clone(), WallField::new(c.id.clone(), values)?))
            })
            .collect()
    }

    pub fn scaler(&self) -> &Scaler {
        match self {
            GlobalModel::Knn(m) => &m.scaler,
            GlobalModel::PodRbf(m) => &m.scaler,
            GlobalModel::IsomapRbf(m) => &m.scaler,
            GlobalModel::MlpGlobal(m) => &m.scaler,
        }
    }
}
