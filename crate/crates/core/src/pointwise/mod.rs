//! Pointwise regressors: the 9 local features (coordinates, normal, flow
//! conditions) of one wall point map to its 4 outputs.

mod net;
mod train;
mod tree;
mod tune;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use net::{gradient_check, Activation, Dense, LambdaDnn, Mlp, Network, Stack, COND_FEATURES, GEO_FEATURES};
pub use train::{
    lambda_dnn_train, mlp_train, train, EpochLoss, LambdaDnnModel, LambdaDnnSpec, MlpModel, MlpSpec,
    TrainSpec, Trained,
};
pub use tree::{best_split, tree_fit, tree_predict, Node, SplitChoice, TreeModel, TreeSpec};
pub use tune::{r2_score, random_search, MlpSearchSpace, SearchResult, Trial};

use crate::dataset::{Dataset, Scaler, WallField};
use crate::error::{Error, Result};
use crate::flow::FlowCondition;
use crate::N_VARIABLES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointwiseSpec {
    Mlp(MlpSpec),
    LambdaDnn(LambdaDnnSpec),
    Tree(TreeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointwiseRegressor {
    Mlp(MlpModel),
    LambdaDnn(LambdaDnnModel),
    Tree(TreeModel),
}

/// A pointwise regressor together with the scalers of its inputs and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseModel {
    pub x_scaler: Scaler,
    pub y_scaler: Scaler,
    pub regressor: PointwiseRegressor,
}

impl PointwiseModel {
    /// Fits on the fields of `train_ids`; `validation_ids` drive best-epoch
    /// selection for the networks and are ignored by the tree.
    pub fn fit(
        spec: &PointwiseSpec,
        ds: &Dataset,
        train_ids: &[String],
        validation_ids: &[String],
    ) -> Result<Self> {
        let (x, y) = ds.assemble_pointwise(train_ids)?;
        let x_scaler = Scaler::fit(&x);
        let y_scaler = Scaler::fit(&y);
        let (xs, ys) = (x_scaler.apply(&x), y_scaler.apply(&y));
        let val = if validation_ids.is_empty() {
            None
        } else {
            let (vx, vy) = ds.assemble_pointwise(validation_ids)?;
            Some((x_scaler.apply(&vx), y_scaler.apply(&vy)))
        };
        let val_ref = val.as_ref().map(|(a, b)| (a, b));
        let regressor = match spec {
            PointwiseSpec::Mlp(s) => PointwiseRegressor::Mlp(mlp_train(s, &xs, &ys, val_ref)?),
            PointwiseSpec::LambdaDnn(s) => {
                PointwiseRegressor::LambdaDnn(lambda_dnn_train(s, &xs, &ys, val_ref)?)
            }
            PointwiseSpec::Tree(s) => PointwiseRegressor::Tree(tree_fit(s, &xs, &ys)?),
        };
        Ok(PointwiseModel {
            x_scaler,
            y_scaler,
            regressor,
        })
    }

    /// Raw 9-column inputs to raw 4-column outputs.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.x_scaler.dim() {
            return Err(Error::invalid(
                "pointwise input",
                format!("expected {} columns, got {}", self.x_scaler.dim(), x.ncols()),
            ));
        }
        let xs = self.x_scaler.apply(x);
        let ys = match &self.regressor {
            PointwiseRegressor::Mlp(m) => m.net.predict(&xs)?,
            PointwiseRegressor::LambdaDnn(m) => m.net.predict(&xs)?,
            PointwiseRegressor::Tree(t) => tree_predict(t, &xs)?,
        };
        Ok(self.y_scaler.invert(&ys))
    }

    /// Wall fields for arbitrary conditions on the dataset geometry.
    pub fn predict_fields(
        &self,
        ds: &Dataset,
        conds: &[&FlowCondition],
    ) -> Result<BTreeMap<String, WallField>> {
        let n_p = ds.n_p();
        let mut out = BTreeMap::new();
        for cond in conds {
            let y = self.predict(&ds.pointwise_inputs(&[cond]))?;
            if y.shape() != (n_p, N_VARIABLES) {
                return Err(Error::Numerical(format!("prediction shape {:?}", y.shape())));
            }
            out.insert(cond.id.clone(), WallField::new(cond.id.clone(), y)?);
        }
        Ok(out)
    }
}
