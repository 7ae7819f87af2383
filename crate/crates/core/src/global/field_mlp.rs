use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{snapshot_matrix, Scaler};
use crate::error::{Error, Result};
use crate::pointwise::{mlp_train, MlpModel, MlpSpec, Network, TrainSpec};
use crate::N_VARIABLES;

/// Hidden widths of the full-scale field network; the output layer adds one
/// unit per wall point.
pub const FULL_SCALE_FIELD_HIDDEN: [usize; 4] = [75, 120, 1226, 16490];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldMlpSpec {
    pub hidden_sizes: Vec<usize>,
    pub train: TrainSpec,
}

impl Default for FieldMlpSpec {
    fn default() -> Self {
        FieldMlpSpec {
            hidden_sizes: vec![32, 64],
            train: TrainSpec {
                activation: crate::pointwise::Activation::Tanh,
                learning_rate: 3e-3,
                lr_decay: 0.998,
                batch_fraction: 0.125,
                epochs: 1500,
                ..TrainSpec::default()
            },
        }
    }
}

/// One network per variable. Targets are the snapshot minus the per-point
/// training mean, divided by one global standard deviation, which keeps
/// relative magnitudes across the wall intact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldNet {
    pub mean_field: DVector<f64>,
    pub scale: f64,
    pub model: MlpModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMlpModel {
    pub scaler: Scaler,
    pub variables: Vec<FieldNet>,
}

fn standardize(snaps: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let mean = snaps.column_mean();
    let n = snaps.len() as f64;
    let var: f64 = snaps
        .column_iter()
        .map(|c| (c - &mean).norm_squared())
        .sum::<f64>()
        / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    (mean, scale)
}

fn targets(snaps: &DMatrix<f64>, mean: &DVector<f64>, scale: f64) -> DMatrix<f64> {
    // Rows are conditions.
    DMatrix::from_fn(snaps.ncols(), snaps.nrows(), |f, p| (snaps[(p, f)] - mean[p]) / scale)
}

pub fn field_mlp_fit(
    spec: &FieldMlpSpec,
    params: &DMatrix<f64>,
    snapshots: &[DMatrix<f64>],
    validation: Option<(&DMatrix<f64>, &[DMatrix<f64>])>,
) -> Result<FieldMlpModel> {
    if params.nrows() == 0 || snapshots.len() != params.nrows() {
        return Err(Error::invalid(
            "field MLP training set",
            format!("{} parameter rows vs {} snapshots", params.nrows(), snapshots.len()),
        ));
    }
    let scaler = Scaler::fit(params);
    let x = scaler.apply(params);
    let vx = validation.map(|(p, _)| scaler.apply(p));
    let mlp = MlpSpec {
        hidden_sizes: spec.hidden_sizes.clone(),
        train: spec.train.clone(),
    };
    let mut variables = Vec::with_capacity(N_VARIABLES);
    for v in 0..N_VARIABLES {
        let snaps = snapshot_matrix(snapshots, v);
        let (mean_field, scale) = standardize(&snaps);
        let y = targets(&snaps, &mean_field, scale);
        let vy = validation.map(|(_, s)| targets(&snapshot_matrix(s, v), &mean_field, scale));
        let val = vx.as_ref().zip(vy.as_ref());
        let model = mlp_train(&mlp, &x, &y, val)?;
        variables.push(FieldNet {
            mean_field,
            scale,
            model,
        });
    }
    Ok(FieldMlpModel { scaler, variables })
}

pub fn field_mlp_predict(m: &FieldMlpModel, p: &[f64; 3]) -> Result<DMatrix<f64>> {
    let q = DMatrix::from_row_slice(1, 3, &m.scaler.apply_row(p));
    let n_p = m.variables[0].mean_field.len();
    let mut out = DMatrix::zeros(n_p, N_VARIABLES);
    for (v, net) in m.variables.iter().enumerate() {
        let y = net.model.net.predict(&q)?;
        for i in 0..n_p {
            out[(i, v)] = net.mean_field[i] + net.scale * y[(0, i)];
        }
    }
    Ok(out)
}
