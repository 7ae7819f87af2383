use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{Activation, LambdaDnn, Mlp, Network};
use crate::error::{Error, Result};

/// Optimizer and regularization settings shared by every network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSpec {
    pub activation: Activation,
    pub leaky_slope: f64,
    pub dropout: f64,
    pub l2: f64,
    pub learning_rate: f64,
    /// Multiplicative learning-rate factor applied after every epoch.
    pub lr_decay: f64,
    pub batch_fraction: f64,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            activation: Activation::LeakyRelu,
            leaky_slope: 0.01,
            dropout: 0.0,
            l2: 0.0,
            learning_rate: 1e-3,
            lr_decay: 0.99,
            batch_fraction: 0.01,
            epochs: 100,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("training spec", reason.to_string()));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return bad("batch_fraction must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be >= 0");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return bad("Adam parameters need 0 <= beta < 1 and epsilon > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub hidden_sizes: Vec<usize>,
    pub train: TrainSpec,
}

impl MlpSpec {
    /// Five-layer pointwise architecture used for the full-scale study.
    pub fn full_scale_preset() -> Self {
        MlpSpec {
            hidden_sizes: vec![166, 235, 248, 81, 72],
            train: TrainSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.contains(&0) {
            return Err(Error::invalid("mlp spec", "layer widths must be positive"));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaDnnSpec {
    pub geo_branch: Vec<usize>,
    pub cond_branch: Vec<usize>,
    pub trunk: Vec<usize>,
    pub train: TrainSpec,
}

impl LambdaDnnSpec {
    pub fn full_scale_preset() -> Self {
        LambdaDnnSpec {
            geo_branch: vec![107, 116, 236, 139],
            cond_branch: vec![240, 179, 114],
            trunk: vec![230, 162, 124],
            train: TrainSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.geo_branch.is_empty() || self.cond_branch.is_empty() {
            return Err(Error::invalid("lambda-dnn spec", "both branches need at least one layer"));
        }
        if [&self.geo_branch, &self.cond_branch, &self.trunk]
            .iter()
            .any(|s| s.contains(&0))
        {
            return Err(Error::invalid("lambda-dnn spec", "layer widths must be positive"));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub train: f64,
    pub validation: f64,
}

/// A trained network with its loss history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trained<N> {
    pub net: N,
    pub history: Vec<EpochLoss>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
}

pub type MlpModel = Trained<Mlp>;
pub type LambdaDnnModel = Trained<LambdaDnn>;

fn mse(net: &impl Network, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (net.forward(x) - y).norm_squared() / y.nrows() as f64
}

fn check_pair(what: &'static str, x: &DMatrix<f64>, y: &DMatrix<f64>, net: &impl Network) -> Result<()> {
    if x.nrows() != y.nrows() || x.nrows() == 0 {
        return Err(Error::invalid(what, format!("{} input rows vs {} target rows", x.nrows(), y.nrows())));
    }
    if x.ncols() != net.n_inputs() || y.ncols() != net.n_outputs() {
        return Err(Error::invalid(
            what,
            format!(
                "network maps {} -> {} columns, data has {} -> {}",
                net.n_inputs(),
                net.n_outputs(),
                x.ncols(),
                y.ncols()
            ),
        ));
    }
    Ok(())
}

/// Mini-batch Adam with exponential learning-rate decay. Rows are reshuffled
/// every epoch from one seeded stream; the returned parameters are those with
/// the lowest validation loss (training loss when no validation set is given).
pub fn train<N: Network>(
    mut net: N,
    spec: &TrainSpec,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    validation: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> Result<Trained<N>> {
    spec.validate()?;
    check_pair("training data", x, y, &net)?;
    if let Some((vx, vy)) = validation {
        check_pair("validation data", vx, vy, &net)?;
    }
    let n = x.nrows();
    let batch = ((spec.batch_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let n_params = net.n_params();
    let (mut m, mut v) = (vec![0.0; n_params], vec![0.0; n_params]);
    let mut params = net.params();
    let mut step = 0i32;
    let mut lr = spec.learning_rate;
    let mut history = Vec::with_capacity(spec.epochs);
    let mut best = (f64::INFINITY, 0, params.clone());

    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let bx = x.select_rows(chunk);
            let by = y.select_rows(chunk);
            let (loss, grad) = net.loss_grad(&bx, &by, spec.l2, spec.dropout, &mut rng);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    learning_rate: lr,
                    detail: format!("batch loss {loss}"),
                });
            }
            step += 1;
            let c1 = 1.0 - spec.beta1.powi(step);
            let c2 = 1.0 - spec.beta2.powi(step);
            for k in 0..n_params {
                m[k] = spec.beta1 * m[k] + (1.0 - spec.beta1) * grad[k];
                v[k] = spec.beta2 * v[k] + (1.0 - spec.beta2) * grad[k] * grad[k];
                params[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + spec.epsilon);
            }
            net.set_params(&params);
        }
        let train_loss = mse(&net, x, y);
        let val_loss = validation.map_or(train_loss, |(vx, vy)| mse(&net, vx, vy));
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                learning_rate: lr,
                detail: format!("epoch losses train={train_loss} validation={val_loss}"),
            });
        }
        history.push(EpochLoss {
            train: train_loss,
            validation: val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, params.clone());
        }
        lr *= spec.lr_decay;
    }
    net.set_params(&best.2);
    Ok(Trained {
        net,
        history,
        best_epoch: best.1,
    })
}

pub fn mlp_train(
    spec: &MlpSpec,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    validation: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> Result<MlpModel> {
    spec.validate()?;
    let t = &spec.train;
    let net = Mlp::init(x.ncols(), &spec.hidden_sizes, y.ncols(), t.activation, t.leaky_slope, t.seed);
    train(net, t, x, y, validation)
}

pub fn lambda_dnn_train(
    spec: &LambdaDnnSpec,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    validation: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> Result<LambdaDnnModel> {
    spec.validate()?;
    let t = &spec.train;
    let net = LambdaDnn::init(
        &spec.geo_branch,
        &spec.cond_branch,
        &spec.trunk,
        y.ncols(),
        t.activation,
        t.leaky_slope,
        t.seed,
    )?;
    train(net, t, x, y, validation)
}
