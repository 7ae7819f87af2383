//! Dataset model: surface geometry, wall-field snapshots, the train/test
//! split protocol, feature scaling and the tensor views used by pointwise and
//! global regressors.

mod io;
mod scaler;
mod split;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowCondition;
use crate::N_VARIABLES;

pub use io::{
    load_dataset, load_submission, save_dataset, save_submission, FORMAT_TAG, FORMAT_VERSION,
};
pub use scaler::Scaler;
pub use split::{inner_split, split_dataset, FORCED_TRAIN_MACHS, TEST_PER_GROUP};

/// Wall point cloud with unit normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGeometry {
    pub coords: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
}

impl SurfaceGeometry {
    pub fn new(coords: Vec<[f64; 3]>, normals: Vec<[f64; 3]>) -> Result<Self> {
        let geo = SurfaceGeometry { coords, normals };
        geo.validate()?;
        Ok(geo)
    }

    pub fn n_p(&self) -> usize {
        self.coords.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.is_empty() {
            return Err(Error::invalid("geometry", "no points"));
        }
        if self.coords.len() != self.normals.len() {
            return Err(Error::invalid(
                "geometry",
                format!(
                    "{} coordinates but {} normals",
                    self.coords.len(),
                    self.normals.len()
                ),
            ));
        }
        for (i, (c, n)) in self.coords.iter().zip(&self.normals).enumerate() {
            if c.iter().chain(n).any(|v| !v.is_finite()) {
                return Err(Error::invalid("geometry", format!("point {i} is not finite")));
            }
            let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(
                    "geometry",
                    format!("normal of point {i} has norm {norm}"),
                ));
            }
        }
        Ok(())
    }
}

/// One snapshot: `n_p x 4` values in column order (Cp, Cfx, Cfy, Cfz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallField {
    pub condition_id: String,
    pub values: DMatrix<f64>,
}

impl WallField {
    pub fn new(condition_id: impl Into<String>, values: DMatrix<f64>) -> Result<Self> {
        let field = WallField {
            condition_id: condition_id.into(),
            values,
        };
        if field.values.ncols() != N_VARIABLES {
            return Err(Error::invalid(
                "wall field",
                format!("{} columns, expected {N_VARIABLES}", field.values.ncols()),
            ));
        }
        if field.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "wall field",
                format!("non-finite value for condition `{}`", field.condition_id),
            ));
        }
        Ok(field)
    }

    pub fn n_p(&self) -> usize {
        self.values.nrows()
    }

    /// Contiguous values of one output variable.
    pub fn variable(&self, var: usize) -> &[f64] {
        let n = self.values.nrows();
        &self.values.as_slice()[var * n..(var + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split label `{other}`")),
        }
    }
}

/// Geometry, conditions, stored fields and split labels.
///
/// `fields` may lack test conditions when the test truth is hidden.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub geometry: SurfaceGeometry,
    pub conditions: Vec<FlowCondition>,
    pub fields: BTreeMap<String, WallField>,
    pub split: BTreeMap<String, Split>,
}

impl Dataset {
    pub fn n_p(&self) -> usize {
        self.geometry.n_p()
    }

    pub fn condition(&self, id: &str) -> Option<&FlowCondition> {
        self.conditions.iter().find(|c| c.id == id)
    }

    fn ids_with(&self, label: Split) -> Vec<String> {
        self.conditions
            .iter()
            .filter(|c| self.split.get(&c.id) == Some(&label))
            .map(|c| c.id.clone())
            .collect()
    }

    /// Train ids in condition order.
    pub fn train_ids(&self) -> Vec<String> {
        self.ids_with(Split::Train)
    }

    /// Test ids in condition order.
    pub fn test_ids(&self) -> Vec<String> {
        self.ids_with(Split::Test)
    }

    pub fn field(&self, id: &str) -> Result<&WallField> {
        self.fields
            .get(id)
            .ok_or_else(|| Error::MissingField(id.to_string()))
    }

    /// Checks cross-references between conditions, split labels and fields.
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.conditions {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Structure(format!("duplicate condition id `{}`", c.id)));
            }
            if !self.split.contains_key(&c.id) {
                return Err(Error::Structure(format!("condition `{}` has no split label", c.id)));
            }
        }
        if let Some(id) = self.split.keys().find(|id| !seen.contains(id.as_str())) {
            return Err(Error::Structure(format!("split label for unknown condition `{id}`")));
        }
        for (id, field) in &self.fields {
            if !seen.contains(id.as_str()) {
                return Err(Error::Structure(format!("field for unknown condition `{id}`")));
            }
            if field.n_p() != self.n_p() {
                return Err(Error::Structure(format!(
                    "field `{id}` has {} rows, geometry has {}",
                    field.n_p(),
                    self.n_p()
                )));
            }
        }
        Ok(())
    }

    fn conditions_for(&self, ids: &[String]) -> Result<Vec<&FlowCondition>> {
        ids.iter()
            .map(|id| {
                self.condition(id)
                    .ok_or_else(|| Error::Structure(format!("unknown condition `{id}`")))
            })
            .collect()
    }

    /// Pointwise tensors: `X` with columns (x, y, z, nx, ny, nz, M, AoA, p_i)
    /// and `Y` with columns (Cp, Cfx, Cfy, Cfz); rows are condition-major.
    pub fn assemble_pointwise(&self, ids: &[String]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let conds = self.conditions_for(ids)?;
        let fields = ids
            .iter()
            .map(|id| self.field(id))
            .collect::<Result<Vec<_>>>()?;
        let x = self.pointwise_inputs(&conds);
        let n_p = self.n_p();
        let mut y = DMatrix::zeros(n_p * ids.len(), N_VARIABLES);
        for (f, field) in fields.iter().enumerate() {
            y.view_mut((f * n_p, 0), (n_p, N_VARIABLES))
                .copy_from(&field.values);
        }
        Ok((x, y))
    }

    /// The 9-column pointwise input matrix for the given conditions, which need
    /// not have stored fields.
    pub fn pointwise_inputs(&self, conds: &[&FlowCondition]) -> DMatrix<f64> {
        let n_p = self.n_p();
        let mut x = DMatrix::zeros(n_p * conds.len(), 9);
        for (f, cond) in conds.iter().enumerate() {
            let params = cond.params();
            for p in 0..n_p {
                let row = f * n_p + p;
                let (c, n) = (self.geometry.coords[p], self.geometry.normals[p]);
                for j in 0..3 {
                    x[(row, j)] = c[j];
                    x[(row, 3 + j)] = n[j];
                    x[(row, 6 + j)] = params[j];
                }
            }
        }
        x
    }

    /// Global tensors: `X_g` (`|ids| x 3`) and `Y_g` as one `n_p x 4` matrix
    /// per condition.
    pub fn assemble_global(&self, ids: &[String]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        let conds = self.conditions_for(ids)?;
        let x = params_matrix(&conds);
        let y = ids
            .iter()
            .map(|id| self.field(id).map(|f| f.values.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok((x, y))
    }
}

/// Stacks `(M, AoA, p_i)` rows.
pub fn params_matrix(conds: &[&FlowCondition]) -> DMatrix<f64> {
    DMatrix::from_fn(conds.len(), 3, |i, j| conds[i].params()[j])
}

/// Snapshot matrix of one variable: column `f` is the `f`-th field.
pub fn snapshot_matrix(fields: &[DMatrix<f64>], var: usize) -> DMatrix<f64> {
    let n_p = fields.first().map_or(0, DMatrix::nrows);
    DMatrix::from_fn(n_p, fields.len(), |p, f| fields[f][(p, var)])
}
