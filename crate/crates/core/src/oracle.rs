//! Deterministic analytic stand-in for CFD wall data.
//!
//! The geometry is a swept, tapered wing lofted from a symmetric four-digit
//! thickness law, parameterized by a chordwise coordinate `s` and a spanwise
//! coordinate `t`, both in `[0, 1]`, on an upper (`side = +1`) and a lower
//! (`side = -1`) surface:
//!
//! ```text
//! x = x_le(t) + c(t) s      c(t) = 7 (1 - 0.7 t),  x_le(t) = 0.7 b t
//! y = b t                   b = 29
//! z = z0(t) + side c(t) h(s),   z0(t) = 0.05 b t
//! ```
//!
//! Normals are the normalized cross product of the surface tangents.
//!
//! With `a` the angle of attack in radians, `M` the Mach number and
//! `pg = 1 / sqrt(max(1 - M^2, 0.19))`:
//!
//! ```text
//! Cp   = pg (-0.35 sin(pi s) - side 0.25 cl(a) load(s) span(t))
//!        + [upper, M > 0.7]  A(M) tanh(k (s - s_shock(M, AoA)))
//! cl   = 0.25 + 4.5 sin a
//! load = (1 - s)^1.5 / sqrt(s + 0.03),   span = sqrt(1 - 0.85 t^2)
//! A    = 2.5 (M - 0.7),   s_shock = clamp(0.25 + 1.2 (M - 0.7) + 0.015 AoA, 0.05, 0.95)
//! ```
//!
//! The friction vector is `Re^e * mag * d`, where `e` is the configured
//! exponent, `mag = 0.1 (s + 0.02)^-0.2 (1 + 0.1 M^2) (1 - 0.3 side sin a) (1 - sep)`,
//! `sep` is a friction deficit behind the upper-surface shock, and `d` is the
//! unit projection of the free-stream direction plus a spanwise drift onto
//! the tangent plane. The Reynolds dependence is the only place `p_i` enters.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{split_dataset, Dataset, SurfaceGeometry, WallField};
use crate::error::{Error, Result};
use crate::flow::{generate_doe, reynolds, DoeSpec, FlowCondition, GasModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub n_p: usize,
    pub seed: u64,
    pub shock_sharpness: f64,
    pub cf_scale_exponent: f64,
    pub noise_amplitude: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            n_p: 2000,
            seed: 0,
            shock_sharpness: 10.0,
            cf_scale_exponent: -0.2,
            noise_amplitude: 0.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_p < 8 {
            return Err(Error::invalid("oracle config", format!("n_p must be >= 8, got {}", self.n_p)));
        }
        if !(self.shock_sharpness.is_finite() && self.shock_sharpness > 0.0) {
            return Err(Error::invalid("oracle config", "shock_sharpness must be positive"));
        }
        if !self.cf_scale_exponent.is_finite() {
            return Err(Error::invalid("oracle config", "cf_scale_exponent must be finite"));
        }
        if !(self.noise_amplitude.is_finite() && self.noise_amplitude >= 0.0) {
            return Err(Error::invalid("oracle config", "noise_amplitude must be >= 0"));
        }
        Ok(())
    }
}

const SEMI_SPAN: f64 = 29.0;
const ROOT_CHORD: f64 = 7.0;
const TAPER_SLOPE: f64 = 0.7;
const SWEEP_SLOPE: f64 = 0.7;
const DIHEDRAL_SLOPE: f64 = 0.05;
const THICKNESS: f64 = 0.12;

fn chord(t: f64) -> f64 {
    ROOT_CHORD * (1.0 - TAPER_SLOPE * t)
}

fn leading_edge(t: f64) -> f64 {
    SWEEP_SLOPE * SEMI_SPAN * t
}

fn root_height(t: f64) -> f64 {
    DIHEDRAL_SLOPE * SEMI_SPAN * t
}

fn half_thickness(s: f64) -> f64 {
    5.0 * THICKNESS
        * (0.2969 * s.sqrt() - 0.1260 * s - 0.3516 * s * s + 0.2843 * s.powi(3) - 0.1036 * s.powi(4))
}

fn half_thickness_slope(s: f64) -> f64 {
    5.0 * THICKNESS
        * (0.14845 / s.sqrt() - 0.1260 - 0.7032 * s + 0.8529 * s * s - 0.4144 * s.powi(3))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn surface_point(s: f64, t: f64, side: f64) -> ([f64; 3], [f64; 3]) {
    let c = chord(t);
    let h = half_thickness(s);
    let coord = [
        leading_edge(t) + c * s,
        SEMI_SPAN * t,
        root_height(t) + side * c * h,
    ];
    let d_s = [c, 0.0, side * c * half_thickness_slope(s)];
    let d_t = [
        SWEEP_SLOPE * SEMI_SPAN - ROOT_CHORD * TAPER_SLOPE * s,
        SEMI_SPAN,
        DIHEDRAL_SLOPE * SEMI_SPAN - side * ROOT_CHORD * TAPER_SLOPE * h,
    ];
    let n = cross(d_s, d_t);
    (coord, unit([side * n[0], side * n[1], side * n[2]]))
}

/// Recovers `(s, t, side)` from a point of the lofted surface.
fn surface_coordinates(p: [f64; 3]) -> (f64, f64, f64) {
    let t = p[1] / SEMI_SPAN;
    let s = ((p[0] - leading_edge(t)) / chord(t)).clamp(0.0, 1.0);
    let side = if p[2] >= root_height(t) { 1.0 } else { -1.0 };
    (s, t, side)
}

/// Seeded wing point cloud: the first `ceil(n_p / 2)` points on the upper
/// surface, the rest on the lower one. Chordwise positions are cosine-clustered
/// toward both edges.
pub fn generate_geometry(cfg: &OracleConfig) -> Result<SurfaceGeometry> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_upper = cfg.n_p.div_ceil(2);
    let mut coords = Vec::with_capacity(cfg.n_p);
    let mut normals = Vec::with_capacity(cfg.n_p);
    for i in 0..cfg.n_p {
        let u: f64 = rng.random_range(0.03..1.0);
        let t: f64 = rng.random_range(0.0..1.0);
        let s = 0.5 * (1.0 - (std::f64::consts::PI * u).cos());
        let side = if i < n_upper { 1.0 } else { -1.0 };
        let (c, n) = surface_point(s, t, side);
        coords.push(c);
        normals.push(n);
    }
    SurfaceGeometry::new(coords, normals)
}

fn shock_amplitude(mach: f64) -> f64 {
    2.5 * (mach - 0.7)
}

fn shock_position(mach: f64, aoa_deg: f64) -> f64 {
    (0.25 + 1.2 * (mach - 0.7) + 0.015 * aoa_deg).clamp(0.05, 0.95)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Closed-form (Cp, Cfx, Cfy, Cfz) at every geometry point for one condition.
pub fn analytic_fields(
    geo: &SurfaceGeometry,
    cond: &FlowCondition,
    gas: &GasModel,
    cfg: &OracleConfig,
) -> Result<WallField> {
    cfg.validate()?;
    let mach = cond.mach;
    let a = cond.aoa_deg.to_radians();
    let pg = 1.0 / (1.0 - mach * mach).max(0.19).sqrt();
    let cl = 0.25 + 4.5 * a.sin();
    let re = reynolds(cond, gas)?;
    if !(re > 0.0) {
        return Err(Error::Domain(format!(
            "Reynolds number of `{}` is {re}; the friction scaling needs Re > 0",
            cond.id
        )));
    }
    let cf_scale = re.powf(cfg.cf_scale_exponent);
    let transonic = mach > 0.7;
    let amp = if transonic { shock_amplitude(mach) } else { 0.0 };
    let s_shock = shock_position(mach, cond.aoa_deg);
    let k = cfg.shock_sharpness;
    let free_stream = [a.cos(), 0.0, a.sin()];

    let mut values = DMatrix::zeros(geo.n_p(), 4);
    for (p, (&coord, &n)) in geo.coords.iter().zip(&geo.normals).enumerate() {
        let (s, t, side) = surface_coordinates(coord);
        let span = (1.0 - 0.85 * t * t).sqrt();
        let load = (1.0 - s).powf(1.5) / (s + 0.03).sqrt();
        let mut cp = pg * (-0.35 * (std::f64::consts::PI * s).sin() - side * 0.25 * cl * load * span);
        let mut sep = 0.0;
        if transonic && side > 0.0 {
            let front = (k * (s - s_shock)).tanh();
            cp += amp * front;
            sep = 0.4 * amp * 0.5 * (1.0 + front);
        }
        let mag = 0.1
            * (s + 0.02).powf(-0.2)
            * (1.0 + 0.1 * mach * mach)
            * (1.0 - 0.3 * side * a.sin())
            * (1.0 - sep);
        let drift = 0.3 + 0.2 * side * a.sin();
        let raw = [free_stream[0], drift, free_stream[2]];
        let along = dot(raw, n);
        let dir = unit([raw[0] - along * n[0], raw[1] - along * n[1], raw[2] - along * n[2]]);
        values[(p, 0)] = cp;
        for j in 0..3 {
            values[(p, 1 + j)] = cf_scale * mag * dir[j];
        }
    }

    if cfg.noise_amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ fnv1a(cond.id.as_bytes()));
        for v in 0..4 {
            let col_scale = values.column(v).amax();
            for p in 0..geo.n_p() {
                let noise: f64 = rng.random_range(-1.0..1.0);
                values[(p, v)] += cfg.noise_amplitude * col_scale * noise;
            }
        }
    }
    WallField::new(cond.id.clone(), values)
}

/// Full synthetic dataset over a DoE, split with `split_seed`.
pub fn generate_dataset(
    doe: &DoeSpec,
    cfg: &OracleConfig,
    gas: &GasModel,
    split_seed: u64,
) -> Result<Dataset> {
    gas.validate()?;
    let conditions = generate_doe(doe)?;
    let geometry = generate_geometry(cfg)?;
    let fields = conditions
        .iter()
        .map(|c| analytic_fields(&geometry, c, gas, cfg).map(|f| (c.id.clone(), f)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let split = split_dataset(&conditions, split_seed)?;
    Ok(Dataset {
        geometry,
        conditions,
        fields,
        split,
    })
}
