//! Flow-condition parameter space: gas physics, Reynolds number, design of
//! experiments and the per-flow scoring weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point of the design of experiments, the parameter vector `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowCondition {
    pub id: String,
    /// Far-field Mach number.
    pub mach: f64,
    /// Angle of attack in degrees.
    pub aoa_deg: f64,
    /// Stagnation pressure in Pa.
    pub p_i: f64,
}

impl FlowCondition {
    pub fn new(mach: f64, aoa_deg: f64, p_i: f64) -> Self {
        FlowCondition {
            id: condition_id(mach, aoa_deg, p_i),
            mach,
            aoa_deg,
            p_i,
        }
    }

    /// The parameter vector `(M, AoA, p_i)`.
    pub fn params(&self) -> [f64; 3] {
        [self.mach, self.aoa_deg, self.p_i]
    }
}

/// Deterministic identifier encoding `(M, AoA, p_i)`.
pub fn condition_id(mach: f64, aoa_deg: f64, p_i: f64) -> String {
    format!("m{mach:.4}_a{aoa_deg:+08.4}_p{p_i:.0}")
}

/// Perfect-gas constants, Sutherland coefficients, stagnation temperature and
/// reference length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasModel {
    pub gamma: f64,
    /// Specific gas constant, J/(kg K).
    pub r_gas: f64,
    /// Sutherland reference temperature, K.
    pub t_ref: f64,
    /// Viscosity at `t_ref`, Pa s.
    pub mu_ref: f64,
    /// Sutherland constant, K.
    pub s_suth: f64,
    /// Stagnation temperature, K.
    pub t_i: f64,
    /// Reference length, m.
    pub l_ref: f64,
}

/// Mach number and stagnation pressure at which the default reference length
/// is calibrated.
pub const CALIBRATION_MACH: f64 = 0.85;
pub const CALIBRATION_P_I: f64 = 2.0e5;
/// Reynolds number reached at the calibration point.
pub const CALIBRATION_RE: f64 = 5.0e6;

impl GasModel {
    /// Standard air constants with `T_i = 322.2 K` and a unit reference length.
    pub fn air_uncalibrated() -> Self {
        GasModel {
            gamma: 1.4,
            r_gas: 287.058,
            t_ref: 273.15,
            mu_ref: 1.716e-5,
            s_suth: 110.4,
            t_i: 322.2,
            l_ref: 1.0,
        }
    }

    /// Standard air with `l_ref` solved so that `Re = 5e6` at `M = 0.85`,
    /// `p_i = 2e5 Pa`.
    pub fn air() -> Self {
        let gas = Self::air_uncalibrated();
        let at = FlowCondition::new(CALIBRATION_MACH, 0.0, CALIBRATION_P_I);
        let l_ref = calibrate_reference_length(&gas, CALIBRATION_RE, &at)
            .expect("calibration point has nonzero Mach");
        GasModel { l_ref, ..gas }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma", self.gamma),
            ("r_gas", self.r_gas),
            ("t_ref", self.t_ref),
            ("mu_ref", self.mu_ref),
            ("s_suth", self.s_suth),
            ("t_i", self.t_i),
            ("l_ref", self.l_ref),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    "gas model",
                    format!("{name} must be finite and positive, got {v}"),
                ));
            }
        }
        if self.gamma <= 1.0 {
            return Err(Error::invalid(
                "gas model",
                format!("gamma must exceed 1, got {}", self.gamma),
            ));
        }
        Ok(())
    }
}

impl Default for GasModel {
    fn default() -> Self {
        Self::air()
    }
}

fn isentropic_factor(mach: f64, gamma: f64) -> f64 {
    1.0 + 0.5 * (gamma - 1.0) * mach * mach
}

/// Static temperature from stagnation temperature along an isentrope.
pub fn static_temperature(t_i: f64, mach: f64, gas: &GasModel) -> Result<f64> {
    if !t_i.is_finite() || !mach.is_finite() {
        return Err(Error::Domain(format!(
            "static temperature needs finite inputs (t_i={t_i}, mach={mach})"
        )));
    }
    if t_i <= 0.0 || mach < 0.0 {
        return Err(Error::Domain(format!(
            "static temperature needs t_i > 0 and mach >= 0 (t_i={t_i}, mach={mach})"
        )));
    }
    if mach == 0.0 {
        return Ok(t_i);
    }
    Ok(t_i / isentropic_factor(mach, gas.gamma))
}

/// Molecular viscosity from Sutherland's law.
pub fn sutherland_viscosity(t: f64, gas: &GasModel) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!(
            "viscosity needs a finite positive temperature, got {t}"
        )));
    }
    if t == gas.t_ref {
        return Ok(gas.mu_ref);
    }
    let ratio = t / gas.t_ref;
    Ok(gas.mu_ref * ratio * ratio.sqrt() * (gas.t_ref + gas.s_suth) / (t + gas.s_suth))
}

/// Reynolds number based on the reference length, written in terms of the
/// stagnation state:
///
/// `Re = sqrt(gamma/r) p_i M L / (sqrt(T_i) mu(T)) (1 + (gamma-1)/2 M^2)^((1-2 gamma)/(2(gamma-1)))`
///
/// `p_i` and `L` enter as the last two factors so that scaling either by a
/// power of two scales the result exactly.
pub fn reynolds(cond: &FlowCondition, gas: &GasModel) -> Result<f64> {
    let gamma = gas.gamma;
    let t = static_temperature(gas.t_i, cond.mach, gas)?;
    let mu = sutherland_viscosity(t, gas)?;
    let exponent = (1.0 - 2.0 * gamma) / (2.0 * (gamma - 1.0));
    let compressibility = isentropic_factor(cond.mach, gamma).powf(exponent);
    let base = (gamma / gas.r_gas).sqrt() * cond.mach / (gas.t_i.sqrt() * mu) * compressibility;
    Ok(base * cond.p_i * gas.l_ref)
}

/// Solves for the reference length that makes `reynolds(at)` equal `target_re`.
///
/// The Reynolds number is linear in `L`, so the inversion is closed-form.
pub fn calibrate_reference_length(
    gas_without_l: &GasModel,
    target_re: f64,
    at: &FlowCondition,
) -> Result<f64> {
    if !(target_re.is_finite() && target_re > 0.0) {
        return Err(Error::Domain(format!(
            "target Reynolds number must be positive, got {target_re}"
        )));
    }
    if at.mach == 0.0 || at.p_i == 0.0 {
        return Err(Error::Domain(
            "Reynolds number vanishes at the calibration point (zero Mach or pressure)".into(),
        ));
    }
    let unit = GasModel {
        l_ref: 1.0,
        ..*gas_without_l
    };
    let re_per_metre = reynolds(at, &unit)?;
    Ok(target_re / re_per_metre)
}

/// Mach grid, per-Mach angle-of-attack rows and stagnation pressures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoeSpec {
    pub mach_list: Vec<f64>,
    pub aoa_table: Vec<Vec<f64>>,
    pub p_i_list: Vec<f64>,
}

/// Angles of attack per (Mach, p_i) group.
pub const AOA_PER_GROUP: usize = 12;

const LOW_MACH_LIMIT: f64 = 0.5;
const HIGH_MACH_LIMIT: f64 = 0.88;
const LOW_MACH_HALF_RANGE: f64 = 15.0;
const HIGH_MACH_HALF_RANGE: f64 = 8.0;

/// Half-width of the AoA interval at a given Mach number: 15 deg up to
/// M = 0.5, 8 deg from M = 0.88, linear in between.
pub fn aoa_half_range(mach: f64) -> f64 {
    if mach <= LOW_MACH_LIMIT {
        LOW_MACH_HALF_RANGE
    } else if mach >= HIGH_MACH_LIMIT {
        HIGH_MACH_HALF_RANGE
    } else {
        let frac = (mach - LOW_MACH_LIMIT) / (HIGH_MACH_LIMIT - LOW_MACH_LIMIT);
        LOW_MACH_HALF_RANGE + frac * (HIGH_MACH_HALF_RANGE - LOW_MACH_HALF_RANGE)
    }
}

/// `count` evenly spaced values on `[-half, half]`, endpoints exact.
fn symmetric_row(half: f64, count: usize) -> Vec<f64> {
    let step = 2.0 * half / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i == count - 1 {
                half
            } else {
                -half + step * i as f64
            }
        })
        .collect()
}

impl DoeSpec {
    pub const DEFAULT_MACH: [f64; 13] = [
        0.30, 0.50, 0.70, 0.76, 0.80, 0.82, 0.84, 0.85, 0.86, 0.88, 0.90, 0.92, 0.96,
    ];
    pub const DEFAULT_P_I: [f64; 3] = [1.0e5, 2.0e5, 4.0e5];

    /// Builds a spec whose AoA rows are 12 evenly spaced angles over
    /// [`aoa_half_range`].
    pub fn from_machs(mach_list: &[f64], p_i_list: &[f64]) -> Self {
        let aoa_table = mach_list
            .iter()
            .map(|&m| symmetric_row(aoa_half_range(m), AOA_PER_GROUP))
            .collect();
        DoeSpec {
            mach_list: mach_list.to_vec(),
            aoa_table,
            p_i_list: p_i_list.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.aoa_table.iter().map(Vec::len).sum::<usize>() * self.p_i_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("DoE spec", reason));
        if self.mach_list.is_empty() || self.p_i_list.is_empty() {
            return bad("mach_list and p_i_list must be non-empty".into());
        }
        if self.aoa_table.len() != self.mach_list.len() {
            return bad(format!(
                "aoa_table has {} rows for {} Mach numbers",
                self.aoa_table.len(),
                self.mach_list.len()
            ));
        }
        if self.mach_list.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return bad("Mach numbers must be finite and non-negative".into());
        }
        if self.mach_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("mach_list must be strictly increasing".into());
        }
        if self.p_i_list.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return bad("stagnation pressures must be finite and positive".into());
        }
        let mut sorted_p = self.p_i_list.clone();
        sorted_p.sort_by(f64::total_cmp);
        if sorted_p.windows(2).any(|w| w[0] == w[1]) {
            return bad("stagnation pressures must be distinct".into());
        }
        for (&mach, row) in self.mach_list.iter().zip(&self.aoa_table) {
            if row.len() != AOA_PER_GROUP {
                return bad(format!(
                    "AoA row for M={mach} has {} entries, expected {AOA_PER_GROUP}",
                    row.len()
                ));
            }
            if row.iter().any(|a| !a.is_finite()) {
                return bad(format!("AoA row for M={mach} has non-finite entries"));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("AoA row for M={mach} is not strictly increasing"));
            }
            let expected = if mach <= LOW_MACH_LIMIT {
                Some(LOW_MACH_HALF_RANGE)
            } else if mach >= HIGH_MACH_LIMIT {
                Some(HIGH_MACH_HALF_RANGE)
            } else {
                None
            };
            if let Some(half) = expected {
                let (lo, hi) = (row[0], row[row.len() - 1]);
                if (lo + half).abs() > 1e-9 || (hi - half).abs() > 1e-9 {
                    return bad(format!(
                        "AoA range for M={mach} is [{lo}, {hi}], expected [-{half}, {half}]"
                    ));
                }
            }
        }
        Ok(())
    }
}

impl Default for DoeSpec {
    fn default() -> Self {
        Self::from_machs(&Self::DEFAULT_MACH, &Self::DEFAULT_P_I)
    }
}

/// Expands a spec into flow conditions, ordered by Mach, then AoA, then `p_i`
/// (in list order).
pub fn generate_doe(spec: &DoeSpec) -> Result<Vec<FlowCondition>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.len());
    for (&mach, row) in spec.mach_list.iter().zip(&spec.aoa_table) {
        for &aoa in row {
            for &p_i in &spec.p_i_list {
                out.push(FlowCondition::new(mach, aoa, p_i));
            }
        }
    }
    let mut ids: Vec<&str> = out.iter().map(|c| c.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::invalid(
            "DoE spec",
            format!("two conditions share the id `{}`", w[0]),
        ));
    }
    Ok(out)
}

/// Scoring weight of a flow: 1 inside the open interval AoA in (-10, 10) deg,
/// 0.5 on and beyond its bounds.
pub fn flow_weight(cond: &FlowCondition) -> f64 {
    if cond.aoa_deg > -10.0 && cond.aoa_deg < 10.0 {
        1.0
    } else {
        0.5
    }
}
