//! Challenge scoring: flow-weighted R² and worst relative mean absolute error
//! (wrMAE) per output variable, and the report that averages them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, WallField};
use crate::error::{Error, Result};
use crate::flow::{flow_weight, FlowCondition};
use crate::{N_VARIABLES, VARIABLES};

/// How the reference mean in the R² denominator is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanMode {
    /// Plain mean over all points and flows.
    #[default]
    Unweighted,
    /// Mean weighted by the flow weights.
    Weighted,
}

fn check_shapes(truth: &[&[f64]], pred: &[&[f64]], weights: &[f64]) -> Result<()> {
    if truth.len() != pred.len() || truth.len() != weights.len() {
        return Err(Error::Domain(format!(
            "{} truth flows, {} predicted flows, {} weights",
            truth.len(),
            pred.len(),
            weights.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Domain("no flows to score".into()));
    }
    for (f, (t, p)) in truth.iter().zip(pred).enumerate() {
        if t.len() != p.len() {
            return Err(Error::Domain(format!(
                "flow {f}: {} truth values, {} predictions",
                t.len(),
                p.len()
            )));
        }
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::Domain("flow weights must be positive".into()));
    }
    Ok(())
}

/// `R² = 1 - sum w_f (y - ŷ)² / sum w_f (y - ȳ)²` over every point of every
/// flow, for one variable.
pub fn r2_weighted(
    truth: &[&[f64]],
    pred: &[&[f64]],
    weights: &[f64],
    mode: MeanMode,
) -> Result<f64> {
    check_shapes(truth, pred, weights)?;
    let mean = match mode {
        MeanMode::Unweighted => {
            let n: usize = truth.iter().map(|t| t.len()).sum();
            truth.iter().flat_map(|t| t.iter()).sum::<f64>() / n as f64
        }
        MeanMode::Weighted => {
            let (mut num, mut den) = (0.0, 0.0);
            for (t, w) in truth.iter().zip(weights) {
                num += w * t.iter().sum::<f64>();
                den += w * t.len() as f64;
            }
            num / den
        }
    };
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for ((t, p), w) in truth.iter().zip(pred).zip(weights) {
        let res: f64 = t.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let tot: f64 = t.iter().map(|a| (a - mean) * (a - mean)).sum();
        ss_res += w * res;
        ss_tot += w * tot;
    }
    if ss_tot == 0.0 {
        return Err(Error::Domain(
            "R² undefined: the truth is constant over the scored flows".into(),
        ));
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Relative mean absolute error of one flow, `None` when the truth is zero.
pub fn rmae(truth: &[f64], pred: &[f64]) -> Option<f64> {
    let den: f64 = truth.iter().map(|v| v.abs()).sum();
    if den == 0.0 {
        return None;
    }
    let num: f64 = truth.iter().zip(pred).map(|(a, b)| (a - b).abs()).sum();
    Some(num / den)
}

/// Per-flow rMAE for every flow, then the maximum over weight-1 flows.
///
/// Returns `(wrMAE, index of the worst flow, per-flow rMAE)`.
pub fn wrmae(truth: &[&[f64]], pred: &[&[f64]], weights: &[f64]) -> Result<(f64, usize, Vec<f64>)> {
    check_shapes(truth, pred, weights)?;
    let per_flow = truth
        .iter()
        .zip(pred)
        .enumerate()
        .map(|(f, (t, p))| {
            rmae(t, p).ok_or_else(|| {
                Error::Domain(format!("flow {f} has identically zero truth; rMAE undefined"))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut worst: Option<(f64, usize)> = None;
    for (f, (&e, &w)) in per_flow.iter().zip(weights).enumerate() {
        if w < 1.0 {
            continue;
        }
        if worst.is_none_or(|(best, _)| e > best) {
            worst = Some((e, f));
        }
    }
    let (value, index) =
        worst.ok_or_else(|| Error::Domain("no flow with weight 1 to take the maximum over".into()))?;
    Ok((value, index, per_flow))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstFlow {
    pub id: String,
    pub mach: f64,
    pub aoa_deg: f64,
    pub p_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableScore {
    pub variable: String,
    pub r2: f64,
    pub wrmae: f64,
    pub worst_flow: WorstFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowScore {
    pub id: String,
    pub weight: f64,
    pub rmae: [f64; N_VARIABLES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub variables: Vec<VariableScore>,
    pub mean_r2: f64,
    pub mean_wrmae: f64,
    pub n_test: usize,
    /// Flows entering the wrMAE maximum (weight 1).
    pub n_reduced: usize,
    pub mean_mode: MeanMode,
    pub per_flow: Vec<FlowScore>,
}

/// Scores predicted fields against the truth, flow by flow.
pub fn score_fields(
    conds: &[&FlowCondition],
    truth: &[&WallField],
    pred: &[&WallField],
    mode: MeanMode,
) -> Result<ScoreReport> {
    if conds.len() != truth.len() || conds.len() != pred.len() {
        return Err(Error::Domain("conditions, truth and predictions differ in count".into()));
    }
    let weights: Vec<f64> = conds.iter().map(|c| flow_weight(c)).collect();
    let mut variables = Vec::with_capacity(N_VARIABLES);
    let mut per_flow: Vec<FlowScore> = conds
        .iter()
        .zip(&weights)
        .map(|(c, &w)| FlowScore {
            id: c.id.clone(),
            weight: w,
            rmae: [0.0; N_VARIABLES],
        })
        .collect();
    for (v, name) in VARIABLES.iter().enumerate() {
        let t: Vec<&[f64]> = truth.iter().map(|f| f.variable(v)).collect();
        let p: Vec<&[f64]> = pred.iter().map(|f| f.variable(v)).collect();
        let r2 = r2_weighted(&t, &p, &weights, mode)
            .map_err(|e| Error::Domain(format!("{name}: {e}")))?;
        let (value, worst, flows) = wrmae(&t, &p, &weights).map_err(|e| match e {
            Error::Domain(msg) => {
                // Name the offending flow instead of its index.
                let named = conds
                    .iter()
                    .enumerate()
                    .fold(msg, |m, (f, c)| m.replace(&format!("flow {f} "), &format!("flow `{}` ", c.id)));
                Error::Domain(format!("{name}: {named}"))
            }
            other => other,
        })?;
        for (row, e) in per_flow.iter_mut().zip(flows) {
            row.rmae[v] = e;
        }
        let c = conds[worst];
        variables.push(VariableScore {
            variable: (*name).to_string(),
            r2,
            wrmae: value,
            worst_flow: WorstFlow {
                id: c.id.clone(),
                mach: c.mach,
                aoa_deg: c.aoa_deg,
                p_i: c.p_i,
            },
        });
    }
    let n = variables.len() as f64;
    Ok(ScoreReport {
        mean_r2: variables.iter().map(|s| s.r2).sum::<f64>() / n,
        mean_wrmae: variables.iter().map(|s| s.wrmae).sum::<f64>() / n,
        n_test: conds.len(),
        n_reduced: weights.iter().filter(|w| **w >= 1.0).count(),
        mean_mode: mode,
        variables,
        per_flow,
    })
}

/// Scores a validated submission against the dataset's stored test truth.
pub fn score_submission(
    ds: &Dataset,
    submission: &BTreeMap<String, WallField>,
    mode: MeanMode,
) -> Result<ScoreReport> {
    let ids = ds.test_ids();
    let mut conds = Vec::with_capacity(ids.len());
    let mut truth = Vec::with_capacity(ids.len());
    let mut pred = Vec::with_capacity(ids.len());
    for id in &ids {
        conds.push(ds.condition(id).expect("test ids come from the dataset"));
        truth.push(ds.field(id)?);
        let p = submission
            .get(id)
            .ok_or_else(|| Error::Submission(format!("missing test condition `{id}`")))?;
        if p.n_p() != ds.n_p() {
            return Err(Error::Submission(format!(
                "`{id}` has {} rows, expected {}",
                p.n_p(),
                ds.n_p()
            )));
        }
        pred.push(p);
    }
    if submission.len() != ids.len() {
        return Err(Error::Submission(format!(
            "{} fields submitted for {} test conditions",
            submission.len(),
            ids.len()
        )));
    }
    score_fields(&conds, &truth, &pred, mode)
}

impl ScoreReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Aligned text table: one row per variable plus the mean row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<8} {:>9} {:>9}   worst flow (M, AoA, p_i)",
            "variable", "R2", "wrMAE"
        )
        .unwrap();
        for s in &self.variables {
            writeln!(
                out,
                "{:<8} {:>9.4} {:>9.4}   ({:.2}, {:+.2}, {:.0})",
                s.variable, s.r2, s.wrmae, s.worst_flow.mach, s.worst_flow.aoa_deg, s.worst_flow.p_i
            )
            .unwrap();
        }
        writeln!(out, "{:<8} {:>9.4} {:>9.4}", "mean", self.mean_r2, self.mean_wrmae).unwrap();
        writeln!(
            out,
            "test flows: {}, reduced set (weight 1): {}",
            self.n_test, self.n_reduced
        )
        .unwrap();
        out
    }
}

/// Side-by-side table of several reports, one row per named regressor.
pub fn render_comparison(reports: &[(String, ScoreReport)]) -> String {
    let mut out = String::new();
    let header: Vec<String> = VARIABLES.iter().map(|v| format!("{v:>8}")).collect();
    for (title, pick) in [
        ("R2", (|s: &VariableScore| s.r2) as fn(&VariableScore) -> f64),
        ("wrMAE", |s: &VariableScore| s.wrmae),
    ] {
        writeln!(out, "{:<16} {:>8} {}", title, "mean", header.join(" ")).unwrap();
        for (name, r) in reports {
            let mean = if title == "R2" { r.mean_r2 } else { r.mean_wrmae };
            let cells: Vec<String> = r.variables.iter().map(|s| format!("{:>8.3}", pick(s))).collect();
            writeln!(out, "{:<16} {:>8.3} {}", name, mean, cells.join(" ")).unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r2_hand_example() {
        let truth: [&[f64]; 2] = [&[1.0, 2.0], &[3.0, 4.0]];
        let pred: [&[f64]; 2] = [&[1.0, 2.0], &[2.0, 4.0]];
        let r2 = r2_weighted(&truth, &pred, &[1.0, 0.5], MeanMode::Unweighted).unwrap();
        assert!((r2 - 13.0 / 15.0).abs() <= 1e-12);
        assert_eq!(r2_weighted(&truth, &truth, &[1.0, 0.5], MeanMode::Unweighted).unwrap(), 1.0);
        let mean: [&[f64]; 2] = [&[2.5, 2.5], &[2.5, 2.5]];
        assert_eq!(r2_weighted(&truth, &mean, &[1.0, 0.5], MeanMode::Unweighted).unwrap(), 0.0);
        let flat: [&[f64]; 2] = [&[1.0, 1.0], &[1.0, 1.0]];
        assert!(r2_weighted(&flat, &flat, &[1.0, 1.0], MeanMode::Unweighted).is_err());
    }

    #[test]
    fn weighted_mean_switch() {
        let truth: [&[f64]; 2] = [&[1.0, 2.0], &[3.0, 4.0]];
        let pred: [&[f64]; 2] = [&[1.0, 2.0], &[2.0, 4.0]];
        // weighted mean = (3 + 0.5 * 7) / 3 = 13/6
        let m = 13.0 / 6.0;
        let tot = (1.0 - m) * (1.0f64 - m) + (2.0 - m) * (2.0 - m)
            + 0.5 * ((3.0 - m) * (3.0 - m) + (4.0 - m) * (4.0 - m));
        let r2 = r2_weighted(&truth, &pred, &[1.0, 0.5], MeanMode::Weighted).unwrap();
        assert!((r2 - (1.0 - 0.5 / tot)).abs() < 1e-12);
    }

    #[test]
    fn wrmae_hand_example() {
        let truth: [&[f64]; 3] = [&[1.0, -1.0], &[2.0, 2.0], &[5.0, 5.0]];
        let pred: [&[f64]; 3] = [&[1.1, -0.9], &[1.0, 2.0], &[0.0, 0.0]];
        let (v, worst, per_flow) = wrmae(&truth, &pred, &[1.0, 1.0, 0.5]).unwrap();
        assert!((v - 0.25).abs() <= 1e-12);
        assert_eq!(worst, 1);
        assert!((per_flow[0] - 0.1).abs() <= 1e-12);
        assert_eq!(per_flow[2], 1.0);
        let (zero, _, _) = wrmae(&truth, &truth, &[1.0, 1.0, 0.5]).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn wrmae_errors() {
        let truth: [&[f64]; 2] = [&[0.0, 0.0], &[1.0, 1.0]];
        let err = wrmae(&truth, &truth, &[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("flow 0"), "{err}");
        let truth: [&[f64]; 1] = [&[1.0]];
        assert!(wrmae(&truth, &truth, &[0.5]).is_err());
    }

    fn flows(seed: &[f64], n_f: usize, n_p: usize) -> Vec<Vec<f64>> {
        (0..n_f)
            .map(|f| (0..n_p).map(|p| seed[(f * n_p + p) % seed.len()] + 0.1 * (f + p) as f64).collect())
            .collect()
    }

    fn views(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    proptest! {
        #[test]
        fn r2_affine_invariant(
            t in prop::collection::vec(-5.0f64..5.0, 24),
            p in prop::collection::vec(-5.0f64..5.0, 24),
            scale in prop::sample::select(vec![-3.0, -0.5, 0.25, 2.0, 7.5]),
            shift in -10.0f64..10.0,
        ) {
            let truth = flows(&t, 4, 6);
            let pred = flows(&p, 4, 6);
            let w = [1.0, 0.5, 1.0, 1.0];
            let base = r2_weighted(&views(&truth), &views(&pred), &w, MeanMode::Unweighted).unwrap();
            let tf = |v: &Vec<Vec<f64>>| v.iter().map(|r| r.iter().map(|x| scale * x + shift).collect()).collect::<Vec<Vec<f64>>>();
            let moved = r2_weighted(&views(&tf(&truth)), &views(&tf(&pred)), &w, MeanMode::Unweighted).unwrap();
            prop_assert!((base - moved).abs() <= 1e-10 * base.abs().max(1.0));
        }

        #[test]
        fn wrmae_scale_invariant_not_shift_invariant(
            t in prop::collection::vec(0.5f64..5.0, 24),
            p in prop::collection::vec(0.5f64..5.0, 24),
            scale in prop::sample::select(vec![-3.0, 0.25, 2.0, 1e3]),
        ) {
            let truth = flows(&t, 4, 6);
            let pred = flows(&p, 4, 6);
            let w = [1.0, 1.0, 0.5, 1.0];
            let (base, _, _) = wrmae(&views(&truth), &views(&pred), &w).unwrap();
            let sc = |v: &Vec<Vec<f64>>| v.iter().map(|r| r.iter().map(|x| scale * x).collect()).collect::<Vec<Vec<f64>>>();
            let (scaled, _, _) = wrmae(&views(&sc(&truth)), &views(&sc(&pred)), &w).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-12 * base.max(1.0));
            let sh = |v: &Vec<Vec<f64>>| v.iter().map(|r| r.iter().map(|x| x + 100.0).collect()).collect::<Vec<Vec<f64>>>();
            let (shifted, _, _) = wrmae(&views(&sh(&truth)), &views(&sh(&pred)), &w).unwrap();
            prop_assert!((base - shifted).abs() > 1e-9);
        }

        #[test]
        fn half_weight_flow_changes_r2_but_not_wrmae(
            t in prop::collection::vec(0.5f64..5.0, 24),
            p in prop::collection::vec(0.5f64..5.0, 24),
            extra in prop::collection::vec(0.5f64..5.0, 6),
        ) {
            let mut truth = flows(&t, 4, 6);
            let mut pred = flows(&p, 4, 6);
            let mut w = vec![1.0; 4];
            let (before, _, _) = wrmae(&views(&truth), &views(&pred), &w).unwrap();
            let r2_before = r2_weighted(&views(&truth), &views(&pred), &w, MeanMode::Unweighted).unwrap();
            truth.push(extra.clone());
            pred.push(extra.iter().map(|x| x + 1.0).collect());
            w.push(0.5);
            let (after, _, _) = wrmae(&views(&truth), &views(&pred), &w).unwrap();
            let r2_after = r2_weighted(&views(&truth), &views(&pred), &w, MeanMode::Unweighted).unwrap();
            prop_assert_eq!(before, after);
            prop_assert!(r2_before != r2_after);
        }

        #[test]
        fn worsening_worst_flow_never_lowers_wrmae(
            t in prop::collection::vec(0.5f64..5.0, 24),
            p in prop::collection::vec(0.5f64..5.0, 24),
            offset in 0.0f64..3.0,
        ) {
            let truth = flows(&t, 4, 6);
            let mut pred = flows(&p, 4, 6);
            let w = [1.0; 4];
            let (before, worst, _) = wrmae(&views(&truth), &views(&pred), &w).unwrap();
            // Push every prediction of the worst flow further from its truth.
            for (x, y) in pred[worst].iter_mut().zip(&truth[worst]) {
                *x += if *x >= *y { offset } else { -offset };
            }
            let (after, _, _) = wrmae(&views(&truth), &views(&pred), &w).unwrap();
            prop_assert!(after >= before);
        }
    }
}
