use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use wallreg_core::dataset::{
    inner_split, load_dataset, load_submission, save_dataset, save_submission, split_dataset,
};
use wallreg_core::flow::reynolds as reynolds_number;
use wallreg_core::global::{knn_select_k, GlobalModel};
use wallreg_core::metrics::{render_comparison, score_submission};
use wallreg_core::model_io::{load_model, save_model, ModelFile, TrainedModel};
use wallreg_core::oracle::generate_dataset;
use wallreg_core::pointwise::{r2_score, random_search, PointwiseModel, PointwiseSpec};
use wallreg_core::{Dataset, FlowCondition, ScoreReport};

use crate::config::{ModelChoice, RunConfig, TUNABLE};
use crate::Failure;

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

/// Creates `dir` if missing; its parent must already exist.
fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    if dir.is_dir() {
        return Ok(());
    }
    fs::create_dir(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))
}

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn load(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let dir = cfg.require_dataset()?;
    let ds = load_dataset(dir)?;
    eprintln!(
        "loaded {}: {} conditions, n_p = {}",
        dir.display(),
        ds.conditions.len(),
        ds.n_p()
    );
    Ok(ds)
}

fn test_conditions(ds: &Dataset) -> Vec<&FlowCondition> {
    ds.test_ids()
        .iter()
        .map(|id| ds.condition(id).expect("test ids come from the dataset"))
        .collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: u32,
    config_sha256: String,
    split_seed: u64,
    oracle_seed: u64,
    n_p: usize,
    n_conditions: usize,
    n_train: usize,
    n_test: usize,
    config: &'a RunConfig,
}

pub fn generate(cfg: &RunConfig) -> Result<(), Failure> {
    let out = cfg.require_out()?;
    let ds = generate_dataset(&cfg.doe, &cfg.oracle, &cfg.gas, cfg.seed)?;
    save_dataset(&ds, out)?;
    let canonical = RunConfig {
        dataset: None,
        out: None,
        model: None,
        submission: None,
        ..cfg.clone()
    };
    let manifest = Manifest {
        format: "wallreg-manifest",
        version: 1,
        config_sha256: cfg.hash(),
        split_seed: cfg.seed,
        oracle_seed: cfg.oracle.seed,
        n_p: ds.n_p(),
        n_conditions: ds.conditions.len(),
        n_train: ds.train_ids().len(),
        n_test: ds.test_ids().len(),
        config: &canonical,
    };
    write_text(&out.join("manifest.json"), &to_json(&manifest))?;
    eprintln!(
        "wrote {}: {} conditions ({} train / {} test), n_p = {}",
        out.display(),
        manifest.n_conditions,
        manifest.n_train,
        manifest.n_test,
        manifest.n_p
    );
    Ok(())
}

pub fn split(cfg: &RunConfig) -> Result<(), Failure> {
    let mut ds = load(cfg)?;
    if ds.fields.len() != ds.conditions.len() {
        return Err(Failure::io(format!(
            "re-splitting needs every field, found {} of {}",
            ds.fields.len(),
            ds.conditions.len()
        )));
    }
    ds.split = split_dataset(&ds.conditions, cfg.seed)?;
    let out = cfg.out.as_deref().unwrap_or(cfg.require_dataset()?);
    save_dataset(&ds, out)?;
    eprintln!(
        "split seed {}: {} train / {} test -> {}",
        cfg.seed,
        ds.train_ids().len(),
        ds.test_ids().len(),
        out.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<(), Failure> {
    let (name, choice) = cfg.model_choice()?;
    let path = cfg.model_path()?;
    let ds = load(cfg)?;
    let (fit_ids, val_ids) = inner_split(&ds.train_ids(), cfg.inner_fraction, cfg.seed)?;
    eprintln!("training {name} on {} conditions ({} validation)", fit_ids.len(), val_ids.len());
    let start = Instant::now();
    let trained = match choice {
        ModelChoice::Pointwise(spec) => {
            let model = PointwiseModel::fit(&spec, &ds, &fit_ids, &val_ids)?;
            TrainedModel::Pointwise { spec, model }
        }
        ModelChoice::Global(spec) => {
            let model = GlobalModel::fit(&spec, &ds, &fit_ids, &val_ids)?;
            TrainedModel::Global { spec, model }
        }
    };
    eprintln!("fitted in {:.2?}", start.elapsed());
    ensure_parent(&path)?;
    save_model(&ModelFile::new(name, trained), &path)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn predict(cfg: &RunConfig) -> Result<(), Failure> {
    let model_path = cfg.model_path()?;
    let dir = cfg.submission_path()?;
    let ds = load(cfg)?;
    let file = load_model(&model_path)?;
    let conds = test_conditions(&ds);
    let fields = match &file.model {
        TrainedModel::Pointwise { model, .. } => model.predict_fields(&ds, &conds)?,
        TrainedModel::Global { model, .. } => model.predict_fields(&conds)?,
    };
    ensure_parent(&dir)?;
    save_submission(&fields, &dir)?;
    eprintln!("{}: {} test fields -> {}", file.regressor, fields.len(), dir.display());
    Ok(())
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), Failure> {
    let out = cfg.require_out()?;
    let dir = cfg.submission_path()?;
    let ds = load(cfg)?;
    let submission = load_submission(&dir, &ds.test_ids(), ds.n_p())?;
    let report = score_submission(&ds, &submission, cfg.mean_mode)?;
    let table = report.render_table();
    ensure_dir(out)?;
    write_text(&out.join("scores.json"), &report.to_json()?)?;
    write_text(&out.join("scores.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn report(cfg: &RunConfig, files: &[PathBuf]) -> Result<(), Failure> {
    let mut reports = Vec::with_capacity(files.len());
    for path in files {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        let r = ScoreReport::from_json(&text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        let label = path
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        reports.push((label, r));
    }
    let table = render_comparison(&reports);
    if let Some(out) = &cfg.out {
        ensure_dir(out)?;
        write_text(&out.join("report.txt"), &table)?;
    }
    print!("{table}");
    Ok(())
}

pub fn reynolds(cfg: &RunConfig) -> Result<(), Failure> {
    cfg.gas.validate()?;
    cfg.doe.validate()?;
    let mut table = String::from("mach,p_i,re\n");
    for &m in &cfg.doe.mach_list {
        for &p in &cfg.doe.p_i_list {
            let re = reynolds_number(&FlowCondition::new(m, 0.0, p), &cfg.gas)?;
            writeln!(table, "{m},{p},{re:.6e}").unwrap();
        }
    }
    if let Some(out) = &cfg.out {
        ensure_dir(out)?;
        write_text(&out.join("reynolds.csv"), &table)?;
    }
    print!("{table}");
    Ok(())
}

pub fn tune(cfg: &RunConfig) -> Result<(), Failure> {
    let name = cfg.regressor_name()?;
    if !TUNABLE.contains(&name) {
        return Err(Failure::config(format!(
            "`{name}` has no tuning procedure; tunable: {}",
            TUNABLE.join(", ")
        )));
    }
    let out = cfg.require_out()?;
    let ds = load(cfg)?;
    let t = &cfg.tune;
    let json = if name == "knn" {
        let (x, y) = ds.assemble_global(&ds.train_ids())?;
        let sel = knn_select_k(&x, &y, t.k_min..=t.k_max, t.removals, t.repeats, cfg.seed)?;
        eprintln!("selected k = {:?}", sel.k);
        to_json(&sel)
    } else {
        let (fit_ids, val_ids) = inner_split(&ds.train_ids(), cfg.inner_fraction, cfg.seed)?;
        let (vx, vy) = ds.assemble_pointwise(&val_ids)?;
        let result = random_search(
            t.budget,
            cfg.seed,
            |rng| t.space.sample(rng),
            |spec| {
                let model = PointwiseModel::fit(&PointwiseSpec::Mlp(spec.clone()), &ds, &fit_ids, &[])?;
                let score = r2_score(&vy, &model.predict(&vx)?);
                eprintln!("trial {:?}: validation R2 {score:.5}", spec.hidden_sizes);
                Ok(score)
            },
        )?;
        eprintln!("best trial {} (R2 {:.5})", result.best_index, result.best_score);
        to_json(&result)
    };
    ensure_dir(out)?;
    write_text(&out.join("tune.json"), &json)
}

