//! CSV dataset and submission directories.
//!
//! ```text
//! <dir>/FORMAT            "wallreg-csv 1"
//! <dir>/conditions.csv    id,mach,aoa_deg,p_i,split
//! <dir>/geometry.csv      point_id,x,y,z,nx,ny,nz
//! <dir>/fields/<id>.csv   point_id,cp,cfx,cfy,cfz
//! ```
//!
//! Submissions contain `FORMAT` and `fields/` only. Numbers are written in
//! scientific notation with 17 significant digits, which round-trips every
//! finite `f64`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{Dataset, Split, SurfaceGeometry, WallField};
use crate::error::{Error, Result};
use crate::flow::FlowCondition;

pub const FORMAT_TAG: &str = "wallreg-csv";
pub const FORMAT_VERSION: u32 = 1;

const CONDITIONS_HEADER: [&str; 5] = ["id", "mach", "aoa_deg", "p_i", "split"];
const GEOMETRY_HEADER: [&str; 7] = ["point_id", "x", "y", "z", "nx", "ny", "nz"];
const FIELD_HEADER: [&str; 5] = ["point_id", "cp", "cfx", "cfy", "cfz"];

fn num(out: &mut String, v: f64) {
    write!(out, ",{v:.16e}").expect("writing to a String cannot fail");
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        fs::create_dir(path).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn write_format(dir: &Path) -> Result<()> {
    write_file(
        &dir.join("FORMAT"),
        &format!("{FORMAT_TAG} {FORMAT_VERSION}\n"),
    )
}

fn check_format(dir: &Path) -> Result<()> {
    let path = dir.join("FORMAT");
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        // Directories without a version file are read as version 1.
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let expected = format!("{FORMAT_TAG} {FORMAT_VERSION}");
    if text.trim() != expected {
        return Err(Error::Schema {
            path,
            reason: format!("unsupported format `{}`, expected `{expected}`", text.trim()),
        });
    }
    Ok(())
}

fn field_csv(field: &WallField) -> String {
    let mut out = FIELD_HEADER.join(",");
    out.push('\n');
    for p in 0..field.n_p() {
        write!(out, "{p}").unwrap();
        for v in 0..4 {
            num(&mut out, field.values[(p, v)]);
        }
        out.push('\n');
    }
    out
}

/// Writes the dataset directory, creating `dir` (but not its parents).
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    ensure_dir(dir)?;
    write_format(dir)?;

    let mut out = CONDITIONS_HEADER.join(",");
    out.push('\n');
    for c in &ds.conditions {
        out.push_str(&c.id);
        num(&mut out, c.mach);
        num(&mut out, c.aoa_deg);
        num(&mut out, c.p_i);
        writeln!(out, ",{}", ds.split[&c.id].as_str()).unwrap();
    }
    write_file(&dir.join("conditions.csv"), &out)?;

    let mut out = GEOMETRY_HEADER.join(",");
    out.push('\n');
    for (p, (c, n)) in ds.geometry.coords.iter().zip(&ds.geometry.normals).enumerate() {
        write!(out, "{p}").unwrap();
        for v in c.iter().chain(n) {
            num(&mut out, *v);
        }
        out.push('\n');
    }
    write_file(&dir.join("geometry.csv"), &out)?;

    let fields_dir = dir.join("fields");
    ensure_dir(&fields_dir)?;
    for c in &ds.conditions {
        if let Some(field) = ds.fields.get(&c.id) {
            write_file(&fields_dir.join(format!("{}.csv", c.id)), &field_csv(field))?;
        }
    }
    Ok(())
}

/// Writes a submission directory holding one field file per condition.
///
/// Stale `.csv` files in `dir/fields` are removed first.
pub fn save_submission(fields: &BTreeMap<String, WallField>, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_format(dir)?;
    let fields_dir = dir.join("fields");
    ensure_dir(&fields_dir)?;
    for entry in fs::read_dir(&fields_dir).map_err(|e| Error::io(&fields_dir, e))? {
        let path = entry.map_err(|e| Error::io(&fields_dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }
    for (id, field) in fields {
        write_file(&fields_dir.join(format!("{id}.csv")), &field_csv(field))?;
    }
    Ok(())
}

struct Table {
    path: PathBuf,
    rows: Vec<csv::StringRecord>,
}

fn read_table(path: &Path, header: &[&str]) -> Result<Table> {
    let schema = |reason: String| Error::Schema {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| schema(e.to_string()))?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(schema(format!(
            "header `{}`, expected `{}`",
            found.iter().collect::<Vec<_>>().join(","),
            header.join(",")
        )));
    }
    let rows = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| schema(e.to_string()))?;
    Ok(Table {
        path: path.to_path_buf(),
        rows,
    })
}

impl Table {
    fn err(&self, line: usize, reason: impl std::fmt::Display) -> Error {
        Error::Schema {
            path: self.path.clone(),
            // +2: one-based, after the header line
            reason: format!("row {}: {reason}", line + 2),
        }
    }

    fn number(&self, line: usize, col: usize) -> Result<f64> {
        let raw = &self.rows[line][col];
        let v: f64 = raw
            .trim()
            .parse()
            .map_err(|_| self.err(line, format!("`{raw}` is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(line, format!("non-finite value `{raw}`")));
        }
        Ok(v)
    }

    fn point_ids(&self) -> Result<()> {
        for (line, row) in self.rows.iter().enumerate() {
            if row[0].trim().parse::<usize>().ok() != Some(line) {
                return Err(self.err(line, format!("point_id `{}` out of order", &row[0])));
            }
        }
        Ok(())
    }
}

fn read_field(path: &Path, id: &str, n_p: usize) -> Result<WallField> {
    let table = read_table(path, &FIELD_HEADER)?;
    if table.rows.len() != n_p {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            reason: format!("{} rows, expected {n_p}", table.rows.len()),
        });
    }
    table.point_ids()?;
    let mut values = DMatrix::zeros(n_p, 4);
    for p in 0..n_p {
        for v in 0..4 {
            values[(p, v)] = table.number(p, v + 1)?;
        }
    }
    WallField::new(id, values)
}

/// Reads a dataset directory. Train fields are required; test fields are
/// loaded when present.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    check_format(dir)?;
    let table = read_table(&dir.join("conditions.csv"), &CONDITIONS_HEADER)?;
    let mut conditions = Vec::with_capacity(table.rows.len());
    let mut split = BTreeMap::new();
    for line in 0..table.rows.len() {
        let id = table.rows[line][0].to_string();
        let label: Split = table.rows[line][4].parse().map_err(|e| table.err(line, e))?;
        conditions.push(FlowCondition {
            id: id.clone(),
            mach: table.number(line, 1)?,
            aoa_deg: table.number(line, 2)?,
            p_i: table.number(line, 3)?,
        });
        if split.insert(id.clone(), label).is_some() {
            return Err(table.err(line, format!("duplicate id `{id}`")));
        }
    }

    let table = read_table(&dir.join("geometry.csv"), &GEOMETRY_HEADER)?;
    table.point_ids()?;
    let mut coords = Vec::with_capacity(table.rows.len());
    let mut normals = Vec::with_capacity(table.rows.len());
    for line in 0..table.rows.len() {
        let v = (1..7)
            .map(|c| table.number(line, c))
            .collect::<Result<Vec<_>>>()?;
        coords.push([v[0], v[1], v[2]]);
        normals.push([v[3], v[4], v[5]]);
    }
    let geometry = SurfaceGeometry::new(coords, normals)?;

    let mut fields = BTreeMap::new();
    for c in &conditions {
        let path = dir.join("fields").join(format!("{}.csv", c.id));
        if path.is_file() {
            fields.insert(c.id.clone(), read_field(&path, &c.id, geometry.n_p())?);
        } else if split[&c.id] == Split::Train {
            return Err(Error::MissingField(c.id.clone()));
        }
    }
    let ds = Dataset {
        geometry,
        conditions,
        fields,
        split,
    };
    ds.validate()?;
    Ok(ds)
}

/// Reads and validates a submission: exactly one field per test id, each with
/// `n_p` finite rows.
pub fn load_submission(
    dir: &Path,
    test_ids: &[String],
    n_p: usize,
) -> Result<BTreeMap<String, WallField>> {
    check_format(dir).map_err(|e| Error::Submission(e.to_string()))?;
    let fields_dir = dir.join("fields");
    let entries = fs::read_dir(&fields_dir)
        .map_err(|e| Error::Submission(format!("cannot read {}: {e}", fields_dir.display())))?;
    let mut present = BTreeSet::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Error::Submission(e.to_string()))?
            .path();
        if path.extension().is_some_and(|e| e == "csv") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                present.insert(stem.to_string());
            }
        }
    }
    let expected: BTreeSet<String> = test_ids.iter().cloned().collect();
    let missing: Vec<&String> = expected.difference(&present).collect();
    if !missing.is_empty() {
        return Err(Error::Submission(format!(
            "missing test conditions: {}",
            missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    let extra: Vec<&String> = present.difference(&expected).collect();
    if !extra.is_empty() {
        return Err(Error::Submission(format!(
            "conditions outside the test set: {}",
            extra.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    test_ids
        .iter()
        .map(|id| {
            let path = fields_dir.join(format!("{id}.csv"));
            read_field(&path, id, n_p)
                .map(|f| (id.clone(), f))
                .map_err(|e| Error::Submission(e.to_string()))
        })
        .collect()
}
