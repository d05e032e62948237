//! CSV and VTK export.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::fem::point_geometry;
use crate::homogenization::{cell_response, HomogenizedRecord};
use crate::solver::{RveProblem, State};

pub const CSV_SCHEMA: &str = "mae-rve-csv/1";

const AXES: [&str; 3] = ["x", "y", "z"];

/// Column names in output order.
pub fn csv_columns() -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    let tensor = |name: &str| -> Vec<String> {
        AXES.iter().flat_map(|i| AXES.iter().map(move |j| format!("{name}_{i}{j}"))).collect()
    };
    let vector = |name: &str| -> Vec<String> { AXES.iter().map(|i| format!("{name}_{i}")).collect() };
    cols.extend(tensor("F_avg"));
    cols.extend(vector("B_avg"));
    cols.extend(tensor("P_avg"));
    cols.extend(vector("H_avg"));
    cols.extend(tensor("sigma_avg"));
    cols.extend(["J_avg".to_string(), "psi_avg".to_string(), "newton_iters".to_string()]);
    cols
}

/// Hex SHA-256 of a configuration text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the records with a schema tag and provenance comments. Numbers
/// use a fixed 17-significant-digit format so reruns are byte-identical.
pub fn write_csv<W: Write>(w: &mut W, records: &[HomogenizedRecord], config_text: &str) -> std::io::Result<()> {
    writeln!(w, "# schema: {CSV_SCHEMA}")?;
    writeln!(w, "# generator: mae-rve {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# config_sha256: {}", config_hash(config_text))?;
    writeln!(w, "{}", csv_columns().join(","))?;
    for r in records {
        let mut vals = vec![r.t];
        for i in 0..3 {
            for j in 0..3 {
                vals.push(r.f_avg[(i, j)]);
            }
        }
        vals.extend(r.b_avg.iter());
        for i in 0..3 {
            for j in 0..3 {
                vals.push(r.p_avg[(i, j)]);
            }
        }
        vals.extend(r.h_avg.iter());
        for i in 0..3 {
            for j in 0..3 {
                vals.push(r.sigma_avg[(i, j)]);
            }
        }
        vals.push(r.j_avg);
        vals.push(r.psi_avg);
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{},{}", line.join(","), r.newton_iters)?;
    }
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[HomogenizedRecord], config_text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_csv(&mut w, records, config_text)?;
    w.flush()?;
    Ok(())
}

/// Reads back a file written by `write_csv`: column names and rows.
pub fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().map(|h| h.split(',').map(str::to_string).collect()).unwrap_or_default();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

/// Cell averages of sigma_zz and |A| at the cell centre.
pub fn cell_fields(problem: &RveProblem, state: &State) -> Result<(Vec<f64>, Vec<f64>)> {
    let mesh = problem.mesh();
    let mut szz = Vec::with_capacity(mesh.num_cells());
    let mut anorm = Vec::with_capacity(mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let pts = cell_response(problem, c, state)?;
        let (mut v, mut s) = (0.0, 0.0);
        for p in &pts {
            v += p.weight;
            s += p.weight * p.cauchy()[(2, 2)];
        }
        szz.push(s / v);
        let g = point_geometry(mesh, c, [0.0; 3], 1.0)?;
        let local = problem.disc.local_values(c, &state.x);
        let mut a = [0.0; 3];
        for e in 0..12 {
            for k in 0..3 {
                a[k] += local[24 + e] * g.ned[e][k];
            }
        }
        anorm.push((a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt());
    }
    Ok((szz, anorm))
}

/// Writes one legacy-VTK snapshot with u, phase, sigma_zz and |A|.
pub fn write_vtk_state(path: &Path, problem: &RveProblem, state: &State) -> Result<()> {
    let u: Vec<[f64; 3]> = state.u(problem).chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    let (szz, anorm) = cell_fields(problem, state)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    problem.mesh().write_vtk(
        &mut w,
        &format!("RVE state at t = {:.6}", state.t),
        &[("u", &u)],
        &[("sigma_zz", &szz), ("A_norm", &anorm)],
    )?;
    w.flush()?;
    Ok(())
}

/// File name of the snapshot for step `k`.
pub fn vtk_step_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("step_{k:04}.vtk"))
}
