//! VTK snapshots, CSV time series and convergence tables.
//!
//! Every file is written to a temporary sibling first and renamed into
//! place, so an interrupted run never leaves a truncated file behind.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::discretization::Discretization;
use crate::eos::State;
use crate::error::Error;
use crate::scalar::Real;
use crate::splitting::StepRecord;

/// Contrast of the schlieren field `exp(−c |∇ρ| / max |∇ρ|)`.
pub const SCHLIEREN_CONTRAST: f64 = 10.0;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.flush().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Schlieren indicator at each dG node from the cell-local density gradient.
pub fn schlieren<T: Real>(disc: &Discretization<T>, rho: &[T]) -> Vec<f64> {
    let mut norms = vec![0.0; disc.n_dg()];
    for (k, chunk) in norms.chunks_mut(4).enumerate() {
        let g = disc.cell_grads(k);
        for (j, out) in chunk.iter_mut().enumerate() {
            let mut s = [0.0f64; 2];
            for b in 0..4 {
                let r = rho[4 * k + b].as_f64();
                s[0] += r * g[j][b][0].as_f64();
                s[1] += r * g[j][b][1].as_f64();
            }
            *out = s[0].hypot(s[1]);
        }
    }
    let max = norms.iter().cloned().fold(0.0, f64::max);
    norms
        .iter()
        .map(|&n| if max > 0.0 { (-SCHLIEREN_CONTRAST * n / max).exp() } else { 1.0 })
        .collect()
}

/// Legacy ASCII VTK with one point per dG node, so discontinuities between
/// cells survive. The potential is sampled at the vertex under each node.
pub fn vtk_string<T: Real>(disc: &Discretization<T>, u: &[State<T>], phi: &[T], t: f64) -> Result<String, Error> {
    let n_cells = disc.mesh.cells.len();
    if n_cells == 0 {
        return Err(Error::Invalid("cannot write a VTK file for an empty mesh".into()));
    }
    if u.len() != disc.n_dg() || phi.len() != disc.n_cg() {
        return Err(Error::Invalid(format!(
            "field sizes {}/{} do not match the discretization {}/{}",
            u.len(),
            phi.len(),
            disc.n_dg(),
            disc.n_cg()
        )));
    }
    let n = disc.n_dg();
    let f = |x: T| x.as_f64();
    let mut s = String::with_capacity(n * 160);
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nmagep t={t:.16e}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for x in &disc.dg.coords {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", f(x[0]), f(x[1]));
    }
    let _ = writeln!(s, "CELLS {} {}", n_cells, 5 * n_cells);
    for k in 0..n_cells {
        let b = 4 * k;
        let _ = writeln!(s, "4 {} {} {} {}", b, b + 1, b + 2, b + 3);
    }
    let _ = writeln!(s, "CELL_TYPES {n_cells}");
    for _ in 0..n_cells {
        s.push_str("9\n");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    let scalar = |s: &mut String, name: &str, vals: &mut dyn Iterator<Item = f64>| {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in vals {
            let _ = writeln!(s, "{v:.16e}");
        }
    };
    scalar(&mut s, "density", &mut u.iter().map(|x| f(x.rho)));
    scalar(&mut s, "energy", &mut u.iter().map(|x| f(x.energy)));
    scalar(&mut s, "potential", &mut disc.dg.vertex.iter().map(|&v| f(phi[v])));
    let rho: Vec<T> = u.iter().map(|x| x.rho).collect();
    scalar(&mut s, "schlieren", &mut schlieren(disc, &rho).into_iter());
    let _ = writeln!(s, "VECTORS momentum double");
    for x in u {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", f(x.m[0]), f(x.m[1]));
    }
    Ok(s)
}

pub fn write_vtk<T: Real>(path: &Path, disc: &Discretization<T>, u: &[State<T>], phi: &[T], t: f64) -> Result<(), Error> {
    write_atomic(path, vtk_string(disc, u, phi, t)?.as_bytes())
}

const SERIES_HEADER: [&str; 14] = [
    "step",
    "t",
    "tau",
    "total_energy",
    "kinetic_energy",
    "field_energy",
    "gauss_residual",
    "iterations",
    "min_rho",
    "min_e",
    "mass",
    "boundary_mass_flux",
    "hyperbolic_substeps",
    "relaxation_factor",
];

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Time series with one row per step. `extra` appends named columns, one
/// value per record (for instance a mode amplitude).
pub fn series_csv(records: &[StepRecord], extra: &[(&str, &[f64])]) -> Result<String, Error> {
    for (name, vals) in extra {
        if vals.len() != records.len() {
            return Err(Error::Invalid(format!(
                "column {name} has {} values for {} records",
                vals.len(),
                records.len()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    let header: Vec<&str> = SERIES_HEADER.iter().copied().chain(extra.iter().map(|(n, _)| *n)).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (i, r) in records.iter().enumerate() {
        let mut row = vec![
            r.step.to_string(),
            sci(r.t),
            sci(r.tau),
            sci(r.total_energy),
            sci(r.kinetic_energy),
            sci(r.field_energy),
            sci(r.gauss_residual),
            r.iterations.to_string(),
            sci(r.min_rho),
            sci(r.min_e),
            sci(r.mass),
            sci(r.boundary_mass_flux),
            r.hyperbolic_substeps.to_string(),
            sci(r.relaxation_factor),
        ];
        row.extend(extra.iter().map(|(_, v)| sci(v[i])));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_series(path: &Path, records: &[StepRecord], extra: &[(&str, &[f64])]) -> Result<(), Error> {
    write_atomic(path, series_csv(records, extra)?.as_bytes())
}

/// One refinement level of a convergence study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub dofs: usize,
    pub error: f64,
}

/// Observed order between consecutive rows, `log₂(e_coarse / e_fine)`
/// scaled by the change in mesh width.
pub fn convergence_rates(rows: &[ConvergenceRow]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for w in rows.windows(2) {
        let h_ratio = (w[1].cells as f64 / w[0].cells as f64).sqrt();
        out.push(Some((w[0].error / w[1].error).ln() / h_ratio.ln()));
    }
    out.truncate(rows.len());
    out
}

/// Plain-text table for terminals.
pub fn format_convergence_table(rows: &[ConvergenceRow]) -> String {
    let mut s = format!("{:>10} {:>10} {:>14} {:>7}\n", "cells", "dofs", "L1 error", "rate");
    for (r, rate) in rows.iter().zip(convergence_rates(rows)) {
        let rate = rate.map_or_else(|| "-".to_string(), |r| format!("{r:.2}"));
        let _ = writeln!(s, "{:>10} {:>10} {:>14.6e} {:>7}", r.cells, r.dofs, r.error, rate);
    }
    s
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record(["cells", "dofs", "error", "rate"]).map_err(csv_err)?;
    for (r, rate) in rows.iter().zip(convergence_rates(rows)) {
        w.write_record([
            r.cells.to_string(),
            r.dofs.to_string(),
            sci(r.error),
            rate.map_or_else(String::new, sci),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
