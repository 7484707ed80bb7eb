//! Writers for time series, field snapshots and convergence tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ErrorNorms, SeriesRow};
use crate::error::{Error, Result};
use crate::mesh::TensorMesh;

/// Fixed float formatting used by every text writer.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Streams series rows as CSV.
pub struct SeriesWriter<W: Write> {
    out: W,
}

impl SeriesWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> SeriesWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", SeriesRow::COLUMNS.join(","))?;
        Ok(Self { out })
    }

    pub fn write(&mut self, row: &SeriesRow) -> Result<()> {
        let line: Vec<String> = row.values().iter().map(|&v| format_float(v)).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads a series CSV written by [`SeriesWriter`].
pub fn read_series(text: &str) -> Result<Vec<SeriesRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty series file".into()))?;
    if header != SeriesRow::COLUMNS.join(",") {
        return Err(Error::Config(format!("unexpected series header `{header}`")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad series value: {e}")))?;
            if v.len() != SeriesRow::COLUMNS.len() {
                return Err(Error::Config(format!("series row has {} columns", v.len())));
            }
            Ok(SeriesRow {
                t: v[0],
                dt: v[1],
                mass: v[2],
                momentum: v[3],
                kinetic_energy: v[4],
                electric_energy: v[5],
                total_energy: v[6],
                l2norm: v[7],
                ee_log: v[8],
                max_eps_x: v[9],
                max_eps_v: v[10],
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisHeader {
    pub min: f64,
    pub max: f64,
    pub elements: usize,
    pub nodes: usize,
    pub periodic: bool,
}

/// Self-describing header of a binary snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub quantity: String,
    pub time: f64,
    pub step: usize,
    pub degree: usize,
    /// Nodes per axis, first axis slowest.
    pub dims: Vec<usize>,
    pub axes: Vec<AxisHeader>,
    pub dtype: String,
    pub data_file: String,
}

impl SnapshotHeader {
    pub fn new(mesh: &TensorMesh, quantity: &str, time: f64, step: usize, data_file: &str) -> Self {
        Self {
            quantity: quantity.to_string(),
            time,
            step,
            degree: mesh.degree(),
            dims: mesh.nodes_per_axis().to_vec(),
            axes: mesh
                .axes()
                .iter()
                .zip(mesh.nodes_per_axis())
                .map(|(a, &n)| AxisHeader {
                    min: a.min,
                    max: a.max,
                    elements: a.elements,
                    nodes: n,
                    periodic: a.periodic,
                })
                .collect(),
            dtype: "float64-le".to_string(),
            data_file: data_file.to_string(),
        }
    }
}

/// Paths written for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFiles {
    pub header: PathBuf,
    pub data: PathBuf,
    pub vtk: Option<PathBuf>,
}

/// Writes `<stem>.json`, `<stem>.bin` and optionally `<stem>.vtk` into `dir`.
pub fn write_snapshot(
    dir: &Path,
    stem: &str,
    mesh: &TensorMesh,
    field: &[f64],
    quantity: &str,
    time: f64,
    step: usize,
    vtk: bool,
) -> Result<SnapshotFiles> {
    if field.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_nodes(),
            got: field.len(),
        });
    }
    let data_name = format!("{stem}.bin");
    let header = SnapshotHeader::new(mesh, quantity, time, step, &data_name);
    let header_path = dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(&header).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&header_path, json + "\n")?;
    let data_path = dir.join(&data_name);
    let bytes: Vec<u8> = field.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(&data_path, bytes)?;
    let vtk_path = if vtk {
        let p = dir.join(format!("{stem}.vtk"));
        let mut out = BufWriter::new(File::create(&p)?);
        write_vtk(&mut out, mesh, field, quantity, time)?;
        out.flush()?;
        Some(p)
    } else {
        None
    };
    Ok(SnapshotFiles {
        header: header_path,
        data: data_path,
        vtk: vtk_path,
    })
}

/// Reads a snapshot back from its header path.
pub fn read_snapshot(header_path: &Path) -> Result<(SnapshotHeader, Vec<f64>)> {
    let text = std::fs::read_to_string(header_path)?;
    let header: SnapshotHeader = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let bytes = std::fs::read(dir.join(&header.data_file))?;
    let n: usize = header.dims.iter().product();
    if bytes.len() != 8 * n {
        return Err(Error::DimensionMismatch {
            expected: 8 * n,
            got: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, data))
}

/// Legacy VTK structured grid (ASCII) of a 1D or 2D nodal field. Periodic
/// axes are closed by repeating the first node layer.
pub fn write_vtk<W: Write>(out: &mut W, mesh: &TensorMesh, field: &[f64], name: &str, time: f64) -> Result<()> {
    if mesh.dim() > 2 {
        return Err(Error::InvalidAxis("VTK writer supports up to two axes".into()));
    }
    let n = mesh.nodes_per_axis();
    let closed: Vec<usize> = (0..mesh.dim())
        .map(|ax| n[ax] + usize::from(mesh.axis(ax).periodic))
        .collect();
    let (nx, ny) = (closed[0], closed.get(1).copied().unwrap_or(1));
    let coord = |ax: usize, i: usize| {
        if i == n[ax] {
            mesh.axis(ax).max
        } else {
            mesh.coordinate(ax, i)
        }
    };
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{name} t={}", format_float(time))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_GRID")?;
    writeln!(out, "DIMENSIONS {nx} {ny} 1")?;
    writeln!(out, "POINTS {} double", nx * ny)?;
    // VTK orders points with the first index fastest.
    for j in 0..ny {
        for i in 0..nx {
            let y = if mesh.dim() == 2 { coord(1, j) } else { 0.0 };
            writeln!(out, "{} {} 0", format_float(coord(0, i)), format_float(y))?;
        }
    }
    writeln!(out, "POINT_DATA {}", nx * ny)?;
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for j in 0..ny {
        for i in 0..nx {
            let ii = i % n[0];
            let l = if mesh.dim() == 2 {
                mesh.node_index(&[ii, j % n[1]])
            } else {
                ii
            };
            writeln!(out, "{}", format_float(field[l]))?;
        }
    }
    Ok(())
}

/// One resolution of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub method: String,
    pub degree: usize,
    /// Nodes per axis in the inclusive convention.
    pub nodes: usize,
    pub elements: usize,
    pub errors: ErrorNorms,
    /// Rates against the previous row of the same method and degree.
    pub rates: Option<ErrorNorms>,
}

/// Fills in rates between consecutive rows of equal method and degree.
pub fn attach_rates(rows: &mut [ConvergenceRow]) {
    let rate = |a: f64, b: f64| if a > 0.0 && b > 0.0 { (a / b).log2() } else { f64::NAN };
    for i in 0..rows.len() {
        rows[i].rates = None;
        if i > 0 && rows[i - 1].method == rows[i].method && rows[i - 1].degree == rows[i].degree {
            let (p, c) = (rows[i - 1].errors, rows[i].errors);
            rows[i].rates = Some(ErrorNorms {
                l1: rate(p.l1, c.l1),
                l2: rate(p.l2, c.l2),
                linf: rate(p.linf, c.linf),
            });
        }
    }
}

pub const CONVERGENCE_COLUMNS: [&str; 10] = [
    "method", "degree", "nodes", "elements", "l1", "l1_rate", "l2", "l2_rate", "linf", "linf_rate",
];

/// CSV rendering; missing rates are written as `-`.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = CONVERGENCE_COLUMNS.join(",") + "\n";
    for r in rows {
        let rate = |f: fn(&ErrorNorms) -> f64| r.rates.as_ref().map_or("-".to_string(), |x| format!("{:.4}", f(x)));
        s += &format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.degree,
            r.nodes,
            r.elements,
            format_float(r.errors.l1),
            rate(|e| e.l1),
            format_float(r.errors.l2),
            rate(|e| e.l2),
            format_float(r.errors.linf),
            rate(|e| e.linf),
        );
    }
    s
}

/// Human-readable table in the layout of the classic error/rate tables.
pub fn convergence_table(rows: &[ConvergenceRow]) -> String {
    let mut s = format!(
        "{:<6} {:>2} {:>11} {:>10} {:>6} {:>10} {:>6} {:>10} {:>6}\n",
        "method", "k", "nodes", "L1", "rate", "L2", "rate", "Linf", "rate"
    );
    for r in rows {
        let rate = |f: fn(&ErrorNorms) -> f64| r.rates.as_ref().map_or("-".to_string(), |x| format!("{:.2}", f(x)));
        s += &format!(
            "{:<6} {:>2} {:>11} {:>10.2e} {:>6} {:>10.2e} {:>6} {:>10.2e} {:>6}\n",
            r.method,
            r.degree,
            format!("{0}x{0}", r.nodes),
            r.errors.l1,
            rate(|e| e.l1),
            r.errors.l2,
            rate(|e| e.l2),
            r.errors.linf,
            rate(|e| e.linf),
        );
    }
    s
}
