//! CSV persistence. Floats are written with 17 significant digits so that
//! reading a file back reproduces every value exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::grid::{SpatialMesh, Trajectory};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected {expected} {what}, found {found}")]
    ShapeMismatch {
        path: String,
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}, line {line}: {message}")]
    Malformed { path: String, line: usize, message: String },
}

pub type IoResult<T> = std::result::Result<T, IoError>;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> IoResult<()> {
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Builds a CSV from a header and rows of preformatted cells.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `step,time,node_index,<name>...` with one row per mesh node and snapshot.
pub fn write_trajectory_csv(path: &Path, mesh: &SpatialMesh, dt: f64, fields: &[(&str, &Trajectory)]) -> IoResult<()> {
    let mut out = String::from("step,time,node_index");
    for (name, _) in fields {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let steps = fields.first().map_or(0, |(_, t)| t.len());
    for n in 0..steps {
        let time = fmt_f64(n as f64 * dt);
        for node in 0..mesh.node_count() {
            let _ = write!(out, "{n},{time},{node}");
            for (_, t) in fields {
                out.push(',');
                out.push_str(&fmt_f64(t.frame(n)[node]));
            }
            out.push('\n');
        }
    }
    write_text(path, &out)
}

/// `step,time,boundary_node,u` where `boundary_node` is the mesh node id.
pub fn write_control_csv(path: &Path, mesh: &SpatialMesh, dt: f64, u: &Trajectory) -> IoResult<()> {
    let rows = (0..u.len()).flat_map(|n| {
        mesh.boundary_nodes().iter().enumerate().map(move |(k, node)| {
            vec![
                n.to_string(),
                fmt_f64(n as f64 * dt),
                node.to_string(),
                fmt_f64(u.frame(n)[k]),
            ]
        })
    });
    write_text(path, &csv_text(&["step", "time", "boundary_node", "u"], rows))
}

/// Reads a control written by [`write_control_csv`] for a run with `steps`
/// time steps.
pub fn read_control_csv(path: &Path, mesh: &SpatialMesh, steps: usize) -> IoResult<Trajectory> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: p.clone(),
        source,
    })?;
    let nb = mesh.boundary_count();
    let expected = (steps + 1) * nb;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let data: Vec<(usize, &str)> = match lines.next() {
        Some((_, h)) if h.trim() == "step,time,boundary_node,u" => lines.collect(),
        Some((i, _)) => {
            return Err(IoError::Malformed {
                path: p,
                line: i + 1,
                message: "expected header 'step,time,boundary_node,u'".into(),
            })
        }
        None => vec![],
    };
    if data.len() != expected {
        return Err(IoError::ShapeMismatch {
            path: p,
            what: format!("rows ({} steps x {nb} boundary nodes)", steps + 1),
            expected,
            found: data.len(),
        });
    }
    let mut frames = vec![vec![0.0; nb]; steps + 1];
    for (idx, (i, line)) in data.iter().enumerate() {
        let bad = |message: String| IoError::Malformed {
            path: p.clone(),
            line: i + 1,
            message,
        };
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 4 {
            return Err(IoError::ShapeMismatch {
                path: p.clone(),
                what: format!("columns on line {}", i + 1),
                expected: 4,
                found: cells.len(),
            });
        }
        let (n, k) = (idx / nb, idx % nb);
        let step: usize = cells[0].parse().map_err(|_| bad(format!("bad step '{}'", cells[0])))?;
        let node: usize = cells[2].parse().map_err(|_| bad(format!("bad node '{}'", cells[2])))?;
        if step != n || node != mesh.boundary_nodes()[k] {
            return Err(bad(format!(
                "expected step {n}, boundary node {}, found step {step}, node {node}",
                mesh.boundary_nodes()[k]
            )));
        }
        let v: f64 = cells[3].parse().map_err(|_| bad(format!("bad value '{}'", cells[3])))?;
        if !v.is_finite() {
            return Err(bad(format!("non-finite value '{}'", cells[3])));
        }
        frames[n][k] = v;
    }
    Ok(Trajectory::new(frames))
}
