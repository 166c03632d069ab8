//! Text formats: whitespace-separated edge lists (`u v` or `u v w`, `#`
//! comments, 0-based ids remapped to dense ids on ingest), label files
//! (one 1-based integer per line, vertex order), and JSON metadata.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Parsed edge list. When the input ids were not dense `0..n`,
/// `new_to_old` records the remapping.
#[derive(Debug, Clone)]
pub struct EdgeListData {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub weights: Option<Vec<f64>>,
    pub new_to_old: Option<Vec<u64>>,
}

impl EdgeListData {
    pub fn into_graph(self) -> Result<Graph> {
        match self.weights {
            Some(ws) => {
                let withw: Vec<(usize, usize, f64)> = self
                    .edges
                    .iter()
                    .zip(&ws)
                    .map(|(&(u, v), &w)| (u, v, w))
                    .collect();
                Graph::build_weighted(self.n, &withw)
            }
            None => Graph::build(self.n, &self.edges),
        }
    }
}

/// Read an edge list. Lines starting with `#` and blank lines are
/// ignored; every data line must have two (unweighted) or uniformly
/// three (weighted) fields. A `# n <count>` comment pins the vertex
/// count (so isolated vertices survive a round-trip); without it, ids
/// are remapped to a dense range when they are sparse.
pub fn read_edge_list(path: &Path) -> Result<EdgeListData> {
    let file = File::open(path)?;
    let mut raw: Vec<(u64, u64, Option<f64>)> = Vec::new();
    let mut weighted: Option<bool> = None;
    let mut declared_n: Option<usize> = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            let fields: Vec<&str> = trimmed.trim_start_matches('#').split_whitespace().collect();
            if fields.len() == 2 && fields[0] == "n" {
                if let Ok(n) = fields[1].parse::<usize>() {
                    declared_n = Some(n);
                }
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let bad = |msg: &str| {
            Error::SchemaMismatch(format!("{}:{}: {msg}", path.display(), lineno + 1))
        };
        if fields.len() != 2 && fields.len() != 3 {
            return Err(bad("expected 'u v' or 'u v w'"));
        }
        let has_weight = fields.len() == 3;
        match weighted {
            None => weighted = Some(has_weight),
            Some(w) if w != has_weight => {
                return Err(bad("mixed weighted and unweighted lines"));
            }
            _ => {}
        }
        let u: u64 = fields[0].parse().map_err(|_| bad("bad vertex id"))?;
        let v: u64 = fields[1].parse().map_err(|_| bad("bad vertex id"))?;
        let w = if has_weight {
            Some(fields[2].parse::<f64>().map_err(|_| bad("bad weight"))?)
        } else {
            None
        };
        raw.push((u, v, w));
    }

    let mut ids: Vec<u64> = raw.iter().flat_map(|&(u, v, _)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let (n, map, new_to_old) = if let Some(n) = declared_n {
        if let Some(&max) = ids.last() {
            if max as usize >= n {
                return Err(Error::SchemaMismatch(format!(
                    "{}: vertex id {max} outside declared n = {n}",
                    path.display()
                )));
            }
        }
        (n, None, None)
    } else if ids.last().map_or(true, |&max| max as usize + 1 == ids.len()) {
        (ids.len(), None, None)
    } else {
        let map: std::collections::HashMap<u64, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        (ids.len(), Some(map), Some(ids.clone()))
    };
    let lookup = |id: u64| -> usize {
        match &map {
            Some(m) => m[&id],
            None => id as usize,
        }
    };
    let edges: Vec<(usize, usize)> =
        raw.iter().map(|&(u, v, _)| (lookup(u), lookup(v))).collect();
    let weighted = weighted.unwrap_or(false);
    let weights = if weighted {
        Some(raw.iter().map(|&(_, _, w)| w.unwrap()).collect())
    } else {
        None
    };
    Ok(EdgeListData { n, edges, weights, new_to_old })
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    read_edge_list(path)?.into_graph()
}

pub fn write_edge_list(path: &Path, g: &Graph) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# n {}", g.n())?;
    match g.edge_weights() {
        Some(ws) => {
            for (&(u, v), &w) in g.edges().iter().zip(ws) {
                writeln!(out, "{u} {v} {w}")?;
            }
        }
        None => {
            for &(u, v) in g.edges() {
                writeln!(out, "{u} {v}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Labels: one 1-based community id per line, vertex order.
pub fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let file = File::open(path)?;
    let mut labels = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let l: u32 = trimmed.parse().map_err(|_| {
            Error::SchemaMismatch(format!("{}:{}: bad label", path.display(), lineno + 1))
        })?;
        if l == 0 {
            return Err(Error::SchemaMismatch(format!(
                "{}:{}: labels are 1-based",
                path.display(),
                lineno + 1
            )));
        }
        labels.push(l);
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for l in labels {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edges");
        let g = Graph::build(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        write_edge_list(&path, &g).unwrap();
        let back = read_graph(&path).unwrap();
        assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn weighted_roundtrip_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edges");
        std::fs::write(&path, "# comment\n0 1 2.5\n\n1 2 0.125\n").unwrap();
        let g = read_graph(&path).unwrap();
        assert!(g.is_weighted());
        assert_eq!(g.edge_weights().unwrap(), &[2.5, 0.125]);
        write_edge_list(&path, &g).unwrap();
        let back = read_graph(&path).unwrap();
        assert_eq!(back.edge_weights().unwrap(), &[2.5, 0.125]);
    }

    #[test]
    fn declared_n_preserves_isolated_vertices() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edges");
        let g = Graph::build(6, &[(0, 1), (2, 3)]).unwrap();
        write_edge_list(&path, &g).unwrap();
        let back = read_graph(&path).unwrap();
        assert_eq!(back.n(), 6);
        assert_eq!(back.edges(), g.edges());
        std::fs::write(&path, "# n 2\n0 5\n").unwrap();
        assert!(matches!(read_edge_list(&path), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn sparse_ids_are_remapped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edges");
        std::fs::write(&path, "10 20\n20 30\n").unwrap();
        let data = read_edge_list(&path).unwrap();
        assert_eq!(data.n, 3);
        assert_eq!(data.new_to_old, Some(vec![10, 20, 30]));
        assert_eq!(data.edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn mixed_weight_lines_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edges");
        std::fs::write(&path, "0 1\n1 2 0.5\n").unwrap();
        assert!(matches!(read_edge_list(&path), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn labels_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.labels");
        write_labels(&path, &[1, 2, 1]).unwrap();
        assert_eq!(read_labels(&path).unwrap(), vec![1, 2, 1]);
        std::fs::write(&path, "0\n").unwrap();
        assert!(read_labels(&path).is_err());
    }
}
