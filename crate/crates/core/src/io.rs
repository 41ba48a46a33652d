//! Reading and writing graphs, assignments and block parameter tables.
//!
//! Graphs come in two CSV flavors: dense (`n` rows of `n` numbers, no
//! header) and edge lists with a `source,target,weight` header and string
//! vertex names. Edge lists are treated as directed and symmetrized by
//! averaging the two directions; pairs that never appear have weight 0 and
//! repeated rows for the same ordered pair are summed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{symmetrize_directed, AdjacencyMatrix, CommunityAssignment};

/// A directed weighted edge list keyed by vertex name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeList {
    pub vertices: BTreeSet<String>,
    /// Summed weight per ordered `(source, target)` pair.
    pub weights: BTreeMap<(String, String), f64>,
}

impl EdgeList {
    /// Dense directed weight matrix over `order`, ignoring vertices outside it.
    fn dense(&self, order: &[String]) -> DMatrix<f64> {
        let index: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut w = DMatrix::zeros(order.len(), order.len());
        for ((s, t), &v) in &self.weights {
            if let (Some(&i), Some(&j)) = (index.get(s.as_str()), index.get(t.as_str())) {
                w[(i, j)] += v;
            }
        }
        w
    }
}

fn parse_error(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_number(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_error(line, format!("not a number: {:?}", field.trim())))?;
    if !v.is_finite() {
        return Err(parse_error(line, format!("non-finite value {v}")));
    }
    Ok(v)
}

fn records<R: Read>(reader: R, has_header: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader)
}

/// One-based line number of a record, for error messages.
fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

pub fn read_edge_list<R: Read>(reader: R) -> Result<EdgeList> {
    let mut rdr = records(reader, true);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    if header != ["source", "target", "weight"] {
        return Err(parse_error(1, format!("expected header source,target,weight, found {}", header.join(","))));
    }
    let mut list = EdgeList::default();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() != 3 {
            return Err(parse_error(line, format!("expected 3 fields, found {}", record.len())));
        }
        let (s, t) = (record[0].to_string(), record[1].to_string());
        if s.is_empty() || t.is_empty() {
            return Err(parse_error(line, "empty vertex name"));
        }
        let w = parse_number(&record[2], line)?;
        list.vertices.insert(s.clone());
        list.vertices.insert(t.clone());
        if s == t {
            warn!("line {line}: self-loop on {s:?} ignored");
            continue;
        }
        *list.weights.entry((s, t)).or_insert(0.0) += w;
    }
    Ok(list)
}

pub fn read_edge_list_file(path: &Path) -> Result<EdgeList> {
    read_edge_list(File::open(path)?)
}

/// Symmetrized graph on all vertices of the list, in lexicographic order.
pub fn edge_list_to_graph(list: &EdgeList) -> Result<AdjacencyMatrix> {
    let order: Vec<String> = list.vertices.iter().cloned().collect();
    Ok(symmetrize_directed(&list.dense(&order))?.with_labels(order)?)
}

/// Dense CSV: `n` rows of `n` comma-separated numbers, no header.
pub fn read_dense<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in records(reader, false).records() {
        let record = record?;
        let line = line_of(&record);
        let row = record
            .iter()
            .map(|f| parse_number(f, line))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(line, format!("expected {} fields, found {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(parse_error(1, "empty matrix"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn read_dense_graph<R: Read>(reader: R) -> Result<AdjacencyMatrix> {
    AdjacencyMatrix::new(read_dense(reader)?)
}

pub fn write_dense<W: Write>(writer: W, m: &DMatrix<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..m.nrows() {
        wtr.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Upper-triangle edge list of a symmetric graph; zero weights are omitted.
/// Vertex names are the graph labels, or one-based indices without them.
pub fn write_edge_list<W: Write>(writer: W, x: &AdjacencyMatrix) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["source", "target", "weight"])?;
    let name = |i: usize| match x.labels() {
        Some(l) => l[i].clone(),
        None => (i + 1).to_string(),
    };
    for i in 0..x.n() {
        for j in (i + 1)..x.n() {
            let w = x.get(i, j);
            if w != 0.0 {
                wtr.write_record([name(i), name(j), w.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dense,
    EdgeList,
}

/// Edge list when the first line is a `source,target,weight` header,
/// dense otherwise.
pub fn detect_format(path: &Path) -> Result<GraphFormat> {
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    let normalized: String = first.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    Ok(if normalized.starts_with("source,target") {
        GraphFormat::EdgeList
    } else {
        GraphFormat::Dense
    })
}

pub fn read_graph(path: &Path) -> Result<AdjacencyMatrix> {
    match detect_format(path)? {
        GraphFormat::Dense => read_dense_graph(File::open(path)?),
        GraphFormat::EdgeList => edge_list_to_graph(&read_edge_list_file(path)?),
    }
}

/// Loads two graphs for comparison. Edge lists are matched by vertex name
/// (as in [`ingest_connectome`]); dense files must already share an order.
pub fn load_pair(a: &Path, b: &Path) -> Result<(AdjacencyMatrix, AdjacencyMatrix)> {
    match (detect_format(a)?, detect_format(b)?) {
        (GraphFormat::EdgeList, GraphFormat::EdgeList) => {
            ingest_connectome(&read_edge_list_file(a)?, &read_edge_list_file(b)?, false)
        }
        _ => {
            let (x, y) = (read_graph(a)?, read_graph(b)?);
            if x.n() != y.n() {
                return Err(Error::DimensionMismatch {
                    expected: x.n(),
                    found: y.n(),
                });
            }
            Ok((x, y))
        }
    }
}

/// Restricts two edge lists to their shared vertices, orders them
/// lexicographically and symmetrizes both. With `binarize`, every positive
/// weight becomes one.
pub fn ingest_connectome(a: &EdgeList, b: &EdgeList, binarize: bool) -> Result<(AdjacencyMatrix, AdjacencyMatrix)> {
    let shared: Vec<String> = a.vertices.intersection(&b.vertices).cloned().collect();
    if shared.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let dropped = a.vertices.len() + b.vertices.len() - 2 * shared.len();
    if dropped > 0 {
        log::info!("{} shared vertices, {dropped} unmatched dropped", shared.len());
    }
    let build = |list: &EdgeList| -> Result<AdjacencyMatrix> {
        let g = symmetrize_directed(&list.dense(&shared))?;
        let g = if binarize { g.binarized() } else { g };
        g.with_labels(shared.clone())
    };
    Ok((build(a)?, build(b)?))
}

#[derive(Debug, Serialize)]
struct AssignmentRow<'a> {
    vertex: &'a str,
    label: usize,
}

/// `vertex,label` CSV with one-based labels.
pub fn write_assignment<W: Write>(writer: W, z: &CommunityAssignment, names: Option<&[String]>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for i in 0..z.n() {
        let fallback = (i + 1).to_string();
        let vertex = names.map_or(fallback.as_str(), |n| n[i].as_str());
        wtr.serialize(AssignmentRow {
            vertex,
            label: z.label(i) + 1,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a `vertex,label` CSV (labels are arbitrary nonnegative integers,
/// compacted in order of first appearance). Returns vertex names too.
pub fn read_assignment<R: Read>(reader: R) -> Result<(Vec<String>, CommunityAssignment)> {
    let mut rdr = records(reader, true);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    if header != ["vertex", "label"] {
        return Err(parse_error(1, format!("expected header vertex,label, found {}", header.join(","))));
    }
    let mut names = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() != 2 {
            return Err(parse_error(line, format!("expected 2 fields, found {}", record.len())));
        }
        let label: usize = record[1]
            .parse()
            .map_err(|_| parse_error(line, format!("bad label {:?}", &record[1])))?;
        names.push(record[0].to_string());
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(parse_error(1, "no assignments"));
    }
    Ok((names, CommunityAssignment::from_labels(&labels)))
}

/// `k x k` table of block parameters, dense CSV without a header.
pub fn read_block_matrix<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let m = read_dense(reader)?;
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m)
}

/// Header plus one serialized row per item.
pub fn write_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}
