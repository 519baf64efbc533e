//! Plain-text file formats.
//!
//! * Data CSV: a header row; optional `id`, `x_coord` and `y_coord` columns;
//!   the response in a column named `y` (or the last column when none is
//!   named `y`); every other column is a covariate, in file order.
//! * Edge list: one whitespace-separated `i j` pair per line, `#` starts a
//!   comment. Tokens are unit ids when the dataset carries ids, otherwise
//!   0-based row positions.
//! * Partition CSV: `unit,region` rows keyed by unit id.
//! * Coefficient CSV: `region,b0,b1,..` rows.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{AdjacencyGraph, Partition};
use crate::linreg::Dataset;

const ID: &str = "id";
const X_COORD: &str = "x_coord";
const Y_COORD: &str = "y_coord";
const RESPONSE: &str = "y";

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn parse_f64(path: &Path, line: usize, column: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| Error::parse(path, format!("line {line}, column {column:?}: {raw:?} is not a number")))
}

/// Reads a data CSV.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv_reader(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let id_col = find(ID);
    let coord_cols = match (find(X_COORD), find(Y_COORD)) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(Error::parse(path, "x_coord and y_coord must appear together")),
    };
    let y_col = find(RESPONSE).unwrap_or(headers.len().saturating_sub(1));
    let special = |c: usize| Some(c) == id_col || c == y_col || coord_cols.is_some_and(|(a, b)| c == a || c == b);
    let covariates: Vec<usize> = (0..headers.len()).filter(|&c| !special(c)).collect();
    if covariates.is_empty() {
        return Err(Error::parse(path, "no covariate columns"));
    }

    let (mut x, mut y, mut ids, mut coords) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let field = |c: usize| record.get(c).ok_or_else(|| Error::parse(path, format!("line {line}: missing column {}", headers[c])));
        for &c in &covariates {
            x.push(parse_f64(path, line, &headers[c], field(c)?)?);
        }
        y.push(parse_f64(path, line, &headers[y_col], field(y_col)?)?);
        if let Some(c) = id_col {
            ids.push(field(c)?.to_string());
        }
        if let Some((a, b)) = coord_cols {
            coords.push([
                parse_f64(path, line, X_COORD, field(a)?)?,
                parse_f64(path, line, Y_COORD, field(b)?)?,
            ]);
        }
    }
    let n = y.len();
    let mut dataset = Dataset::from_flat(n, covariates.len(), x, y)?
        .with_covariate_names(covariates.iter().map(|&c| headers[c].clone()).collect())?;
    if id_col.is_some() {
        dataset = dataset.with_ids(ids)?;
    }
    if coord_cols.is_some() {
        dataset = dataset.with_coords(coords)?;
    }
    Ok(dataset)
}

/// Writes a data CSV: `id` (when present), coordinates (when present),
/// covariates, then `y`.
pub fn write_dataset_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut w = csv_writer(path)?;
    let has_ids = dataset.ids().is_some();
    let coords = dataset.coords();
    let mut header: Vec<&str> = Vec::new();
    if has_ids {
        header.push(ID);
    }
    if coords.is_some() {
        header.extend([X_COORD, Y_COORD]);
    }
    header.extend(dataset.covariate_names().iter().map(String::as_str));
    header.push(RESPONSE);
    w.write_record(&header)?;
    for u in 0..dataset.n() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if has_ids {
            row.push(dataset.id(u));
        }
        if let Some(c) = coords {
            row.extend([c[u][0].to_string(), c[u][1].to_string()]);
        }
        row.extend(dataset.row(u).iter().map(f64::to_string));
        row.push(dataset.y(u).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Maps unit ids (or decimal positions when the dataset has no ids) to
/// dense indices.
fn unit_lookup(dataset: &Dataset) -> impl Fn(&str) -> Option<usize> + '_ {
    let index: Option<HashMap<&str, usize>> = dataset
        .ids()
        .map(|ids| ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect());
    let n = dataset.n();
    move |token: &str| match &index {
        Some(map) => map.get(token).copied(),
        None => token.parse::<usize>().ok().filter(|&u| u < n),
    }
}

/// Reads an edge list over the units of `dataset`.
pub fn read_edge_list(path: &Path, dataset: &Dataset) -> Result<AdjacencyGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lookup = unit_lookup(dataset);
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::parse(path, format!("line {}: expected two units, got {:?}", i + 1, line)));
        }
        let unit = |t: &str| lookup(t).ok_or_else(|| Error::parse(path, format!("line {}: unknown unit {t:?}", i + 1)));
        pairs.push((unit(tokens[0])?, unit(tokens[1])?));
    }
    AdjacencyGraph::from_edges(dataset.n(), &pairs)
}

/// Writes each edge once, as unit ids.
pub fn write_edge_list(path: &Path, graph: &AdjacencyGraph, dataset: &Dataset, comment: &str) -> Result<()> {
    let mut out = String::new();
    for line in comment.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    for (a, b) in graph.edges() {
        out.push_str(&format!("{} {}\n", dataset.id(a), dataset.id(b)));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `unit,region` rows in unit order.
pub fn write_partition_csv(path: &Path, partition: &Partition, dataset: &Dataset) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["unit", "region"])?;
    for u in 0..partition.n_units() {
        w.write_record([dataset.id(u), partition.label(u).to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `unit,region` rows; every unit of `dataset` must appear once.
/// Region labels are renumbered densely by first appearance in unit order.
pub fn read_partition_csv(path: &Path, dataset: &Dataset) -> Result<Partition> {
    let mut reader = csv_reader(path)?;
    let lookup = unit_lookup(dataset);
    let mut raw: Vec<Option<String>> = vec![None; dataset.n()];
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let (Some(unit), Some(region)) = (record.get(0), record.get(1)) else {
            return Err(Error::parse(path, format!("line {line}: expected unit,region")));
        };
        let u = lookup(unit).ok_or_else(|| Error::parse(path, format!("line {line}: unknown unit {unit:?}")))?;
        if raw[u].replace(region.to_string()).is_some() {
            return Err(Error::parse(path, format!("line {line}: unit {unit:?} listed twice")));
        }
    }
    let labels: Vec<String> = raw
        .into_iter()
        .enumerate()
        .map(|(u, r)| r.ok_or_else(|| Error::parse(path, format!("unit {:?} has no region", dataset.id(u)))))
        .collect::<Result<_>>()?;
    labels_to_partition(&labels)
}

/// Dense partition from arbitrary string labels, numbering regions by first
/// appearance. Numeric labels keep their order when they are already dense.
fn labels_to_partition(labels: &[String]) -> Result<Partition> {
    let numeric: Option<Vec<usize>> = labels.iter().map(|s| s.parse::<usize>().ok()).collect();
    if let Some(v) = numeric {
        if let Ok(p) = Partition::new(v) {
            return Ok(p);
        }
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let dense = labels
        .iter()
        .map(|s| {
            let next = seen.len();
            *seen.entry(s.as_str()).or_insert(next)
        })
        .collect();
    Partition::new(dense)
}

/// Writes `region,b0,b1,..` rows.
pub fn write_coefficients_csv(path: &Path, params: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let width = params.first().map_or(0, Vec::len);
    let mut header = vec!["region".to_string()];
    header.extend((0..width).map(|c| format!("b{c}")));
    w.write_record(&header)?;
    for (r, p) in params.iter().enumerate() {
        let mut row = vec![r.to_string()];
        row.extend(p.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `region,b0,b1,..` rows; regions must be numbered `0..r` in order.
pub fn read_coefficients_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv_reader(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let region = record.get(0).unwrap_or("");
        if region.parse::<usize>().ok() != Some(out.len()) {
            return Err(Error::parse(path, format!("line {line}: expected region {}, got {region:?}", out.len())));
        }
        let params = (1..record.len())
            .map(|c| parse_f64(path, line, &headers[c], &record[c]))
            .collect::<Result<Vec<_>>>()?;
        out.push(params);
    }
    Ok(out)
}

/// Writes `contents` followed by a newline.
pub(crate) fn write_text(path: &Path, contents: &str) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(contents.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        Dataset::from_flat(3, 2, vec![0.1, 0.2, 1.5, -3.0, 1e-17, 7.0], vec![1.0, 2.5, -0.3])
            .unwrap()
            .with_ids(vec!["a".into(), "b".into(), "c".into()])
            .unwrap()
            .with_coords(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.5]])
            .unwrap()
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let ds = sample().with_covariate_names(vec!["pop".into(), "inc".into()]).unwrap();
        write_dataset_csv(&path, &ds).unwrap();
        assert_eq!(read_dataset_csv(&path).unwrap(), ds);
    }

    #[test]
    fn response_defaults_to_last_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "a, b, target\n1, 2, 3\n4, 5, 6\n").unwrap();
        let ds = read_dataset_csv(&path).unwrap();
        assert_eq!((ds.n(), ds.m()), (2, 2));
        assert_eq!(ds.response(), &[3.0, 6.0]);
        assert_eq!(ds.row(1), &[4.0, 5.0]);
        assert!(ds.ids().is_none());
    }

    #[test]
    fn bad_numbers_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "x1,y\n1,2\nfoo,3\n").unwrap();
        let msg = read_dataset_csv(&path).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn edge_list_by_id_and_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        fs::write(&path, "# header\na b\n\nb c  # trailing\n").unwrap();
        let g = read_edge_list(&path, &sample()).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);

        let anon = Dataset::from_flat(3, 1, vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap();
        fs::write(&path, "0 2\n2 1\n").unwrap();
        let g = read_edge_list(&path, &anon).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 2), (1, 2)]);

        fs::write(&path, "0 3\n").unwrap();
        assert!(read_edge_list(&path, &anon).is_err());
        fs::write(&path, "0 1 2\n").unwrap();
        assert!(read_edge_list(&path, &anon).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        let ds = Dataset::from_flat(6, 1, vec![0.0; 6], vec![0.0; 6]).unwrap();
        let g = AdjacencyGraph::grid(2, 3).unwrap();
        write_edge_list(&path, &g, &ds, "rook 2x3").unwrap();
        assert_eq!(read_edge_list(&path, &ds).unwrap(), g);
    }

    #[test]
    fn partition_and_coefficients_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample();
        let p = Partition::new(vec![1, 0, 1]).unwrap();
        let path = dir.path().join("p.csv");
        write_partition_csv(&path, &p, &ds).unwrap();
        assert_eq!(read_partition_csv(&path, &ds).unwrap(), p);

        fs::write(&path, "unit,region\nc,north\na,north\nb,south\n").unwrap();
        assert!(read_partition_csv(&path, &ds).unwrap().same_grouping(&p));
        fs::write(&path, "unit,region\na,0\nb,1\n").unwrap();
        assert!(read_partition_csv(&path, &ds).is_err());

        let params = vec![vec![0.0, -2.0, 1.0], vec![0.5, 1e-9, -0.25]];
        let path = dir.path().join("c.csv");
        write_coefficients_csv(&path, &params).unwrap();
        assert_eq!(read_coefficients_csv(&path).unwrap(), params);
    }
}
