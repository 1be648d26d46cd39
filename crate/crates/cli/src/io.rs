//! Readers and writers for the on-disk formats. Node indices are 0-based in
//! edge lists; community labels are 1-based in every file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use calfsbm::matrix::DenseMatrix;
use calfsbm::posterior::RelabeledDraws;
use calfsbm::similarity::{combined_scaled_similarity, euclidean_similarity, great_circle_distances, match_average_similarity};
use calfsbm::{BlockCoefficients, Network, NodeData, SimilarityKind};
use serde::Serialize;

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| anyhow!("{}: missing column `{name}`", path.display()))
}

/// Loads an edge list with integer columns `i` and `j`.
///
/// `n` fixes the node count; without it the largest index decides. With
/// `reciprocal` the rows are read as directed arcs and an undirected edge is
/// kept only when both directions are listed.
pub fn load_network(path: &Path, n: Option<usize>, reciprocal: bool) -> Result<Network> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let (ci, cj) = (column(&headers, "i", path)?, column(&headers, "j", path)?);
    let mut arcs = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let row = line + 2;
        let rec = rec.with_context(|| format!("{}: malformed row {row}", path.display()))?;
        let parse = |c: usize, name: &str| -> Result<usize> {
            let cell = rec.get(c).unwrap_or("");
            cell.parse()
                .map_err(|_| anyhow!("{}: row {row}, column `{name}`: `{cell}` is not a node index", path.display()))
        };
        let (i, j) = (parse(ci, "i")?, parse(cj, "j")?);
        ensure!(i != j, "{}: row {row}: self-loop on node {i}", path.display());
        arcs.push((i, j));
    }
    let n = match n {
        Some(n) => {
            if let Some(&(i, j)) = arcs.iter().find(|(i, j)| *i >= n || *j >= n) {
                bail!("{}: edge ({i}, {j}) out of range for {n} nodes", path.display());
            }
            n
        }
        None => arcs.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0),
    };
    let edges: Vec<(usize, usize)> = if reciprocal {
        let set: BTreeSet<(usize, usize)> = arcs.iter().copied().collect();
        set.iter().filter(|&&(i, j)| i < j && set.contains(&(j, i))).copied().collect()
    } else {
        arcs
    };
    Ok(Network::from_edges(n, edges)?)
}

/// Writes `i,j` rows with `i < j` in row-major order.
pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["i", "j"])?;
    for (i, j) in net.edges() {
        w.write_record([i.to_string(), j.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovariateColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
    Latitude(Vec<f64>),
    Longitude(Vec<f64>),
}

/// Node covariates as read from disk, one entry per column.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    pub names: Vec<String>,
    pub columns: Vec<CovariateColumn>,
    pub n: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Tag {
    Num,
    Cat,
    Lat,
    Lon,
    Auto,
}

fn split_tag(header: &str) -> (Tag, &str) {
    match header.split_once(':') {
        Some(("num", name)) => (Tag::Num, name),
        Some(("cat", name)) => (Tag::Cat, name),
        Some(("lat", name)) => (Tag::Lat, name),
        Some(("lon", name)) => (Tag::Lon, name),
        _ => (Tag::Auto, header),
    }
}

/// Loads a covariate CSV. Headers may carry a type tag (`num:`, `cat:`,
/// `lat:`, `lon:`); untagged columns are numeric when every cell parses as a
/// number and categorical when none does.
pub fn load_covariates(path: &Path) -> Result<CovariateTable> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    ensure!(!headers.is_empty(), "{}: no columns", path.display());
    let tags: Vec<(Tag, String)> = headers.iter().map(|h| split_tag(h)).map(|(t, s)| (t, s.to_string())).collect();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); tags.len()];
    for (line, rec) in rdr.records().enumerate() {
        let row = line + 2;
        let rec = rec.with_context(|| format!("{}: malformed row {row}", path.display()))?;
        ensure!(
            rec.len() == tags.len(),
            "{}: row {row} has {} cells, expected {}",
            path.display(),
            rec.len(),
            tags.len()
        );
        for (c, cell) in rec.iter().enumerate() {
            ensure!(!cell.is_empty(), "{}: row {row}, column `{}`: missing value", path.display(), &headers[c]);
            cells[c].push(cell.to_string());
        }
    }
    let n = cells[0].len();
    let mut columns = Vec::with_capacity(tags.len());
    for (c, (tag, _)) in tags.iter().enumerate() {
        let header = &headers[c];
        let numeric = |kind: &str| -> Result<Vec<f64>> {
            cells[c]
                .iter()
                .enumerate()
                .map(|(r, v)| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| anyhow!("{}: row {}, column `{header}`: `{v}` is not {kind}", path.display(), r + 2))
                })
                .collect()
        };
        columns.push(match tag {
            Tag::Num => CovariateColumn::Numeric(numeric("a number")?),
            Tag::Lat => CovariateColumn::Latitude(numeric("a latitude")?),
            Tag::Lon => CovariateColumn::Longitude(numeric("a longitude")?),
            Tag::Cat => CovariateColumn::Categorical(cells[c].clone()),
            Tag::Auto => {
                let parsed = cells[c].iter().filter(|v| v.parse::<f64>().is_ok()).count();
                if parsed == n {
                    CovariateColumn::Numeric(numeric("a number")?)
                } else if parsed == 0 {
                    CovariateColumn::Categorical(cells[c].clone())
                } else {
                    bail!(
                        "{}: column `{header}` mixes numeric and non-numeric cells; tag it `num:` or `cat:`",
                        path.display()
                    );
                }
            }
        });
    }
    Ok(CovariateTable {
        names: tags.into_iter().map(|(_, s)| s).collect(),
        columns,
        n,
    })
}

impl CovariateTable {
    fn numeric(&self) -> Vec<&[f64]> {
        self.columns
            .iter()
            .filter_map(|c| match c {
                CovariateColumn::Numeric(v) => Some(v.as_slice()),
                _ => None,
            })
            .collect()
    }

    fn categorical(&self) -> Vec<&[String]> {
        self.columns
            .iter()
            .filter_map(|c| match c {
                CovariateColumn::Categorical(v) => Some(v.as_slice()),
                _ => None,
            })
            .collect()
    }

    fn coordinates(&self) -> Result<Option<Vec<(f64, f64)>>> {
        let pick = |want: fn(&CovariateColumn) -> Option<&Vec<f64>>| -> Vec<&Vec<f64>> { self.columns.iter().filter_map(want).collect() };
        let lat = pick(|c| if let CovariateColumn::Latitude(v) = c { Some(v) } else { None });
        let lon = pick(|c| if let CovariateColumn::Longitude(v) = c { Some(v) } else { None });
        match (lat.len(), lon.len()) {
            (0, 0) => Ok(None),
            (1, 1) => Ok(Some(lat[0].iter().copied().zip(lon[0].iter().copied()).collect())),
            _ => bail!("coordinates need exactly one `lat:` and one `lon:` column"),
        }
    }

    /// The table as an `n × p` real matrix. Categorical cells become their
    /// level rank within the column.
    pub fn matrix(&self) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = self
            .columns
            .iter()
            .map(|c| match c {
                CovariateColumn::Numeric(v) | CovariateColumn::Latitude(v) | CovariateColumn::Longitude(v) => v.clone(),
                CovariateColumn::Categorical(v) => {
                    let levels: BTreeMap<&String, usize> =
                        v.iter().collect::<BTreeSet<_>>().into_iter().enumerate().map(|(r, l)| (l, r)).collect();
                    v.iter().map(|l| levels[l] as f64).collect()
                }
            })
            .collect();
        DenseMatrix::from_fn(self.n, cols.len(), |i, c| cols[c][i])
    }

    /// Builds the pairwise similarity. Purely numeric tables use Euclidean
    /// distance and purely categorical ones the match average. Anything else
    /// (coordinates, or numeric and categorical together) combines one
    /// distance component per kind after scaling each to unit variance.
    pub fn node_data(&self) -> Result<NodeData> {
        let numeric = self.numeric();
        let categorical = self.categorical();
        let coords = self.coordinates()?;
        let x = self.matrix();
        let numeric_table = || DenseMatrix::from_fn(self.n, numeric.len(), |i, c| numeric[c][i]);
        let category_rows = || -> Vec<Vec<&str>> { (0..self.n).map(|i| categorical.iter().map(|c| c[i].as_str()).collect()).collect() };
        if coords.is_none() && categorical.is_empty() {
            return Ok(NodeData::new(x, euclidean_similarity(&numeric_table()), SimilarityKind::Euclidean)?);
        }
        if coords.is_none() && numeric.is_empty() {
            let s = match_average_similarity(&category_rows())?;
            return Ok(NodeData::new(x, s, SimilarityKind::MatchAverage)?);
        }
        let mut components = Vec::new();
        if let Some(coords) = coords {
            components.push(great_circle_distances(&coords)?);
        }
        if !numeric.is_empty() {
            components.push(euclidean_similarity(&numeric_table()));
        }
        if !categorical.is_empty() {
            let mut mismatch = match_average_similarity(&category_rows())?;
            for i in 0..self.n {
                for j in 0..self.n {
                    if i != j {
                        mismatch[(i, j)] = 1.0 - mismatch[(i, j)];
                    }
                }
            }
            components.push(mismatch);
        }
        let s = combined_scaled_similarity(&components, None)?;
        Ok(NodeData::new(x, s, SimilarityKind::ScaledCombination)?)
    }
}

/// Writes a numeric covariate table with header `x1..xp`.
pub fn save_covariates(x: &DenseMatrix, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record((1..=x.cols()).map(|c| format!("x{c}")))?;
    for row in x.iter_rows() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Ground truth per node: 0-based labels and heterogeneity.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub membership: Vec<usize>,
    pub theta: Vec<f64>,
}

/// Writes `node,membership,theta` with 1-based membership.
pub fn save_truth(truth: &Truth, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["node", "membership", "theta"])?;
    for (i, (z, t)) in truth.membership.iter().zip(&truth.theta).enumerate() {
        w.write_record([i.to_string(), (z + 1).to_string(), t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_truth(path: &Path) -> Result<Truth> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let (cn, cz) = (column(&headers, "node", path)?, column(&headers, "membership", path)?);
    let ct = headers.iter().position(|h| h.eq_ignore_ascii_case("theta"));
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let row = line + 2;
        let rec = rec.with_context(|| format!("{}: malformed row {row}", path.display()))?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let bad = |name: &str, v: &str| anyhow!("{}: row {row}, column `{name}`: cannot parse `{v}`", path.display());
        let node: usize = cell(cn).parse().map_err(|_| bad("node", cell(cn)))?;
        let z: usize = cell(cz).parse().ok().filter(|z| *z >= 1).ok_or_else(|| bad("membership", cell(cz)))?;
        let theta: f64 = match ct {
            Some(c) => cell(c).parse().map_err(|_| bad("theta", cell(c)))?,
            None => f64::NAN,
        };
        rows.push((node, z - 1, theta));
    }
    rows.sort_by_key(|r| r.0);
    ensure!(
        rows.iter().enumerate().all(|(i, r)| r.0 == i),
        "{}: node column must list 0..n exactly once",
        path.display()
    );
    Ok(Truth {
        membership: rows.iter().map(|r| r.1).collect(),
        theta: rows.iter().map(|r| r.2).collect(),
    })
}

/// One row per stored draw: chain, draw, `β` in upper-triangle order, `σ²`,
/// every `θ_i`, then every label (1-based).
pub fn save_draws(chains: &[RelabeledDraws], path: &Path) -> Result<()> {
    let Some(first) = chains.first().and_then(|c| c.draws.states.first()) else {
        bail!("no draws to write");
    };
    let (k, n) = (first.k, first.n());
    let mut header = vec!["chain".to_string(), "draw".to_string(), "beta0".to_string()];
    header.extend(BlockCoefficients::pairs(k).map(|(a, b)| format!("beta_{}_{}", a + 1, b + 1)));
    header.push("sigma2".into());
    header.extend((0..n).map(|i| format!("theta_{i}")));
    header.extend((0..n).map(|i| format!("z_{i}")));
    let mut w = writer(path)?;
    w.write_record(&header)?;
    for (c, chain) in chains.iter().enumerate() {
        for (d, s) in chain.draws.states.iter().enumerate() {
            let mut rec = vec![c.to_string(), d.to_string()];
            rec.extend(s.coefficients.to_vector().iter().map(f64::to_string));
            rec.push(s.sigma2.to_string());
            rec.extend(s.theta.iter().map(f64::to_string));
            rec.extend(s.membership.iter().map(|z| (z + 1).to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes serializable rows as CSV with a header.
pub fn save_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.csv", "i,j\n0,1\n1,0\n1,2\n");
        let net = load_network(&p, None, false).unwrap();
        assert_eq!((net.n(), net.edge_count()), (3, 2));
    }

    #[test]
    fn edge_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.csv", "i,j\n0,1\n2,2\n");
        let e = load_network(&p, None, false).unwrap_err().to_string();
        assert!(e.contains("self-loop") && e.contains("row 3"), "{e}");
        let p = write(dir.path(), "e.csv", "i,j\n0,x\n");
        assert!(load_network(&p, None, false).unwrap_err().to_string().contains("row 2"));
        let p = write(dir.path(), "e.csv", "i,j\n0,5\n");
        assert!(load_network(&p, Some(4), false).unwrap_err().to_string().contains("out of range"));
        let p = write(dir.path(), "e.csv", "a,b\n0,1\n");
        assert!(load_network(&p, None, false).is_err());
    }

    #[test]
    fn reciprocal_arcs_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.csv", "i,j\n0,1\n1,0\n1,2\n3,2\n2,3\n");
        let net = load_network(&p, Some(5), true).unwrap();
        assert_eq!(net.edges().collect::<Vec<_>>(), vec![(0, 1), (2, 3)]);
        assert_eq!(net.n(), 5);
    }

    #[test]
    fn numeric_columns_take_the_euclidean_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.csv", "x1,x2\n0,0\n3,4\n1.5,-2\n");
        let t = load_covariates(&p).unwrap();
        let nd = t.node_data().unwrap();
        assert_eq!(nd.similarity_kind(), SimilarityKind::Euclidean);
        assert_eq!((nd.n(), nd.p()), (3, 2));
        assert_eq!(nd.similarity()[(0, 1)], 5.0);
    }

    #[test]
    fn categorical_columns_take_the_match_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.csv", "inst,cat:spec\nA,1\nA,2\nB,1\n");
        let t = load_covariates(&p).unwrap();
        assert!(matches!(t.columns[1], CovariateColumn::Categorical(_)));
        let nd = t.node_data().unwrap();
        assert_eq!(nd.similarity_kind(), SimilarityKind::MatchAverage);
        assert_eq!(nd.similarity()[(0, 1)], 0.5);
        assert_eq!(nd.similarity()[(1, 2)], 0.0);
    }

    #[test]
    fn mixed_and_coordinate_tables_combine() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.csv", "lat:lat,lon:lon,pop\n0,0,1\n0,90,2\n45,10,4\n10,10,3\n");
        let nd = load_covariates(&p).unwrap().node_data().unwrap();
        assert_eq!(nd.similarity_kind(), SimilarityKind::ScaledCombination);
        let p = write(dir.path(), "x.csv", "pop,cat:kind\n1,a\n2,b\n4,a\n");
        let nd = load_covariates(&p).unwrap().node_data().unwrap();
        assert_eq!(nd.similarity_kind(), SimilarityKind::ScaledCombination);
    }

    #[test]
    fn covariate_errors_name_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.csv", "x1,x2\n0,0\n3,\n");
        let e = load_covariates(&p).unwrap_err().to_string();
        assert!(e.contains("row 3") && e.contains("x2"), "{e}");
        let p = write(dir.path(), "x.csv", "x1\n0\nabc\n");
        assert!(load_covariates(&p).unwrap_err().to_string().contains("mixes"));
        let p = write(dir.path(), "x.csv", "num:x1\n0\nabc\n");
        let e = load_covariates(&p).unwrap_err().to_string();
        assert!(e.contains("row 3") && e.contains("num:x1"), "{e}");
        let p = write(dir.path(), "x.csv", "lat:a,lon:b\n95,0\n0,0\n");
        assert!(load_covariates(&p).unwrap().node_data().is_err());
    }

    #[test]
    fn truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = Truth {
            membership: vec![1, 0, 2],
            theta: vec![0.1, -1.0 / 3.0, 2e-17],
        };
        let p = dir.path().join("t.csv");
        save_truth(&t, &p).unwrap();
        assert_eq!(load_truth(&p).unwrap(), t);
        assert!(fs::read_to_string(&p).unwrap().contains("0,2,"));
    }
}
