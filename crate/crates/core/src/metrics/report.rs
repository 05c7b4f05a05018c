use std::collections::BTreeMap;
use std::io::{self, Write};

use super::{alar, cam_test, directional_accuracy, LarMap, SpearmanTest};
use crate::pair::OrderedPair;
use crate::relations::{RelationPairSet, FALLBACK_RELATION};
use crate::scalar::{compensated_sum, fmt_4, fmt_sig17};

pub const DEFAULT_GAMMAS: [f64; 4] = [0.0, 0.1, 1.0, 10.0];

/// Metrics of one compared resource on one relation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceCells {
    pub alar: Option<f64>,
    pub cam: Option<SpearmanTest>,
    /// One entry per threshold, in report order.
    pub diracc: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationRow {
    pub relation: String,
    /// Pairs covered by the reference data and every compared resource.
    pub n_pairs: usize,
    /// Pairs of the relation set left out for lack of coverage.
    pub n_excluded: usize,
    pub data_alar: Option<f64>,
    /// Parallel to [`MetricReport::resources`].
    pub cells: Vec<ResourceCells>,
}

/// Weighted average over relations. A relation whose cell is undefined
/// drops out and the remaining weights are rescaled.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    /// `|S(r)| / |S|` over the relations taking part.
    pub weights: Vec<(String, f64)>,
    pub cam: Vec<Option<f64>>,
    pub diracc: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub dataset: String,
    pub resources: Vec<String>,
    pub gammas: Vec<f64>,
    pub rows: Vec<RelationRow>,
    /// All relations.
    pub sa: SummaryRow,
    /// All relations except the fallback one.
    pub sr: SummaryRow,
}

fn weighted(values: &[(f64, Option<f64>)]) -> Option<f64> {
    let defined: Vec<(f64, f64)> = values.iter().filter_map(|(w, v)| v.map(|v| (*w, v))).collect();
    let total = compensated_sum(defined.iter().map(|(w, _)| *w));
    if defined.is_empty() || total == 0.0 {
        return None;
    }
    Some(compensated_sum(defined.iter().map(|(w, v)| w * v)) / total)
}

fn summarize(label: &str, rows: &[&RelationRow], n_resources: usize, n_gammas: usize) -> SummaryRow {
    let total: usize = rows.iter().map(|r| r.n_pairs).sum();
    let weights: Vec<(String, f64)> = rows
        .iter()
        .map(|r| (r.relation.clone(), if total == 0 { 0.0 } else { r.n_pairs as f64 / total as f64 }))
        .collect();
    let cam = (0..n_resources)
        .map(|k| {
            let v: Vec<(f64, Option<f64>)> =
                rows.iter().zip(&weights).map(|(r, (_, w))| (*w, r.cells[k].cam.map(|t| t.rho))).collect();
            weighted(&v)
        })
        .collect();
    let diracc = (0..n_resources)
        .map(|k| {
            (0..n_gammas)
                .map(|g| {
                    let v: Vec<(f64, Option<f64>)> =
                        rows.iter().zip(&weights).map(|(r, (_, w))| (*w, r.cells[k].diracc[g])).collect();
                    weighted(&v)
                })
                .collect()
        })
        .collect();
    SummaryRow { label: label.into(), weights, cam, diracc }
}

impl MetricReport {
    /// Evaluates every resource against `data` on each relation set,
    /// restricted to pairs that all of them cover.
    pub fn build(
        data: &LarMap<f64>,
        resources: &[LarMap<f64>],
        sets: &BTreeMap<String, RelationPairSet>,
        gammas: &[f64],
    ) -> Self {
        let mut rows = Vec::new();
        for (relation, set) in sets {
            let covered: Vec<OrderedPair> = set
                .pairs
                .iter()
                .filter(|(a, b)| data.get(a, b).is_some() && resources.iter().all(|m| m.get(a, b).is_some()))
                .cloned()
                .collect();
            let cells = resources
                .iter()
                .map(|m| ResourceCells {
                    alar: alar(m, &covered).ok(),
                    cam: cam_test(&covered, data, m).ok(),
                    diracc: gammas.iter().map(|g| directional_accuracy(data, m, &covered, *g).ok()).collect(),
                })
                .collect();
            rows.push(RelationRow {
                relation: relation.clone(),
                n_pairs: covered.len(),
                n_excluded: set.pairs.len() - covered.len(),
                data_alar: alar(data, &covered).ok(),
                cells,
            });
        }
        let all: Vec<&RelationRow> = rows.iter().collect();
        let related: Vec<&RelationRow> = rows.iter().filter(|r| r.relation != FALLBACK_RELATION).collect();
        let sa = summarize("SA", &all, resources.len(), gammas.len());
        let sr = summarize("SR", &related, resources.len(), gammas.len());
        MetricReport {
            dataset: data.resource_id().to_string(),
            resources: resources.iter().map(|m| m.resource_id().to_string()).collect(),
            gammas: gammas.to_vec(),
            rows,
            sa,
            sr,
        }
    }

    fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> =
            ["relation", "n_pairs", "n_excluded", "weight_sa", "weight_sr"].iter().map(|s| s.to_string()).collect();
        c.push(format!("alar:{}", self.dataset));
        for r in &self.resources {
            c.push(format!("alar:{r}"));
            c.push(format!("cam:{r}"));
            c.push(format!("p:{r}"));
            for g in &self.gammas {
                c.push(format!("diracc@{g}:{r}"));
            }
        }
        c
    }

    fn cells(&self, fmt: fn(f64) -> String) -> Vec<Vec<String>> {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), fmt);
        let weight = |s: &SummaryRow, rel: &str| s.weights.iter().find(|(r, _)| r == rel).map(|(_, w)| *w);
        let mut out = Vec::new();
        for row in &self.rows {
            let mut c = vec![
                row.relation.clone(),
                row.n_pairs.to_string(),
                row.n_excluded.to_string(),
                opt(weight(&self.sa, &row.relation)),
                opt(weight(&self.sr, &row.relation)),
                opt(row.data_alar),
            ];
            for cell in &row.cells {
                c.push(opt(cell.alar));
                c.push(opt(cell.cam.map(|t| t.rho)));
                c.push(opt(cell.cam.map(|t| t.p_value)));
                c.extend(cell.diracc.iter().map(|v| opt(*v)));
            }
            out.push(c);
        }
        for s in [&self.sa, &self.sr] {
            let n: usize =
                self.rows.iter().filter(|r| s.weights.iter().any(|(rel, _)| rel == &r.relation)).map(|r| r.n_pairs).sum();
            let mut c = vec![s.label.clone(), n.to_string(), "NA".into(), "NA".into(), "NA".into(), "NA".into()];
            for k in 0..self.resources.len() {
                c.push("NA".into());
                c.push(opt(s.cam[k]));
                c.push("NA".into());
                c.extend(s.diracc[k].iter().map(|v| opt(*v)));
            }
            out.push(c);
        }
        out
    }

    /// Tab-separated, full precision.
    pub fn write_tsv<W: Write>(&self, mut w: W, header: &[String]) -> io::Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "{}", self.columns().join("\t"))?;
        for row in self.cells(fmt_sig17) {
            writeln!(w, "{}", row.join("\t"))?;
        }
        w.flush()
    }

    /// Column-aligned table with 4 decimals.
    pub fn write_text<W: Write>(&self, mut w: W, header: &[String]) -> io::Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        let mut table = vec![self.columns()];
        table.extend(self.cells(fmt_4));
        let widths: Vec<usize> = (0..table[0].len())
            .map(|i| table.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
                .collect();
            writeln!(w, "{}", line.join("  ").trim_end())?;
        }
        w.flush()
    }
}

/// `sign(x) * ln(1 + scale * |x|)`: compresses large LARs for plotting while
/// keeping sign and order.
pub fn signed_log(x: f64, scale: f64) -> f64 {
    x.signum() * (scale * x.abs()).ln_1p()
}

/// One row per ordered pair per relation with each resource's LAR, for
/// scatter plots. `transform` applies [`signed_log`] with the given scale.
pub fn write_lar_csv<W: Write>(
    mut w: W,
    sets: &BTreeMap<String, RelationPairSet>,
    maps: &[&LarMap<f64>],
    transform: Option<f64>,
    header: &[String],
) -> io::Result<()> {
    for h in header {
        writeln!(w, "# {h}")?;
    }
    let names: Vec<&str> = maps.iter().map(|m| m.resource_id()).collect();
    writeln!(w, "relation,a,b,{}", names.join(","))?;
    for (relation, set) in sets {
        for (a, b) in &set.pairs {
            let vals: Option<Vec<f64>> = maps.iter().map(|m| m.get(a, b)).collect();
            let Some(vals) = vals else { continue };
            let cells: Vec<String> =
                vals.into_iter().map(|v| fmt_sig17(transform.map_or(v, |s| signed_log(v, s)))).collect();
            writeln!(w, "{relation},{a},{b},{}", cells.join(","))?;
        }
    }
    w.flush()
}
