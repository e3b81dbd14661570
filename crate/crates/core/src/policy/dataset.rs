use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ExhaustiveTable;
use crate::energy::Objective;
use crate::error::{Error, Result};
use crate::features::{Feature, FeatureCatalog};
use crate::learn::{Dataset, LabeledSample};
use crate::scalar::Scalar;

/// One (workload, phase): features, the full objective table and the
/// best unit per objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LabeledRow<F> {
    pub workload: String,
    pub phase: String,
    pub weight: f64,
    pub instructions: u64,
    pub features: Vec<F>,
    pub latency_ns: Vec<F>,
    pub energy_nj: Vec<F>,
    pub best_latency: usize,
    pub best_energy: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LabeledTable<F> {
    pub catalog: FeatureCatalog,
    pub profiles: Vec<String>,
    pub rows: Vec<LabeledRow<F>>,
}

impl<F: Scalar> LabeledTable<F> {
    pub fn from_tables(catalog: &FeatureCatalog, tables: &[ExhaustiveTable<F>]) -> Result<Self> {
        let profiles = tables.first().map(|t| t.profiles.clone()).unwrap_or_default();
        let mut rows = Vec::new();
        for t in tables {
            if t.profiles != profiles {
                return Err(Error::Schema(format!(
                    "workload `{}` was labeled over a different retention set",
                    t.workload
                )));
            }
            for p in &t.phases {
                if p.features.len() != catalog.len() {
                    return Err(Error::Dimension {
                        expected: catalog.len(),
                        got: p.features.len(),
                    });
                }
                rows.push(LabeledRow {
                    workload: t.workload.clone(),
                    phase: p.phase.clone(),
                    weight: p.weight,
                    instructions: p.instructions,
                    features: p.features.clone(),
                    latency_ns: p.latency_ns.clone(),
                    energy_nj: p.energy_nj.clone(),
                    best_latency: p.best_latency,
                    best_energy: p.best_energy,
                });
            }
        }
        Ok(Self {
            catalog: catalog.clone(),
            profiles,
            rows,
        })
    }

    /// Rows of the named workloads, in table order.
    pub fn select_workloads(&self, names: &[String]) -> Self {
        Self {
            catalog: self.catalog.clone(),
            profiles: self.profiles.clone(),
            rows: self.rows.iter().filter(|r| names.contains(&r.workload)).cloned().collect(),
        }
    }

    /// Training samples for one objective.
    pub fn to_dataset(&self, objective: Objective) -> Result<Dataset<F>> {
        let mut d = Dataset::new(self.catalog.clone(), self.profiles.clone());
        for r in &self.rows {
            d.push(LabeledSample {
                workload: r.workload.clone(),
                phase: r.phase.clone(),
                objective,
                features: r.features.clone(),
                label: match objective {
                    Objective::Latency => r.best_latency,
                    Objective::Energy => r.best_energy,
                },
            })?;
        }
        Ok(d)
    }

    /// Both objectives' samples in one dataset.
    pub fn to_full_dataset(&self) -> Result<Dataset<F>> {
        let mut d = self.to_dataset(Objective::Latency)?;
        d.samples.extend(self.to_dataset(Objective::Energy)?.samples);
        Ok(d)
    }
}

const FIXED: [&str; 4] = ["workload", "phase", "weight", "instructions"];

/// Column order: `workload, phase, weight, instructions`, the catalog
/// features, `latency_ns:<unit>` per unit, `energy_nj:<unit>` per unit,
/// `best_latency, best_energy` (unit names). A `#catalog <version>` line
/// precedes the header.
pub fn write_dataset_csv<F: Scalar, W: Write>(table: &LabeledTable<F>, mut out: W) -> Result<()> {
    writeln!(out, "#catalog {}", table.catalog.version)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(table.catalog.names().iter().map(|s| s.to_string()));
    header.extend(table.profiles.iter().map(|p| format!("latency_ns:{p}")));
    header.extend(table.profiles.iter().map(|p| format!("energy_nj:{p}")));
    header.push("best_latency".into());
    header.push("best_energy".into());
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![
            r.workload.clone(),
            r.phase.clone(),
            r.weight.to_string(),
            r.instructions.to_string(),
        ];
        rec.extend(r.features.iter().map(|v| v.to_string()));
        rec.extend(r.latency_ns.iter().map(|v| v.to_string()));
        rec.extend(r.energy_nj.iter().map(|v| v.to_string()));
        rec.push(table.profiles[r.best_latency].clone());
        rec.push(table.profiles[r.best_energy].clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

/// Reads a dataset, checking its catalog version against `expected` when
/// given.
pub fn read_dataset_csv<F: Scalar, R: BufRead>(mut input: R, expected: Option<&FeatureCatalog>) -> Result<LabeledTable<F>> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let version = first
        .trim()
        .strip_prefix("#catalog ")
        .ok_or_else(|| schema("dataset must start with a `#catalog <version>` line"))?
        .trim()
        .to_string();
    if let Some(cat) = expected {
        cat.check_version(&version)?;
    }
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < FIXED.len() + 2 || header[..FIXED.len()] != FIXED {
        return Err(schema(format!("dataset header must start with {}", FIXED.join(","))));
    }
    let lat_start = header
        .iter()
        .position(|h| h.starts_with("latency_ns:"))
        .ok_or_else(|| schema("no latency_ns:<unit> columns"))?;
    let features = header[FIXED.len()..lat_start]
        .iter()
        .map(|h| h.parse::<Feature>())
        .collect::<Result<Vec<_>>>()?;
    let catalog = FeatureCatalog::new(version, features)?;
    if let Some(cat) = expected {
        if *cat != catalog {
            return Err(Error::CatalogMismatch {
                expected: cat.version.clone(),
                found: format!("{} (different feature columns)", catalog.version),
            });
        }
    }
    let tail = &header[lat_start..];
    let n = (tail.len() - 2) / 2;
    if tail.len() != 2 * n + 2 || n == 0 || tail[2 * n] != "best_latency" || tail[2 * n + 1] != "best_energy" {
        return Err(schema("expected latency_ns:<unit>..., energy_nj:<unit>..., best_latency, best_energy"));
    }
    let mut profiles = Vec::with_capacity(n);
    for i in 0..n {
        let lat = tail[i].strip_prefix("latency_ns:");
        let en = tail[n + i].strip_prefix("energy_nj:");
        match (lat, en) {
            (Some(a), Some(b)) if a == b => profiles.push(a.to_string()),
            _ => return Err(schema(format!("mismatched unit columns `{}` / `{}`", tail[i], tail[n + i]))),
        }
    }

    let d = catalog.len();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 3;
        let bad = |what: &str, v: &str| Error::Parse {
            line,
            message: format!("bad {what} `{v}`"),
        };
        let num = |j: usize| -> Result<F> {
            let v = rec.get(j).unwrap_or("");
            v.parse::<f64>().map(F::lit).map_err(|_| bad(&header[j], v))
        };
        let unit = |j: usize| -> Result<usize> {
            let v = rec.get(j).unwrap_or("");
            profiles.iter().position(|p| p == v).ok_or_else(|| bad(&header[j], v))
        };
        let f0 = FIXED.len();
        rows.push(LabeledRow {
            workload: rec[0].to_string(),
            phase: rec[1].to_string(),
            weight: rec[2].parse().map_err(|_| bad("weight", &rec[2]))?,
            instructions: rec[3].parse().map_err(|_| bad("instructions", &rec[3]))?,
            features: (f0..f0 + d).map(num).collect::<Result<_>>()?,
            latency_ns: (lat_start..lat_start + n).map(num).collect::<Result<_>>()?,
            energy_nj: (lat_start + n..lat_start + 2 * n).map(num).collect::<Result<_>>()?,
            best_latency: unit(lat_start + 2 * n)?,
            best_energy: unit(lat_start + 2 * n + 1)?,
        });
    }
    Ok(LabeledTable {
        catalog,
        profiles,
        rows,
    })
}
