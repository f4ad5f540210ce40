use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Stage, TorusStage, CONFIG_VERSION};
use crate::cont::{ContinuationSettings, EventKind};
use crate::po::{Mesh, PoOptions};
use crate::spectral::ResonanceSettings;
use crate::{Error, Result};

const FIXED_HEAD: [&str; 7] = ["Omega", "eps", "Ts", "om_s", "om1s", "om2s", "rho_rot"];
const FIXED_TAIL: [&str; 2] = ["stability", "event"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Unknown,
}

impl Stability {
    pub fn of(stable: Option<bool>) -> Self {
        match stable {
            Some(true) => Stability::Stable,
            Some(false) => Stability::Unstable,
            None => Stability::Unknown,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Unknown => "",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "stable" => Ok(Stability::Stable),
            "unstable" => Ok(Stability::Unstable),
            "" => Ok(Stability::Unknown),
            _ => Err(Error::InvalidInput(format!("bad stability '{s}'"))),
        }
    }
}

fn parse_event(s: &str) -> Result<Option<EventKind>> {
    let k = match s {
        "" => return Ok(None),
        "SN" => EventKind::SN,
        "HB" => EventKind::HB,
        "PD" => EventKind::PD,
        "TR" => EventKind::TR,
        "BP" => EventKind::BP,
        "CP" => EventKind::CP,
        "EP" => EventKind::EP,
        _ => return Err(Error::InvalidInput(format!("bad event '{s}'"))),
    };
    Ok(Some(k))
}

/// One point of a forced response curve. Frequencies that do not apply to the
/// stage are `None` (empty in CSV, `null` in JSON).
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub omega: f64,
    pub eps: f64,
    pub ts: Option<f64>,
    pub om_s: Option<f64>,
    pub om1s: Option<f64>,
    pub om2s: Option<f64>,
    pub rho_rot: Option<f64>,
    /// `max |x_dof|` of the lifted response, one per output DOF.
    pub amps: Vec<f64>,
    pub stability: Stability,
    pub event: Option<EventKind>,
}

impl Row {
    fn optional(&self) -> [Option<f64>; 5] {
        [self.ts, self.om_s, self.om1s, self.om2s, self.rho_rot]
    }

    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = vec![self.omega.to_string(), self.eps.to_string()];
        out.extend(self.optional().into_iter().map(opt));
        out.extend(self.amps.iter().map(f64::to_string));
        out.push(self.stability.label().to_string());
        out.push(self.event.map(|e| e.label().to_string()).unwrap_or_default());
        out
    }

    fn json(&self) -> serde_json::Value {
        let mut v: Vec<serde_json::Value> = vec![self.omega.into(), self.eps.into()];
        v.extend(self.optional().into_iter().map(|x| x.map_or(serde_json::Value::Null, Into::into)));
        v.extend(self.amps.iter().map(|&a| a.into()));
        v.push(self.stability.label().into());
        v.push(self.event.map_or(serde_json::Value::String(String::new()), |e| e.label().into()));
        serde_json::Value::Array(v)
    }

    fn from_fields(f: &[&str], n_amp: usize) -> Result<Self> {
        if f.len() != FIXED_HEAD.len() + n_amp + FIXED_TAIL.len() {
            return Err(Error::InvalidInput(format!("row has {} fields", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidInput(format!("'{s}': {e}")));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let amps = f[7..7 + n_amp].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        Ok(Row {
            omega: num(f[0])?,
            eps: num(f[1])?,
            ts: opt(f[2])?,
            om_s: opt(f[3])?,
            om1s: opt(f[4])?,
            om2s: opt(f[5])?,
            rho_rot: opt(f[6])?,
            amps,
            stability: Stability::parse(f[7 + n_amp])?,
            event: parse_event(f[8 + n_amp])?,
        })
    }
}

/// Where a branch of a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchInfo {
    /// Row range `[start, end)` of the branch.
    pub rows: (usize, usize),
    /// Stage and event index (within that stage's branch) of the seed; `None` for
    /// the equilibrium branch, which starts from the linear response.
    pub seed: Option<SeedRef>,
    pub status: String,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRef {
    pub stage: Stage,
    pub branch: usize,
    pub event: usize,
    pub kind: EventKind,
    pub omega: f64,
}

/// Seconds spent per cost part. `other` is what the named parts do not cover,
/// so the parts add up to `total`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup: f64,
    pub autonomous_ssm: f64,
    pub nonautonomous_ssm: f64,
    pub reduced_dynamics: f64,
    pub lift: f64,
    pub verify: f64,
    pub other: f64,
    pub total: f64,
}

impl Timings {
    pub fn parts_sum(&self) -> f64 {
        self.setup + self.autonomous_ssm + self.nonautonomous_ssm + self.reduced_dynamics + self.lift + self.verify + self.other
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub continuation: ContinuationSettings,
    pub po: PoOptions,
    pub mesh: Mesh,
    pub torus: TorusStage,
    pub resonance: ResonanceSettings,
    pub n_pt: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: u32,
    pub order: u32,
    pub modes: Vec<usize>,
    pub outputs: Vec<usize>,
    pub omega_range: (f64, f64),
    pub eps: f64,
    /// External resonance ratios `r` and their common divisor `r_d`.
    pub r: Vec<f64>,
    pub r_d: f64,
    pub conventions: Vec<String>,
    pub tolerances: Tolerances,
    pub branches: Vec<BranchInfo>,
    pub timings: Timings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrcDataset {
    pub stage: Stage,
    pub rows: Vec<Row>,
    pub metadata: Metadata,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format '{s}' (csv, json)"))),
        }
    }

    fn ext(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonDoc {
    stage: Stage,
    columns: Vec<String>,
    rows: Vec<serde_json::Value>,
    metadata: Metadata,
}

impl FrcDataset {
    pub fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> = FIXED_HEAD.iter().map(|s| s.to_string()).collect();
        c.extend(self.metadata.outputs.iter().map(|d| format!("amp_{d}")));
        c.extend(FIXED_TAIL.iter().map(|s| s.to_string()));
        c
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.rows.iter().filter(|r| r.event == Some(kind)).count()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns())?;
        for r in &self.rows {
            w.write_record(r.fields())?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = JsonDoc {
            stage: self.stage,
            columns: self.columns(),
            rows: self.rows.iter().map(Row::json).collect(),
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Rows of a CSV export. The CSV carries no metadata, so only the rows and
    /// the output DOFs are recovered.
    pub fn rows_from_csv(text: &str) -> Result<(Vec<usize>, Vec<Row>)> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let head: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let n_amp = head.len().checked_sub(FIXED_HEAD.len() + FIXED_TAIL.len()).ok_or_else(|| Error::InvalidInput("short header".into()))?;
        if head[..7] != FIXED_HEAD || head[7 + n_amp..] != FIXED_TAIL {
            return Err(Error::InvalidInput(format!("unexpected columns {head:?}")));
        }
        let outputs = head[7..7 + n_amp]
            .iter()
            .map(|c| c.strip_prefix("amp_").and_then(|d| d.parse().ok()).ok_or_else(|| Error::InvalidInput(format!("bad column '{c}'"))))
            .collect::<Result<Vec<usize>>>()?;
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            rows.push(Row::from_fields(&rec.iter().collect::<Vec<_>>(), n_amp)?);
        }
        Ok((outputs, rows))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JsonDoc = serde_json::from_str(text)?;
        let n_amp = doc.metadata.outputs.len();
        let rows = doc
            .rows
            .iter()
            .map(|v| {
                let arr = v.as_array().ok_or_else(|| Error::InvalidInput("row is not an array".into()))?;
                let cells: Vec<String> = arr
                    .iter()
                    .map(|x| match x {
                        serde_json::Value::Null => String::new(),
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                Row::from_fields(&cells.iter().map(String::as_str).collect::<Vec<_>>(), n_amp)
            })
            .collect::<Result<Vec<_>>>()?;
        if doc.metadata.version != CONFIG_VERSION {
            return Err(Error::InvalidInput(format!("dataset version {}", doc.metadata.version)));
        }
        Ok(FrcDataset { stage: doc.stage, rows, metadata: doc.metadata })
    }

    /// Write `frc_<stage>.<ext>` into `dir` and return the path.
    pub fn export(&self, dir: impl AsRef<Path>, format: Format) -> Result<PathBuf> {
        let path = dir.as_ref().join(format!("frc_{}.{}", self.stage.name(), format.ext()));
        let text = match format {
            Format::Csv => self.to_csv()?,
            Format::Json => self.to_json()?,
        };
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
