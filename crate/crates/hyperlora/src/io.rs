//! On-disk formats: checkpoints, task lists, training histories, field
//! exports and run manifests.
//!
//! A checkpoint is a binary container
//!
//! ```text
//! magic "HYLORACK" | version u32 | header length u64 | header JSON
//! | value count u64 | values as little-endian f64
//! ```
//!
//! next to a pretty-printed JSON sidecar (`<file>.json`) with the same
//! header plus free-form metadata. Nothing time-dependent is written, so
//! equal inputs give byte-identical files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use hyperlora_core::autodiff::{Mat, ParamLayout, ParamVector};
use hyperlora_core::nn::{lora_wrap, AssemblyMode, EmbeddingCodec, HyperNetwork, LoraNetwork, Mlp, MlpConfig};
use hyperlora_core::pde::{SystemKind, Task};
use hyperlora_core::train::EpochRecord;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HYLORACK";
pub const FORMAT_VERSION: u32 = 1;

/// Content hash of the source tree this binary was built from.
pub const CODE_HASH: &str = env!("HYPERLORA_CODE_HASH");

/// What a checkpoint holds, enough to rebuild it without outside context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Mlp {
        config: MlpConfig,
    },
    Lora {
        base: MlpConfig,
        rank: usize,
    },
    Hyper {
        base: MlpConfig,
        net: MlpConfig,
        assembly: AssemblyMode,
        output_scale: f64,
        codec: EmbeddingCodec,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub layout: ParamLayout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model: ModelSpec,
    pub seed: u64,
    pub sections: Vec<Section>,
}

/// Any trained model the tool can save.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Mlp(Mlp),
    Lora(LoraNetwork),
    /// A hypernetwork together with the frozen base it assembles onto.
    Hyper { hyper: HyperNetwork, base: Mlp },
}

impl Model {
    fn parts(&self) -> (ModelSpec, Vec<(&'static str, ParamVector)>) {
        match self {
            Model::Mlp(net) => (
                ModelSpec::Mlp {
                    config: net.config().clone(),
                },
                vec![("params", net.params())],
            ),
            Model::Lora(lora) => (
                ModelSpec::Lora {
                    base: lora.base().config().clone(),
                    rank: lora.rank(),
                },
                vec![("base", lora.base().params()), ("adapters", lora.adapter_params())],
            ),
            Model::Hyper { hyper, base } => (
                ModelSpec::Hyper {
                    base: base.config().clone(),
                    net: hyper.net().config().clone(),
                    assembly: hyper.mode(),
                    output_scale: hyper.output_scale(),
                    codec: hyper.codec().clone(),
                },
                vec![("base", base.params()), ("hypernet", hyper.net().params())],
            ),
        }
    }

    /// The network evaluated at inference (effective weights for adapters).
    pub fn network_for(&self, task: Option<&Task>) -> Result<Mlp> {
        match self {
            Model::Mlp(net) => Ok(net.clone()),
            Model::Lora(lora) => Ok(lora.effective_weights()),
            Model::Hyper { hyper, base } => {
                let task = task.ok_or_else(|| Error::Config("a hypernetwork needs a task to assemble a network".into()))?;
                Ok(hyper.assemble(base, &task.embedding()?)?)
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Mlp(net) => net.config().input_dim,
            Model::Lora(lora) => lora.base().config().input_dim,
            Model::Hyper { base, .. } => base.config().input_dim,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    create_parent(path)?;
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::format(path, e))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    #[serde(flatten)]
    header: &'a CheckpointHeader,
    parameter_count: usize,
    metadata: &'a serde_json::Value,
}

/// Writes `model` to `path` and its sidecar; returns the header written.
pub fn save_checkpoint(path: &Path, model: &Model, seed: u64, metadata: &serde_json::Value) -> Result<CheckpointHeader> {
    let (spec, parts) = model.parts();
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        model: spec,
        seed,
        sections: parts
            .iter()
            .map(|(name, p)| Section {
                name: (*name).to_string(),
                layout: p.layout.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::format(path, e))?;
    let count: usize = parts.iter().map(|(_, p)| p.len()).sum();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    w.write_all(&(count as u64).to_le_bytes()).map_err(io)?;
    for (_, p) in &parts {
        for v in &p.values {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    write_json(
        &sidecar_path(path),
        &Sidecar {
            header: &header,
            parameter_count: count,
            metadata,
        },
    )?;
    Ok(header)
}

fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u64::from_le_bytes(b))
}

fn rebuild(path: &Path, header: &CheckpointHeader, mut sections: Vec<ParamVector>) -> Result<Model> {
    let bad = |detail: &str| Error::format(path, detail);
    let section = |expected: &ParamLayout, p: &ParamVector| -> Result<()> {
        p.expect_layout(expected).map_err(|e| Error::format(path, e))
    };
    match &header.model {
        ModelSpec::Mlp { config } => {
            let [p]: [ParamVector; 1] = sections.try_into().map_err(|_| bad("expected one section"))?;
            section(&config.layout(), &p)?;
            Ok(Model::Mlp(Mlp::from_params(config.clone(), &p)?))
        }
        ModelSpec::Lora { base, rank } => {
            let [b, a]: [ParamVector; 2] = sections.try_into().map_err(|_| bad("expected base and adapter sections"))?;
            section(&base.layout(), &b)?;
            let base = Mlp::from_params(base.clone(), &b)?;
            let mut lora = lora_wrap(&base, *rank, 0)?;
            section(&lora.layout(), &a)?;
            lora.set_adapter_params(&a)?;
            Ok(Model::Lora(lora))
        }
        ModelSpec::Hyper {
            base,
            net,
            assembly,
            output_scale,
            codec,
        } => {
            if sections.len() != 2 {
                return Err(bad("expected base and hypernetwork sections"));
            }
            let h = sections.pop().expect("two sections");
            let b = sections.pop().expect("two sections");
            section(&base.layout(), &b)?;
            section(&net.layout(), &h)?;
            let base_net = Mlp::from_params(base.clone(), &b)?;
            let hyper = HyperNetwork::from_parts(
                Mlp::from_params(net.clone(), &h)?,
                *output_scale,
                *assembly,
                base.clone(),
                codec.clone(),
            )?;
            Ok(Model::Hyper { hyper, base: base_net })
        }
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Model)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb).map_err(|e| Error::io(path, e))?;
    let version = u32::from_le_bytes(vb);
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported format version {version}")));
    }
    let hlen = read_u64(&mut r, path)? as usize;
    let mut json = vec![0u8; hlen];
    r.read_exact(&mut json).map_err(|e| Error::io(path, e))?;
    let header: CheckpointHeader = serde_json::from_slice(&json).map_err(|e| Error::format(path, e))?;
    let count = read_u64(&mut r, path)? as usize;
    let expected: usize = header.sections.iter().map(|s| s.layout.len()).sum();
    if count != expected {
        return Err(Error::format(
            path,
            format!("header declares {expected} values but the payload holds {count}"),
        ));
    }
    let mut sections = Vec::with_capacity(header.sections.len());
    let mut buf = [0u8; 8];
    for s in &header.sections {
        let mut values = Vec::with_capacity(s.layout.len());
        for _ in 0..s.layout.len() {
            r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            values.push(f64::from_le_bytes(buf));
        }
        sections.push(ParamVector::new(values, s.layout.clone())?);
    }
    if r.read(&mut buf).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing bytes after the parameter payload"));
    }
    let model = rebuild(path, &header, sections)?;
    Ok((header, model))
}

/// One line of a task file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    #[serde(flatten)]
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn write_tasks(path: &Path, tasks: &[TaskRecord]) -> Result<()> {
    let mut w = create(path)?;
    for t in tasks {
        serde_json::to_writer(&mut w, t).map_err(|e| Error::format(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_tasks(path: &Path) -> Result<Vec<TaskRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TaskRecord =
            serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        rec.task
            .validate()
            .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub const HISTORY_HEADER: [&str; 8] = ["epoch", "l_ic", "l_bc", "l_physics", "l_data", "total", "lr", "val_total"];

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| Error::format(path, e);
    w.write_record(HISTORY_HEADER).map_err(err)?;
    for h in history {
        let t = &h.train;
        w.write_record([
            h.epoch.to_string(),
            t.l_ic.to_string(),
            t.l_bc.to_string(),
            t.l_physics.to_string(),
            t.l_data.to_string(),
            t.total.to_string(),
            h.lr.to_string(),
            h.val_total.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Field values on a point grid: `x[,y][,t],component,value`.
pub fn write_field(path: &Path, kind: SystemKind, points: &Mat, values: &Mat) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| Error::format(path, e);
    let mut header: Vec<&str> = kind.coordinates().to_vec();
    header.extend(["component", "value"]);
    w.write_record(&header).map_err(err)?;
    for i in 0..points.rows() {
        for (c, name) in kind.components().iter().enumerate() {
            let mut rec: Vec<String> = points.row(i).iter().map(|v| v.to_string()).collect();
            rec.push((*name).to_string());
            rec.push(values.get(i, c).to_string());
            w.write_record(&rec).map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Provenance of one command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Fully resolved configuration, defaults applied.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub code_hash: String,
    pub format_version: u32,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize, seeds: Vec<u64>) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?,
            seeds,
            code_hash: CODE_HASH.to_string(),
            format_version: FORMAT_VERSION,
            outputs: Vec::new(),
        })
    }
}
