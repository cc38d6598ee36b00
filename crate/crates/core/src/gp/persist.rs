//! The `SMOGMETA` text format for fitted models.
//!
//! ```text
//! SMOGMETA 1
//! kernel=separable
//! dim=2
//! objectives=2
//! ...key=value lines, floats at 17 significant digits...
//! rows=3
//! data
//! x0,x1,y0,y1
//! 1.0000000000000000e-1,...
//! ```
//!
//! Only hyperparameters and raw data are stored; the factorization is rebuilt
//! on load, which reproduces the original posterior exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::{FittedGP, MultiOutputDataset, NoiseModel};
use crate::error::{Result, SmogError};
use crate::kernels::{CoregionalizationBlock, EquicorrelatedTaskParams, Matern52Params, MultiOutputKernel};

pub const HEADER: &str = "SMOGMETA 1";

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(",")
}

fn parse_err(msg: impl Into<String>) -> SmogError {
    SmogError::Parse(msg.into())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| parse_err(format!("bad float {t:?}: {e}"))))
        .collect()
}

pub fn to_smogmeta(gp: &FittedGP) -> String {
    let mut out = String::new();
    let k = gp.kernel();
    let _ = writeln!(out, "{HEADER}");
    let kind = match k {
        MultiOutputKernel::Separable { .. } => "separable",
        MultiOutputKernel::Coregionalized { .. } => "coregionalized",
        MultiOutputKernel::Independent { .. } => "independent",
    };
    let _ = writeln!(out, "kernel={kind}");
    let _ = writeln!(out, "dim={}", k.dim());
    let _ = writeln!(out, "objectives={}", k.objectives());
    let _ = writeln!(out, "standardize={}", gp.standardizes());
    match gp.noise() {
        NoiseModel::Global(v) => {
            let _ = writeln!(out, "noise_kind=global\nnoise={}", f(*v));
        }
        NoiseModel::PerObjective(v) => {
            let _ = writeln!(out, "noise_kind=per_objective\nnoise={}", list(v));
        }
    }
    match k {
        MultiOutputKernel::Separable { input, task } => {
            let _ = writeln!(out, "lengthscales={}", list(input.lengthscales()));
            let _ = writeln!(out, "outputscale={}", f(input.outputscale()));
            let _ = writeln!(out, "sigma={}", list(task.sigma()));
            let _ = writeln!(out, "rho={}", f(task.rho()));
        }
        MultiOutputKernel::Coregionalized { input, block } => {
            let _ = writeln!(out, "lengthscales={}", list(input.lengthscales()));
            let _ = writeln!(out, "outputscale={}", f(input.outputscale()));
            let m = block.matrix();
            let rows: Vec<f64> = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
            let _ = writeln!(out, "block={}", list(&rows));
        }
        MultiOutputKernel::Independent { inputs } => {
            for (o, p) in inputs.iter().enumerate() {
                let _ = writeln!(out, "lengthscales.{o}={}", list(p.lengthscales()));
                let _ = writeln!(out, "outputscale.{o}={}", f(p.outputscale()));
            }
        }
    }
    let data = gp.data();
    let _ = writeln!(out, "rows={}", data.len());
    let _ = writeln!(out, "data");
    let cols: Vec<String> = (0..data.dim())
        .map(|j| format!("x{j}"))
        .chain((0..data.objectives()).map(|o| format!("y{o}")))
        .collect();
    let _ = writeln!(out, "{}", cols.join(","));
    for (x, y) in data.inputs().iter().zip(data.outputs()) {
        let vals: Vec<f64> = x.iter().chain(y).copied().collect();
        let _ = writeln!(out, "{}", list(&vals));
    }
    out
}

pub fn from_smogmeta(text: &str) -> Result<FittedGP> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(parse_err(format!("missing `{HEADER}` header")));
    }
    let mut kv = BTreeMap::new();
    for line in lines.by_ref() {
        let line = line.trim();
        if line == "data" {
            break;
        }
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| parse_err(format!("expected key=value, got {line:?}")))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| parse_err(format!("missing key {k}")));
    let usize_of = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|e| parse_err(format!("{k}: {e}"))) };
    let float_of = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|e| parse_err(format!("{k}: {e}"))) };
    let dim = usize_of("dim")?;
    let objectives = usize_of("objectives")?;
    let rows = usize_of("rows")?;
    let standardize = match get("standardize")?.as_str() {
        "true" => true,
        "false" => false,
        other => return Err(parse_err(format!("standardize must be true or false, got {other}"))),
    };
    let noise = match get("noise_kind")?.as_str() {
        "global" => NoiseModel::Global(float_of("noise")?),
        "per_objective" => NoiseModel::PerObjective(parse_list(get("noise")?)?),
        other => return Err(parse_err(format!("unknown noise_kind {other}"))),
    };
    let kernel = match get("kernel")?.as_str() {
        "separable" => MultiOutputKernel::Separable {
            input: Matern52Params::new(parse_list(get("lengthscales")?)?, float_of("outputscale")?)?,
            task: EquicorrelatedTaskParams::new(parse_list(get("sigma")?)?, float_of("rho")?)?,
        },
        "coregionalized" => {
            let vals = parse_list(get("block")?)?;
            if vals.len() != objectives * objectives {
                return Err(parse_err("block has the wrong number of entries"));
            }
            MultiOutputKernel::Coregionalized {
                input: Matern52Params::new(parse_list(get("lengthscales")?)?, float_of("outputscale")?)?,
                block: CoregionalizationBlock::new(DMatrix::from_row_slice(objectives, objectives, &vals))?,
            }
        }
        "independent" => MultiOutputKernel::Independent {
            inputs: (0..objectives)
                .map(|o| {
                    Matern52Params::new(
                        parse_list(get(&format!("lengthscales.{o}"))?)?,
                        float_of(&format!("outputscale.{o}"))?,
                    )
                })
                .collect::<Result<Vec<_>>>()?,
        },
        other => return Err(parse_err(format!("unknown kernel {other}"))),
    };
    let _columns = lines.next().ok_or_else(|| parse_err("missing data column header"))?;
    let mut inputs = Vec::with_capacity(rows);
    let mut outputs = Vec::with_capacity(rows);
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let vals = parse_list(line)?;
        if vals.len() != dim + objectives {
            return Err(parse_err(format!("data row has {} values, expected {}", vals.len(), dim + objectives)));
        }
        inputs.push(vals[..dim].to_vec());
        outputs.push(vals[dim..].to_vec());
    }
    if inputs.len() != rows {
        return Err(parse_err(format!("declared {rows} rows but found {}", inputs.len())));
    }
    let data = MultiOutputDataset::new(dim, objectives, inputs, outputs)?;
    FittedGP::condition(kernel, noise, data, standardize)
}

pub fn write_file(gp: &FittedGP, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_smogmeta(gp))
}

pub fn read_file(path: &Path) -> Result<FittedGP> {
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(format!("{}: {e}", path.display())))?;
    from_smogmeta(&text)
}
