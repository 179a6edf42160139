//! Model files: a text manifest followed by little-endian `f64` arrays.
//!
//! ```text
//! fingait-model
//! format_version=1
//! kind=feedforward
//! target=thrust
//! material=Rigid
//! norm=0.75,2,0,55,0,55,-22.5,45
//! ...
//! array=params:4481
//! end_header
//! <4481 × 8 bytes>
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gait::Material;

use super::ff::FeedforwardNet;
use super::poly::{parse_monomial, PolynomialModel};
use super::seq::SequenceNet;
use super::{ForwardModel, InputNorm, ModelBody, Target};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "fingait-model";
const END: &str = "end_header";

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

pub fn encode_model(model: &ForwardModel) -> Vec<u8> {
    let mut head: Vec<(String, String)> = vec![
        ("format_version".into(), MODEL_FORMAT_VERSION.to_string()),
        ("kind".into(), model.kind().to_string()),
        ("target".into(), model.target.name().into()),
        ("material".into(), model.material.name().into()),
        (
            "norm".into(),
            join(&model.norm.ranges.iter().flat_map(|&(a, b)| [a, b]).collect::<Vec<_>>()),
        ),
        ("train_mae".into(), opt(model.train_mae)),
        ("holdout_mae".into(), opt(model.holdout_mae)),
    ];
    let arrays: Vec<(&str, &[f64])> = match &model.body {
        ModelBody::Polynomial(p) => {
            head.push(("degree".into(), p.degree.to_string()));
            head.push(("terms".into(), p.term_names().join(",")));
            vec![("coeffs", &p.coeffs)]
        }
        ModelBody::Feedforward(n) => {
            let layers: Vec<String> = n.layers.iter().map(|l| l.to_string()).collect();
            head.push(("layers".into(), layers.join(",")));
            head.push(("y_mean".into(), n.y_mean.to_string()));
            head.push(("y_std".into(), n.y_std.to_string()));
            vec![("params", &n.params)]
        }
        ModelBody::Sequence(n) => {
            head.push(("hidden".into(), n.hidden.to_string()));
            head.push(("samples_per_cycle".into(), n.samples_per_cycle.to_string()));
            head.push(("y_mean".into(), join(&n.y_mean)));
            head.push(("y_std".into(), join(&n.y_std)));
            head.push(("head_train_mae".into(), join(&n.train_mae)));
            head.push((
                "head_holdout_mae".into(),
                n.holdout_mae.map_or_else(|| "none".to_string(), |m| join(&m)),
            ));
            vec![("params", &n.params)]
        }
    };
    let mut text = format!("{MAGIC}\n");
    for (k, v) in &head {
        text.push_str(&format!("{k}={v}\n"));
    }
    for (name, a) in &arrays {
        text.push_str(&format!("array={name}:{}\n", a.len()));
    }
    text.push_str(END);
    text.push('\n');
    let mut bytes = text.into_bytes();
    for (_, a) in &arrays {
        for x in a.iter() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    bytes
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<ForwardModel> {
    let bad = |reason: String| Error::ModelFormat {
        path: path.to_path_buf(),
        reason,
    };
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let nl = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("header is not terminated".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + nl]).map_err(|_| bad("header is not UTF-8".into()))?;
        pos += nl + 1;
        if line == END {
            break;
        }
        lines.push(line);
        if lines.len() > 64 {
            return Err(bad("header is too long".into()));
        }
    }
    if lines.first() != Some(&MAGIC) {
        return Err(bad("not a model file".into()));
    }
    let mut keys = BTreeMap::new();
    let mut arrays = Vec::new();
    for line in &lines[1..] {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header line '{line}'")))?;
        if k == "array" {
            let (name, len) = v
                .split_once(':')
                .ok_or_else(|| bad(format!("malformed array line '{line}'")))?;
            let len: usize = len.parse().map_err(|_| bad(format!("bad array length in '{line}'")))?;
            arrays.push((name.to_string(), len));
        } else {
            keys.insert(k.to_string(), v.to_string());
        }
    }
    let get = |k: &str| keys.get(k).map(String::as_str).ok_or_else(|| bad(format!("missing header key '{k}'")));
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(format!("bad number for '{k}'"))) };
    let count = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("bad integer for '{k}'"))) };
    let list = |k: &str| -> Result<Vec<f64>> {
        get(k)?
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad list for '{k}'"))))
            .collect()
    };
    let maybe = |k: &str| -> Result<Option<f64>> {
        match get(k)? {
            "none" => Ok(None),
            s => s.parse().map(Some).map_err(|_| bad(format!("bad number for '{k}'"))),
        }
    };
    let pair = |k: &str| -> Result<[f64; 2]> {
        let v = list(k)?;
        <[f64; 2]>::try_from(v).map_err(|_| bad(format!("'{k}' needs two values")))
    };

    let version = count("format_version")?;
    if version != MODEL_FORMAT_VERSION as usize {
        return Err(bad(format!(
            "format version {version} is not supported (expected {MODEL_FORMAT_VERSION})"
        )));
    }
    let target: Target = get("target")?.parse().map_err(|e: Error| bad(e.to_string()))?;
    let material: Material = get("material")?.parse().map_err(|e: Error| bad(e.to_string()))?;
    let nv = list("norm")?;
    if nv.len() != 8 {
        return Err(bad("norm needs eight values".into()));
    }
    let norm = InputNorm {
        ranges: [(nv[0], nv[1]), (nv[2], nv[3]), (nv[4], nv[5]), (nv[6], nv[7])],
    };
    norm.validate().map_err(|e| bad(e.to_string()))?;

    let mut data = Vec::new();
    for (name, len) in &arrays {
        let n_bytes = len.checked_mul(8).ok_or_else(|| bad("array too large".into()))?;
        let chunk = bytes
            .get(pos..pos + n_bytes)
            .ok_or_else(|| bad(format!("array '{name}' is truncated")))?;
        pos += n_bytes;
        let values: Vec<f64> = chunk
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        data.push((name.as_str(), values));
    }
    if pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes after the declared arrays", bytes.len() - pos)));
    }
    let mut take = |name: &str| -> Result<Vec<f64>> {
        let i = data
            .iter()
            .position(|(n, _)| *n == name)
            .ok_or_else(|| bad(format!("missing array '{name}'")))?;
        Ok(data.swap_remove(i).1)
    };

    let kind = get("kind")?;
    let body = match kind {
        "linear" | "quartic" => poly_body(take("coeffs")?, count("degree")?, get("terms")?).map_err(|e| bad(e.to_string()))?,
        k if k.starts_with("polynomial-") => {
            poly_body(take("coeffs")?, count("degree")?, get("terms")?).map_err(|e| bad(e.to_string()))?
        }
        "feedforward" => {
            let layers: Vec<usize> = get("layers")?
                .split(',')
                .map(|s| s.parse().map_err(|_| bad("bad layer width".into())))
                .collect::<Result<_>>()?;
            if layers.len() < 2 || layers[0] != 4 || *layers.last().unwrap() != 1 {
                return Err(bad("feedforward layers must start at 4 and end at 1".into()));
            }
            let params = take("params")?;
            let expected: usize = layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
            if params.len() != expected {
                return Err(bad(format!("expected {expected} parameters, found {}", params.len())));
            }
            ModelBody::Feedforward(FeedforwardNet {
                layers,
                params,
                y_mean: num("y_mean")?,
                y_std: num("y_std")?,
            })
        }
        "sequence" => {
            let hidden = count("hidden")?;
            let params = take("params")?;
            let expected = (6 + hidden) * 4 * hidden + 4 * hidden + hidden * 2 + 2;
            if hidden == 0 || params.len() != expected {
                return Err(bad(format!("expected {expected} parameters, found {}", params.len())));
            }
            let holdout = match get("head_holdout_mae")? {
                "none" => None,
                _ => Some(pair("head_holdout_mae")?),
            };
            ModelBody::Sequence(SequenceNet {
                hidden,
                samples_per_cycle: count("samples_per_cycle")?,
                params,
                y_mean: pair("y_mean")?,
                y_std: pair("y_std")?,
                train_mae: pair("head_train_mae")?,
                holdout_mae: holdout,
            })
        }
        other => return Err(bad(format!("unknown model kind '{other}'"))),
    };
    Ok(ForwardModel {
        target,
        material,
        norm,
        body,
        train_mae: maybe("train_mae")?,
        holdout_mae: maybe("holdout_mae")?,
    })
}

fn poly_body(coeffs: Vec<f64>, degree: usize, terms: &str) -> Result<ModelBody> {
    let terms = terms.split(',').map(parse_monomial).collect::<Result<Vec<_>>>()?;
    if terms.len() != coeffs.len() {
        return Err(Error::input("term count does not match coefficient count"));
    }
    if terms.iter().any(|e| e.iter().map(|&k| k as usize).sum::<usize>() > degree) {
        return Err(Error::input("a term exceeds the declared degree"));
    }
    Ok(ModelBody::Polynomial(PolynomialModel { degree, terms, coeffs }))
}

pub fn save_model(model: &ForwardModel, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

/// Loads a model, refusing it when `expect` names a different material or
/// target.
pub fn load_model(path: &Path, expect: Option<(Material, Target)>) -> Result<ForwardModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let model = decode_model(&bytes, path)?;
    if let Some((m, t)) = expect {
        if model.material != m || model.target != t {
            return Err(Error::ModelFormat {
                path: path.to_path_buf(),
                reason: format!(
                    "model is for {} {}, expected {} {}",
                    model.material.name(),
                    model.target,
                    m.name(),
                    t
                ),
            });
        }
    }
    Ok(model)
}
