//! Parameter checkpoints shared by the agent, the covariance model and BC
//! policies.
//!
//! Line 1 is a header with free-form string metadata and a manifest of the
//! stored entries; each further line holds one tensor. Reals use the same
//! 17-significant-digit encoding as the demo files.
//!
//! ```text
//! {"format":"dgn-checkpoint","version":1,"meta":{"method":"dgn",...},"manifest":[{"name":"actor","kind":"mlp","layer_sizes":[4,256,2],"dropout_rate":0.0e0},{"name":"bc.log_std","kind":"vector","len":2}]}
//! {"name":"actor","part":"w0","shape":[4,256],"values":[...]}
//! {"name":"actor","part":"b0","shape":[256],"values":[...]}
//! {"name":"bc.log_std","part":"v","shape":[2],"values":[...]}
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demos::{fmt_real, fmt_reals};
use crate::error::{Error, Result};
use crate::numcore::{MlpParams, RealMatrix};

pub const FORMAT_TAG: &str = "dgn-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Mlp(MlpParams),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    entries: Vec<(String, Entry)>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ManifestItem {
    Mlp {
        name: String,
        layer_sizes: Vec<usize>,
        dropout_rate: f64,
    },
    Vector {
        name: String,
        len: usize,
    },
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    meta: BTreeMap<String, String>,
    manifest: Vec<ManifestItem>,
}

#[derive(Deserialize)]
struct TensorLine {
    name: String,
    part: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::contract(format!("checkpoint lacks meta key `{key}`")))
    }

    pub fn put_mlp(&mut self, name: &str, net: &MlpParams) {
        self.entries.retain(|(n, _)| n != name);
        self.entries.push((name.to_string(), Entry::Mlp(net.clone())));
    }

    pub fn put_vector(&mut self, name: &str, v: &[f64]) {
        self.entries.retain(|(n, _)| n != name);
        self.entries.push((name.to_string(), Entry::Vector(v.to_vec())));
    }

    pub fn has(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n == name)
    }

    pub fn mlp(&self, name: &str) -> Result<&MlpParams> {
        match self.entries.iter().find(|(n, _)| n == name) {
            Some((_, Entry::Mlp(m))) => Ok(m),
            _ => Err(Error::contract(format!("checkpoint lacks network `{name}`"))),
        }
    }

    pub fn vector(&self, name: &str) -> Result<&[f64]> {
        match self.entries.iter().find(|(n, _)| n == name) {
            Some((_, Entry::Vector(v))) => Ok(v),
            _ => Err(Error::contract(format!("checkpoint lacks vector `{name}`"))),
        }
    }

    pub fn to_text(&self) -> String {
        let manifest: Vec<ManifestItem> = self
            .entries
            .iter()
            .map(|(name, e)| match e {
                Entry::Mlp(m) => ManifestItem::Mlp {
                    name: name.clone(),
                    layer_sizes: m.layer_sizes().to_vec(),
                    dropout_rate: m.dropout_rate(),
                },
                Entry::Vector(v) => ManifestItem::Vector {
                    name: name.clone(),
                    len: v.len(),
                },
            })
            .collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{{\"format\":\"{FORMAT_TAG}\",\"version\":1,\"meta\":{},\"manifest\":{}}}",
            serde_json::to_string(&self.meta).expect("string map"),
            serde_json::to_string(&manifest).expect("plain data"),
        );
        let mut line = |name: &str, part: &str, shape: &[usize], values: &[f64]| {
            let shape: Vec<String> = shape.iter().map(|s| s.to_string()).collect();
            let _ = writeln!(
                out,
                "{{\"name\":{},\"part\":\"{part}\",\"shape\":[{}],\"values\":{}}}",
                serde_json::to_string(name).expect("string"),
                shape.join(","),
                fmt_reals(values)
            );
        };
        for (name, e) in &self.entries {
            match e {
                Entry::Mlp(m) => {
                    for (l, (w, b)) in m.weights.iter().zip(&m.biases).enumerate() {
                        line(name, &format!("w{l}"), &[w.rows(), w.cols()], w.as_slice());
                        line(name, &format!("b{l}"), &[b.len()], b);
                    }
                }
                Entry::Vector(v) => line(name, "v", &[v.len()], v),
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::parse(Path::new("<memory>"), text)
    }

    fn parse(path: &Path, text: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().ok_or_else(|| perr(1, "empty checkpoint".into()))?;
        let header: Header =
            serde_json::from_str(first).map_err(|e| perr(1, format!("bad header: {e}")))?;
        if header.format != FORMAT_TAG || header.version != 1 {
            return Err(perr(1, format!("unsupported format {}", header.format)));
        }
        let mut next_tensor = |expect_name: &str, expect_part: &str, shape: &[usize]| {
            let (no, l) = lines
                .next()
                .ok_or_else(|| perr(0, format!("missing tensor {expect_name}.{expect_part}")))?;
            let t: TensorLine =
                serde_json::from_str(l).map_err(|e| perr(no, format!("bad tensor line: {e}")))?;
            if t.name != expect_name || t.part != expect_part || t.shape != shape {
                return Err(perr(
                    no,
                    format!(
                        "expected {expect_name}.{expect_part} {shape:?}, found {}.{} {:?}",
                        t.name, t.part, t.shape
                    ),
                ));
            }
            if t.values.len() != shape.iter().product::<usize>() {
                return Err(perr(no, "value count does not match shape".into()));
            }
            Ok(t.values)
        };
        let mut ck = Checkpoint {
            meta: header.meta,
            entries: Vec::new(),
        };
        for item in header.manifest {
            match item {
                ManifestItem::Mlp {
                    name,
                    layer_sizes,
                    dropout_rate,
                } => {
                    let mut weights = Vec::new();
                    let mut biases = Vec::new();
                    for l in 0..layer_sizes.len().saturating_sub(1) {
                        let shape = [layer_sizes[l], layer_sizes[l + 1]];
                        let w = next_tensor(&name, &format!("w{l}"), &shape)?;
                        weights.push(RealMatrix::from_vec(shape[0], shape[1], w)?);
                        biases.push(next_tensor(&name, &format!("b{l}"), &[shape[1]])?);
                    }
                    let m = MlpParams::from_parts(layer_sizes, weights, biases, dropout_rate)?;
                    ck.entries.push((name, Entry::Mlp(m)));
                }
                ManifestItem::Vector { name, len } => {
                    let v = next_tensor(&name, "v", &[len])?;
                    ck.entries.push((name, Entry::Vector(v)));
                }
            }
        }
        if let Some((no, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(perr(no, "trailing data after manifest entries".into()));
        }
        Ok(ck)
    }
}

/// Writes `key=value` meta entries for reals at full precision.
pub fn real_meta(v: f64) -> String {
    fmt_real(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::SeededRng;

    #[test]
    fn round_trip_exact() {
        let mut rng = SeededRng::new(4);
        let net = MlpParams::init(&[3, 5, 2], 0.5, &mut rng).unwrap();
        let mut ck = Checkpoint::new();
        ck.set_meta("method", "dgn");
        ck.put_mlp("actor", &net);
        ck.put_vector("log_std", &[0.1, -0.3]);
        let back = Checkpoint::from_text(&ck.to_text()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.mlp("actor").unwrap().fingerprint(), net.fingerprint());
        assert!(back.mlp("critic").is_err());
        assert_eq!(back.meta("method").unwrap(), "dgn");
    }

    #[test]
    fn truncated_checkpoint_fails() {
        let mut rng = SeededRng::new(4);
        let net = MlpParams::init(&[3, 5, 2], 0.0, &mut rng).unwrap();
        let mut ck = Checkpoint::new();
        ck.put_mlp("actor", &net);
        let text = ck.to_text();
        let cut: Vec<&str> = text.lines().take(3).collect();
        assert!(Checkpoint::from_text(&cut.join("\n")).is_err());
    }
}
