//! Plain-text checkpoint format.
//!
//! ```text
//! guided-rl-checkpoint v1
//! meta horizon 4
//! net policy 210,32,32,9 tanh identity
//! 0.0123 -0.5 ...
//! vector log_std 2
//! 0 0
//! end
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! save/load cycle reproduces every parameter bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{usage, Error, Result};
use crate::nn::{Activation, Mlp};

const HEADER: &str = "guided-rl-checkpoint v1";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub nets: BTreeMap<String, Mlp>,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return usage(format!("checkpoint names must be non-empty without whitespace: {name:?}"));
    }
    Ok(())
}

fn write_floats(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

fn parse_floats(line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values = line
        .split_ascii_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{what}: bad float {t:?}: {e}"))))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != expected {
        return Err(Error::Parse(format!(
            "{what}: expected {expected} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Parse(format!("checkpoint has no '{key}' entry")))
    }

    pub fn net(&self, name: &str) -> Result<&Mlp> {
        self.nets
            .get(name)
            .ok_or_else(|| Error::Parse(format!("checkpoint has no network '{name}'")))
    }

    pub fn vector(&self, name: &str) -> Result<&[f64]> {
        self.vectors
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Parse(format!("checkpoint has no vector '{name}'")))
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        for (k, v) in &self.meta {
            check_name(k)?;
            if v.contains('\n') {
                return usage(format!("meta value for '{k}' spans lines"));
            }
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, net) in &self.nets {
            check_name(name)?;
            let sizes: Vec<String> = net.sizes().iter().map(usize::to_string).collect();
            let _ = writeln!(
                out,
                "net {name} {} {} {}",
                sizes.join(","),
                net.hidden_activation(),
                net.output_activation()
            );
            write_floats(&mut out, net.params());
        }
        for (name, v) in &self.vectors {
            check_name(name)?;
            let _ = writeln!(out, "vector {name} {}", v.len());
            write_floats(&mut out, v);
        }
        out.push_str("end\n");
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(HEADER) => {}
            other => {
                return Err(Error::Parse(format!(
                    "not a checkpoint (expected header {HEADER:?}, found {other:?})"
                )))
            }
        }
        let mut ck = Checkpoint::new();
        let mut ended = false;
        while let Some(line) = lines.next() {
            let mut parts = line.splitn(2, ' ');
            let kind = parts.next().unwrap_or("");
            let rest = parts.next().unwrap_or("");
            match kind {
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    ck.meta.insert(k.to_string(), v.to_string());
                }
                "net" => {
                    let fields: Vec<&str> = rest.split_ascii_whitespace().collect();
                    if fields.len() != 4 {
                        return Err(Error::Parse(format!("malformed net line: {line:?}")));
                    }
                    let sizes = fields[1]
                        .split(',')
                        .map(|s| s.parse::<usize>().map_err(|e| Error::Parse(format!("layer size {s:?}: {e}"))))
                        .collect::<Result<Vec<usize>>>()?;
                    let hidden: Activation = fields[2].parse()?;
                    let output: Activation = fields[3].parse()?;
                    let shape = Mlp::zeros(&sizes, hidden, output).map_err(|e| Error::Parse(e.to_string()))?;
                    let data = lines
                        .next()
                        .ok_or_else(|| Error::Parse(format!("net {} has no parameter line", fields[0])))?;
                    let params = parse_floats(data, shape.num_params(), fields[0])?;
                    let net = Mlp::from_params(&sizes, hidden, output, params).map_err(|e| Error::Parse(e.to_string()))?;
                    ck.nets.insert(fields[0].to_string(), net);
                }
                "vector" => {
                    let fields: Vec<&str> = rest.split_ascii_whitespace().collect();
                    if fields.len() != 2 {
                        return Err(Error::Parse(format!("malformed vector line: {line:?}")));
                    }
                    let n: usize = fields[1]
                        .parse()
                        .map_err(|e| Error::Parse(format!("vector length: {e}")))?;
                    let data = lines.next().unwrap_or("");
                    let v = parse_floats(data, n, fields[0])?;
                    ck.vectors.insert(fields[0].to_string(), v);
                }
                "end" => {
                    ended = true;
                    break;
                }
                "" => {}
                other => return Err(Error::Parse(format!("unknown checkpoint record {other:?}"))),
            }
        }
        if !ended {
            return Err(Error::Parse("checkpoint truncated (missing 'end')".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
