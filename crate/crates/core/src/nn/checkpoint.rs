//! Versioned plain-text parameter checkpoints.
//!
//! ```text
//! echelon-checkpoint v1
//! meta <key> <value>
//! tensor <name> <rows> <cols>
//! <row 0: cols values separated by single spaces>
//! ...
//! end
//! ```
//!
//! Tensors are written in the order they were added, each row-major. Values use
//! the shortest decimal form that round-trips the `f64` bit pattern.

use std::fmt::Write as _;

use super::matrix::Matrix;
use super::mlp::{Activation, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &str = "echelon-checkpoint v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint<T> {
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, Matrix<T>)>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new() -> Self {
        Self {
            meta: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn tensor(&self, name: &str) -> Option<&Matrix<T>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn push_mlp(&mut self, prefix: &str, net: &Mlp<T>) {
        let widths: Vec<String> = net.widths().iter().map(|w| w.to_string()).collect();
        self.set_meta(&format!("{prefix}.widths"), widths.join(","));
        self.set_meta(&format!("{prefix}.activation"), net.activation().name());
        for (k, p) in net.params().iter().enumerate() {
            let kind = if k % 2 == 0 { "weight" } else { "bias" };
            self.tensors
                .push((format!("{prefix}.{}.{kind}", k / 2), p.clone()));
        }
    }

    pub fn read_mlp(&self, prefix: &str) -> Result<Mlp<T>> {
        let missing = |what: &str| Error::Checkpoint(format!("missing {prefix}.{what}"));
        let widths: Vec<usize> = self
            .meta(&format!("{prefix}.widths"))
            .ok_or_else(|| missing("widths"))?
            .split(',')
            .map(|w| w.parse().map_err(|_| Error::Checkpoint(format!("bad width {w:?}"))))
            .collect::<Result<_>>()?;
        let act = self
            .meta(&format!("{prefix}.activation"))
            .and_then(Activation::parse)
            .ok_or_else(|| missing("activation"))?;
        let params = (0..2 * (widths.len().saturating_sub(1)))
            .map(|k| {
                let kind = if k % 2 == 0 { "weight" } else { "bias" };
                let name = format!("{}.{kind}", k / 2);
                self.tensor(&format!("{prefix}.{name}"))
                    .cloned()
                    .ok_or_else(|| missing(&name))
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_params(&widths, act, params)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, m) in &self.tensors {
            let _ = writeln!(out, "tensor {name} {} {}", m.rows(), m.cols());
            for r in 0..m.rows() {
                let row: Vec<String> = m.row(r).iter().map(|x| format!("{:?}", x.as_f64())).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing or unsupported header".into()));
        }
        let mut ck = Self::new();
        while let Some(line) = lines.next() {
            let mut parts = line.splitn(2, ' ');
            match (parts.next(), parts.next()) {
                (Some("end"), None) => return Ok(ck),
                (Some("meta"), Some(rest)) => {
                    let (k, v) = rest
                        .split_once(' ')
                        .ok_or_else(|| bad(format!("bad meta line {line:?}")))?;
                    ck.meta.push((k.to_string(), v.to_string()));
                }
                (Some("tensor"), Some(rest)) => {
                    let f: Vec<&str> = rest.split(' ').collect();
                    let [name, rows, cols] = f[..] else {
                        return Err(bad(format!("bad tensor line {line:?}")));
                    };
                    let rows: usize = rows.parse().map_err(|_| bad(format!("bad rows in {line:?}")))?;
                    let cols: usize = cols.parse().map_err(|_| bad(format!("bad cols in {line:?}")))?;
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let row = lines.next().ok_or_else(|| bad(format!("truncated tensor {name}")))?;
                        for tok in row.split(' ').filter(|s| !s.is_empty()) {
                            let x: f64 = tok.parse().map_err(|_| bad(format!("bad value {tok:?}")))?;
                            data.push(T::lit(x));
                        }
                    }
                    ck.tensors.push((name.to_string(), Matrix::from_vec(rows, cols, data)?));
                }
                _ => return Err(bad(format!("unexpected line {line:?}"))),
            }
        }
        Err(bad("missing end marker".into()))
    }
}
