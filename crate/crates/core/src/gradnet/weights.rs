//! Text weight format.
//!
//! ```text
//! tada-weights 1
//! meta <key> <value...>
//! tensor <name> <d0>x<d1>x...
//! <values separated by single spaces>
//! ```
//!
//! Values are written in shortest round-trip exponent notation, so a load
//! reproduces every `f64` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::tensor::Tensor;
use crate::error::{Error, Result};

const HEADER: &str = "tada-weights 1";

/// Ordered named tensors plus free-form manifest entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightFile {
    pub meta: Vec<(String, String)>,
    pub entries: Vec<(String, Tensor)>,
}

impl WeightFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.entries.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Format(format!("missing weight entry '{name}'")))
    }

    /// Copies entry `name` into `dst`, which must already have the stored shape.
    pub fn load_into(&self, name: &str, dst: &mut Tensor) -> Result<()> {
        let src = self.get(name)?;
        if src.shape() != dst.shape() {
            return Err(Error::Format(format!(
                "entry '{name}' has shape {:?}, expected {:?}",
                src.shape(),
                dst.shape()
            )));
        }
        *dst = src.clone();
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, t) in &self.entries {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "tensor {name} {}", dims.join("x"));
            let vals: Vec<String> = t.data().iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(HEADER) {
            return Err(Error::Format("missing 'tada-weights 1' header".into()));
        }
        let mut wf = WeightFile::new();
        while let Some(line) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                wf.meta.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let (name, dims) = rest
                    .split_once(' ')
                    .ok_or_else(|| Error::Format(format!("bad tensor line '{line}'")))?;
                let shape = dims
                    .trim()
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Format(format!("bad shape '{dims}' for '{name}'")))?;
                let vals = lines
                    .next()
                    .ok_or_else(|| Error::Format(format!("no values for '{name}'")))?;
                let data = vals
                    .split_whitespace()
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Format(format!("bad value in '{name}'")))?;
                if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Format(format!("non-finite value {i} in '{name}'")));
                }
                wf.entries.push((name.to_string(), Tensor::new(shape, data)?));
            } else {
                return Err(Error::Format(format!("unrecognized line '{line}'")));
            }
        }
        Ok(wf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    proptest::proptest! {
        #[test]
        fn text_round_trip_is_bitwise(vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 1..40)) {
            let mut wf = WeightFile::new();
            wf.set_meta("seed", 7);
            wf.push("layer.w", Tensor::vector(&vals));
            let back = WeightFile::parse(&wf.to_text()).unwrap();
            let got = back.get("layer.w").unwrap();
            for (a, b) in got.data().iter().zip(&vals) {
                proptest::prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            proptest::prop_assert_eq!(back.meta("seed"), Some("7"));
        }
    }

    #[test]
    fn shape_checked_on_load() {
        let mut wf = WeightFile::new();
        wf.push("a", Tensor::zeros(&[2, 3]));
        let mut dst = Tensor::zeros(&[3, 2]);
        assert!(wf.load_into("a", &mut dst).is_err());
        assert!(wf.load_into("b", &mut dst).is_err());
    }

    #[test]
    fn garbage_rejected() {
        assert!(WeightFile::parse("nope").is_err());
        assert!(WeightFile::parse("tada-weights 1\ntensor a 2\n1.0\n").is_err());
        assert!(WeightFile::parse("tada-weights 1\ntensor a 1\nNaN\n").is_err());
    }
}
