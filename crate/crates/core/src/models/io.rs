//! Plain-text model files.
//!
//! ```text
//! cadsvm-model 1
//! method cad-svm
//! lambda 1.0000000000000001e-5
//! ...
//! centers 3 2
//! <one center per line, comma separated>
//! w 3
//! <one coefficient per line>
//! u 3
//! <one coefficient per line>
//! ```
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{Hyperparams, Method, TrainedModel};
use crate::error::{Error, Result};
use crate::kernels::BasisSet;
use crate::losses::LossParams;

const MAGIC: &str = "cadsvm-model 1";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl TrainedModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let hp = &self.hyper;
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "method {}", self.method_tag());
        for (key, v) in [
            ("lambda", hp.lambda),
            ("lambda_rej", hp.lambda_rej),
            ("sigma", hp.sigma),
            ("sigma_graph", hp.sigma_graph),
            ("tau", hp.tau),
            ("c", hp.c),
            ("d", hp.d),
        ] {
            let _ = writeln!(out, "{key} {}", num(v));
        }
        match &self.loss_params {
            Some(p) => {
                let _ = writeln!(
                    out,
                    "surrogate {} {} {} {} {}",
                    num(p.c()),
                    num(p.d()),
                    num(p.alpha()),
                    num(p.beta()),
                    num(p.eta())
                );
            }
            None => {
                let _ = writeln!(out, "surrogate none");
            }
        }
        let centers = self.basis.centers();
        let _ = writeln!(out, "centers {} {}", centers.nrows(), centers.ncols());
        for row in centers.row_iter() {
            let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        for (key, coef) in [("w", &self.w), ("u", &self.u)] {
            let _ = writeln!(out, "{key} {}", coef.len());
            for &v in coef.iter() {
                let _ = writeln!(out, "{}", num(v));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<TrainedModel> {
        let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
        let magic = lines.next_line()?;
        if magic.trim() != MAGIC {
            return Err(lines.error(1, format!("expected header {MAGIC:?}")));
        }
        let tag = lines.field("method")?;
        let (method, fallback) = match tag.strip_suffix("+fallback") {
            Some(base) => (base.parse::<Method>()?, true),
            None => (tag.parse::<Method>()?, false),
        };
        let mut hp = Hyperparams::default();
        for (key, slot) in [
            ("lambda", &mut hp.lambda),
            ("lambda_rej", &mut hp.lambda_rej),
            ("sigma", &mut hp.sigma),
            ("sigma_graph", &mut hp.sigma_graph),
            ("tau", &mut hp.tau),
            ("c", &mut hp.c),
            ("d", &mut hp.d),
        ] {
            let value = lines.field(key)?;
            *slot = lines.number(&value, 2)?;
        }
        let surrogate = lines.field("surrogate")?;
        let loss_params = if surrogate == "none" {
            None
        } else {
            let v = surrogate
                .split_whitespace()
                .map(|s| lines.number(s, 2))
                .collect::<Result<Vec<f64>>>()?;
            if v.len() != 5 {
                return Err(lines.error(2, "surrogate needs c, d, α, β, η".into()));
            }
            Some(LossParams::new(v[0], v[1], v[2], v[3], v[4])?)
        };
        let shape = lines.field("centers")?;
        let dims = shape
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| lines.error(2, format!("bad size {s:?}"))))
            .collect::<Result<Vec<usize>>>()?;
        if dims.len() != 2 {
            return Err(lines.error(2, "centers needs a row and a column count".into()));
        }
        let (n, dim) = (dims[0], dims[1]);
        let mut centers = DMatrix::zeros(n, dim);
        for i in 0..n {
            let line = lines.next_line()?;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != dim {
                return Err(lines.error(1, format!("expected {dim} coordinates, found {}", cells.len())));
            }
            for (j, cell) in cells.iter().enumerate() {
                centers[(i, j)] = lines.number(cell.trim(), j + 1)?;
            }
        }
        let mut coefs = Vec::new();
        for key in ["w", "u"] {
            let len = lines.field(key)?;
            let len: usize = len.parse().map_err(|_| lines.error(2, format!("bad length {len:?}")))?;
            let mut v = DVector::zeros(len);
            for k in 0..len {
                let line = lines.next_line()?;
                v[k] = lines.number(line.trim(), 1)?;
            }
            coefs.push(v);
        }
        let u = coefs.pop().expect("two vectors read");
        let w = coefs.pop().expect("two vectors read");
        let basis = BasisSet::new(centers, hp.sigma)?;
        Ok(TrainedModel::new(method, basis, w, u, hp, loss_params)?.with_fallback(fallback))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel> {
        TrainedModel::from_text(&std::fs::read_to_string(path)?)
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn error(&self, column: usize, message: String) -> Error {
        Error::Parse {
            line: self.last,
            column,
            message,
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, line)) => {
                self.last = i + 1;
                Ok(line)
            }
            None => {
                self.last += 1;
                Err(self.error(1, "unexpected end of model file".into()))
            }
        }
    }

    /// Reads `key value…` and returns the value part.
    fn field(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.trim().to_string()),
            _ => Err(self.error(1, format!("expected field {key:?}"))),
        }
    }

    fn number(&self, s: &str, column: usize) -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| self.error(column, format!("{s:?} is not a number")))
    }
}
