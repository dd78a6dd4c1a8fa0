//! Quantitative estimate of drug-likeness: unweighted geometric mean of
//! eight asymmetric double-sigmoid desirabilities.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{table_error, table_reader, DescriptorVector, TableError};

/// Desirabilities below this are clamped before taking logs.
pub const MIN_DESIRABILITY: f64 = 1e-6;

pub const QED_DESCRIPTORS: [&str; 8] = ["MW", "ALOGP", "HBA", "HBD", "PSA", "ROTB", "AROM", "ALERTS"];

/// Parameters of one asymmetric double sigmoid, normalized by `dmax`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmoid {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub dmax: f64,
}

impl Sigmoid {
    pub fn desirability(&self, x: f64) -> f64 {
        let rise = 1.0 / (1.0 + (-(x - self.c + self.d / 2.0) / self.e).exp());
        let fall = 1.0 - 1.0 / (1.0 + (-(x - self.c - self.d / 2.0) / self.f).exp());
        (self.a + self.b * rise * fall) / self.dmax
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QedParams {
    /// In `QED_DESCRIPTORS` order.
    pub sigmoids: [Sigmoid; 8],
}

#[derive(Debug, Deserialize)]
struct Row {
    descriptor: String,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
    dmax: f64,
}

impl QedParams {
    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let mut found: [Option<Sigmoid>; 8] = [None; 8];
        for row in table_reader(text).deserialize::<Row>() {
            let r = row.map_err(|e| table_error("qed_params", e))?;
            let idx = QED_DESCRIPTORS
                .iter()
                .position(|&n| n == r.descriptor)
                .ok_or_else(|| table_error("qed_params", format!("unknown descriptor {}", r.descriptor)))?;
            if r.e == 0.0 || r.f == 0.0 || r.dmax == 0.0 {
                return Err(table_error("qed_params", format!("{}: zero denominator", r.descriptor)));
            }
            found[idx] = Some(Sigmoid {
                a: r.a,
                b: r.b,
                c: r.c,
                d: r.d,
                e: r.e,
                f: r.f,
                dmax: r.dmax,
            });
        }
        let mut sigmoids = Vec::with_capacity(8);
        for (i, s) in found.iter().enumerate() {
            sigmoids.push(s.ok_or_else(|| table_error("qed_params", format!("missing {}", QED_DESCRIPTORS[i])))?);
        }
        let sigmoids: [Sigmoid; 8] = sigmoids.try_into().expect("eight rows");
        Ok(Self { sigmoids })
    }

    pub fn bundled() -> &'static QedParams {
        static P: OnceLock<QedParams> = OnceLock::new();
        P.get_or_init(|| QedParams::from_csv(include_str!("../../data/qed_params.csv")).expect("bundled QED table parses"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QedResult {
    pub value: f64,
    pub desirabilities: [f64; 8],
    /// True if any desirability was raised to `MIN_DESIRABILITY`.
    pub clamped: bool,
}

/// Geometric mean of desirabilities, clamping each to `MIN_DESIRABILITY`.
pub fn geometric_mean_clamped(ds: &[f64]) -> (f64, bool) {
    let mut clamped = false;
    let mut sum = 0.0;
    for &d in ds {
        let d = if d < MIN_DESIRABILITY || d.is_nan() {
            clamped = true;
            MIN_DESIRABILITY
        } else {
            d
        };
        sum += d.ln();
    }
    ((sum / ds.len() as f64).exp(), clamped)
}

pub fn qed(d: &DescriptorVector, params: &QedParams) -> QedResult {
    let x = d.qed_inputs();
    let mut desirabilities = [0.0; 8];
    for i in 0..8 {
        desirabilities[i] = params.sigmoids[i].desirability(x[i]);
    }
    let (value, clamped) = geometric_mean_clamped(&desirabilities);
    QedResult {
        value,
        desirabilities,
        clamped,
    }
}
