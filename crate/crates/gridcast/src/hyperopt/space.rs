//! Typed hyperparameter dimensions, assignments, and trial records.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{Error, Result};

/// One search dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimensionKind {
    Real {
        lo: f64,
        hi: f64,
        #[serde(default)]
        log: bool,
    },
    Integer {
        lo: i64,
        hi: i64,
    },
    Categorical {
        choices: Vec<String>,
    },
    /// Binary flag deciding whether a named feature (and its network branch)
    /// exists in the model.
    BinaryFeature {
        feature: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    #[serde(flatten)]
    pub kind: DimensionKind,
}

impl Dimension {
    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        Dimension {
            name: name.into(),
            kind: DimensionKind::Real { lo, hi, log: false },
        }
    }

    pub fn log_real(name: &str, lo: f64, hi: f64) -> Self {
        Dimension {
            name: name.into(),
            kind: DimensionKind::Real { lo, hi, log: true },
        }
    }

    pub fn integer(name: &str, lo: i64, hi: i64) -> Self {
        Dimension {
            name: name.into(),
            kind: DimensionKind::Integer { lo, hi },
        }
    }

    pub fn categorical(name: &str, choices: &[&str]) -> Self {
        Dimension {
            name: name.into(),
            kind: DimensionKind::Categorical {
                choices: choices.iter().map(|c| c.to_string()).collect(),
            },
        }
    }

    pub fn binary_feature(feature: &str) -> Self {
        Dimension {
            name: format!("feat:{feature}"),
            kind: DimensionKind::BinaryFeature {
                feature: feature.into(),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            DimensionKind::Real { lo, hi, log } => {
                if !(lo < hi) {
                    return Err(Error::Argument(format!(
                        "dimension {}: lo {lo} must be < hi {hi}",
                        self.name
                    )));
                }
                if *log && *lo <= 0.0 {
                    return Err(Error::Argument(format!(
                        "dimension {}: log scale requires lo > 0",
                        self.name
                    )));
                }
            }
            DimensionKind::Integer { lo, hi } => {
                if !(lo < hi) {
                    return Err(Error::Argument(format!(
                        "dimension {}: lo {lo} must be < hi {hi}",
                        self.name
                    )));
                }
            }
            DimensionKind::Categorical { choices } => {
                if choices.len() < 2 {
                    return Err(Error::Argument(format!(
                        "dimension {}: categorical needs >= 2 choices",
                        self.name
                    )));
                }
            }
            DimensionKind::BinaryFeature { .. } => {}
        }
        Ok(())
    }

    /// Width of this dimension in the numeric encoding.
    pub fn encoded_width(&self) -> usize {
        match &self.kind {
            DimensionKind::Categorical { choices } => choices.len(),
            _ => 1,
        }
    }

    pub fn contains(&self, value: &ParamValue) -> bool {
        match (&self.kind, value) {
            (DimensionKind::Real { lo, hi, .. }, ParamValue::Real(v)) => {
                v.is_finite() && *v >= *lo && *v <= *hi
            }
            (DimensionKind::Integer { lo, hi }, ParamValue::Int(v)) => v >= lo && v <= hi,
            (DimensionKind::Categorical { choices }, ParamValue::Cat(i)) => *i < choices.len(),
            (DimensionKind::BinaryFeature { .. }, ParamValue::Bin(_)) => true,
            _ => false,
        }
    }

    /// Independent uniform draw; log-uniform where flagged.
    pub fn sample(&self, rng: &mut impl Rng) -> ParamValue {
        match &self.kind {
            DimensionKind::Real { lo, hi, log } => {
                if *log {
                    let v = rng.random_range(lo.ln()..hi.ln()).exp();
                    ParamValue::Real(v.clamp(*lo, *hi))
                } else {
                    ParamValue::Real(rng.random_range(*lo..*hi))
                }
            }
            DimensionKind::Integer { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
            DimensionKind::Categorical { choices } => {
                ParamValue::Cat(rng.random_range(0..choices.len()))
            }
            DimensionKind::BinaryFeature { .. } => ParamValue::Bin(rng.random_bool(0.5)),
        }
    }

    fn encode_into(&self, value: &ParamValue, out: &mut Vec<f64>) -> Result<()> {
        if !self.contains(value) {
            return Err(Error::Argument(format!(
                "value {value:?} out of domain for dimension {}",
                self.name
            )));
        }
        match (&self.kind, value) {
            (DimensionKind::Real { lo, hi, log }, ParamValue::Real(v)) => {
                if *log {
                    out.push((v.ln() - lo.ln()) / (hi.ln() - lo.ln()));
                } else {
                    out.push((v - lo) / (hi - lo));
                }
            }
            (DimensionKind::Integer { lo, hi }, ParamValue::Int(v)) => {
                out.push((v - lo) as f64 / (hi - lo) as f64);
            }
            (DimensionKind::Categorical { choices }, ParamValue::Cat(i)) => {
                for c in 0..choices.len() {
                    out.push(if c == *i { 1.0 } else { 0.0 });
                }
            }
            (DimensionKind::BinaryFeature { .. }, ParamValue::Bin(b)) => {
                out.push(if *b { 1.0 } else { 0.0 });
            }
            _ => unreachable!("contains() checked the pairing"),
        }
        Ok(())
    }

    fn decode_from(&self, enc: &[f64]) -> ParamValue {
        match &self.kind {
            DimensionKind::Real { lo, hi, log } => {
                let x = enc[0];
                let v = if *log {
                    (lo.ln() + x * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + x * (hi - lo)
                };
                ParamValue::Real(v.clamp(*lo, *hi))
            }
            DimensionKind::Integer { lo, hi } => {
                let v = lo + (enc[0] * (hi - lo) as f64).round() as i64;
                ParamValue::Int(v.clamp(*lo, *hi))
            }
            DimensionKind::Categorical { choices } => {
                let mut best = 0;
                for i in 1..choices.len() {
                    if enc[i] > enc[best] {
                        best = i;
                    }
                }
                ParamValue::Cat(best)
            }
            DimensionKind::BinaryFeature { .. } => ParamValue::Bin(enc[0] >= 0.5),
        }
    }
}

/// Ordered, uniquely named set of dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpace {
    dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        for d in &dims {
            d.validate()?;
        }
        for i in 1..dims.len() {
            if dims[..i].iter().any(|d| d.name == dims[i].name) {
                return Err(Error::Argument(format!(
                    "duplicate dimension name {}",
                    dims[i].name
                )));
            }
        }
        Ok(SearchSpace { dims })
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn encoded_width(&self) -> usize {
        self.dims.iter().map(|d| d.encoded_width()).sum()
    }

    /// Sub-space of the dimensions at `indices`, in the given order.
    pub fn project(&self, indices: &[usize]) -> SearchSpace {
        SearchSpace {
            dims: indices.iter().map(|&i| self.dims[i].clone()).collect(),
        }
    }
}

/// One value per dimension, in space order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Real(f64),
    Int(i64),
    Cat(usize),
    Bin(bool),
}

impl ParamValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            ParamValue::Real(v) => *v,
            ParamValue::Int(v) => *v as f64,
            ParamValue::Cat(i) => *i as f64,
            ParamValue::Bin(b) => {
                if *b {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub type Theta = Vec<ParamValue>;

/// Uniform draw over the whole space.
pub fn sample_random(space: &SearchSpace, rng: &mut impl Rng) -> Theta {
    space.dims().iter().map(|d| d.sample(rng)).collect()
}

/// Numeric encoding for surrogates: reals and integers min-max scaled to
/// [0,1] (log scale first where flagged), categoricals one-hot, flags 0/1.
pub fn encode(theta: &Theta, space: &SearchSpace) -> Result<Vec<f64>> {
    if theta.len() != space.len() {
        return Err(Error::Argument(format!(
            "theta has {} values for {} dimensions",
            theta.len(),
            space.len()
        )));
    }
    let mut out = Vec::with_capacity(space.encoded_width());
    for (d, v) in space.dims().iter().zip(theta) {
        d.encode_into(v, &mut out)?;
    }
    Ok(out)
}

/// Inverse of [`encode`]; integers round to the nearest domain point and
/// categoricals take the arg-max slot.
pub fn decode(encoded: &[f64], space: &SearchSpace) -> Result<Theta> {
    if encoded.len() != space.encoded_width() {
        return Err(Error::Argument(format!(
            "encoded vector has width {}, space requires {}",
            encoded.len(),
            space.encoded_width()
        )));
    }
    let mut theta = Vec::with_capacity(space.len());
    let mut at = 0;
    for d in space.dims() {
        let w = d.encoded_width();
        theta.push(d.decode_from(&encoded[at..at + w]));
        at += w;
    }
    Ok(theta)
}

/// Provenance of a trial within a tuning run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Random,
    Bo,
    Dropout,
    Hier(usize),
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Random => write!(f, "random"),
            Provenance::Bo => write!(f, "bo"),
            Provenance::Dropout => write!(f, "dropout"),
            Provenance::Hier(level) => write!(f, "hier({level})"),
        }
    }
}

/// An evaluated hyperparameter assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trial {
    pub theta: Theta,
    pub value: f64,
    pub iteration: usize,
    pub provenance: Provenance,
    /// Objective failures are recorded (with a penalized value) but never
    /// become incumbents and never feed surrogates.
    pub failed: bool,
}

/// Human-readable `name -> value` JSON for a theta.
pub fn theta_to_json(space: &SearchSpace, theta: &Theta) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (d, v) in space.dims().iter().zip(theta) {
        let val = match (&d.kind, v) {
            (DimensionKind::Categorical { choices }, ParamValue::Cat(i)) => {
                json!(choices[*i])
            }
            (_, ParamValue::Real(x)) => json!(x),
            (_, ParamValue::Int(x)) => json!(x),
            (_, ParamValue::Bin(b)) => json!(if *b { 1 } else { 0 }),
            (_, ParamValue::Cat(i)) => json!(i),
        };
        map.insert(d.name.clone(), val);
    }
    serde_json::Value::Object(map)
}
