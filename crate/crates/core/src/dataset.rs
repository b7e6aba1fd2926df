//! Measured (or synthesized) PCC time series.

use std::fmt;
use std::str::FromStr;

use crate::error::{EdmError, Result};
use crate::simulator::Trace;

/// Network configuration class of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Configuration {
    /// Islanded, perturbations imposed by a grid-forming converter.
    A,
    /// Islanded, load variations.
    B,
    /// Connected to the main grid.
    C,
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Configuration::A => "A",
            Configuration::B => "B",
            Configuration::C => "C",
        })
    }
}

impl FromStr for Configuration {
    type Err = EdmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Configuration::A),
            "B" | "b" => Ok(Configuration::B),
            "C" | "c" => Ok(Configuration::C),
            other => Err(EdmError::Config(format!("unknown configuration `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetMeta {
    pub scenario: String,
    pub configuration: Option<Configuration>,
    pub chp_in_service: Option<bool>,
}

/// Uniformly sampled `(t, v, ω, P, Q)` series at the PCC.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub trace: Trace,
    /// Active power [W].
    pub p: Vec<f64>,
    /// Reactive power [var].
    pub q: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(trace: Trace, p: Vec<f64>, q: Vec<f64>, meta: DatasetMeta) -> Result<Dataset> {
        let ds = Dataset { trace, p, q, meta };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        self.trace.validate()?;
        for len in [self.p.len(), self.q.len()] {
            if len != self.trace.len() {
                return Err(EdmError::LengthMismatch {
                    left: self.trace.len(),
                    right: len,
                });
            }
        }
        if self.p.iter().chain(&self.q).any(|x| !x.is_finite()) {
            return Err(EdmError::NonFinite { what: "powers" });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.trace.dt
    }

    /// Time-contiguous sub-window.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            trace: self.trace.slice(range.clone()),
            p: self.p[range.clone()].to_vec(),
            q: self.q[range].to_vec(),
            meta: self.meta.clone(),
        }
    }
}
