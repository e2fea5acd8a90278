use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolutionSource {
    Ins,
    Qdr,
    Quadnet,
}

impl fmt::Display for SolutionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolutionSource::Ins => "ins",
            SolutionSource::Qdr => "qdr",
            SolutionSource::Quadnet => "quadnet",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolutionMeta {
    pub split: Option<String>,
    pub mode: Option<String>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionPoint {
    pub t: f64,
    /// NED position, m.
    pub p: Vector3<f64>,
}

/// A reconstructed track: NED positions at strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySolution {
    samples: Vec<SolutionPoint>,
    pub source: SolutionSource,
    pub meta: SolutionMeta,
}

impl TrajectorySolution {
    pub fn new(samples: Vec<SolutionPoint>, source: SolutionSource) -> Result<Self> {
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidInput(format!(
                "solution timestamps not strictly increasing at {}",
                i + 1
            )));
        }
        Ok(TrajectorySolution {
            samples,
            source,
            meta: SolutionMeta::default(),
        })
    }

    pub fn empty(source: SolutionSource) -> Self {
        TrajectorySolution {
            samples: Vec::new(),
            source,
            meta: SolutionMeta::default(),
        }
    }

    pub fn samples(&self) -> &[SolutionPoint] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&SolutionPoint> {
        self.samples.last()
    }

    pub fn path_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].p - w[0].p).norm())
            .sum()
    }
}
