//! Per-dimension action discretization.
//!
//! Each action dimension is quantized independently into a small number of
//! bins; the joint action is the vector of per-dimension bin indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint-action cardinalities above this are rejected for tabular use.
pub const MAX_TABULAR_JOINT_ACTIONS: u64 = 10_000_000;

/// Range of one action dimension: a continuous interval quantized into
/// uniform bins, or a natively categorical dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum DimRange {
    Continuous { lo: f64, hi: f64 },
    Discrete,
}

impl Serialize for DimRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DimRange::Continuous { lo, hi } => {
                use serde::ser::SerializeStruct;
                let mut st = s.serialize_struct("DimRange", 2)?;
                st.serialize_field("lo", lo)?;
                st.serialize_field("hi", hi)?;
                st.end()
            }
            DimRange::Discrete => s.serialize_str("discrete"),
        }
    }
}

impl<'de> Deserialize<'de> for DimRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Continuous { lo: f64, hi: f64 },
            Marker(String),
        }
        match Raw::deserialize(d)? {
            Raw::Continuous { lo, hi } => Ok(DimRange::Continuous { lo, hi }),
            Raw::Marker(m) if m == "discrete" => Ok(DimRange::Discrete),
            Raw::Marker(m) => Err(serde::de::Error::custom(format!(
                "unknown range marker {m:?}, expected \"discrete\" or {{lo, hi}}"
            ))),
        }
    }
}

/// Discretization layout of the whole action space: how many bins each
/// dimension has and what continuous interval (if any) they cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub num_dims: usize,
    pub bins: Vec<u16>,
    pub ranges: Vec<DimRange>,
}

impl ActionSpec {
    pub fn new(bins: Vec<u16>, ranges: Vec<DimRange>) -> Result<Self> {
        let spec = ActionSpec {
            num_dims: bins.len(),
            bins,
            ranges,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// All dimensions natively categorical.
    pub fn discrete(bins: Vec<u16>) -> Result<Self> {
        let ranges = vec![DimRange::Discrete; bins.len()];
        Self::new(bins, ranges)
    }

    /// `num_dims` continuous dimensions sharing one range and bin count.
    pub fn uniform_continuous(num_dims: usize, bins: u16, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            vec![bins; num_dims],
            vec![DimRange::Continuous { lo, hi }; num_dims],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_dims == 0 {
            return Err(Error::InvalidActionSpec("num_dims must be >= 1".into()));
        }
        if self.bins.len() != self.num_dims || self.ranges.len() != self.num_dims {
            return Err(Error::InvalidActionSpec(format!(
                "num_dims = {} but bins has {} entries and ranges has {}",
                self.num_dims,
                self.bins.len(),
                self.ranges.len()
            )));
        }
        for (dim, &n) in self.bins.iter().enumerate() {
            if n < 2 {
                return Err(Error::InvalidActionSpec(format!(
                    "dimension {dim} has {n} bins; need at least 2"
                )));
            }
        }
        for (dim, range) in self.ranges.iter().enumerate() {
            if let DimRange::Continuous { lo, hi } = range {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(Error::InvalidActionSpec(format!(
                        "dimension {dim} has invalid range ({lo}, {hi})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn bins_for(&self, dim: usize) -> Result<u16> {
        self.bins.get(dim).copied().ok_or(Error::DimOutOfRange {
            dim,
            num_dims: self.num_dims,
        })
    }

    /// Joint-action cardinality, saturating at u64::MAX.
    pub fn joint_cardinality(&self) -> u64 {
        self.bins
            .iter()
            .fold(1u64, |acc, &n| acc.saturating_mul(n as u64))
    }

    /// Rejects action spaces too large to enumerate.
    pub fn check_tabular(&self) -> Result<()> {
        let card = self.joint_cardinality();
        if card > MAX_TABULAR_JOINT_ACTIONS {
            return Err(Error::InvalidActionSpec(format!(
                "joint-action cardinality {card} exceeds tabular limit {MAX_TABULAR_JOINT_ACTIONS}"
            )));
        }
        Ok(())
    }

    /// Checks that `action` is a full bin-vector valid under this spec.
    pub fn check_action(&self, action: &[u16]) -> Result<()> {
        if action.len() != self.num_dims {
            return Err(Error::InvalidActionSpec(format!(
                "action has {} dimensions, spec has {}",
                action.len(),
                self.num_dims
            )));
        }
        for (dim, (&bin, &bins)) in action.iter().zip(&self.bins).enumerate() {
            if bin >= bins {
                return Err(Error::BinOutOfRange { dim, bin, bins });
            }
        }
        Ok(())
    }
}

/// One discretized action component: which bin dimension `dim` landed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionToken {
    pub dim: usize,
    pub bin: u16,
}

impl ActionToken {
    pub fn new(dim: usize, bin: u16, spec: &ActionSpec) -> Result<Self> {
        let bins = spec.bins_for(dim)?;
        if bin >= bins {
            return Err(Error::BinOutOfRange { dim, bin, bins });
        }
        Ok(ActionToken { dim, bin })
    }
}

/// Maps a continuous value to its bin index.
///
/// Values are clamped to the dimension's range; the upper endpoint maps to
/// the last bin, and interior bin boundaries land in the higher bin.
pub fn discretize(value: f64, dim: usize, spec: &ActionSpec) -> Result<u16> {
    if !value.is_finite() {
        return Err(Error::NonFiniteValue { dim, value });
    }
    let n = spec.bins_for(dim)? as f64;
    let (lo, hi) = match spec.ranges[dim] {
        DimRange::Continuous { lo, hi } => (lo, hi),
        DimRange::Discrete => return Err(Error::NotContinuous { dim }),
    };
    let clamped = value.clamp(lo, hi);
    let raw = ((clamped - lo) / (hi - lo) * n).floor();
    Ok((raw.min(n - 1.0).max(0.0)) as u16)
}

/// Maps a bin index back to its bin center.
pub fn undiscretize(bin: u16, dim: usize, spec: &ActionSpec) -> Result<f64> {
    let bins = spec.bins_for(dim)?;
    if bin >= bins {
        return Err(Error::BinOutOfRange { dim, bin, bins });
    }
    let (lo, hi) = match spec.ranges[dim] {
        DimRange::Continuous { lo, hi } => (lo, hi),
        DimRange::Discrete => return Err(Error::NotContinuous { dim }),
    };
    let width = (hi - lo) / bins as f64;
    Ok(lo + (bin as f64 + 0.5) * width)
}
