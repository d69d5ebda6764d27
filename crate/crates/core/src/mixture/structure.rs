use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Volume/shape/orientation constraint on the component covariances.
///
/// `E` means equal across components, `V` variable, `I` identity. The three
/// letters refer to volume, shape and orientation in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CovarianceStructure {
    EII,
    VII,
    EEI,
    VVI,
    EEE,
    VVV,
}

impl CovarianceStructure {
    pub const ALL: [CovarianceStructure; 6] = [
        CovarianceStructure::EII,
        CovarianceStructure::VII,
        CovarianceStructure::EEI,
        CovarianceStructure::VVI,
        CovarianceStructure::EEE,
        CovarianceStructure::VVV,
    ];

    /// Free covariance parameters for `k` components in dimension `d`.
    pub fn covariance_params(self, d: usize, k: usize) -> usize {
        let full = d * (d + 1) / 2;
        match self {
            CovarianceStructure::EII => 1,
            CovarianceStructure::VII => k,
            CovarianceStructure::EEI => d,
            CovarianceStructure::VVI => k * d,
            CovarianceStructure::EEE => full,
            CovarianceStructure::VVV => k * full,
        }
    }

    /// Total free parameters: mixing proportions, means and covariances.
    pub fn free_params(self, d: usize, k: usize) -> usize {
        (k - 1) + k * d + self.covariance_params(d, k)
    }

    /// Covariance shared by every component.
    pub fn is_pooled(self) -> bool {
        matches!(
            self,
            CovarianceStructure::EII | CovarianceStructure::EEI | CovarianceStructure::EEE
        )
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CovarianceStructure::EII => "EII",
            CovarianceStructure::VII => "VII",
            CovarianceStructure::EEI => "EEI",
            CovarianceStructure::VVI => "VVI",
            CovarianceStructure::EEE => "EEE",
            CovarianceStructure::VVV => "VVV",
        }
    }
}

impl fmt::Display for CovarianceStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CovarianceStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown covariance structure `{s}`")))
    }
}
