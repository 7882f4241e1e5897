use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Identifier of an ensemble gradient estimator.
///
/// The string ids (`plain_lls`, `gen_stosag`, ...) are used verbatim in
/// configuration files, CSV output and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "plain_lls")]
    PlainLls,
    #[serde(rename = "fragile")]
    Fragile,
    #[serde(rename = "paired")]
    Paired,
    #[serde(rename = "stosag")]
    Stosag,
    #[serde(rename = "average_lls")]
    AverageLls,
    #[serde(rename = "gen_stosag")]
    GenStosag,
    #[serde(rename = "hybrid")]
    Hybrid,
    #[serde(rename = "two_sided")]
    TwoSided,
    #[serde(rename = "mirrored2s")]
    Mirrored2s,
    #[serde(rename = "one_sided")]
    OneSided,
    #[serde(rename = "decorr")]
    Decorr,
    #[serde(rename = "avg_grad")]
    AvgGrad,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 12] = [
        EstimatorKind::PlainLls,
        EstimatorKind::Fragile,
        EstimatorKind::Paired,
        EstimatorKind::Stosag,
        EstimatorKind::AverageLls,
        EstimatorKind::GenStosag,
        EstimatorKind::Hybrid,
        EstimatorKind::TwoSided,
        EstimatorKind::Mirrored2s,
        EstimatorKind::OneSided,
        EstimatorKind::Decorr,
        EstimatorKind::AvgGrad,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EstimatorKind::PlainLls => "plain_lls",
            EstimatorKind::Fragile => "fragile",
            EstimatorKind::Paired => "paired",
            EstimatorKind::Stosag => "stosag",
            EstimatorKind::AverageLls => "average_lls",
            EstimatorKind::GenStosag => "gen_stosag",
            EstimatorKind::Hybrid => "hybrid",
            EstimatorKind::TwoSided => "two_sided",
            EstimatorKind::Mirrored2s => "mirrored2s",
            EstimatorKind::OneSided => "one_sided",
            EstimatorKind::Decorr => "decorr",
            EstimatorKind::AvgGrad => "avg_grad",
        }
    }

    /// Estimators that pair `x_n` with `u_n` and so need `M = N`.
    pub fn requires_pairing(self) -> bool {
        matches!(
            self,
            EstimatorKind::Paired
                | EstimatorKind::Stosag
                | EstimatorKind::Mirrored2s
                | EstimatorKind::OneSided
                | EstimatorKind::Decorr
        )
    }

    /// Estimators built on one group of control samples per `x_m`.
    pub fn requires_subsamples(self) -> bool {
        matches!(
            self,
            EstimatorKind::AverageLls | EstimatorKind::GenStosag | EstimatorKind::Hybrid | EstimatorKind::TwoSided
        )
    }

    /// Estimators that read `ℓ(x_m, μ)`.
    pub fn uses_baseline(self) -> bool {
        matches!(
            self,
            EstimatorKind::Stosag | EstimatorKind::OneSided | EstimatorKind::Decorr
        )
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = match s.trim() {
            "plain_lls" => EstimatorKind::PlainLls,
            "fragile" => EstimatorKind::Fragile,
            "paired" => EstimatorKind::Paired,
            "stosag" => EstimatorKind::Stosag,
            "average_lls" => EstimatorKind::AverageLls,
            "gen_stosag" | "generalized_stosag" => EstimatorKind::GenStosag,
            "hybrid" => EstimatorKind::Hybrid,
            "two_sided" => EstimatorKind::TwoSided,
            "mirrored2s" | "mirrored_two_sided" => EstimatorKind::Mirrored2s,
            "one_sided" | "one_sided_mirrored" => EstimatorKind::OneSided,
            "decorr" | "decorrelated_paired" => EstimatorKind::Decorr,
            "avg_grad" | "avg_analytic_grad" => EstimatorKind::AvgGrad,
            other => {
                let known: Vec<_> = EstimatorKind::ALL.iter().map(|k| k.id()).collect();
                return Err(Error::Invalid(format!(
                    "unknown estimator `{other}` (expected one of {})",
                    known.join(", ")
                )));
            }
        };
        Ok(kind)
    }
}
