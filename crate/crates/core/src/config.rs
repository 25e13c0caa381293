//! Matching configuration shared by the measures, matcher and harnesses.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Similarity measure selected for a matching run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    /// Scalable diversity similarity over the multi-scale window grid.
    Sds,
    /// SDS restricted to the fixed scale 1.0.
    Nsds,
    /// Deformable diversity similarity, fixed scale.
    Ddis,
    /// DDIS run over the multi-scale window grid.
    Sddis,
    /// Best-buddies similarity (bidirectional mutual NN count).
    Bbs,
    /// One-directional diversity similarity.
    Dis,
    /// Negated sum of squared differences.
    Ssd,
    /// Negated sum of absolute differences.
    Sad,
}

impl Measure {
    pub const ALL: [Measure; 8] = [
        Measure::Sds,
        Measure::Nsds,
        Measure::Ddis,
        Measure::Sddis,
        Measure::Bbs,
        Measure::Dis,
        Measure::Ssd,
        Measure::Sad,
    ];

    /// Whether the matcher sweeps the full scale grid for this measure.
    pub fn multi_scale(self) -> bool {
        matches!(self, Measure::Sds | Measure::Sddis)
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Sds => "sds",
            Measure::Nsds => "nsds",
            Measure::Ddis => "ddis",
            Measure::Sddis => "sddis",
            Measure::Bbs => "bbs",
            Measure::Dis => "dis",
            Measure::Ssd => "ssd",
            Measure::Sad => "sad",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sds" => Ok(Measure::Sds),
            "nsds" => Ok(Measure::Nsds),
            "ddis" => Ok(Measure::Ddis),
            "sddis" => Ok(Measure::Sddis),
            "bbs" => Ok(Measure::Bbs),
            "dis" => Ok(Measure::Dis),
            "ssd" => Ok(Measure::Ssd),
            "sad" => Ok(Measure::Sad),
            other => Err(Error::Parameter(format!("unknown measure '{other}'"))),
        }
    }
}

/// Feature pair used by nearest-neighbor distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceMode {
    /// Appearance plus per-pixel appearance rank.
    AppearanceRank,
    /// Appearance plus normalized patch location.
    AppearanceLocation,
    /// Appearance only.
    AppearanceOnly,
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "appearance_rank" | "ar" => Ok(DistanceMode::AppearanceRank),
            "appearance_location" | "al" => Ok(DistanceMode::AppearanceLocation),
            "appearance_only" | "ao" => Ok(DistanceMode::AppearanceOnly),
            other => Err(Error::Parameter(format!("unknown distance mode '{other}'"))),
        }
    }
}

/// Parameters of a matching run.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    /// Side length of the non-overlapped square patches, in pixels.
    pub patch_size: usize,
    /// Weight of the rank/location term in the patch distance.
    pub lambda: f64,
    /// Support radius of the per-pixel appearance-rank circle, in pixels.
    pub rank_radius: usize,
    /// Neighbor count of the precomputed ANN sets over the target image.
    pub ann_k: usize,
    pub measure: Measure,
    /// Overrides the per-measure distance convention when set. The
    /// defaults are appearance+rank for the diversity measures and
    /// appearance+location for BBS.
    pub distance_mode: Option<DistanceMode>,
    /// Constant added to the polar-radius denominator so perfectly
    /// aligned windows stay finite.
    pub denom_guard: f64,
    /// Ablation: scale template radii by sqrt(s) instead of s.
    pub sqrt_radius_scaling: bool,
    /// Disable DDIS deformation weighting (reduces DDIS to DIS).
    pub ddis_deformation: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            patch_size: 2,
            lambda: 1.0,
            rank_radius: 3,
            ann_k: 5,
            measure: Measure::Sds,
            distance_mode: None,
            denom_guard: 1.0,
            sqrt_radius_scaling: false,
            ddis_deformation: true,
        }
    }
}

impl MatchConfig {
    pub fn with_measure(measure: Measure) -> Self {
        Self {
            measure,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::Parameter("patch size must be >= 1".into()));
        }
        if self.rank_radius == 0 {
            return Err(Error::Parameter("rank radius must be >= 1".into()));
        }
        if self.ann_k == 0 {
            return Err(Error::Parameter("ann_k must be >= 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter("lambda must be >= 0".into()));
        }
        if !(self.denom_guard > 0.0 && self.denom_guard.is_finite()) {
            return Err(Error::Parameter("denom_guard must be > 0".into()));
        }
        Ok(())
    }

    /// Distance convention actually used for NN search under `measure`.
    pub fn resolved_distance_mode(&self, measure: Measure) -> DistanceMode {
        if let Some(mode) = self.distance_mode {
            return mode;
        }
        match measure {
            Measure::Bbs => DistanceMode::AppearanceLocation,
            Measure::Ddis | Measure::Sddis => DistanceMode::AppearanceOnly,
            Measure::Ssd | Measure::Sad => DistanceMode::AppearanceOnly,
            Measure::Sds | Measure::Nsds | Measure::Dis => DistanceMode::AppearanceRank,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_roundtrip() {
        for m in Measure::ALL {
            assert_eq!(m.name().parse::<Measure>().unwrap(), m);
        }
        assert!("hog".parse::<Measure>().is_err());
    }

    #[test]
    fn default_config_is_valid() {
        MatchConfig::default().validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_params() {
        let mut cfg = MatchConfig::default();
        cfg.lambda = -1.0;
        assert!(cfg.validate().is_err());
        cfg = MatchConfig::default();
        cfg.denom_guard = 0.0;
        assert!(cfg.validate().is_err());
        cfg = MatchConfig::default();
        cfg.patch_size = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn distance_mode_defaults_follow_measure() {
        let cfg = MatchConfig::default();
        assert_eq!(
            cfg.resolved_distance_mode(Measure::Sds),
            DistanceMode::AppearanceRank
        );
        assert_eq!(
            cfg.resolved_distance_mode(Measure::Bbs),
            DistanceMode::AppearanceLocation
        );
        assert_eq!(
            cfg.resolved_distance_mode(Measure::Ddis),
            DistanceMode::AppearanceOnly
        );
        let mut forced = MatchConfig::default();
        forced.distance_mode = Some(DistanceMode::AppearanceOnly);
        assert_eq!(
            forced.resolved_distance_mode(Measure::Sds),
            DistanceMode::AppearanceOnly
        );
    }
}
