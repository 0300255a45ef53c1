use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Micrograph group: non-spherical (`V`) or spherical (`RN`) graphite nodules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    V,
    RN,
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "V" | "v" => Ok(Group::V),
            "RN" | "rn" | "Rn" => Ok(Group::RN),
            other => Err(Error::Domain(format!(
                "unknown group '{other}' (expected V or RN)"
            ))),
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Group::V => "V",
            Group::RN => "RN",
        })
    }
}

/// Morphological descriptor of a graphite nodule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Maximum feret diameter, micrometers.
    Feret,
    /// Area, square micrometers.
    Area,
    /// Aspect ratio, >= 1.
    AspectRatio,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [
        FeatureKind::Feret,
        FeatureKind::Area,
        FeatureKind::AspectRatio,
    ];

    /// Column name in corpus CSV files.
    pub fn column(self) -> &'static str {
        match self {
            FeatureKind::Feret => "feret_um",
            FeatureKind::Area => "area_um2",
            FeatureKind::AspectRatio => "aspect_ratio",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            FeatureKind::Feret => "feret",
            FeatureKind::Area => "area",
            FeatureKind::AspectRatio => "ar",
        }
    }

    fn check(self, value: f64) -> std::result::Result<(), String> {
        if !value.is_finite() {
            return Err(format!("{} value {value} is not finite", self.short_name()));
        }
        match self {
            FeatureKind::AspectRatio if value < 1.0 => {
                Err(format!("aspect ratio {value} is below 1"))
            }
            FeatureKind::Feret | FeatureKind::Area if value <= 0.0 => Err(format!(
                "{} value {value} must be positive",
                self.short_name()
            )),
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "feret" | "feret_um" | "maximum_feret" => Ok(FeatureKind::Feret),
            "area" | "area_um2" => Ok(FeatureKind::Area),
            "ar" | "aspect_ratio" | "aspect-ratio" => Ok(FeatureKind::AspectRatio),
            other => Err(Error::Domain(format!("unknown feature '{other}'"))),
        }
    }
}

/// Parses a comma separated feature list such as `feret,area,ar`.
pub fn parse_feature_list(list: &str) -> Result<Vec<FeatureKind>> {
    let mut out = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let kind: FeatureKind = part.parse()?;
        if out.contains(&kind) {
            return Err(Error::Domain(format!("feature '{part}' listed twice")));
        }
        out.push(kind);
    }
    if out.is_empty() {
        return Err(Error::Domain("empty feature list".into()));
    }
    Ok(out)
}

/// One micrograph: `M` measurements of `d` features and one target.
///
/// Raw samples (megapascals, micrometers) are validated on construction;
/// normalized copies produced by [`NormalizationTransform`](super::NormalizationTransform)
/// live in `[0, 1]`-scaled units and skip the physical-range checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PictureSample {
    pub picture_id: String,
    pub group: Group,
    pub channels: Vec<FeatureKind>,
    /// `M` rows of `d` values, ordered as `channels`.
    pub features: Vec<Vec<f64>>,
    pub target: f64,
}

impl PictureSample {
    pub fn new(
        picture_id: impl Into<String>,
        group: Group,
        channels: Vec<FeatureKind>,
        features: Vec<Vec<f64>>,
        target: f64,
    ) -> Result<Self> {
        let sample = PictureSample {
            picture_id: picture_id.into(),
            group,
            channels,
            features,
            target,
        };
        sample
            .validate()
            .map_err(|m| Error::Domain(format!("picture {}: {m}", sample.picture_id)))?;
        Ok(sample)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.channels.is_empty() {
            return Err("no feature channels".into());
        }
        if self.features.is_empty() {
            return Err("no measurements".into());
        }
        if !(self.target.is_finite() && self.target > 0.0) {
            return Err(format!(
                "target {} must be positive and finite",
                self.target
            ));
        }
        for row in &self.features {
            if row.len() != self.channels.len() {
                return Err(format!(
                    "measurement has {} values for {} channels",
                    row.len(),
                    self.channels.len()
                ));
            }
            for (kind, &v) in self.channels.iter().zip(row) {
                kind.check(v)?;
            }
        }
        Ok(())
    }

    pub fn measurements(&self) -> usize {
        self.features.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.channels.len()
    }

    /// Values of one channel across all measurements.
    pub fn channel(&self, kind: FeatureKind) -> Option<Vec<f64>> {
        let idx = self.channels.iter().position(|&c| c == kind)?;
        Some(self.features.iter().map(|row| row[idx]).collect())
    }

    /// Restricts (and reorders) the feature channels.
    pub fn select(&self, channels: &[FeatureKind]) -> Result<PictureSample> {
        let idx: Vec<usize> = channels
            .iter()
            .map(|k| {
                self.channels.iter().position(|c| c == k).ok_or_else(|| {
                    Error::Dimension(format!(
                        "picture {} has no '{}' channel",
                        self.picture_id,
                        k.short_name()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        Ok(PictureSample {
            picture_id: self.picture_id.clone(),
            group: self.group,
            channels: channels.to_vec(),
            features: self
                .features
                .iter()
                .map(|row| idx.iter().map(|&i| row[i]).collect())
                .collect(),
            target: self.target,
        })
    }
}

pub fn select_all(
    pictures: &[PictureSample],
    channels: &[FeatureKind],
) -> Result<Vec<PictureSample>> {
    pictures.iter().map(|p| p.select(channels)).collect()
}
