use serde::{Deserialize, Serialize};

use super::sample::{FeatureKind, PictureSample};
use crate::error::{Error, Result};

/// Corpus-wide min-max scaling of every feature channel and of the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub channels: Vec<FeatureKind>,
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
}

impl NormalizationTransform {
    /// Extrema over every measurement and every target of `pictures`.
    pub fn fit(pictures: &[PictureSample]) -> Result<Self> {
        let Some(first) = pictures.first() else {
            return Err(Error::DegenerateData("no pictures to normalize".into()));
        };
        let channels = first.channels.clone();
        if let Some(p) = pictures.iter().find(|p| p.channels != channels) {
            return Err(Error::Dimension(format!(
                "picture {} has channels {:?}, expected {:?}",
                p.picture_id, p.channels, channels
            )));
        }
        let d = channels.len();
        let mut feature_min = vec![f64::INFINITY; d];
        let mut feature_max = vec![f64::NEG_INFINITY; d];
        let mut target_min = f64::INFINITY;
        let mut target_max = f64::NEG_INFINITY;
        for p in pictures {
            target_min = target_min.min(p.target);
            target_max = target_max.max(p.target);
            for row in &p.features {
                for (c, &v) in row.iter().enumerate() {
                    feature_min[c] = feature_min[c].min(v);
                    feature_max[c] = feature_max[c].max(v);
                }
            }
        }
        for (c, kind) in channels.iter().enumerate() {
            if !(feature_max[c] > feature_min[c]) {
                return Err(Error::DegenerateData(format!(
                    "feature channel '{}' is constant ({})",
                    kind.short_name(),
                    feature_min[c]
                )));
            }
        }
        if !(target_max > target_min) {
            return Err(Error::DegenerateData(format!(
                "target channel is constant ({target_min}); need at least two distinct targets"
            )));
        }
        Ok(NormalizationTransform {
            channels,
            feature_min,
            feature_max,
            target_min,
            target_max,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.channels.len()
    }

    pub fn normalize_feature(&self, channel: usize, v: f64) -> f64 {
        (v - self.feature_min[channel]) / (self.feature_max[channel] - self.feature_min[channel])
    }

    pub fn denormalize_feature(&self, channel: usize, v: f64) -> f64 {
        self.feature_min[channel] + v * (self.feature_max[channel] - self.feature_min[channel])
    }

    pub fn normalize_target(&self, v: f64) -> f64 {
        (v - self.target_min) / (self.target_max - self.target_min)
    }

    pub fn denormalize_target(&self, v: f64) -> f64 {
        self.target_min + v * (self.target_max - self.target_min)
    }

    /// Applies this transform to pictures that may come from another corpus.
    /// Channels are selected to match the transform.
    pub fn apply(&self, pictures: &[PictureSample]) -> Result<Vec<PictureSample>> {
        pictures
            .iter()
            .map(|p| {
                let p = p.select(&self.channels)?;
                Ok(PictureSample {
                    features: p
                        .features
                        .iter()
                        .map(|row| {
                            row.iter()
                                .enumerate()
                                .map(|(c, &v)| self.normalize_feature(c, v))
                                .collect()
                        })
                        .collect(),
                    target: self.normalize_target(p.target),
                    ..p
                })
            })
            .collect()
    }

    /// Inverse of [`apply`](Self::apply).
    pub fn invert(&self, pictures: &[PictureSample]) -> Vec<PictureSample> {
        pictures
            .iter()
            .map(|p| PictureSample {
                features: p
                    .features
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .map(|(c, &v)| self.denormalize_feature(c, v))
                            .collect()
                    })
                    .collect(),
                target: self.denormalize_target(p.target),
                ..p.clone()
            })
            .collect()
    }
}

/// Fits a transform on `pictures` and returns them normalized to `[0, 1]`.
pub fn normalize(
    pictures: &[PictureSample],
) -> Result<(Vec<PictureSample>, NormalizationTransform)> {
    let transform = NormalizationTransform::fit(pictures)?;
    let normalized = transform.apply(pictures)?;
    Ok((normalized, transform))
}
