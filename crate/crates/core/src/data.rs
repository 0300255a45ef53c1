//! Corpus files, synthetic corpora, model files and report exports.
//!
//! Corpus CSV: header row, one row per measurement, columns `picture_id`,
//! `group` (`V`|`RN`), `target_mpa`, plus any non-empty subset of
//! `feret_um`, `area_um2`, `aspect_ratio`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::metrics::{ErrorReport, Histogram};
use crate::network::{LayerParams, Network};
use crate::trainer::{FeatureKind, Group, NormalizationTransform, PictureSample};

const REQUIRED_COLUMNS: [&str; 3] = ["picture_id", "group", "target_mpa"];

/// Parses a corpus CSV from any reader. Rows are grouped by `picture_id` in
/// order of first appearance; row numbers in errors are file line numbers.
pub fn read_pictures<R: Read>(reader: R) -> Result<Vec<PictureSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::Parse {
            row: 1,
            message: "empty file (no header row)".into(),
        });
    }
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut required = [0usize; 3];
    for (slot, name) in required.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = col(name).ok_or_else(|| Error::Parse {
            row: 1,
            message: format!("missing required column '{name}'"),
        })?;
    }
    let [id_col, group_col, target_col] = required;
    let features: Vec<(FeatureKind, usize)> = FeatureKind::ALL
        .iter()
        .filter_map(|&k| col(k.column()).map(|c| (k, c)))
        .collect();
    if features.is_empty() {
        return Err(Error::Parse {
            row: 1,
            message: "no feature column (feret_um, area_um2, aspect_ratio)".into(),
        });
    }
    let channels: Vec<FeatureKind> = features.iter().map(|(k, _)| *k).collect();

    let mut pictures: Vec<PictureSample> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = Default::default();
    let mut first_row: Vec<usize> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let perr = |message: String| Error::Parse { row, message };
        let field = |c: usize| record.get(c).unwrap_or("").trim();
        let number = |c: usize, name: &str| -> Result<f64> {
            let raw = field(c);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| perr(format!("column '{name}': '{raw}' is not a finite number")))
        };
        let id = field(id_col);
        if id.is_empty() {
            return Err(perr("empty picture_id".into()));
        }
        let group: Group = field(group_col)
            .parse()
            .map_err(|e: Error| perr(e.to_string()))?;
        let target = number(target_col, "target_mpa")?;
        let values = features
            .iter()
            .map(|(k, c)| number(*c, k.column()))
            .collect::<Result<Vec<f64>>>()?;
        match index.get(id) {
            Some(&i) => {
                let p = &mut pictures[i];
                if p.target != target {
                    return Err(perr(format!(
                        "target {target} for picture '{id}' differs from {} given at row {}",
                        p.target, first_row[i]
                    )));
                }
                if p.group != group {
                    return Err(perr(format!(
                        "group {group} for picture '{id}' differs from {} given at row {}",
                        p.group, first_row[i]
                    )));
                }
                p.features.push(values);
            }
            None => {
                index.insert(id.to_string(), pictures.len());
                first_row.push(row);
                pictures.push(PictureSample {
                    picture_id: id.to_string(),
                    group,
                    channels: channels.clone(),
                    features: vec![values],
                    target,
                });
            }
        }
    }
    if pictures.is_empty() {
        return Err(Error::Parse {
            row: 1,
            message: "no data rows".into(),
        });
    }
    for (p, &row) in pictures.iter().zip(&first_row) {
        p.validate().map_err(|m| Error::Parse {
            row,
            message: format!("picture '{}': {m}", p.picture_id),
        })?;
    }
    Ok(pictures)
}

pub fn load_pictures(path: impl AsRef<Path>) -> Result<Vec<PictureSample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pictures(file)
}

/// Writes pictures in the corpus CSV layout (only the channels they carry).
pub fn write_pictures<W: Write>(writer: W, pictures: &[PictureSample]) -> Result<()> {
    let channels = pictures
        .first()
        .map(|p| p.channels.clone())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(channels.iter().map(|k| k.column()));
    w.write_record(&header)?;
    for p in pictures {
        if p.channels != channels {
            return Err(Error::Dimension(format!(
                "picture {} has different channels than the first picture",
                p.picture_id
            )));
        }
        for row in &p.features {
            let mut rec = vec![
                p.picture_id.clone(),
                p.group.to_string(),
                p.target.to_string(),
            ];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_pictures(path: impl AsRef<Path>, pictures: &[PictureSample]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_pictures(BufWriter::new(file), pictures)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalParams {
    pub mu: f64,
    pub s: f64,
}

impl LognormalParams {
    pub fn new(median: f64, s: f64) -> Self {
        LognormalParams { mu: median.ln(), s }
    }
}

/// Generator settings for one synthetic micrograph group.
///
/// Every picture draws a latent standard normal `u`. Its target is
/// `exp(target.mu + target.s * u)`; each feature channel has log-location
/// `mu + s * sqrt(coupling) * u` and within-picture log-spread
/// `s * sqrt(1 - coupling)`, so `s` is the channel's total log-spread and
/// `coupling` the share explained by the picture.
///
/// The constants in [`GroupSpec::v`] and [`GroupSpec::rn`] are synthetic;
/// they only encode that RN has the higher mean limit with the larger scatter
/// and the less homogeneous inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub group: Group,
    pub feret: LognormalParams,
    pub area: LognormalParams,
    pub aspect_ratio: LognormalParams,
    pub target: LognormalParams,
    pub coupling: f64,
}

impl GroupSpec {
    pub fn v() -> Self {
        GroupSpec {
            group: Group::V,
            feret: LognormalParams::new(40.0, 0.3),
            area: LognormalParams::new(900.0, 0.6),
            aspect_ratio: LognormalParams::new(1.35, 0.15),
            target: LognormalParams::new(300.0, 0.08),
            coupling: 0.9,
        }
    }

    pub fn rn() -> Self {
        GroupSpec {
            group: Group::RN,
            feret: LognormalParams::new(25.0, 0.5),
            area: LognormalParams::new(400.0, 0.9),
            aspect_ratio: LognormalParams::new(1.1, 0.08),
            target: LognormalParams::new(340.0, 0.16),
            coupling: 0.9,
        }
    }

    pub fn for_group(group: Group) -> Self {
        match group {
            Group::V => Self::v(),
            Group::RN => Self::rn(),
        }
    }

    fn channels(&self) -> [(FeatureKind, LognormalParams); 3] {
        [
            (FeatureKind::Feret, self.feret),
            (FeatureKind::Area, self.area),
            (FeatureKind::AspectRatio, self.aspect_ratio),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("feret", self.feret),
            ("area", self.area),
            ("aspect_ratio", self.aspect_ratio),
            ("target", self.target),
        ] {
            if !(p.s > 0.0 && p.s.is_finite() && p.mu.is_finite()) {
                return Err(Error::Domain(format!("{name}: need finite mu and s > 0")));
            }
        }
        if !(0.0..1.0).contains(&self.coupling) {
            return Err(Error::Domain("coupling must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Checks that an RN spec has a higher mean limit and larger scatter than a V spec.
pub fn check_group_ordering(v: &GroupSpec, rn: &GroupSpec) -> Result<()> {
    let mean = |p: LognormalParams| (p.mu + 0.5 * p.s * p.s).exp();
    if !(mean(rn.target) > mean(v.target) && rn.target.s > v.target.s) {
        return Err(Error::Domain(
            "RN target must have a higher mean and larger log-spread than V".into(),
        ));
    }
    Ok(())
}

/// Seeded synthetic corpus of `pictures` micrographs with `measurements`
/// rows each, all three feature channels. Aspect ratios below 1 are clipped.
pub fn gen_synthetic(
    spec: &GroupSpec,
    pictures: usize,
    measurements: usize,
    seed: u64,
) -> Result<Vec<PictureSample>> {
    spec.validate()?;
    if pictures == 0 || measurements == 0 {
        return Err(Error::Domain(
            "need at least one picture and one measurement".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let between = spec.coupling.sqrt();
    let within = (1.0 - spec.coupling).sqrt();
    let channels = spec.channels();
    let mut out = Vec::with_capacity(pictures);
    for j in 0..pictures {
        let u: f64 = StandardNormal.sample(&mut rng);
        let target = (spec.target.mu + spec.target.s * u).exp();
        let features = (0..measurements)
            .map(|_| {
                channels
                    .iter()
                    .map(|(kind, p)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let v = (p.mu + p.s * (between * u + within * z)).exp();
                        if *kind == FeatureKind::AspectRatio {
                            v.max(1.0)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        out.push(PictureSample::new(
            format!("{}-{j:03}", spec.group),
            spec.group,
            FeatureKind::ALL.to_vec(),
            features,
            target,
        )?);
    }
    Ok(out)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// On-disk model: network, the normalization it was trained under, and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub feature_dim: usize,
    pub width: usize,
    pub depth: usize,
    pub dt: f64,
    pub activation: ActivationKind,
    pub layers: Vec<LayerFile>,
    pub normalization: NormalizationTransform,
    pub seed: u64,
}

impl ModelFile {
    pub fn new(net: &Network, transform: &NormalizationTransform, seed: u64) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            feature_dim: net.feature_dim(),
            width: net.width(),
            depth: net.depth(),
            dt: net.dt(),
            activation: net.activation(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerFile {
                    weight: l.weight_rows(),
                    bias: l.bias().to_vec(),
                })
                .collect(),
            normalization: transform.clone(),
            seed,
        }
    }

    pub fn network(&self) -> Result<Network> {
        let bad = |m: String| Error::ModelFormat(m);
        if self.layers.len() != self.depth {
            return Err(bad(format!(
                "depth {} but {} layers",
                self.depth,
                self.layers.len()
            )));
        }
        if self.normalization.feature_dim() != self.feature_dim {
            return Err(bad("normalization channels do not match feature_dim".into()));
        }
        let layers = self
            .layers
            .iter()
            .map(|l| LayerParams::new(l.weight.clone(), l.bias.clone()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| bad(e.to_string()))?;
        let net = Network::new(layers, self.dt, self.activation, self.feature_dim)
            .map_err(|e| bad(e.to_string()))?;
        if net.width() != self.width {
            return Err(bad(format!(
                "width {} but layers have {}",
                self.width,
                net.width()
            )));
        }
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::ModelFormat("missing format_version".into()))?;
        if version != u64::from(MODEL_FORMAT_VERSION) {
            return Err(Error::ModelVersion {
                found: version.try_into().unwrap_or(u32::MAX),
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::ModelFormat(e.to_string()))?;
        file.network()?;
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub network: Network,
    pub transform: NormalizationTransform,
    pub seed: u64,
}

pub fn save_model(
    net: &Network,
    transform: &NormalizationTransform,
    seed: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut text = ModelFile::new(net, transform, seed).to_json()?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = ModelFile::from_json(&text)?;
    Ok(LoadedModel {
        network: file.network()?,
        transform: file.normalization,
        seed: file.seed,
    })
}

/// `picture_id,eta` per picture.
pub fn write_eta_csv(report: &ErrorReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["picture_id", "eta"])?;
    for (id, eta) in &report.per_picture {
        w.write_record([id.clone(), eta.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `{eta_bar, theta, P, config}`.
pub fn write_summary_json(
    report: &ErrorReport,
    config: serde_json::Value,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let summary = serde_json::json!({
        "eta_bar": report.eta_bar,
        "theta": report.theta,
        "P": report.pictures,
        "config": config,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `bin_left,bin_right,count` per bin.
pub fn write_histogram_csv(hist: &Histogram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_left", "bin_right", "count"])?;
    for (l, r, c) in hist.bins() {
        w.write_record([l.to_string(), r.to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
