use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ForecastMethod;
use crate::fem::{GcvPooling, DEFAULT_GRID};
use crate::forecast::{DffmMethod, DffmOptions, FarTruncation, IcVariant, KnnOptions, OrderSelection, Weighting};
use crate::synth::SynthConfig;

/// Rule for stations with gaps in their record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    #[default]
    DropStation,
    /// Linear interpolation in time; experimental.
    Interpolate,
}

impl FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop-station" => Ok(MissingPolicy::DropStation),
            "interpolate" => Ok(MissingPolicy::Interpolate),
            other => Err(Error::InvalidArgument(format!("unknown missing-data policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub stations: PathBuf,
    pub measurements: PathBuf,
    /// Optional domain polygon (JSON) used to clip the triangulation.
    pub domain: Option<PathBuf>,
    /// Triangle indices removed by hand after clipping.
    pub exclude_triangles: Vec<usize>,
    pub missing: MissingPolicy,
    pub output: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            stations: "stations.csv".into(),
            measurements: "measurements.csv".into(),
            domain: None,
            exclude_triangles: Vec::new(),
            missing: MissingPolicy::DropStation,
            output: "out".into(),
        }
    }
}

/// `"auto"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LambdaSetting {
    #[default]
    Auto,
    Value(f64),
}

impl FromStr for LambdaSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(LambdaSetting::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("lambda must be `auto` or a number, got `{s}`")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {v}")));
        }
        Ok(LambdaSetting::Value(v))
    }
}

impl Serialize for LambdaSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LambdaSetting::Auto => s.serialize_str("auto"),
            LambdaSetting::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => LambdaSetting::from_str(&v.to_string()),
            Raw::Text(t) => LambdaSetting::from_str(&t),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `min,max,count` of a log-spaced λ grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64, usize)", into = "(f64, f64, usize)")]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        let (min, max, count) = DEFAULT_GRID;
        Self { min, max, count }
    }
}

impl TryFrom<(f64, f64, usize)> for LambdaGrid {
    type Error = Error;

    fn try_from((min, max, count): (f64, f64, usize)) -> Result<Self> {
        if !(min > 0.0 && max >= min && max.is_finite()) || count == 0 {
            return Err(Error::InvalidArgument(format!(
                "lambda grid needs 0 < min <= max and count >= 1, got {min},{max},{count}"
            )));
        }
        Ok(Self { min, max, count })
    }
}

impl From<LambdaGrid> for (f64, f64, usize) {
    fn from(g: LambdaGrid) -> Self {
        (g.min, g.max, g.count)
    }
}

impl FromStr for LambdaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("lambda grid must be `min,max,count`, got `{s}`"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let min = parts[0].parse().map_err(|_| bad())?;
        let max = parts[1].parse().map_err(|_| bad())?;
        let count = parts[2].parse().map_err(|_| bad())?;
        LambdaGrid::try_from((min, max, count))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingSetting {
    #[default]
    Mean,
    PerDay,
}

impl From<PoolingSetting> for GcvPooling {
    fn from(p: PoolingSetting) -> Self {
        match p {
            PoolingSetting::Mean => GcvPooling::Mean,
            PoolingSetting::PerDay => GcvPooling::PerDay,
        }
    }
}

impl FromStr for PoolingSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PoolingSetting::Mean),
            "per-day" => Ok(PoolingSetting::PerDay),
            other => Err(Error::InvalidArgument(format!("unknown GCV pooling `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    pub lambda: LambdaSetting,
    pub lambda_grid: LambdaGrid,
    pub gcv_pooling: PoolingSetting,
}

/// Forecast method names as used on the command line and in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodName {
    #[serde(rename = "dffm-var")]
    DffmVar,
    #[serde(rename = "dffm-knn")]
    DffmKnn,
    #[serde(rename = "far")]
    Far,
    #[serde(rename = "mean")]
    Mean,
    #[serde(rename = "naive")]
    Naive,
}

impl MethodName {
    pub const ALL: [MethodName; 5] = [
        MethodName::DffmVar,
        MethodName::DffmKnn,
        MethodName::Far,
        MethodName::Mean,
        MethodName::Naive,
    ];
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dffm-var" | "var" => Ok(MethodName::DffmVar),
            "dffm-knn" | "knn" => Ok(MethodName::DffmKnn),
            "far" => Ok(MethodName::Far),
            "mean" => Ok(MethodName::Mean),
            "naive" => Ok(MethodName::Naive),
            other => Err(Error::InvalidArgument(format!("unknown forecast method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSettings {
    pub k: Option<usize>,
    pub p: Option<usize>,
    pub l: Option<usize>,
    pub q: f64,
    pub weighting: Weighting,
    pub auto: bool,
    pub holdout: f64,
}

impl Default for KnnSettings {
    fn default() -> Self {
        let d = KnnOptions::default();
        Self {
            k: None,
            p: None,
            l: None,
            q: d.q,
            weighting: d.weighting,
            auto: d.auto,
            holdout: d.holdout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarSettings {
    pub p: Option<usize>,
    pub l: Option<usize>,
    /// Select (L, p) by the information criterion; `false` requires p and l.
    pub auto: bool,
}

impl Default for VarSettings {
    fn default() -> Self {
        Self { p: None, l: None, auto: true }
    }
}

/// Integer = fixed truncation, fraction in (0, 1] = explained-variance rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSetting(pub FarTruncation);

impl Default for TruncationSetting {
    fn default() -> Self {
        TruncationSetting(FarTruncation::default())
    }
}

impl FromStr for TruncationSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(l) = s.parse::<usize>() {
            return TruncationSetting::fixed(l);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("FAR truncation must be an integer or a share, got `{s}`")))?;
        TruncationSetting::share(v)
    }
}

impl TruncationSetting {
    fn fixed(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidArgument("FAR truncation must be at least 1".into()));
        }
        Ok(TruncationSetting(FarTruncation::Fixed(l)))
    }

    fn share(v: f64) -> Result<Self> {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidArgument(format!("explained-variance share must lie in (0, 1], got {v}")));
        }
        Ok(TruncationSetting(FarTruncation::Explained(v)))
    }
}

impl Serialize for TruncationSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            FarTruncation::Fixed(l) => s.serialize_u64(l as u64),
            FarTruncation::Explained(v) => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for TruncationSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Float(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(l) => TruncationSetting::fixed(l as usize),
            Raw::Float(v) => TruncationSetting::share(v),
            Raw::Text(t) => TruncationSetting::from_str(&t),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarSettings {
    pub truncation: TruncationSetting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub method: MethodName,
    pub ic_variant: IcVariant,
    pub max_factors: usize,
    pub max_lags: usize,
    pub knn: KnnSettings,
    pub var: VarSettings,
    pub far: FarSettings,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        let d = DffmOptions::default();
        Self {
            method: MethodName::DffmVar,
            ic_variant: IcVariant::OsBic,
            max_factors: d.max_factors,
            max_lags: d.max_lags,
            knn: KnnSettings::default(),
            var: VarSettings::default(),
            far: FarSettings::default(),
        }
    }
}

impl ForecastConfig {
    fn options(&self) -> DffmOptions {
        DffmOptions {
            max_factors: self.max_factors,
            max_lags: self.max_lags,
            knn: KnnOptions {
                neighbours: self.knn.k,
                q: self.knn.q,
                weighting: self.knn.weighting,
                holdout: self.knn.holdout,
                auto: self.knn.auto,
            },
        }
    }

    /// The forecaster configured under `name`.
    pub fn build(&self, name: MethodName) -> Result<ForecastMethod> {
        let ic = OrderSelection::Ic(self.ic_variant);
        Ok(match name {
            MethodName::DffmVar => {
                let selection = if self.var.auto {
                    ic
                } else {
                    match (self.var.l, self.var.p) {
                        (Some(factors), Some(lags)) => OrderSelection::Fixed { factors, lags },
                        _ => {
                            return Err(Error::InvalidArgument(
                                "var.auto = false requires both var.l and var.p".into(),
                            ))
                        }
                    }
                };
                ForecastMethod::Dffm {
                    method: DffmMethod::Var,
                    selection,
                    options: self.options(),
                }
            }
            MethodName::DffmKnn => {
                let selection = match (self.knn.l, self.knn.p) {
                    (Some(factors), Some(lags)) => OrderSelection::Fixed { factors, lags },
                    _ => ic,
                };
                ForecastMethod::Dffm {
                    method: DffmMethod::Knn,
                    selection,
                    options: self.options(),
                }
            }
            MethodName::Far => ForecastMethod::Far(self.far.truncation.0),
            MethodName::Mean => ForecastMethod::Mean,
            MethodName::Naive => ForecastMethod::Naive,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.max_factors == 0 || self.max_lags == 0 {
            return Err(Error::InvalidArgument("max_factors and max_lags must be at least 1".into()));
        }
        if !(self.knn.q >= 1.0) {
            return Err(Error::InvalidArgument(format!("knn.q must be at least 1, got {}", self.knn.q)));
        }
        if !(self.knn.holdout > 0.0 && self.knn.holdout < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "knn.holdout must lie in (0, 1), got {}",
                self.knn.holdout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// T0; defaults to two thirds of the series.
    pub initial: Option<usize>,
    /// H; defaults to every remaining surface.
    pub origins: Option<usize>,
    pub methods: Vec<MethodName>,
    /// Exceedance threshold for events.csv.
    pub threshold: f64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            initial: None,
            origins: None,
            methods: MethodName::ALL.to_vec(),
            threshold: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    /// Number of components exported; capped by min(T, K).
    pub components: usize,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self { components: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub smoothing: SmoothingConfig,
    pub decompose: DecomposeConfig,
    pub forecast: ForecastConfig,
    pub evaluate: EvaluateConfig,
    pub synth: SynthConfig,
}

impl PipelineConfig {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {}", e.message())))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.data.stations);
        resolve(&mut cfg.data.measurements);
        resolve(&mut cfg.data.output);
        if let Some(d) = cfg.data.domain.as_mut() {
            resolve(d);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.forecast.validate()?;
        if !self.evaluate.threshold.is_finite() {
            return Err(Error::InvalidArgument("evaluate.threshold must be finite".into()));
        }
        if self.decompose.components == 0 {
            return Err(Error::InvalidArgument("decompose.components must be at least 1".into()));
        }
        Ok(())
    }
}
