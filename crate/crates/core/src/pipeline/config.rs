use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::aocm::HssfConfig;
use crate::error::{DiverError, Result};
use crate::hydrooptic::{HydroConfig, HydroInit, SoftplusVariant};
use crate::illuminate::IlluminateConfig;
use crate::scalar::Scalar;
use crate::sef::SefConfig;

/// Pipeline stages in execution order. `Enhance` runs IlluminateNet or SEF
/// depending on the route decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Route,
    Enhance,
    Aocm,
    Hydro,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Route, Stage::Enhance, Stage::Aocm, Stage::Hydro];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Route => "route",
            Stage::Enhance => "enhance",
            Stage::Aocm => "aocm",
            Stage::Hydro => "hydro",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = DiverError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "route" => Ok(Stage::Route),
            "enhance" | "illuminate" | "sef" => Ok(Stage::Enhance),
            "aocm" => Ok(Stage::Aocm),
            "hydro" => Ok(Stage::Hydro),
            other => Err(DiverError::InvalidConfig(format!(
                "unknown stage `{other}`"
            ))),
        }
    }
}

/// A nonempty prefix of [`Stage::ALL`], identified by its last stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSet {
    last: Stage,
}

impl StageSet {
    pub fn full() -> Self {
        Self { last: Stage::Hydro }
    }

    pub fn through(last: Stage) -> Self {
        Self { last }
    }

    pub fn last(&self) -> Stage {
        self.last
    }

    pub fn contains(&self, stage: Stage) -> bool {
        stage <= self.last
    }

    pub fn iter(&self) -> impl Iterator<Item = Stage> + '_ {
        Stage::ALL.into_iter().filter(|s| self.contains(*s))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.iter().map(Stage::name).collect()
    }

    /// Parses a comma-separated list; the listed stages must form a prefix
    /// of `route, enhance, aocm, hydro` (in any order, without gaps).
    pub fn parse(list: &str) -> Result<Self> {
        let mut seen = Vec::new();
        for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let s: Stage = part.parse()?;
            if !seen.contains(&s) {
                seen.push(s);
            }
        }
        seen.sort();
        let Some(&last) = seen.last() else {
            return Err(DiverError::InvalidConfig("stage list is empty".into()));
        };
        if seen.len() != last as usize + 1 {
            let missing: Vec<&str> = Stage::ALL[..=last as usize]
                .iter()
                .filter(|s| !seen.contains(s))
                .map(|s| s.name())
                .collect();
            return Err(DiverError::InvalidConfig(format!(
                "stage `{last}` also requires: {}",
                missing.join(", ")
            )));
        }
        Ok(Self { last })
    }
}

impl Default for StageSet {
    fn default() -> Self {
        Self::full()
    }
}

/// Everything that affects per-image results.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T> {
    pub stages: StageSet,
    pub seed: u64,
    pub sef: SefConfig<T>,
    pub illuminate: IlluminateConfig<T>,
    pub aocm: HssfConfig<T>,
    pub hydro: HydroConfig<T>,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            stages: StageSet::full(),
            seed: 0,
            sef: SefConfig::default(),
            illuminate: IlluminateConfig::default(),
            aocm: HssfConfig::default(),
            hydro: HydroConfig::default(),
        }
    }
}

fn parse_num<V: FromStr>(key: &str, value: &str, line: usize) -> Result<V> {
    value.parse().map_err(|_| DiverError::Parse {
        line,
        message: format!("invalid value `{value}` for `{key}`"),
    })
}

fn parse_scalar<T: Scalar>(key: &str, value: &str, line: usize) -> Result<T> {
    let v: f64 = parse_num(key, value, line)?;
    if !v.is_finite() {
        return Err(DiverError::Parse {
            line,
            message: format!("`{key}` must be finite"),
        });
    }
    Ok(T::lit(v))
}

impl<T: Scalar> PipelineConfig<T> {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_at(key, value, 0)
    }

    fn set_at(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let v = value.trim();
        let f = |k| parse_scalar::<T>(k, v, line);
        match key.trim() {
            "seed" => self.seed = parse_num(key, v, line)?,
            "stages" => self.stages = StageSet::parse(v)?,
            "sef.alpha" => self.sef.alpha = f(key)?,
            "sef.epsilon" => self.sef.epsilon = f(key)?,
            "illuminate.lr" => self.illuminate.lr = f(key)?,
            "illuminate.iters" => self.illuminate.iters = parse_num(key, v, line)?,
            "illuminate.lambda1" => self.illuminate.lambda1 = f(key)?,
            "illuminate.lambda2" => self.illuminate.lambda2 = f(key)?,
            "illuminate.target" => self.illuminate.target = f(key)?,
            "illuminate.patch_radius" => self.illuminate.patch_radius = parse_num(key, v, line)?,
            "illuminate.t_min" => self.illuminate.t_min = f(key)?,
            "illuminate.init_jitter" => self.illuminate.init_jitter = f(key)?,
            "aocm.hue_low" => self.aocm.hue_low = f(key)?,
            "aocm.hue_high" => self.aocm.hue_high = f(key)?,
            "aocm.s_min" => self.aocm.s_min = f(key)?,
            "aocm.v_min" => self.aocm.v_min = f(key)?,
            "aocm.lambda" => self.aocm.lambda = f(key)?,
            "hydro.lr" => self.hydro.lr = f(key)?,
            "hydro.iters" => self.hydro.iters = parse_num(key, v, line)?,
            "hydro.delta" => self.hydro.huber.delta = f(key)?,
            "hydro.eta" => self.hydro.huber.eta = f(key)?,
            "hydro.p_terms" => self.hydro.p_terms = parse_num(key, v, line)?,
            "hydro.target" => self.hydro.target = f(key)?,
            "hydro.init_jitter" => self.hydro.init_jitter = f(key)?,
            "hydro.softplus" => {
                self.hydro.softplus =
                    SoftplusVariant::parse(v).ok_or_else(|| DiverError::Parse {
                        line,
                        message: format!(
                            "hydro.softplus must be `piecewise` or `smooth`, got `{v}`"
                        ),
                    })?
            }
            "hydro.init" => {
                self.hydro.init = match v.to_ascii_lowercase().as_str() {
                    "prior" => HydroInit::Prior,
                    "neutral" => HydroInit::Neutral,
                    _ => {
                        return Err(DiverError::Parse {
                            line,
                            message: format!("hydro.init must be `prior` or `neutral`, got `{v}`"),
                        })
                    }
                }
            }
            other => {
                return Err(DiverError::Parse {
                    line,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Overlays a flat `key = value` document onto `self`. Blank lines and
    /// text after `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| DiverError::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set_at(k, v, i + 1)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DiverError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.sef.validate()?;
        self.illuminate.validate()?;
        self.aocm.validate()?;
        self.hydro.validate()
    }

    /// Illumination settings with the run seed applied.
    pub fn illuminate_effective(&self) -> IlluminateConfig<T> {
        IlluminateConfig {
            seed: self.seed,
            ..self.illuminate.clone()
        }
    }

    /// Hydro settings with the run seed applied.
    pub fn hydro_effective(&self) -> HydroConfig<T> {
        HydroConfig {
            seed: self.seed,
            ..self.hydro.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_prefixes() {
        assert_eq!(StageSet::parse("route").unwrap().last(), Stage::Route);
        assert_eq!(
            StageSet::parse("route,illuminate,aocm,hydro").unwrap(),
            StageSet::full()
        );
        assert_eq!(
            StageSet::parse("sef, route").unwrap().last(),
            Stage::Enhance
        );
        assert!(StageSet::parse("route,aocm").is_err());
        assert!(StageSet::parse("hydro").is_err());
        assert!(StageSet::parse("").is_err());
        assert!(StageSet::parse("route,blur").is_err());
        assert_eq!(
            StageSet::through(Stage::Aocm).names(),
            ["route", "enhance", "aocm"]
        );
    }

    #[test]
    fn parses_flat_config() {
        let text = "# comment\nseed = 7\nsef.alpha=0.8\nilluminate.iters = 20 # inline\n\nhydro.softplus = piecewise\nhydro.p_terms = 3\nstages = route,sef\n";
        let cfg = PipelineConfig::<f64>::from_text(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sef.alpha, 0.8);
        assert_eq!(cfg.illuminate.iters, 20);
        assert_eq!(cfg.hydro.softplus, SoftplusVariant::Piecewise);
        assert_eq!(cfg.hydro.p_terms, 3);
        assert_eq!(cfg.stages.last(), Stage::Enhance);
        assert_eq!(cfg.hydro_effective().seed, 7);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(matches!(
            PipelineConfig::<f64>::from_text("nope = 1"),
            Err(DiverError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            PipelineConfig::<f64>::from_text("\nsef.alpha"),
            Err(DiverError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            PipelineConfig::<f64>::from_text("hydro.iters = -1"),
            Err(DiverError::Parse { .. })
        ));
        assert!(matches!(
            PipelineConfig::<f64>::from_text("sef.alpha = nan"),
            Err(DiverError::Parse { .. })
        ));
        assert!(matches!(
            PipelineConfig::<f64>::from_text("sef.alpha = 2"),
            Err(DiverError::InvalidConfig(_))
        ));
    }
}
