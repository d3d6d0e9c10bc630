use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::evd::{e_value, p_value, z_score};
use super::fit::{CurveForm, FitCurve};
use super::sampling::Protocol;
use super::StatError;

pub const MODEL_SET_VERSION: u32 = 1;

/// Target partition by number of known actives: 1 holds 5..=300, 2 holds
/// more than 300, 3 holds fewer than 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Subset {
    One,
    Two,
    Three,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::One, Subset::Two, Subset::Three];

    pub fn for_active_count(n: usize) -> Subset {
        match n {
            0..=4 => Subset::Three,
            5..=300 => Subset::One,
            _ => Subset::Two,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Subset::One => 1,
            Subset::Two => 2,
            Subset::Three => 3,
        }
    }
}

impl TryFrom<u8> for Subset {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(Subset::One),
            2 => Ok(Subset::Two),
            3 => Ok(Subset::Three),
            _ => Err(format!("subset must be 1, 2 or 3, got {v}")),
        }
    }
}

impl From<Subset> for u8 {
    fn from(s: Subset) -> u8 {
        s.number()
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// Query-versus-target screening.
    Cumulative,
    /// Target-versus-target association.
    Clustering,
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Purpose::Cumulative => "cumulative",
            Purpose::Clustering => "clustering",
        })
    }
}

pub type ModelKey = (Subset, Purpose);

/// Curve forms for the mean and standard-deviation fits of one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveForms {
    pub mean: CurveForm,
    pub std: CurveForm,
}

impl CurveForms {
    pub fn default_for(subset: Subset) -> CurveForms {
        match subset {
            Subset::Two => CurveForms { mean: CurveForm::Linear, std: CurveForm::Power },
            Subset::One | Subset::Three => CurveForms { mean: CurveForm::PowerOffset, std: CurveForm::PowerOffset },
        }
    }
}

/// How a model was produced; enough to re-derive any Z-score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProvenance {
    pub seed: u64,
    pub protocol: Protocol,
    pub pool_size: usize,
    pub pool_source: String,
    pub point_count: usize,
    pub mean_rss: f64,
    pub std_rss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gumbel: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<(f64, f64, usize)>,
    /// The std curve was refitted in power form because the fitted form was
    /// not positive and increasing for every S ≥ 1.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub std_power_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub z: f64,
    pub p: f64,
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatModel {
    pub subset: Subset,
    pub purpose: Purpose,
    pub ts: f64,
    pub mean_curve: FitCurve,
    pub std_curve: FitCurve,
    pub n_db: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<FitProvenance>,
}

impl StatModel {
    /// Reference parameters for each (subset, purpose) pair.
    pub fn reference(subset: Subset, purpose: Purpose, n_db: u64) -> StatModel {
        use CurveForm::*;
        let curve = |form, coef, r, c| FitCurve { form, coef, r, c };
        let (ts, mean_curve, std_curve) = match (subset, purpose) {
            (Subset::One, Purpose::Clustering) => {
                (0.19, curve(PowerOffset, 1.23e-2, 0.999, -0.187), curve(PowerOffset, 1.63e-2, 0.728, 1.36))
            }
            (Subset::One, Purpose::Cumulative) => {
                (0.25, curve(PowerOffset, 3.1e-3, 0.983, -0.818), curve(PowerOffset, 1.45e-2, 0.652, 0.273))
            }
            (Subset::Two, Purpose::Clustering) => (0.19, curve(Linear, 1.11e-2, 1.0, 0.0), curve(Power, 3.78e-2, 0.617, 0.0)),
            (Subset::Two, Purpose::Cumulative) => (0.18, curve(Linear, 1.5e-2, 1.0, 0.0), curve(Power, 4.12e-2, 0.632, 0.0)),
            (Subset::Three, Purpose::Clustering) => {
                (0.5, curve(PowerOffset, 9.54e-5, 0.999, -0.108), curve(PowerOffset, 1.47e-3, 0.64, 0.108))
            }
            (Subset::Three, Purpose::Cumulative) => {
                (0.24, curve(PowerOffset, 2.92e-3, 0.999, -1.61), curve(PowerOffset, 5.6e-3, 0.725, 4.87))
            }
        };
        StatModel { subset, purpose, ts, mean_curve, std_curve, n_db: n_db.max(1), provenance: None }
    }

    pub fn key(&self) -> ModelKey {
        (self.subset, self.purpose)
    }

    pub fn z_score(&self, raw: f64, s: f64) -> Result<f64, StatError> {
        z_score(raw, s, self)
    }

    pub fn significance(&self, raw: f64, s: f64) -> Result<Significance, StatError> {
        let z = self.z_score(raw, s)?;
        let p = p_value(z);
        Ok(Significance { z, p, e: e_value(p, self.n_db) })
    }

    pub fn validate(&self) -> Result<(), StatError> {
        if !(0.0..=1.0).contains(&self.ts) {
            return Err(StatError::InvalidThreshold(self.ts));
        }
        if self.n_db == 0 {
            return Err(StatError::Format("n_db must be positive".into()));
        }
        for c in [&self.mean_curve, &self.std_curve] {
            if ![c.coef, c.r, c.c].iter().all(|v| v.is_finite()) {
                return Err(StatError::Format("non-finite curve parameter".into()));
            }
        }
        Ok(())
    }
}

/// The persisted collection of fitted models, at most one per key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelSet {
    models: BTreeMap<ModelKey, StatModel>,
}

#[derive(Serialize, Deserialize)]
struct ModelSetDoc {
    version: u32,
    models: Vec<StatModel>,
}

impl ModelSet {
    pub fn new() -> ModelSet {
        ModelSet::default()
    }

    /// All six reference models with the given comparison counts.
    pub fn reference(n_db: impl Fn(Subset, Purpose) -> u64) -> ModelSet {
        let mut set = ModelSet::new();
        for subset in Subset::ALL {
            for purpose in [Purpose::Cumulative, Purpose::Clustering] {
                set.insert(StatModel::reference(subset, purpose, n_db(subset, purpose)));
            }
        }
        set
    }

    pub fn insert(&mut self, model: StatModel) -> Option<StatModel> {
        self.models.insert(model.key(), model)
    }

    pub fn get(&self, subset: Subset, purpose: Purpose) -> Option<&StatModel> {
        self.models.get(&(subset, purpose))
    }

    pub fn iter(&self) -> impl Iterator<Item = &StatModel> {
        self.models.values()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn to_json(&self) -> String {
        let doc = ModelSetDoc { version: MODEL_SET_VERSION, models: self.models.values().cloned().collect() };
        serde_json::to_string_pretty(&doc).expect("model set serializes")
    }

    pub fn from_json(text: &str) -> Result<ModelSet, StatError> {
        let doc: ModelSetDoc = serde_json::from_str(text).map_err(|e| StatError::Format(e.to_string()))?;
        if doc.version != MODEL_SET_VERSION {
            return Err(StatError::Format(format!("unsupported version {}", doc.version)));
        }
        let mut set = ModelSet::new();
        for m in doc.models {
            m.validate()?;
            if set.insert(m.clone()).is_some() {
                return Err(StatError::Format(format!("duplicate model for subset {} {}", m.subset, m.purpose)));
            }
        }
        Ok(set)
    }
}
