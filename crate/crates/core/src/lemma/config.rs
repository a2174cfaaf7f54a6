use serde::{Deserialize, Serialize};

use super::{LemmaError, LemmaOptions, LemmaProblem};
use crate::complex::C;
use crate::planar::{PlanarRegion, PolygonCurve};
use crate::weierstrass::WeierstrassField;

/// Seed immersion on the ambient region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SeedSpec {
    /// `X(u + iv) = c·(u, v, 0)`.
    Plane { scale: f64 },
    /// Enneper's surface `f = 1, g = z`.
    Enneper,
}

impl SeedSpec {
    pub fn field(&self, domain: PlanarRegion) -> Result<WeierstrassField, LemmaError> {
        match *self {
            SeedSpec::Plane { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(LemmaError::InvalidConfig(format!("plane scale must be positive, got {scale}")));
                }
                Ok(WeierstrassField::plane(scale, domain))
            }
            SeedSpec::Enneper => Ok(WeierstrassField::enneper(domain)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolygonSpec {
    Regular {
        sides: usize,
        circumradius: f64,
        #[serde(default)]
        phase: f64,
    },
    Vertices { vertices: Vec<C> },
}

impl PolygonSpec {
    pub fn build(&self) -> Result<PolygonCurve, LemmaError> {
        let p = match self {
            PolygonSpec::Regular {
                sides,
                circumradius,
                phase,
            } => PolygonCurve::regular(*circumradius, *sides, *phase),
            PolygonSpec::Vertices { vertices } => PolygonCurve::new(vertices.clone()),
        };
        p.map_err(|e| LemmaError::InvalidConfig(format!("polygon: {e}")))
    }
}

/// JSON input of the `lemma` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaConfig {
    pub r: f64,
    pub s: f64,
    pub b1: f64,
    pub b2: f64,
    pub seed: SeedSpec,
    pub polygon: PolygonSpec,
    pub ambient: PlanarRegion,
    #[serde(default)]
    pub options: LemmaOptions,
}

impl LemmaConfig {
    pub fn from_json(text: &str) -> Result<Self, LemmaError> {
        serde_json::from_str(text).map_err(|e| LemmaError::InvalidConfig(format!("config: {e}")))
    }

    pub fn problem(&self) -> Result<LemmaProblem, LemmaError> {
        Ok(LemmaProblem {
            x: self.seed.field(self.ambient.clone())?,
            p: self.polygon.build()?,
            o: self.ambient.clone(),
            r: self.r,
            s: self.s,
            b1: self.b1,
            b2: self.b2,
            options: self.options.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESK: &str = r#"{
        "r": 10.0, "s": 0.09, "b1": 0.05, "b2": 0.05,
        "seed": {"type": "plane", "scale": 10.0},
        "polygon": {"type": "regular", "sides": 64, "circumradius": 1.0027},
        "ambient": {"type": "disk", "center": [0.0, 0.0], "radius": 1.0044},
        "options": {"rng_seed": 7}
    }"#;

    #[test]
    fn parses_desk_config() {
        let c = LemmaConfig::from_json(DESK).unwrap();
        assert_eq!(c.options.rng_seed, 7);
        assert!(c.options.deformations);
        let p = c.problem().unwrap();
        assert_eq!(p.p.len(), 64);
        let back = LemmaConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_polygons() {
        assert!(LemmaConfig::from_json(&DESK.replace("\"b2\"", "\"bb\"")).is_err());
        let bad = DESK.replace("\"sides\": 64", "\"sides\": 2");
        let c = LemmaConfig::from_json(&bad).unwrap();
        assert!(matches!(c.problem(), Err(LemmaError::InvalidConfig(_))));
    }
}
