//! JSON form of a radius function.

use std::fs;
use std::path::Path;

use rcs_core::sphere::{standard_radius, RadiusKind};
use rcs_core::{RadiusFunction, RcsSpec};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Hermite,
    CasellaHwang,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knot {
    pub x: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusFile {
    pub kind: Kind,
    pub p: u32,
    pub alpha: f64,
    pub d: f64,
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<Knot>>,
}

impl RadiusFile {
    pub fn from_spec(spec: &RcsSpec) -> Result<Self, Failure> {
        let r = spec.radius();
        let (kind, knots) = match r.kind() {
            RadiusKind::Hermite => {
                let s = r.spline().expect("hermite radius has a spline");
                let knots = s
                    .knots()
                    .iter()
                    .zip(s.values())
                    .map(|(&x, &b)| Knot { x, b })
                    .collect();
                (Kind::Hermite, Some(knots))
            }
            RadiusKind::CasellaHwang => (Kind::CasellaHwang, None),
            RadiusKind::Constant => {
                return Err(Failure::Input(
                    "constant radius functions have no file form".into(),
                ))
            }
        };
        Ok(Self {
            kind,
            p: spec.p(),
            alpha: spec.alpha(),
            d: r.d(),
            k: r.k(),
            knots,
        })
    }

    pub fn to_spec(&self) -> Result<RcsSpec, Failure> {
        let radius = match self.kind {
            Kind::Hermite => {
                let knots = self
                    .knots
                    .as_ref()
                    .ok_or_else(|| Failure::Input("a hermite radius needs a knots array".into()))?;
                let (x, b): (Vec<f64>, Vec<f64>) = knots.iter().map(|k| (k.x, k.b)).unzip();
                if x.last() != Some(&self.k) {
                    return Err(Failure::Input(format!(
                        "the last knot must sit at k = {}",
                        self.k
                    )));
                }
                RadiusFunction::hermite(self.p, self.d, x, b)?
            }
            Kind::CasellaHwang => {
                if self.knots.is_some() {
                    return Err(Failure::Input(
                        "a casella_hwang radius takes no knots".into(),
                    ));
                }
                RadiusFunction::casella_hwang_with_cap(self.p, self.d, self.k)?
            }
        };
        Ok(RcsSpec::new(self.alpha, radius)?)
    }

    pub fn casella_hwang(p: u32, alpha: f64, k: f64) -> Result<Self, Failure> {
        let d = standard_radius(p, alpha)?;
        let spec = RcsSpec::new(alpha, RadiusFunction::casella_hwang_with_cap(p, d, k)?)?;
        Self::from_spec(&spec)
    }

    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Input(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(self).expect("radius file serializes");
        text.push('\n');
        crate::write_file(path, &text)
    }
}
