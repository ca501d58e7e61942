//! JSON instance files. Dense entries may be numbers or the string `"inf"`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::space_cost::{build_action_cost, ActionDiscretization, Potential};
use crate::space_cost::{build_circle_cost, wrap_displacement, CostKernel, FiniteSpace};
use crate::twist::{make_generating, twist_cost, Family};
use crate::SquareMatrix;

/// A cost entry: finite or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry(pub f64);

impl Serialize for Entry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Entry(v)),
            Raw::Text(t) if t == "inf" || t == "+inf" => Ok(Entry(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CircleCostSpec {
    /// `d(x, y)²/2`, `d` the circle distance.
    SquaredDistance,
    Constant { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    TwoWell { well: f64, scale: f64 },
    Cosine { amplitude: f64 },
}

impl PotentialSpec {
    pub fn to_potential(&self) -> Potential {
        match *self {
            PotentialSpec::Zero => Potential::Zero,
            PotentialSpec::TwoWell { well, scale } => Potential::TwoWell { well, scale },
            PotentialSpec::Cosine { amplitude } => Potential::Cosine { amplitude },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Dense {
        entries: Vec<Vec<Entry>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Circle {
        grid_n: usize,
        cost: CircleCostSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<usize>,
    },
    Action {
        grid_n: usize,
        steps_m: usize,
        potential: PotentialSpec,
        #[serde(default)]
        cohomology: f64,
    },
    Twist {
        generating: Family,
        c: f64,
        grid_n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<usize>,
    },
}

impl InstanceSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Instance(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance specs serialize")
    }

    pub fn build(&self) -> Result<CostKernel> {
        match self {
            InstanceSpec::Dense { entries, labels } => {
                let n = entries.len();
                let rows: Vec<Vec<f64>> = entries.iter().map(|r| r.iter().map(|e| e.0).collect()).collect();
                if let Some(bad) = rows.iter().find(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
                }
                let mut space = FiniteSpace::new(n)?;
                if let Some(l) = labels {
                    space = space.with_labels(l.clone())?;
                }
                let m = SquareMatrix::from_rows(&rows).ok_or(Error::InvalidSpace("entries are not square".into()))?;
                CostKernel::from_matrix(space, m)
            }
            InstanceSpec::Circle { grid_n, cost, window } => match *cost {
                CircleCostSpec::SquaredDistance => build_circle_cost(
                    *grid_n,
                    |x, y| {
                        let d = wrap_displacement(y - x);
                        0.5 * d * d
                    },
                    *window,
                ),
                CircleCostSpec::Constant { value } => build_circle_cost(*grid_n, move |_, _| value, *window),
            },
            InstanceSpec::Action {
                grid_n,
                steps_m,
                potential,
                cohomology,
            } => build_action_cost(&ActionDiscretization::new(*grid_n, *steps_m, potential.to_potential(), *cohomology)),
            InstanceSpec::Twist { generating, c, grid_n, window } => {
                Ok(twist_cost(&make_generating(*generating)?, *c, *grid_n, *window)?.kernel)
            }
        }
    }
}

/// Dense instance spec of a kernel (materializing callable storage).
pub fn dense_spec(c: &CostKernel) -> InstanceSpec {
    let m = c.to_dense();
    InstanceSpec::Dense {
        entries: m.rows().map(|r| r.iter().map(|&v| Entry(v)).collect()).collect(),
        labels: c.space().labels().map(|l| l.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_with_infinity() {
        let text = r#"{"type": "dense", "entries": [[0, "inf"], [2, 1]]}"#;
        let spec = InstanceSpec::from_json(text).unwrap();
        let c = spec.build().unwrap();
        assert_eq!(c.entry(0, 1), f64::INFINITY);
        let again = InstanceSpec::from_json(&dense_spec(&c).to_json()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_entries() {
        assert!(InstanceSpec::from_json(r#"{"type": "dense", "entries": [[0]], "extra": 1}"#).is_err());
        assert!(InstanceSpec::from_json(r#"{"type": "dense", "entries": [["nan"]]}"#).is_err());
        let spec = InstanceSpec::from_json(r#"{"type": "dense", "entries": [["inf", "inf"], [0, 0]]}"#).unwrap();
        assert_eq!(spec.build().unwrap_err(), Error::InfiniteRow(0));
    }

    #[test]
    fn other_instance_types() {
        let c = InstanceSpec::from_json(r#"{"type": "circle", "grid_n": 4, "cost": {"kind": "squared_distance"}}"#)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(c.entry(0, 1), 1.0 / 32.0);
        let a = InstanceSpec::from_json(
            r#"{"type": "action", "grid_n": 4, "steps_m": 1, "potential": {"kind": "zero"}}"#,
        )
        .unwrap()
        .build()
        .unwrap();
        assert_eq!(a.entry(0, 2), 0.125);
        let t = InstanceSpec::from_json(
            r#"{"type": "twist", "generating": {"family": "standard", "eps": 0.5}, "c": 0.0, "grid_n": 8}"#,
        )
        .unwrap()
        .build()
        .unwrap();
        assert_eq!(t.n(), 8);
    }
}
