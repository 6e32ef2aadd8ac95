//! Native hyperparameter ranges and their map to the unit cube.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log2,
    Log10,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    #[default]
    Continuous,
    Integer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default, rename = "type")]
    pub kind: ParamKind,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpaceError {
    #[error("search space has no dimensions")]
    Empty,
    #[error("dimension `{name}`: lower ({lower}) must be below upper ({upper})")]
    EmptyRange {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("dimension `{name}`: {scale:?} scale needs a positive lower bound, got {lower}")]
    NonPositiveLog {
        name: String,
        scale: Scale,
        lower: f64,
    },
    #[error("duplicate dimension name `{0}`")]
    DuplicateName(String),
    #[error("point has {got} coordinates, space has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl Dimension {
    fn transform(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log2 => v.log2(),
            Scale::Log10 => v.log10(),
        }
    }

    fn untransform(&self, t: f64) -> f64 {
        match self.scale {
            Scale::Linear => t,
            Scale::Log2 => t.exp2(),
            Scale::Log10 => 10f64.powf(t),
        }
    }

    /// Native value at unit coordinate `u`, rounded for integer parameters.
    pub fn to_native(&self, u: f64) -> f64 {
        let (a, b) = (self.transform(self.lower), self.transform(self.upper));
        let v = self
            .untransform(a + u.clamp(0.0, 1.0) * (b - a))
            .clamp(self.lower, self.upper);
        match self.kind {
            ParamKind::Continuous => v,
            ParamKind::Integer => v.round().clamp(self.lower.ceil(), self.upper.floor()),
        }
    }

    /// Unit coordinate of native value `v` (clamped into range).
    pub fn to_unit(&self, v: f64) -> f64 {
        let (a, b) = (self.transform(self.lower), self.transform(self.upper));
        ((self.transform(v.clamp(self.lower, self.upper)) - a) / (b - a)).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, SpaceError> {
        if dims.is_empty() {
            return Err(SpaceError::Empty);
        }
        for (i, d) in dims.iter().enumerate() {
            if !(d.lower < d.upper) || !d.lower.is_finite() || !d.upper.is_finite() {
                return Err(SpaceError::EmptyRange {
                    name: d.name.clone(),
                    lower: d.lower,
                    upper: d.upper,
                });
            }
            if d.scale != Scale::Linear && !(d.lower > 0.0) {
                return Err(SpaceError::NonPositiveLog {
                    name: d.name.clone(),
                    scale: d.scale,
                    lower: d.lower,
                });
            }
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(SpaceError::DuplicateName(d.name.clone()));
            }
        }
        Ok(Self { dims })
    }

    /// `d` linear continuous dimensions `x1..xd` on `[0,1]`.
    pub fn unit(d: usize) -> Self {
        Self {
            dims: (1..=d)
                .map(|i| Dimension {
                    name: format!("x{i}"),
                    lower: 0.0,
                    upper: 1.0,
                    scale: Scale::Linear,
                    kind: ParamKind::Continuous,
                })
                .collect(),
        }
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn to_native(&self, unit: &[f64]) -> Result<Vec<f64>, SpaceError> {
        if unit.len() != self.dims.len() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.dims.len(),
                got: unit.len(),
            });
        }
        Ok(self
            .dims
            .iter()
            .zip(unit)
            .map(|(d, &u)| d.to_native(u))
            .collect())
    }

    pub fn to_unit(&self, native: &[f64]) -> Result<Vec<f64>, SpaceError> {
        if native.len() != self.dims.len() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.dims.len(),
                got: native.len(),
            });
        }
        Ok(self
            .dims
            .iter()
            .zip(native)
            .map(|(d, &v)| d.to_unit(v))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(name: &str, lower: f64, upper: f64, scale: Scale, kind: ParamKind) -> Dimension {
        Dimension {
            name: name.into(),
            lower,
            upper,
            scale,
            kind,
        }
    }

    #[test]
    fn log2_range_maps_through_midpoint() {
        let d = dim(
            "C",
            2f64.powi(-10),
            2f64.powi(10),
            Scale::Log2,
            ParamKind::Continuous,
        );
        assert!((d.to_native(0.5) - 1.0).abs() < 1e-12);
        assert!((d.to_native(0.75) - 32.0).abs() < 1e-9);
        assert!((d.to_unit(32.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn integers_round_inside_range() {
        let d = dim("layers", 1.0, 4.0, Scale::Linear, ParamKind::Integer);
        assert_eq!(d.to_native(0.0), 1.0);
        assert_eq!(d.to_native(0.49), 2.0);
        assert_eq!(d.to_native(1.0), 4.0);
    }

    #[test]
    fn validation_names_the_dimension() {
        let err = SearchSpace::new(vec![dim(
            "gamma",
            0.0,
            1.0,
            Scale::Log2,
            ParamKind::Continuous,
        )])
        .unwrap_err();
        assert!(err.to_string().contains("gamma"));
        assert!(SearchSpace::new(vec![dim(
            "a",
            1.0,
            1.0,
            Scale::Linear,
            ParamKind::Continuous
        )])
        .is_err());
        assert!(SearchSpace::new(vec![]).is_err());
        let dup = dim("a", 0.0, 1.0, Scale::Linear, ParamKind::Continuous);
        assert!(SearchSpace::new(vec![dup.clone(), dup]).is_err());
    }

    #[test]
    fn round_trip() {
        let s = SearchSpace::new(vec![
            dim("lr", 1e-5, 1e-1, Scale::Log10, ParamKind::Continuous),
            dim("m", -1.0, 3.0, Scale::Linear, ParamKind::Continuous),
        ])
        .unwrap();
        let u = [0.3, 0.8];
        let back = s.to_unit(&s.to_native(&u).unwrap()).unwrap();
        assert!((back[0] - 0.3).abs() < 1e-12 && (back[1] - 0.8).abs() < 1e-12);
    }
}
