//! JSON system definitions over the builtin families.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Bilinear2d, ControlRange, ControlSystem, DiagLinear2d, Duffing, FieldFamily, ScalarLinear, StateBox};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Serializable description of a system built from a named builtin family.
///
/// `coefficients` carries family-specific arrays: `b` for `scalar_linear`,
/// `input_matrix` for `diag_linear_2d`, `a`/`b`/`c` for `bilinear_2d`.
/// `bistable_1d` names `duffing_controlled`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub dim: usize,
    pub params: Vec<f64>,
    pub fields: String,
    #[serde(default)]
    pub coefficients: BTreeMap<String, Vec<f64>>,
    pub control_box: BoxSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub letters: Option<Vec<Vec<f64>>>,
    pub state_box: BoxSpec,
}

impl SystemSpec {
    pub fn family(&self) -> Result<Arc<dyn FieldFamily>> {
        let coeff = |key: &str, len: usize| -> Result<Option<Vec<f64>>> {
            match self.coefficients.get(key) {
                None => Ok(None),
                Some(v) if v.len() == len => Ok(Some(v.clone())),
                Some(v) => Err(Error::InvalidSystem(format!(
                    "coefficient `{key}` needs {len} entries, got {}",
                    v.len()
                ))),
            }
        };
        let inputs = self.control_box.lo.len();
        let family: Arc<dyn FieldFamily> = match self.fields.as_str() {
            "scalar_linear" => {
                let mut f = ScalarLinear::default();
                if let Some(b) = coeff("b", 1)? {
                    f.b = b[0];
                }
                Arc::new(f)
            }
            "diag_linear_2d" => match coeff("input_matrix", 2 * inputs)? {
                Some(m) => Arc::new(DiagLinear2d::new(m, inputs)),
                None if inputs == 2 => Arc::new(DiagLinear2d::default()),
                None => {
                    return Err(Error::InvalidSystem(
                        "diag_linear_2d with non-default inputs needs `input_matrix`".into(),
                    ))
                }
            },
            "bilinear_2d" => {
                let mut f = Bilinear2d::default();
                if let Some(a) = coeff("a", 4)? {
                    f.a.copy_from_slice(&a);
                }
                if let Some(b) = coeff("b", 4)? {
                    f.b.copy_from_slice(&b);
                }
                if let Some(c) = coeff("c", 2)? {
                    f.c.copy_from_slice(&c);
                }
                Arc::new(f)
            }
            "duffing_controlled" | "bistable_1d" => Arc::new(Duffing),
            other => return Err(Error::UnknownFamily(other.to_string())),
        };
        if family.state_dim() != self.dim {
            return Err(Error::InvalidSystem(format!(
                "family `{}` has dimension {}, spec says {}",
                self.fields,
                family.state_dim(),
                self.dim
            )));
        }
        Ok(family)
    }

    pub fn control_range(&self) -> Result<ControlRange> {
        let (lo, hi) = (self.control_box.lo.clone(), self.control_box.hi.clone());
        match &self.letters {
            Some(l) => ControlRange::with_letters(lo, hi, l.clone()),
            None => ControlRange::new(lo, hi),
        }
    }

    pub fn build(&self) -> Result<ControlSystem> {
        ControlSystem::new(
            self.family()?,
            self.params.clone(),
            self.control_range()?,
            StateBox::new(self.state_box.lo.clone(), self.state_box.hi.clone())?,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSystem(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalar_example() {
        let spec = SystemSpec::from_json(
            r#"{"dim":1,"params":[1.0],"fields":"scalar_linear",
                "control_box":{"lo":[-1],"hi":[1]},"state_box":{"lo":[-2],"hi":[2]}}"#,
        )
        .unwrap();
        let sys = spec.build().unwrap();
        assert_eq!(sys.family_name(), "scalar_linear");
        assert_eq!(sys.control_range().num_letters(), 3);
    }

    #[test]
    fn rejects_unknown_family_and_bad_dims() {
        let mut spec = SystemSpec {
            dim: 1,
            params: vec![1.0],
            fields: "nope".into(),
            coefficients: BTreeMap::new(),
            control_box: BoxSpec { lo: vec![-1.0], hi: vec![1.0] },
            letters: None,
            state_box: BoxSpec { lo: vec![-2.0], hi: vec![2.0] },
        };
        assert!(matches!(spec.build(), Err(Error::UnknownFamily(_))));
        spec.fields = "bilinear_2d".into();
        assert!(matches!(spec.build(), Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn bistable_alias() {
        let spec = SystemSpec {
            dim: 1,
            params: vec![1.0, 1.0, 0.05],
            fields: "bistable_1d".into(),
            coefficients: BTreeMap::new(),
            control_box: BoxSpec { lo: vec![-1.0], hi: vec![1.0] },
            letters: None,
            state_box: BoxSpec { lo: vec![-1.5], hi: vec![1.5] },
        };
        assert_eq!(spec.build().unwrap().family_name(), "duffing_controlled");
    }
}
