use serde::{Deserialize, Serialize};

use super::mlp::{param_count, MlpModel, HIDDEN, OUTPUT};
use super::NnError;

const MAGIC: &[u8; 4] = b"SFWT";
const VERSION: u32 = 1;
const HEADER: usize = 16;

pub(crate) fn shape_tag(input: usize) -> String {
    format!("mlp-{input}-{HIDDEN}-{HIDDEN}-{OUTPUT}")
}

fn input_for_len(len: usize) -> Option<usize> {
    let fixed = param_count(0);
    (len >= fixed && (len - fixed).is_multiple_of(HIDDEN)).then(|| (len - fixed) / HIDDEN)
}

/// Flattened parameters in the layout W1, b1, W2, b2, W3, b3 (matrices row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatWeights {
    pub shape_tag: String,
    pub values: Vec<f64>,
}

impl FlatWeights {
    pub fn flatten(model: &MlpModel) -> Self {
        FlatWeights {
            shape_tag: shape_tag(model.input_dim()),
            values: model.params().to_vec(),
        }
    }

    /// Input width encoded by the tag, checked against the value count.
    pub fn input_dim(&self) -> Result<usize, NnError> {
        let input = self
            .shape_tag
            .strip_prefix("mlp-")
            .and_then(|s| s.split('-').next())
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&d| shape_tag(d) == self.shape_tag)
            .ok_or_else(|| NnError::Format(format!("unknown layout {:?}", self.shape_tag)))?;
        if self.values.len() != param_count(input) {
            return Err(NnError::LengthMismatch {
                tag: self.shape_tag.clone(),
                expected: param_count(input),
                got: self.values.len(),
            });
        }
        Ok(input)
    }

    pub fn unflatten(&self) -> Result<MlpModel, NnError> {
        MlpModel::from_params(self.input_dim()?, self.values.clone())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// 16-byte header (magic, u32 version, u64 value count) then little-endian f64 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        if bytes.len() < HEADER || &bytes[..4] != MAGIC {
            return Err(NnError::Format("missing weights header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(NnError::Format(format!("unsupported weights version {version}")));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[HEADER..];
        if body.len() != n.saturating_mul(8) {
            return Err(NnError::Format(format!(
                "header declares {n} values, body holds {} bytes",
                body.len()
            )));
        }
        let input = input_for_len(n).ok_or_else(|| NnError::Format(format!("{n} values match no layout")))?;
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(FlatWeights {
            shape_tag: shape_tag(input),
            values,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weights serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, NnError> {
        let w: FlatWeights = serde_json::from_str(s).map_err(|e| NnError::Format(e.to_string()))?;
        w.input_dim()?;
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::INPUT;

    #[test]
    fn round_trip_exact() {
        let m = MlpModel::init(INPUT, 9);
        let f = FlatWeights::flatten(&m);
        assert_eq!(f.len(), 1570);
        assert_eq!(f.shape_tag, "mlp-78-16-16-2");
        assert_eq!(f.unflatten().unwrap(), m);
        assert_eq!(FlatWeights::from_bytes(&f.to_bytes()).unwrap(), f);
        assert_eq!(FlatWeights::from_json(&f.to_json()).unwrap(), f);
    }

    #[test]
    fn layout_order() {
        let m = MlpModel::init(3, 1);
        let f = FlatWeights::flatten(&m);
        let concat: Vec<f64> = [m.w1(), m.b1(), m.w2(), m.b2(), m.w3(), m.b3()].concat();
        assert_eq!(f.values, concat);
    }

    #[test]
    fn zero_model_flattens_to_zeros() {
        let f = FlatWeights::flatten(&MlpModel::zeros(INPUT));
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn header_layout() {
        let b = FlatWeights::flatten(&MlpModel::zeros(INPUT)).to_bytes();
        assert_eq!(b.len(), 16 + 8 * 1570);
        assert_eq!(&b[..4], b"SFWT");
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 1570);
    }

    #[test]
    fn malformed_inputs() {
        let mut f = FlatWeights::flatten(&MlpModel::zeros(INPUT));
        f.values.pop();
        assert!(matches!(f.unflatten(), Err(NnError::LengthMismatch { expected: 1570, got: 1569, .. })));
        let mut b = FlatWeights::flatten(&MlpModel::zeros(INPUT)).to_bytes();
        b.truncate(b.len() - 1);
        assert!(FlatWeights::from_bytes(&b).is_err());
        assert!(FlatWeights::from_bytes(b"nope").is_err());
        let bad = FlatWeights {
            shape_tag: "lstm".into(),
            values: vec![],
        };
        assert!(bad.unflatten().is_err());
    }
}
