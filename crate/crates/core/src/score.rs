use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact rational metric value in `[0, 1]`.
///
/// Serialized as `{"value": <f64>, "ratio": "<num>/<den>"}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Score(BigRational);

impl Score {
    pub fn new(numer: usize, denom: usize) -> Self {
        assert!(denom > 0, "score denominator must be positive");
        Self(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    pub fn ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Mean of `scores`; `None` for an empty input.
    pub fn mean<I: IntoIterator<Item = Score>>(scores: I) -> Option<Score> {
        let mut n = 0usize;
        let mut total = BigRational::zero();
        for s in scores {
            total += s.0;
            n += 1;
        }
        (n > 0).then(|| Score(total / BigRational::from_integer(BigInt::from(n))))
    }
}

impl Sum for Score {
    fn sum<I: Iterator<Item = Score>>(iter: I) -> Self {
        Score(iter.map(|s| s.0).sum())
    }
}

impl From<BigRational> for Score {
    fn from(r: BigRational) -> Self {
        Self(r)
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Score {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let n: BigInt = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let d: BigInt = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        Ok(Score(BigRational::new(n, d)))
    }
}

#[derive(Serialize, Deserialize)]
struct ScoreRepr {
    value: f64,
    ratio: String,
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ScoreRepr {
            value: self.to_f64(),
            ratio: self.to_string(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ScoreRepr::deserialize(deserializer)?;
        repr.ratio.parse().map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_is_exact() {
        let m = Score::mean([Score::new(1, 3), Score::new(1, 2), Score::one()]).unwrap();
        assert_eq!(m, Score::new(11, 18));
        assert_eq!(Score::mean(std::iter::empty()), None);
    }

    #[test]
    fn json_shape() {
        let s = Score::new(2, 4);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"value":0.5,"ratio":"1/2"}"#);
        assert_eq!(serde_json::from_str::<Score>(&json).unwrap(), s);
    }
}
