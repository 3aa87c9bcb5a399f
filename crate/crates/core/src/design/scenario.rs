use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensitivity::ReductionStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplingPolicy {
    /// Budget-proportional uniform weights
    Equidistant,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlPolicy {
    Zero,
    Optimized,
}

/// A labeled setting `w-u-a`, e.g. `w*-u0-svd3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub sampling: SamplingPolicy,
    pub control: ControlPolicy,
    pub strategy: ReductionStrategy,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = match self.sampling {
            SamplingPolicy::Equidistant => "w0",
            SamplingPolicy::Optimized => "w*",
        };
        let u = match self.control {
            ControlPolicy::Zero => "u0",
            ControlPolicy::Optimized => "u*",
        };
        write!(f, "{w}-{u}-{}", self.strategy)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |position: usize, message: String| Error::Parse { position, message };
        let sampling = match s.get(0..2) {
            Some("w*") => SamplingPolicy::Optimized,
            Some("w0") => SamplingPolicy::Equidistant,
            _ => return Err(parse_err(0, "expected 'w*' or 'w0'".into())),
        };
        if s.as_bytes().get(2) != Some(&b'-') {
            return Err(parse_err(2, "expected '-'".into()));
        }
        let control = match s.get(3..5) {
            Some("u*") => ControlPolicy::Optimized,
            Some("u0") => ControlPolicy::Zero,
            _ => return Err(parse_err(3, "expected 'u*' or 'u0'".into())),
        };
        if s.as_bytes().get(5) != Some(&b'-') {
            return Err(parse_err(5, "expected '-'".into()));
        }
        let strategy = s[6..].parse::<ReductionStrategy>().map_err(|e| match e {
            Error::Parse { position, message } => Error::Parse { position: position + 6, message },
            other => other,
        })?;
        Ok(Scenario { sampling, control, strategy })
    }
}

pub fn parse_scenario(s: &str) -> Result<Scenario> {
    s.parse()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let s = parse_scenario("w*-u0-svd3").unwrap();
        assert_eq!(s, Scenario { sampling: SamplingPolicy::Optimized, control: ControlPolicy::Zero, strategy: ReductionStrategy::Svd(3) });
        let s = parse_scenario("w0-u0-c").unwrap();
        assert_eq!((s.sampling, s.control, s.strategy), (SamplingPolicy::Equidistant, ControlPolicy::Zero, ReductionStrategy::Complete));
        let s = parse_scenario("w*-u*-psvd10").unwrap();
        assert_eq!(s.strategy, ReductionStrategy::Psvd(10));
        assert_eq!(s.control, ControlPolicy::Optimized);
        let s = parse_scenario("w*-u*-svd2").unwrap();
        assert_eq!((s.sampling, s.control), (SamplingPolicy::Optimized, ControlPolicy::Optimized));
    }

    #[test]
    fn canonical_round_trip() {
        for s in ["w0-u0-l", "w*-u0-o", "w*-u*-ll", "w0-u*-tsvd2", "w*-u*-svd12", "w0-u0-psvd1", "w*-u0-c"] {
            assert_eq!(parse_scenario(s).unwrap().to_string(), s);
        }
    }

    #[test]
    fn malformed_reports_position() {
        for (s, pos) in [("w?-u0-c", 0), ("w*u0-c", 2), ("w*-x0-c", 3), ("w*-u0+c", 5), ("w*-u0-q", 6), ("w*-u0-svd", 9), ("w*-u0-svd0", 9), ("", 0)] {
            match parse_scenario(s) {
                Err(Error::Parse { position, .. }) => assert_eq!(position, pos, "{s}"),
                other => panic!("{s}: {other:?}"),
            }
        }
    }
}
