use serde::{Deserialize, Serialize};

/// Sampling temperature, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(value: f64) -> Result<Self, String> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(format!("temperature must be positive and finite, got {value}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Temperature {
    type Error = String;

    fn try_from(v: f64) -> Result<Self, String> {
        Self::new(v)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// Inverse time decay: `T_t = T1 / (1 + beta * (t - 1))` for `t >= 1`.
pub fn temperature(t: u32, t1: f64, beta: f64) -> Result<Temperature, String> {
    if t == 0 {
        return Err("iteration index starts at 1".into());
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(format!("decay rate must be finite and >= 0, got {beta}"));
    }
    Temperature::new(t1)?;
    Temperature::new(t1 / (1.0 + beta * f64::from(t - 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        assert_eq!(temperature(1, 1.2, 0.2).unwrap().value(), 1.2);
        assert!((temperature(2, 1.2, 0.2).unwrap().value() - 1.0).abs() < 1e-12);
        let t3 = temperature(3, 1.2, 0.2).unwrap().value();
        assert!((t3 - 1.2 / 1.4).abs() < 1e-12);
        assert!((t3 - 0.85).abs() < 0.01);
    }

    #[test]
    fn monotone_in_t() {
        for t in 1..50 {
            assert!(temperature(t + 1, 1.2, 0.2).unwrap() < temperature(t, 1.2, 0.2).unwrap());
            assert_eq!(temperature(t, 0.7, 0.0).unwrap().value(), 0.7);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(temperature(0, 1.2, 0.2).is_err());
        assert!(temperature(1, 0.0, 0.2).is_err());
        assert!(temperature(1, 1.2, -0.1).is_err());
        assert!(Temperature::new(f64::NAN).is_err());
    }
}
