use crate::error::{Error, Result};

use super::Constituent;

/// Tidal elevation `Σ aᵢ·cos(t/dᵢ + φᵢ)` with `t` in hours.
///
/// Each constituent's `period` is the divisor `dᵢ` of the cosine argument.
pub fn tidal_elevation(t_hours: f64, constituents: &[Constituent]) -> f64 {
    constituents
        .iter()
        .map(|c| c.amplitude * (t_hours / c.period + c.phase).cos())
        .sum()
}

/// The five-constituent open-sea forcing used by the built-in basins.
pub fn default_constituents() -> Vec<Constituent> {
    [
        (0.075, 25.82, 3.40),
        (0.095, 23.94, 3.60),
        (0.1, 12.66, 5.93),
        (0.395, 12.42, 0.0),
        (0.06, 12.00, 0.75),
    ]
    .into_iter()
    .map(|(amplitude, period, phase)| Constituent {
        amplitude,
        period,
        phase,
    })
    .collect()
}

/// Quadratic bottom-friction coefficient `C_f·|q|/H²` (units 1/s).
pub fn bottom_friction_coeff(q_mag: f64, depth: f64, c_f: f64) -> Result<f64> {
    if !(depth > 0.0) {
        return Err(Error::NonFinite {
            stage: "bottom friction".into(),
            detail: format!("total depth {depth} is not positive"),
        });
    }
    Ok(c_f * q_mag / (depth * depth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forcing_at_time_zero() {
        // 0.075cos(3.40) + 0.095cos(3.60) + 0.1cos(5.93) + 0.395 + 0.06cos(0.75)
        let v = tidal_elevation(0.0, &default_constituents());
        assert!((v - 0.375027).abs() < 1e-5, "{v}");
    }

    #[test]
    fn empty_constituents_give_zero() {
        assert_eq!(tidal_elevation(7.3, &[]), 0.0);
    }

    #[test]
    fn friction_examples() {
        assert!((bottom_friction_coeff(1.0, 2.0, 0.009).unwrap() - 0.00225).abs() < 1e-15);
        assert_eq!(bottom_friction_coeff(0.0, 3.0, 0.004).unwrap(), 0.0);
        assert!((bottom_friction_coeff(1.0, 1.0, 0.004).unwrap() - 0.004).abs() < 1e-15);
        assert!(bottom_friction_coeff(1.0, 0.0, 0.004).is_err());
        assert!(bottom_friction_coeff(1.0, -1.0, 0.004).is_err());
    }

    proptest! {
        #[test]
        fn forcing_bounded_by_amplitude_sum(t in 0.0f64..1e5) {
            prop_assert!(tidal_elevation(t, &default_constituents()).abs() <= 0.725);
        }
    }
}
