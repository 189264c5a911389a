use crate::{Error, Result, Scalar};

/// Instantaneous PV output in watt: panel area (m²) × efficiency × irradiance (W/m²).
pub fn pv_power<T: Scalar>(area: T, efficiency: T, irradiance: T) -> Result<T> {
    if area < T::zero() || irradiance < T::zero() {
        return Err(Error::InvalidInput(format!(
            "pv area ({area}) and irradiance ({irradiance}) must be non-negative"
        )));
    }
    if efficiency < T::zero() || efficiency > T::one() {
        return Err(Error::InvalidInput(format!(
            "pv efficiency {efficiency} outside [0, 1]"
        )));
    }
    Ok(area * efficiency * irradiance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_product() {
        let p: f64 = pv_power(20.0, 0.18, 800.0).unwrap();
        assert!((p - 2880.0).abs() < 1e-9);
    }

    #[test]
    fn zero_irradiance_or_area_gives_zero() {
        assert_eq!(pv_power(37.0_f64, 0.21, 0.0).unwrap(), 0.0);
        assert_eq!(pv_power(0.0_f64, 0.2, 1000.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_negative_inputs() {
        assert!(pv_power(-1.0_f64, 0.2, 100.0).is_err());
        assert!(pv_power(1.0_f64, -0.2, 100.0).is_err());
        assert!(pv_power(1.0_f64, 0.2, -100.0).is_err());
        assert!(pv_power(1.0_f64, 1.2, 100.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let p: f32 = pv_power(20.0, 0.18, 800.0).unwrap();
        assert!((p - 2880.0).abs() < 1e-2);
    }
}
