//! Doherty power-amplifier consumption model.

use std::f64::consts::PI;

use crate::error::{invalid, mismatch, Error, Result};
use crate::system::ComplexMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaParams {
    /// Maximum PA output power (watt).
    pub p_max: f64,
}

impl PaParams {
    pub fn new(p_max: f64) -> Result<Self> {
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(invalid(format!("P_max must be positive, got {p_max}")));
        }
        Ok(Self { p_max })
    }

    /// Largest consumption a single PA can draw, `4 P_max / π`.
    pub fn max_consumption(&self) -> f64 {
        4.0 * self.p_max / PI
    }
}

/// Consumption of a PA delivering `p_out`, without range checks.
pub(crate) fn pa_power_unchecked(p_out: f64, p_max: f64) -> f64 {
    let p_out = p_out.max(0.0);
    let s = (p_out * p_max).sqrt();
    if p_out <= 0.25 * p_max {
        2.0 * s / PI
    } else {
        // offset form so both branches meet exactly at the kink
        p_max / PI + 6.0 * (s - 0.5 * p_max) / PI
    }
}

/// Consumed power of a PA delivering `p_out` watt.
pub fn pa_power(p_out: f64, p_max: f64) -> Result<f64> {
    if !(p_out >= 0.0 && p_out <= p_max) {
        return Err(invalid(format!("PA output {p_out} outside [0, {p_max}]")));
    }
    Ok(pa_power_unchecked(p_out, p_max))
}

/// Consumption as a function of the output amplitude `v_out = √P_out`.
pub fn h_of_vout(v_out: f64, p_max: f64) -> Result<f64> {
    let amp_max = p_max.sqrt();
    if !(v_out >= 0.0 && v_out <= amp_max) {
        return Err(invalid(format!("PA amplitude {v_out} outside [0, {amp_max}]")));
    }
    Ok(h_unchecked(v_out, p_max))
}

pub(crate) fn h_unchecked(v_out: f64, p_max: f64) -> f64 {
    let amp_max = p_max.sqrt();
    if v_out <= 0.5 * amp_max {
        2.0 * v_out * amp_max / PI
    } else {
        p_max / PI + 6.0 * (v_out * amp_max - 0.5 * p_max) / PI
    }
}

/// Output power `‖row · W‖²` of one PA.
pub fn per_pa_output(analog_row: &ComplexMatrix, w: &ComplexMatrix) -> Result<f64> {
    if analog_row.nrows() != 1 || analog_row.ncols() != w.nrows() {
        return Err(mismatch(
            "per_pa_output",
            format!("row {}x{} vs W {}x{}", analog_row.nrows(), analog_row.ncols(), w.nrows(), w.ncols()),
        ));
    }
    Ok((analog_row * w).norm_squared())
}

/// Output power of every PA behind analog matrix `analog`.
pub fn pa_outputs(analog: &ComplexMatrix, w: &ComplexMatrix) -> Result<Vec<f64>> {
    if analog.ncols() != w.nrows() {
        return Err(mismatch(
            "pa_outputs",
            format!("analog {}x{} vs W {}x{}", analog.nrows(), analog.ncols(), w.nrows(), w.ncols()),
        ));
    }
    Ok((analog * w).row_iter().map(|r| r.norm_squared()).collect())
}

/// Total consumption `Σ_i P_PA(‖F(i,:) W‖²)`.
pub fn total_pa_power(analog: &ComplexMatrix, w: &ComplexMatrix, p_max: f64) -> Result<f64> {
    let outputs = pa_outputs(analog, w)?;
    let over: Vec<usize> = outputs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > p_max)
        .map(|(i, _)| i)
        .collect();
    if !over.is_empty() {
        return Err(Error::ConstraintViolation(format!(
            "PA outputs exceed P_max = {p_max} at rows {over:?}"
        )));
    }
    Ok(outputs.iter().map(|&p| pa_power_unchecked(p, p_max)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, phase_matrix, random_gaussian};
    use crate::system::RealMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn branch_values() {
        assert_eq!(pa_power(0.0, 1.0).unwrap(), 0.0);
        let pm: f64 = 2.5;
        let lower = 2.0 * (0.25 * pm * pm).sqrt() / PI;
        let upper = 6.0 * (0.25 * pm * pm).sqrt() / PI - 2.0 * pm / PI;
        assert_eq!(lower, pm / PI);
        assert!((upper - pm / PI).abs() < 1e-15);
        for pm in [1.0, 2.5, 1e-3, 7.0 / 3.0, 1234.5] {
            let kink = 0.25 * pm;
            assert_eq!(pa_power(kink, pm).unwrap(), pm / PI);
            // right-hand branch evaluated at the kink
            assert_eq!(pm / PI + 6.0 * ((kink * pm).sqrt() - 0.5 * pm) / PI, pm / PI);
        }
        assert_eq!(pa_power(0.25 * pm, pm).unwrap(), pm / PI);
        assert!((pa_power(1.0, 1.0).unwrap() - 4.0 / PI).abs() < 1e-15);
        assert!((4.0 / PI - 1.2732).abs() < 1e-4);
        assert!(pa_power(1.1, 1.0).is_err());
        assert!(pa_power(-0.1, 1.0).is_err());
    }

    #[test]
    fn amplitude_form_matches_power_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let pm: f64 = rng.random_range(0.01..10.0);
            let v = rng.random_range(0.0..=pm.sqrt());
            let a = h_of_vout(v, pm).unwrap();
            let b = pa_power(v * v, pm).unwrap();
            assert!((a - b).abs() <= 1e-14 * pm.max(1.0), "{a} {b}");
        }
        assert_eq!(h_of_vout(0.0, 1.0).unwrap(), 0.0);
        assert!((h_of_vout(2.0, 4.0).unwrap() - 16.0 / PI).abs() < 1e-14);
        assert!(h_of_vout(1.01, 1.0).is_err());
    }

    #[test]
    fn consumption_shape_on_grid() {
        let pm = 1.0;
        let n = 10_000;
        let vals: Vec<f64> = (0..=n).map(|k| pa_power(pm * k as f64 / n as f64, pm).unwrap()).collect();
        for k in 1..=n {
            let p = pm * k as f64 / n as f64;
            assert!(vals[k] > vals[k - 1], "not increasing at {p}");
            assert!(vals[k] >= p, "consumption below output at {p}");
        }
        // concavity on each branch (second differences away from the kink)
        for k in 1..n {
            if k == n / 4 {
                continue;
            }
            assert!(vals[k + 1] - 2.0 * vals[k] + vals[k - 1] <= 1e-12);
        }
    }

    #[test]
    fn per_pa_output_examples() {
        let w = ComplexMatrix::zeros(2, 2);
        let row = ComplexMatrix::from_row_slice(1, 2, &[c(1.0), c(0.0)]);
        assert_eq!(per_pa_output(&row, &w).unwrap(), 0.0);
        let w = ComplexMatrix::from_row_slice(2, 2, &[c(2f64.sqrt()), c(0.0), c(0.0), c(7.0)]);
        assert!((per_pa_output(&row, &w).unwrap() - 2.0).abs() < 1e-15);
        assert!(per_pa_output(&row, &ComplexMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn rows_sum_to_frobenius() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = phase_matrix(&RealMatrix::from_fn(6, 3, |_, _| rng.random_range(0.0..6.3)));
        let w = random_gaussian(&mut rng, 3, 2, 1.0);
        let total: f64 = (0..6).map(|i| per_pa_output(&f.rows(i, 1).into_owned(), &w).unwrap()).sum();
        assert!((total - (&f * &w).norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn total_power_matches_row_sum() {
        assert_eq!(total_pa_power(&ComplexMatrix::zeros(3, 2), &ComplexMatrix::zeros(2, 1), 1.0).unwrap(), 0.0);
        let f = ComplexMatrix::from_element(1, 1, c(1.0));
        let w = ComplexMatrix::from_element(1, 1, c(0.5));
        assert!((total_pa_power(&f, &w, 1.0).unwrap() - 1.0 / PI).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let f = phase_matrix(&RealMatrix::from_fn(5, 2, |_, _| rng.random_range(0.0..6.3)));
            let w = random_gaussian(&mut rng, 2, 2, 0.05);
            let mut oracle = 0.0;
            for i in 0..5 {
                let mut p = 0.0;
                for col in 0..2 {
                    let mut z = c(0.0);
                    for k in 0..2 {
                        z += f[(i, k)] * w[(k, col)];
                    }
                    p += z.norm_sqr();
                }
                oracle += pa_power(p, 1.0).unwrap();
            }
            assert!((total_pa_power(&f, &w, 1.0).unwrap() - oracle).abs() < 1e-12);
        }
        let big = ComplexMatrix::from_element(1, 1, c(3.0));
        assert!(matches!(total_pa_power(&f, &big, 1.0), Err(Error::ConstraintViolation(_))));
    }
}
