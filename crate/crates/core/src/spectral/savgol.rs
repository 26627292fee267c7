use nalgebra::{DMatrix, DVector};

use super::{SpectralError, Spectrum};

/// Savitzky-Golay smoothing weights for the center of a `2*half+1` window
/// fitted with a polynomial of degree `order` (least squares).
pub fn savgol_coefficients(half: usize, order: usize) -> Result<Vec<f64>, SpectralError> {
    let window = 2 * half + 1;
    if order >= window {
        return Err(SpectralError::OrderTooHigh { order, window });
    }
    let scale = half.max(1) as f64;
    let design = DMatrix::from_fn(window, order + 1, |r, c| {
        ((r as f64 - half as f64) / scale).powi(c as i32)
    });
    let gram = design.transpose() * &design;
    let mut e0 = DVector::zeros(order + 1);
    e0[0] = 1.0;
    let v = gram
        .lu()
        .solve(&e0)
        .expect("Vandermonde normal matrix is nonsingular for order < window");
    Ok((design * v).iter().copied().collect())
}

/// Savitzky-Golay smoothing. Near the ends the window shrinks
/// symmetrically (and the order with it) so every output is a centered fit.
pub fn savgol_filter(
    values: &[f64],
    window: usize,
    order: usize,
) -> Result<Vec<f64>, SpectralError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(SpectralError::EvenWindow(window));
    }
    if order >= window {
        return Err(SpectralError::OrderTooHigh { order, window });
    }
    let half = window / 2;
    let n = values.len();
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; half + 1];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let h = half.min(i).min(n - 1 - i);
        if cache[h].is_none() {
            cache[h] = Some(savgol_coefficients(h, order.min(2 * h))?);
        }
        let coeffs = cache[h].as_deref().expect("filled above");
        let seg = &values[i - h..=i + h];
        out.push(seg.iter().zip(coeffs).map(|(v, c)| v * c).sum());
    }
    Ok(out)
}

/// Smoothed copy of a spectrum (applied to the dB values).
pub fn smooth(s: &Spectrum, window: usize, order: usize) -> Result<Spectrum, SpectralError> {
    Ok(s.with_magnitudes(savgol_filter(s.magnitudes_db(), window, order)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_five_point_quadratic() {
        // tabulated (-3, 12, 17, 12, -3) / 35
        let c = savgol_coefficients(2, 2).unwrap();
        let want = [-3.0, 12.0, 17.0, 12.0, -3.0].map(|v| v / 35.0);
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_polynomials() {
        let cubic: Vec<f64> = (0..60)
            .map(|i| {
                let x = i as f64 * 0.1;
                0.5 * x.powi(3) - 2.0 * x * x + x - 7.0
            })
            .collect();
        let out = savgol_filter(&cubic, 11, 3).unwrap();
        for (a, b) in out.iter().zip(&cubic) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn window_one_is_identity() {
        let v = vec![3.0, -1.0, 4.0, 1.0, -5.0];
        assert_eq!(savgol_filter(&v, 1, 0).unwrap(), v);
    }

    #[test]
    fn argument_checks() {
        assert_eq!(
            savgol_filter(&[1.0; 20], 10, 3),
            Err(SpectralError::EvenWindow(10))
        );
        assert_eq!(
            savgol_filter(&[1.0; 20], 5, 5),
            Err(SpectralError::OrderTooHigh {
                order: 5,
                window: 5
            })
        );
        assert!(savgol_filter(&[], 11, 3).unwrap().is_empty());
    }

    #[test]
    fn smooth_keeps_grid() {
        let s = Spectrum::from_db(20.0, 0.25, (0..40).map(|i| (i % 3) as f64).collect());
        let sm = smooth(&s, 5, 2).unwrap();
        assert_eq!(sm.f0(), 20.0);
        assert_eq!(sm.len(), 40);
    }
}
