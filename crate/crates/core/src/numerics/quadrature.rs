/// Composite trapezoid rule for samples on a uniform grid with spacing `step`.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => step * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Trapezoid integral of `weight(x) * values` on a uniform grid starting at `start`.
pub fn trapezoid_weighted(values: &[f64], start: f64, step: f64, weight: impl Fn(f64) -> f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * v * weight(start + step * i as f64);
    }
    acc * step
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_linear() {
        let v: Vec<f64> = (0..11).map(|i| 2.0 + 3.0 * i as f64 * 0.1).collect();
        // integral of 2 + 3x over [0, 1]
        assert!((trapezoid(&v, 0.1) - 3.5).abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(trapezoid(&[], 1.0), 0.0);
        assert_eq!(trapezoid(&[4.0], 1.0), 0.0);
        assert_eq!(trapezoid(&[1.0, 3.0], 2.0), 4.0);
    }

    #[test]
    fn gaussian_converges_spectrally() {
        let sample = |n: usize| {
            let step = 16.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|i| (-(-8.0 + step * i as f64).powi(2)).exp()).collect();
            trapezoid(&v, step)
        };
        let exact = std::f64::consts::PI.sqrt();
        assert!((sample(129) - exact).abs() < 1e-12);
        assert!((sample(1025) - sample(2049)).abs() < 1e-14);
    }

    #[test]
    fn weighted_first_moment() {
        let n = 2001;
        let step = 20.0 / (n - 1) as f64;
        let v: Vec<f64> = (0..n)
            .map(|i| (-(-7.0 + step * i as f64 - 3.0).powi(2)).exp())
            .collect();
        let m0 = trapezoid(&v, step);
        let m1 = trapezoid_weighted(&v, -7.0, step, |x| x);
        assert!((m1 / m0 - 3.0).abs() < 1e-12);
    }
}
