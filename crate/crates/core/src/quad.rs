//! Composite quadrature on uniform samples.

/// Composite Simpson over uniformly spaced samples with spacing `h`.
///
/// An odd number of intervals closes with Simpson's 3/8 rule on the last
/// three, so the rule stays fourth order for any count ≥ 2 intervals.
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let n = samples.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (samples[0] + samples[1]),
        _ => {
            let (even_part, tail) = if n % 2 == 0 { (n, 0) } else { (n - 3, 3) };
            let mut acc = 0.0;
            if even_part > 0 {
                acc += samples[0] + samples[even_part];
                for (k, v) in samples.iter().enumerate().take(even_part).skip(1) {
                    acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
                }
                acc *= h / 3.0;
            }
            if tail == 3 {
                let s = &samples[even_part..];
                acc += 3.0 * h / 8.0 * (s[0] + 3.0 * s[1] + 3.0 * s[2] + s[3]);
            }
            acc
        }
    }
}

/// Simpson's rule for `f` on `[a, b]` with `intervals` (rounded up to even).
pub fn simpson_fn(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let samples: Vec<f64> = (0..=n).map(|k| f(a + k as f64 * h)).collect();
    simpson(&samples, h)
}
