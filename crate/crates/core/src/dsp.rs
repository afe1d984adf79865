//! Butterworth low-pass design and zero-phase filtering of trajectories.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_io::{Point, Trial};

/// One second-order section, `a[0] == 1`, with unit gain at DC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

/// Transfer function coefficients, `a[0] == 1`, together with the same
/// filter factored into second-order sections. Filtering runs through the
/// sections: at low cutoffs the expanded polynomial recursion drifts by
/// about 1e-9 on a constant input, the cascade by about 1e-13.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirCoeffs {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub sections: Vec<Biquad>,
}

impl IirCoeffs {
    pub fn order(&self) -> usize {
        self.a.len() - 1
    }

    /// Complex response at `freq_hz` for sampling rate `fs_hz`.
    pub fn response(&self, freq_hz: f64, fs_hz: f64) -> Complex64 {
        let w = std::f64::consts::TAU * freq_hz / fs_hz;
        // Polynomials in z^-1, evaluated with Horner from the highest power.
        let zinv = Complex64::from_polar(1.0, -w);
        let horner = |c: &[f64]| {
            c.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * zinv + ci)
        };
        horner(&self.b) / horner(&self.a)
    }

    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }
}

fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c
}

/// Neumaier summation. The denominator coefficients nearly cancel at low
/// cutoffs, and the DC gain is only as good as their sum.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

/// Digital Butterworth low-pass of the given order.
///
/// The analog prototype is placed at the prewarped cutoff
/// `2 fs tan(pi fc / fs)` and mapped through the bilinear transform, so the
/// digital filter sits at exactly half power at `cutoff_hz`. The numerator is
/// scaled for unit gain at DC.
pub fn butter_lowpass(order: usize, cutoff_hz: f64, fs_hz: f64) -> Result<IirCoeffs> {
    if order != 2 && order != 4 {
        return Err(Error::UnsupportedOrder(order));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < fs_hz / 2.0) {
        return Err(Error::InvalidCutoff { cutoff_hz, fs_hz });
    }
    let n = order as f64;
    let two_fs = 2.0 * fs_hz;
    let warped = two_fs * (std::f64::consts::PI * cutoff_hz / fs_hz).tan();
    let poles: Vec<Complex64> = (0..order)
        .map(|k| {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            let s = Complex64::from_polar(warped, theta);
            (two_fs + s) / (two_fs - s)
        })
        .collect();
    debug_assert!(poles.iter().all(|p| p.norm() < 1.0));

    let a: Vec<f64> = poly_from_roots(&poles).iter().map(|c| c.re).collect();
    let zeros = vec![Complex64::new(-1.0, 0.0); order];
    let b_unit: Vec<f64> = poly_from_roots(&zeros).iter().map(|c| c.re).collect();
    let gain = compensated_sum(&a) / b_unit.iter().sum::<f64>();

    // Conjugate pairs are poles k and order - 1 - k.
    let sections = (0..order / 2)
        .map(|k| {
            let p = poles[k];
            let g = (Complex64::new(1.0, 0.0) - p).norm_sqr() / 4.0;
            Biquad {
                b: [g, 2.0 * g, g],
                a: [1.0, -2.0 * p.re, p.norm_sqr()],
            }
        })
        .collect();
    Ok(IirCoeffs {
        b: b_unit.iter().map(|v| v * gain).collect(),
        a,
        sections,
    })
}

/// Edge padding used by [`filtfilt`].
pub fn pad_length(coeffs: &IirCoeffs) -> usize {
    3 * (coeffs.order() + 1)
}

/// Shortest series [`filtfilt`] accepts.
pub fn min_series_length(coeffs: &IirCoeffs) -> usize {
    3 * pad_length(coeffs)
}

impl Biquad {
    /// State of a section that has seen a unit input forever.
    fn steady_state(&self) -> [f64; 2] {
        let (b, a) = (&self.b, &self.a);
        let z1 = b[2] - a[2];
        [compensated_sum(&[b[1], -a[1], b[2], -a[2]]), z1]
    }

    fn run(&self, input: &[f64]) -> Vec<f64> {
        let (b, a) = (&self.b, &self.a);
        let [mut z0, mut z1] = self.steady_state().map(|z| z * input[0]);
        input
            .iter()
            .map(|&x| {
                let y = b[0] * x + z0;
                z0 = b[1] * x - a[1] * y + z1;
                z1 = b[2] * x - a[2] * y;
                y
            })
            .collect()
    }
}

/// One causal pass through every section, each starting from the steady
/// state of the first input sample.
fn single_pass(coeffs: &IirCoeffs, input: &[f64]) -> Vec<f64> {
    coeffs
        .sections
        .iter()
        .fold(input.to_vec(), |signal, section| section.run(&signal))
}

fn reversed(v: &[f64]) -> Vec<f64> {
    v.iter().rev().copied().collect()
}

/// Zero-phase low-pass filtering.
///
/// The series is extended at both ends by odd reflection (see
/// [`pad_length`]) and filtered once forward then backward, and once
/// backward then forward, each pass starting from the steady state of its
/// first input sample. The two orderings are averaged, which makes the
/// result exactly symmetric under time reversal while leaving the interior
/// identical to a plain forward-backward pass. The magnitude response is
/// `|H|^2` with no phase shift.
pub fn filtfilt(coeffs: &IirCoeffs, series: &[f64]) -> Result<Vec<f64>> {
    let min = min_series_length(coeffs);
    if series.len() < min {
        return Err(Error::ShortSeries {
            len: series.len(),
            min,
        });
    }
    let pad = pad_length(coeffs);
    let n = series.len();
    let (first, last) = (series[0], series[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| 2.0 * first - series[k]));
    ext.extend_from_slice(series);
    ext.extend((1..=pad).map(|k| 2.0 * last - series[n - 1 - k]));

    let forward_backward = reversed(&single_pass(coeffs, &reversed(&single_pass(coeffs, &ext))));
    let backward_forward = single_pass(coeffs, &reversed(&single_pass(coeffs, &reversed(&ext))));

    Ok(forward_backward[pad..pad + n]
        .iter()
        .zip(&backward_forward[pad..pad + n])
        .map(|(p, q)| 0.5 * (p + q))
        .collect())
}

/// Filters x(t) and y(t) of every pedestrian independently.
pub fn filter_trial(trial: &Trial, coeffs: &IirCoeffs) -> Result<Trial> {
    trial.map_tracks(|tr| {
        let xs: Vec<f64> = tr.positions.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = tr.positions.iter().map(|p| p.y).collect();
        let fx = filtfilt(coeffs, &xs).map_err(|e| Error::InvalidTrial {
            trial_id: trial.trial_id.clone(),
            message: format!("pedestrian {}: {e}", tr.pedestrian_id),
        })?;
        let fy = filtfilt(coeffs, &ys)?;
        Ok(fx.into_iter().zip(fy).map(|(x, y)| Point::new(x, y)).collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_filter() -> IirCoeffs {
        butter_lowpass(4, 0.5, 120.0).unwrap()
    }

    #[test]
    fn unity_dc_gain() {
        for (order, fc, fs) in [(4, 0.5, 120.0), (2, 0.5, 120.0), (4, 10.0, 100.0), (2, 1.0, 3.0)] {
            let c = butter_lowpass(order, fc, fs).unwrap();
            assert!((c.dc_gain() - 1.0).abs() < 1e-12, "{order} {fc} {fs}");
            assert_eq!(c.a[0], 1.0);
        }
    }

    #[test]
    fn half_power_at_cutoff() {
        for (order, fc, fs) in [(4, 0.5, 120.0), (2, 3.0, 50.0)] {
            let c = butter_lowpass(order, fc, fs).unwrap();
            let mag = c.response(fc, fs).norm();
            assert!((mag - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9, "{mag}");
        }
    }

    #[test]
    fn rejects_bad_design() {
        assert!(matches!(butter_lowpass(4, 60.0, 120.0), Err(Error::InvalidCutoff { .. })));
        assert!(matches!(butter_lowpass(4, 0.0, 120.0), Err(Error::InvalidCutoff { .. })));
        assert!(matches!(butter_lowpass(3, 1.0, 120.0), Err(Error::UnsupportedOrder(3))));
    }

    #[test]
    fn steady_state_reproduces_constant() {
        let out = single_pass(&default_filter(), &[2.5; 5000]);
        let worst = out.iter().map(|y| (y - 2.5).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-11, "{worst}");
    }

    #[test]
    fn sections_factor_the_transfer_function() {
        for (order, fc, fs) in [(4, 0.5, 120.0), (2, 3.0, 50.0)] {
            let c = butter_lowpass(order, fc, fs).unwrap();
            assert_eq!(c.sections.len(), order / 2);
            for f in [0.0, 0.1, fc, 2.0 * fc, 0.4 * fs] {
                let z = Complex64::from_polar(1.0, -std::f64::consts::TAU * f / fs);
                let cascade: Complex64 = c
                    .sections
                    .iter()
                    .map(|s| (s.b[0] + s.b[1] * z + s.b[2] * z * z) / (s.a[0] + s.a[1] * z + s.a[2] * z * z))
                    .product();
                let direct = c.response(f, fs);
                assert!((cascade - direct).norm() <= 1e-9 * direct.norm().max(1e-12), "{f}: {cascade} {direct}");
            }
        }
    }

    #[test]
    fn short_series_rejected() {
        let c = default_filter();
        assert_eq!(min_series_length(&c), 45);
        assert!(matches!(filtfilt(&c, &[1.0; 44]), Err(Error::ShortSeries { len: 44, min: 45 })));
        assert!(filtfilt(&c, &[1.0; 45]).is_ok());
    }

    #[test]
    fn constant_is_preserved() {
        let out = filtfilt(&default_filter(), &vec![-3.25; 600]).unwrap();
        assert_eq!(out.len(), 600);
        assert!(out.iter().all(|y| (y + 3.25).abs() < 1e-9));
    }
}
