use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{TileImage, TileKind};
use crate::error::{Error, Result};

const MIN_LEN: usize = 4;

/// Number of columns in a PSD tile computed from `n` samples.
///
/// Bins `1..=ceil(n/2)`: DC is dropped and, for odd `n`, the first bin past
/// the midpoint pads the row so 125 samples give 63 columns.
pub const fn periodogram_columns(n: usize) -> usize {
    n.div_ceil(2)
}

fn check_len(n: usize, fs: f64) -> Result<()> {
    if n < MIN_LEN {
        return Err(Error::TooShort {
            required: MIN_LEN,
            actual: n,
        });
    }
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::InvalidArgument(format!("sampling rate {fs} must be positive")));
    }
    Ok(())
}

fn spectrum(fft: &dyn Fft<f64>, x: impl Iterator<Item = f64>, buf: &mut Vec<Complex<f64>>) {
    buf.clear();
    buf.extend(x.map(|v| Complex::new(v, 0.0)));
    fft.process(buf);
}

/// `|X_k|^2 / (fs N)`, doubled when `0 < k < N/2`.
fn power(x: Complex<f64>, k: usize, n: usize, fs: f64) -> f64 {
    let p = x.norm_sqr() / (fs * n as f64);
    if k > 0 && 2 * k < n {
        2.0 * p
    } else {
        p
    }
}

/// One-sided periodogram of `x` for bins `0..=floor(N/2)`, DC included.
pub fn one_sided_periodogram(x: &[f64], fs: f64) -> Result<Vec<f64>> {
    check_len(x.len(), fs)?;
    let n = x.len();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut buf = Vec::with_capacity(n);
    spectrum(fft.as_ref(), x.iter().copied(), &mut buf);
    Ok((0..=n / 2).map(|k| power(buf[k], k, n, fs)).collect())
}

/// Per-row periodogram of a raw tile over the full window.
pub fn periodogram_tile(tile: &TileImage, sampling_rate: f64) -> Result<TileImage> {
    if tile.kind() != TileKind::Raw {
        return Err(Error::InvalidArgument("periodogram input must be a raw tile".into()));
    }
    let n = tile.cols();
    check_len(n, sampling_rate)?;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let cols = periodogram_columns(n);
    let mut values = Vec::with_capacity(tile.rows() * cols);
    let mut buf = Vec::with_capacity(n);
    for r in 0..tile.rows() {
        spectrum(fft.as_ref(), tile.row(r).iter().map(|&v| v as f64), &mut buf);
        values.extend((1..=cols).map(|k| power(buf[k], k, n, sampling_rate) as f32));
    }
    TileImage::new(tile.rows(), cols, TileKind::Psd, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Direct O(N^2) DFT of a real signal.
    fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                    let a = -2.0 * PI * (k * t % n) as f64 / n as f64;
                    (re + v * a.cos(), im + v * a.sin())
                })
            })
            .collect()
    }

    fn naive_psd_columns(x: &[f64], fs: f64) -> Vec<f64> {
        let n = x.len();
        let dft = naive_dft(x);
        (1..=n.div_ceil(2))
            .map(|k| {
                let p = (dft[k].0.powi(2) + dft[k].1.powi(2)) / (fs * n as f64);
                if 2 * k < n {
                    2.0 * p
                } else {
                    p
                }
            })
            .collect()
    }

    fn raw(rows: usize, values: Vec<f64>) -> TileImage {
        let cols = values.len() / rows;
        TileImage::new(
            rows,
            cols,
            TileKind::Raw,
            values.into_iter().map(|v| v as f32).collect(),
        )
        .unwrap()
    }

    #[test]
    fn column_counts() {
        assert_eq!(periodogram_columns(125), 63);
        assert_eq!(periodogram_columns(250), 125);
        let psd = periodogram_tile(&raw(125, vec![0.5; 125 * 250]), 125.0).unwrap();
        assert_eq!((psd.rows(), psd.cols()), (125, 125));
        let psd = periodogram_tile(&raw(3, vec![0.5; 3 * 125]), 125.0).unwrap();
        assert_eq!(psd.cols(), 63);
    }

    #[test]
    fn constant_signal_has_only_dc() {
        let x = vec![3.0; 125];
        let full = one_sided_periodogram(&x, 125.0).unwrap();
        assert!(full[0] > 1.0);
        let psd = periodogram_tile(&raw(1, x), 125.0).unwrap();
        assert!(psd.values().iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn sinusoid_lands_in_one_column() {
        let (n, k) = (125, 10);
        let x: Vec<f64> = (0..n).map(|t| (2.0 * PI * (k * t) as f64 / n as f64).sin()).collect();
        let psd = periodogram_tile(&raw(1, x), 125.0).unwrap();
        let best = (0..psd.cols())
            .max_by(|&a, &b| psd.at(0, a).total_cmp(&psd.at(0, b)))
            .unwrap();
        assert_eq!(best, k - 1);
        let rest: f32 = psd
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k - 1)
            .map(|(_, v)| v)
            .sum();
        assert!(rest < 1e-6 * psd.at(0, k - 1));
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [4, 5, 16, 125, 250] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0f32..2.0) as f64).collect();
            let want = naive_psd_columns(&x, 125.0);
            let got = periodogram_tile(&raw(1, x.clone()), 125.0).unwrap();
            let scale = want.iter().cloned().fold(0.0, f64::max);
            for (g, w) in got.values().iter().zip(&want) {
                let g = *g as f64;
                assert!((g - w).abs() <= 1e-6 * w.abs().max(1e-6 * scale), "n={n}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn rejects_short_windows_and_psd_input() {
        assert!(matches!(
            one_sided_periodogram(&[1.0; 3], 1.0),
            Err(Error::TooShort { .. })
        ));
        let psd = TileImage::new(1, 4, TileKind::Psd, vec![0.0; 4]).unwrap();
        assert!(periodogram_tile(&psd, 1.0).is_err());
        assert!(one_sided_periodogram(&[1.0; 8], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn parseval(x in prop::collection::vec(-5.0f64..5.0, 4..300), fs in 1.0f64..1000.0) {
            let n = x.len() as f64;
            let p = one_sided_periodogram(&x, fs).unwrap();
            let energy: f64 = p.iter().sum::<f64>() * fs / n;
            let mean_square = x.iter().map(|v| v * v).sum::<f64>() / n;
            prop_assert!((energy - mean_square).abs() <= 1e-5 * mean_square.max(1e-12));
        }

        #[test]
        fn total_power_is_shift_invariant(x in prop::collection::vec(-5.0f64..5.0, 4..200), shift in 0usize..200) {
            let s = shift % x.len();
            let mut y = x.clone();
            y.rotate_left(s);
            let a: f64 = one_sided_periodogram(&x, 125.0).unwrap().iter().sum();
            let b: f64 = one_sided_periodogram(&y, 125.0).unwrap().iter().sum();
            prop_assert!((a - b).abs() <= 1e-6 * a.max(1e-12));
        }
    }
}
