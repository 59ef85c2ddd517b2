use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ChannelOrdering, OrderingOrigin};
use crate::dataio::ExampleSet;
use crate::error::{Error, Result};

pub const MDS_MAX_ITERS: usize = 10_000;
pub const MDS_TOLERANCE: f64 = 1e-10;
const START_SEED: u64 = 0x6d_6473;

/// One-dimensional classical MDS embedding of the channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MdsResult {
    pub ordering: ChannelOrdering,
    /// Coordinate of each channel, indexed by original channel.
    pub embedding: Vec<f64>,
    pub eigenvalue: f64,
    pub iterations: usize,
    /// All channels coincide; `ordering` is the identity.
    pub degenerate: bool,
}

/// Per channel, the RMS of its row in every example, in example order.
pub fn channel_rms_features(set: &ExampleSet) -> Result<Vec<Vec<f64>>> {
    let first = set
        .examples
        .first()
        .ok_or_else(|| Error::InvalidArgument("MDS needs a non-empty training set".into()))?;
    let channels = first.tile.rows();
    let mut features = vec![Vec::with_capacity(set.examples.len()); channels];
    for ex in &set.examples {
        if ex.tile.rows() != channels {
            return Err(Error::shape("channel_rms_features", channels, ex.tile.rows()));
        }
        for (c, f) in features.iter_mut().enumerate() {
            let row = ex.tile.row(c);
            let ms = row.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / row.len() as f64;
            f.push(ms.sqrt());
        }
    }
    Ok(features)
}

pub fn mds_channel_order(train: &ExampleSet) -> Result<MdsResult> {
    mds_embed(&channel_rms_features(train)?)
}

/// Classical (Torgerson) MDS of the rows of `features` onto one dimension.
///
/// The top eigenvector of `B = -1/2 J D^2 J` is found by power iteration
/// from a fixed pseudo-random start. The sign is chosen so that channel 0
/// sits at or above the median coordinate; ties in rank go to the lower
/// channel index.
pub fn mds_embed(features: &[Vec<f64>]) -> Result<MdsResult> {
    let n = features.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "MDS needs at least 2 channels, got {n}"
        )));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::shape("mds_embed", dim, bad.len()));
    }

    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = features[i].iter().zip(&features[j]).map(|(a, b)| (a - b).powi(2)).sum();
            d2[i * n + j] = s;
            d2[j * n + i] = s;
        }
    }
    let b = double_center(&d2, n);
    let trace: f64 = (0..n).map(|i| b[i * n + i]).sum();
    if !(trace > 0.0) {
        return Ok(degenerate(n));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    let mut iterations = 0;
    while iterations < MDS_MAX_ITERS {
        iterations += 1;
        mat_vec(&b, &v, &mut w);
        if normalize(&mut w) == 0.0 {
            return Ok(degenerate(n));
        }
        let delta = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut w);
        if delta < MDS_TOLERANCE {
            break;
        }
    }
    mat_vec(&b, &v, &mut w);
    let eigenvalue: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
    if !(eigenvalue > 0.0) {
        return Ok(degenerate(n));
    }

    let scale = eigenvalue.sqrt();
    let mut embedding: Vec<f64> = v.iter().map(|x| x * scale).collect();
    if embedding[0] < median(&embedding) {
        embedding.iter_mut().for_each(|x| *x = -*x);
    }
    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.sort_by(|&a, &b| embedding[a].total_cmp(&embedding[b]).then(a.cmp(&b)));
    Ok(MdsResult {
        ordering: ChannelOrdering::new(permutation, OrderingOrigin::Mds)?,
        embedding,
        eigenvalue,
        iterations,
        degenerate: false,
    })
}

fn degenerate(n: usize) -> MdsResult {
    MdsResult {
        ordering: ChannelOrdering::identity(n),
        embedding: vec![0.0; n],
        eigenvalue: 0.0,
        iterations: 0,
        degenerate: true,
    }
}

fn double_center(d2: &[f64], n: usize) -> Vec<f64> {
    let row_mean: Vec<f64> = (0..n)
        .map(|i| d2[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // D^2 is symmetric, so column means equal row means.
            b[i * n + j] = -0.5 * (d2[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    }
    b
}

fn mat_vec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = a[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn line(points: &[f64], extra_dims: usize) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|&x| {
                let mut f = vec![x];
                f.resize(1 + extra_dims, 0.0);
                f
            })
            .collect()
    }

    fn is_line_order(perm: &[usize], points: &[f64]) -> bool {
        let mut want: Vec<usize> = (0..points.len()).collect();
        want.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
        let rev: Vec<usize> = want.iter().rev().copied().collect();
        perm == want.as_slice() || perm == rev.as_slice()
    }

    #[test]
    fn three_points_on_a_line() {
        let r = mds_embed(&line(&[0.0, 5.0, 1.0], 3)).unwrap();
        assert!(!r.degenerate);
        assert!(is_line_order(r.ordering.permutation(), &[0.0, 5.0, 1.0]));
        // channel 0 is at or above the median after the sign convention
        assert!(r.embedding[0] >= r.embedding[2]);
        assert_eq!(r.ordering.permutation(), &[1, 2, 0]);
        assert!(((r.embedding[1] - r.embedding[0]).abs() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn two_points_keep_their_distance() {
        let f = vec![vec![1.0, 2.0], vec![4.0, 6.0]];
        let r = mds_embed(&f).unwrap();
        assert!(((r.embedding[0] - r.embedding[1]).abs() - 5.0).abs() < 1e-9);
        let p = r.ordering.permutation();
        assert!(p == [0, 1] || p == [1, 0]);
    }

    #[test]
    fn identical_channels_are_degenerate() {
        let r = mds_embed(&vec![vec![2.0, 3.0]; 4]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.ordering, ChannelOrdering::identity(4));
    }

    #[test]
    fn rejects_single_channel_and_ragged_features() {
        assert!(mds_embed(&[vec![1.0]]).is_err());
        assert!(mds_embed(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn deterministic_on_general_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..8).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let a = mds_embed(&f).unwrap();
        assert_eq!(a, mds_embed(&f).unwrap());
        assert!(a.iterations < MDS_MAX_ITERS);
    }

    #[test]
    fn top_eigenvalue_matches_line_spread() {
        // for points on a line B = x x^T with x centered, so lambda = |x|^2
        let pts = [3.0, -1.0, 4.0, 1.5, -5.0];
        let mean = pts.iter().sum::<f64>() / 5.0;
        let want: f64 = pts.iter().map(|p| (p - mean).powi(2)).sum();
        let r = mds_embed(&line(&pts, 0)).unwrap();
        assert!((r.eigenvalue - want).abs() < 1e-9 * want);
    }

    proptest! {
        #[test]
        fn recovers_line_order(points in prop::collection::hash_set(-1000i32..1000, 2..60), extra in 0usize..5) {
            let pts: Vec<f64> = points.into_iter().map(|p| p as f64 / 10.0).collect();
            let r = mds_embed(&line(&pts, extra)).unwrap();
            prop_assert!(is_line_order(r.ordering.permutation(), &pts));
        }
    }
}
