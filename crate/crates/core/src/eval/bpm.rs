use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;
use crate::dataio::SongMeta;
use crate::error::{Error, Result};

/// Whether confusions happen between songs of similar tempo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpmAnalysis {
    /// Count-weighted mean |bpm_i - bpm_j| over off-diagonal cells; absent
    /// when nothing was confused.
    pub mean_confused_bpm_diff: Option<f64>,
    /// Unweighted mean |bpm_i - bpm_j| over ordered class pairs i != j.
    pub chance_bpm_diff: f64,
    /// Classes in ascending bpm order (ties by class index).
    pub bpm_order: Vec<usize>,
    pub bpm_sorted_confusion: ConfusionMatrix,
}

/// Class `c` is the song with `song_id == c`.
pub fn bpm_confusion_analysis(cm: &ConfusionMatrix, meta: &[SongMeta]) -> Result<BpmAnalysis> {
    let k = cm.classes();
    let bpm: Vec<f64> = (0..k)
        .map(|c| {
            meta.iter()
                .find(|m| m.song_id as usize == c)
                .and_then(|m| m.bpm)
                .ok_or(Error::MissingBpm(c))
        })
        .collect::<Result<_>>()?;
    if k < 2 {
        return Err(Error::InvalidArgument("BPM analysis needs at least 2 classes".into()));
    }

    let (mut weighted, mut confusions, mut pair_sum) = (0.0, 0u64, 0.0);
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            let d = (bpm[i] - bpm[j]).abs();
            weighted += cm.get(i, j) as f64 * d;
            confusions += cm.get(i, j);
            pair_sum += d;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| bpm[a].total_cmp(&bpm[b]).then(a.cmp(&b)));
    Ok(BpmAnalysis {
        mean_confused_bpm_diff: (confusions > 0).then(|| weighted / confusions as f64),
        chance_bpm_diff: pair_sum / (k * (k - 1)) as f64,
        bpm_sorted_confusion: cm.reindexed(&order),
        bpm_order: order,
    })
}
