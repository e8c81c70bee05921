//! Weighted reduction of an oversized center set to `k` centers.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::blackbox::{BlackBoxConfig, WeightedDataset};
use crate::error::Result;
use crate::geometry::{nearest_raw, CenterSet, Dataset};
use crate::simnet::{Executor, Network, Phase};

#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub centers: CenterSet,
    /// Number of original points nearest to each input center, in input order.
    /// Empty when the input already had at most `k` centers.
    pub weights: Vec<f64>,
}

/// Broadcasts `centers`, has every machine count how many of its original
/// points each center attracts, and clusters the centers weighted by those
/// counts. Centers that attract nothing are left out. With `|centers| <= k`
/// the set is returned as is and nothing is sent.
pub fn reduce_to_k<E: Executor, R: Rng + ?Sized>(
    net: &mut Network<E>,
    centers: &CenterSet,
    k: usize,
    blackbox: &BlackBoxConfig,
    rng: &mut R,
) -> Result<Reduction> {
    if centers.is_empty() {
        return Err(crate::error::Error::EmptyCenters);
    }
    if centers.len() <= k {
        return Ok(Reduction {
            centers: centers.clone(),
            weights: Vec::new(),
        });
    }
    net.begin_round(Phase::Reduction);
    let msg = net.broadcast(centers, &[]);
    let per_machine = net.step(|m| {
        let mut counts = vec![0usize; msg.centers.len()];
        for x in m.original().iter() {
            counts[nearest_raw(x, msg.centers).0] += 1;
        }
        m.work += (m.original_len() * msg.centers.len()) as u64;
        Ok(counts)
    })?;
    let per_machine = net.gather(per_machine);

    let mut weights = vec![0.0; centers.len()];
    for counts in &per_machine {
        for (w, &c) in weights.iter_mut().zip(counts) {
            *w += c as f64;
        }
    }
    let keep: Vec<usize> = (0..centers.len()).filter(|&j| weights[j] > 0.0).collect();
    let base: Dataset = centers.select(&keep);
    let kept_weights = keep.iter().map(|&j| weights[j]).collect();
    let weighted = WeightedDataset::new(base, kept_weights)?;
    let fit = net.coordinator(|| blackbox.cluster(&weighted, k, rng))?;
    Ok(Reduction {
        centers: fit.centers,
        weights,
    })
}
