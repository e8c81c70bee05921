//! The k-means|| baseline: `r` oversampling rounds selecting `l` new centers
//! each, followed by weighted reduction to `k`.
//!
//! Each round picks exactly `l` points without replacement with probability
//! proportional to their squared distance from the current centers. The draw
//! is distributed with Efraimidis-Spirakis keys: each machine keys its points,
//! sends only its best `l` keys, and the coordinator tells every machine how
//! many of the global top `l` it owns. Points at distance zero get keys below
//! every positive-distance point, so they are only chosen when fewer than `l`
//! points have positive distance.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::blackbox::BlackBoxConfig;
use crate::error::{invalid, Error, Result};
use crate::geometry::{compensated_sum, cost, nearest_raw, CenterSet, Dataset};
use crate::reduce::{reduce_to_k, Reduction};
use crate::seed;
use crate::simnet::{CommLedger, Executor, Network, NoClock, Partition, Payload, Phase, RoundTimer, Serial};

#[derive(Clone, Debug, PartialEq)]
pub struct KmppParams {
    pub k: usize,
    pub rounds: usize,
    pub oversampling: usize,
}

impl KmppParams {
    /// Oversampling `l = 2k`.
    pub fn new(k: usize, rounds: usize) -> Self {
        Self {
            k,
            rounds,
            oversampling: 2 * k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(invalid("k must be at least 2"));
        }
        if self.oversampling == 0 {
            return Err(invalid("oversampling must be positive"));
        }
        Ok(())
    }
}

/// A sampling key; larger wins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Key {
    positive: bool,
    value: f64,
}

impl Key {
    /// Key for weight `w`: `ln(u) / w` for `w > 0`, and `u` in a lower tier for `w = 0`.
    pub fn draw<R: Rng + ?Sized>(w: f64, rng: &mut R) -> Self {
        let u = 1.0 - rng.random::<f64>();
        if w > 0.0 {
            Self {
                positive: true,
                value: libm::log(u) / w,
            }
        } else {
            Self {
                positive: false,
                value: u,
            }
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.positive
            .cmp(&other.positive)
            .then(self.value.total_cmp(&other.value))
    }
}

struct Candidates {
    phi: f64,
    /// The machine's best keys, descending, with the local index of each point.
    best: Vec<(Key, usize)>,
}

impl Payload for Candidates {
    fn points(&self) -> usize {
        0
    }
    fn scalars(&self) -> usize {
        1 + self.best.len()
    }
}

#[derive(Clone, Debug)]
pub struct KmppResult {
    /// All selected centers before reduction: `1 + r * l` unless the data is smaller.
    pub candidates: CenterSet,
    /// `cost(X, C)` at the start of each round.
    pub phi: Vec<f64>,
    pub rounds: usize,
    pub reduction: Reduction,
    pub final_cost: f64,
    pub ledger: CommLedger,
    pub timer: RoundTimer,
}

impl KmppResult {
    pub fn reduced_centers(&self) -> &CenterSet {
        &self.reduction.centers
    }
}

fn descending(a: &(Key, usize), b: &(Key, usize)) -> Ordering {
    b.0.cmp(&a.0).then(a.1.cmp(&b.1))
}

pub fn run<E: Executor>(
    net: &mut Network<E>,
    params: &KmppParams,
    blackbox: &BlackBoxConfig,
    seed: u64,
) -> Result<KmppResult> {
    params.validate()?;
    blackbox.validate()?;
    let dim = net
        .machines()
        .iter()
        .map(|m| m.original().dim())
        .next()
        .ok_or(Error::EmptyDataset)?;
    let n = net.total_points();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = seed::stream_rng(seed, seed::COORDINATOR);
    let l = params.oversampling;

    // One uniformly random starting point.
    net.begin_round(Phase::Setup);
    let sizes = net.step(|m| Ok(m.original_len()))?;
    let sizes = net.gather(sizes);
    let mut pick = rng.random_range(0..n);
    let owner = sizes
        .iter()
        .position(|&s| {
            if pick < s {
                true
            } else {
                pick -= s;
                false
            }
        })
        .expect("pick below total");
    let request = [owner as f64, pick as f64];
    let empty = CenterSet::new(dim)?;
    net.broadcast(&empty, &request);
    let first = net.step(|m| {
        let mut out = Dataset::new(dim)?;
        if m.id() == owner {
            out.push(m.original().point(pick))?;
        }
        Ok(out)
    })?;
    let mut centers: CenterSet = net.gather_points(dim, first)?.into();

    let mut phi = Vec::with_capacity(params.rounds);
    let mut fresh = centers.clone();
    for _ in 0..params.rounds {
        net.begin_round(Phase::Loop);
        net.broadcast(&fresh, &[]);
        let current = &centers;
        let candidates = net.step(|m| {
            let d: Vec<f64> = m.original().iter().map(|x| nearest_raw(x, current).1).collect();
            let mut keyed: Vec<(Key, usize)> = d
                .iter()
                .enumerate()
                .map(|(i, &w)| (Key::draw(w, &mut m.rng), i))
                .collect();
            m.work += (m.original_len() * current.len()) as u64;
            if keyed.len() > l {
                keyed.select_nth_unstable_by(l - 1, descending);
                keyed.truncate(l);
            }
            keyed.sort_unstable_by(descending);
            Ok(Candidates {
                phi: compensated_sum(d),
                best: keyed,
            })
        })?;
        let candidates = net.gather(candidates);
        phi.push(compensated_sum(candidates.iter().map(|c| c.phi)));

        let mut pool: Vec<(Key, usize, usize)> = candidates
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.best.iter().enumerate().map(move |(pos, (key, _))| (*key, j, pos)))
            .collect();
        pool.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut quota = vec![0.0; candidates.len()];
        for &(_, j, _) in pool.iter().take(l) {
            quota[j] += 1.0;
        }
        net.broadcast(&empty, &quota);
        let quota = &quota;
        let candidates = &candidates;
        let chosen = net.step(|m| {
            let take = quota[m.id()] as usize;
            let locals: Vec<usize> = candidates[m.id()].best[..take].iter().map(|&(_, i)| i).collect();
            Ok(m.original().select(&locals))
        })?;
        let chosen = net.gather_points(dim, chosen)?;
        fresh = chosen.into();
        centers.extend_from(&fresh)?;
    }

    let reduction = reduce_to_k(net, &centers, params.k, blackbox, &mut rng)?;
    let final_cost = compensated_sum(
        net.machines()
            .iter()
            .map(|m| cost(m.original(), &reduction.centers))
            .collect::<Result<Vec<_>>>()?,
    );
    Ok(KmppResult {
        candidates: centers,
        phi,
        rounds: params.rounds,
        reduction,
        final_cost,
        ledger: net.ledger().clone(),
        timer: net.timer().clone(),
    })
}

/// Partitions `x` uniformly at random over `m` machines and runs k-means|| serially.
pub fn run_kmeans_parallel(
    x: &Dataset,
    m: usize,
    params: &KmppParams,
    blackbox: &BlackBoxConfig,
    seed: u64,
) -> Result<KmppResult> {
    let mut net = Network::partitioned(x, m, Partition::UniformRandom, seed, Serial(NoClock))?;
    run(&mut net, params, blackbox, seed)
}
