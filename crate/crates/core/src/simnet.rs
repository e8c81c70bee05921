//! In-process coordinator model: `m` machines holding disjoint shards, one
//! coordinator, synchronized rounds.
//!
//! Every transfer goes through [`Network`], which keeps a [`CommLedger`] of
//! points and scalars moved per round and a [`RoundTimer`] of per-machine and
//! coordinator time. A broadcast is ledgered once, however many machines
//! receive it.
//!
//! Machine work runs through an [`Executor`]. Each closure touches only its own
//! [`MachineState`] and results come back in machine-id order, so a serial and
//! a parallel executor produce identical payloads.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{CenterSet, Dataset};
use crate::seed;

/// A monotonic clock reading in seconds.
pub trait Clock {
    fn now(&self) -> f64;
}

/// A clock that never advances. Wall times are all zero under it.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Runs one closure per machine and reports each machine's elapsed seconds.
pub trait Executor {
    fn now(&self) -> f64;

    fn run<T, F>(&self, machines: &mut [MachineState], f: F) -> Vec<(T, f64)>
    where
        T: Send,
        F: Fn(&mut MachineState) -> T + Sync + Send;
}

/// Runs machines one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Serial<C = NoClock>(pub C);

impl<C: Clock> Executor for Serial<C> {
    fn now(&self) -> f64 {
        self.0.now()
    }

    fn run<T, F>(&self, machines: &mut [MachineState], f: F) -> Vec<(T, f64)>
    where
        T: Send,
        F: Fn(&mut MachineState) -> T + Sync + Send,
    {
        machines
            .iter_mut()
            .map(|m| {
                let start = self.0.now();
                let out = f(m);
                (out, self.0.now() - start)
            })
            .collect()
    }
}

/// One machine: its original shard, which of those points are still live, and its random stream.
#[derive(Clone, Debug)]
pub struct MachineState {
    id: usize,
    points: Dataset,
    global_ids: Vec<usize>,
    live: Vec<usize>,
    removed: Vec<usize>,
    surrendered: Vec<usize>,
    /// Distance evaluations performed so far; the deterministic stand-in for time.
    pub work: u64,
    pub rng: ChaCha8Rng,
}

impl MachineState {
    pub fn new(id: usize, points: Dataset, global_ids: Vec<usize>, rng: ChaCha8Rng) -> Self {
        assert_eq!(points.len(), global_ids.len());
        let live = (0..points.len()).collect();
        Self {
            id,
            points,
            global_ids,
            live,
            removed: Vec::new(),
            surrendered: Vec::new(),
            work: 0,
            rng,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// The shard as originally assigned, including points since removed.
    pub fn original(&self) -> &Dataset {
        &self.points
    }

    pub fn original_len(&self) -> usize {
        self.points.len()
    }

    pub fn live_len(&self) -> usize {
        self.live.len()
    }

    /// Local indices of live points.
    pub fn live(&self) -> &[usize] {
        &self.live
    }

    pub fn live_point(&self, i: usize) -> &[f64] {
        self.points.point(self.live[i])
    }

    pub fn live_points(&self) -> Dataset {
        self.points.select(&self.live)
    }

    pub fn global_id(&self, local: usize) -> usize {
        self.global_ids[local]
    }

    pub fn global_ids(&self) -> &[usize] {
        &self.global_ids
    }

    /// Keeps live points for which `keep` is true; the rest are recorded as removed.
    /// Returns the local indices removed.
    pub fn retain_live(&mut self, mut keep: impl FnMut(&[f64]) -> bool) -> Vec<usize> {
        let mut gone = Vec::new();
        let points = &self.points;
        self.live.retain(|&i| {
            let k = keep(points.point(i));
            if !k {
                gone.push(i);
            }
            k
        });
        self.removed.extend_from_slice(&gone);
        gone
    }

    /// Hands every live point to the coordinator.
    pub fn surrender(&mut self) -> Dataset {
        let out = self.live_points();
        self.surrendered.append(&mut self.live);
        out
    }

    pub fn removed(&self) -> &[usize] {
        &self.removed
    }

    pub fn surrendered(&self) -> &[usize] {
        &self.surrendered
    }
}

/// How the input is split across machines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Partition {
    /// Shuffled, then split into near-equal parts.
    UniformRandom,
    /// Consecutive index ranges of near-equal size.
    Contiguous,
    /// Consecutive ranges with machine `j` (1-based) receiving a share proportional to `j^-gamma`.
    Skewed(f64),
}

fn equal_sizes(n: usize, m: usize) -> Vec<usize> {
    (0..m).map(|j| n / m + usize::from(j < n % m)).collect()
}

/// Largest-remainder apportionment of `n` by shares `j^-gamma`; ties go to lower `j`.
fn skewed_sizes(n: usize, m: usize, gamma: f64) -> Vec<usize> {
    let shares: Vec<f64> = (1..=m).map(|j| libm::pow(j as f64, -gamma)).collect();
    let total: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| s / total * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| libm::floor(*e) as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - sizes[a] as f64;
        let rb = exact[b] - sizes[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &j in order.iter().take(n.saturating_sub(assigned)) {
        sizes[j] += 1;
    }
    sizes
}

/// Splits `x` over `m` machines. Machine `j` gets its own random stream derived from `seed`.
pub fn partition(x: &Dataset, m: usize, strategy: Partition, seed: u64) -> Result<Vec<MachineState>> {
    let n = x.len();
    if m == 0 || m > n {
        return Err(Error::BadMachineCount { machines: m, points: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let sizes = match strategy {
        Partition::UniformRandom => {
            order.shuffle(&mut seed::stream_rng(seed, seed::PARTITION));
            equal_sizes(n, m)
        }
        Partition::Contiguous => equal_sizes(n, m),
        Partition::Skewed(gamma) => {
            if !gamma.is_finite() {
                return Err(crate::error::invalid("skew exponent must be finite"));
            }
            skewed_sizes(n, m, gamma)
        }
    };
    let mut machines = Vec::with_capacity(m);
    let mut start = 0;
    for (j, size) in sizes.into_iter().enumerate() {
        let ids = order[start..start + size].to_vec();
        start += size;
        let rng = seed::stream_rng(seed, seed::MACHINE_BASE + j as u64);
        machines.push(MachineState::new(j, x.select(&ids), ids, rng));
    }
    Ok(machines)
}

/// What a round is part of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Setup,
    /// A SOCCER sampling/removal iteration or a k-means|| oversampling round.
    Loop,
    /// SOCCER's last round: all remaining points go to the coordinator.
    Final,
    /// Weighted reduction of the selected centers to `k`.
    Reduction,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Traffic {
    pub points_to_coordinator: usize,
    pub scalars_to_coordinator: usize,
    pub points_broadcast: usize,
    pub scalars_broadcast: usize,
}

impl Traffic {
    fn add(&mut self, other: &Traffic) {
        self.points_to_coordinator += other.points_to_coordinator;
        self.scalars_to_coordinator += other.scalars_to_coordinator;
        self.points_broadcast += other.points_broadcast;
        self.scalars_broadcast += other.scalars_broadcast;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundTraffic {
    pub phase: Phase,
    pub traffic: Traffic,
}

/// Per-round communication counts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommLedger {
    rounds: Vec<RoundTraffic>,
}

impl CommLedger {
    pub fn rounds(&self) -> &[RoundTraffic] {
        &self.rounds
    }

    pub fn totals(&self) -> Traffic {
        self.totals_where(|_| true)
    }

    pub fn totals_for(&self, phase: Phase) -> Traffic {
        self.totals_where(|p| p == phase)
    }

    fn totals_where(&self, pred: impl Fn(Phase) -> bool) -> Traffic {
        let mut t = Traffic::default();
        for r in self.rounds.iter().filter(|r| pred(r.phase)) {
            t.add(&r.traffic);
        }
        t
    }

    /// Running totals after each round.
    pub fn cumulative(&self) -> Vec<Traffic> {
        let mut acc = Traffic::default();
        self.rounds
            .iter()
            .map(|r| {
                acc.add(&r.traffic);
                acc
            })
            .collect()
    }

    fn current(&mut self) -> &mut Traffic {
        if self.rounds.is_empty() {
            self.rounds.push(RoundTraffic {
                phase: Phase::Setup,
                traffic: Traffic::default(),
            });
        }
        &mut self.rounds.last_mut().expect("non-empty").traffic
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundTiming {
    pub phase: Phase,
    pub machine_secs: Vec<f64>,
    pub machine_work: Vec<u64>,
    pub coordinator_secs: f64,
}

impl RoundTiming {
    pub fn max_machine_secs(&self) -> f64 {
        self.machine_secs.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_machine_work(&self) -> u64 {
        self.machine_work.iter().copied().max().unwrap_or(0)
    }
}

/// Per-round machine and coordinator time. Machine time of a run is the sum
/// over rounds of the slowest machine in that round.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundTimer {
    rounds: Vec<RoundTiming>,
}

impl RoundTimer {
    pub fn rounds(&self) -> &[RoundTiming] {
        &self.rounds
    }

    pub fn machine_time_total(&self) -> f64 {
        self.rounds.iter().map(RoundTiming::max_machine_secs).sum()
    }

    /// Sum over rounds of the largest per-machine distance-evaluation count.
    pub fn machine_work_total(&self) -> u64 {
        self.rounds.iter().map(RoundTiming::max_machine_work).sum()
    }

    pub fn coordinator_time_total(&self) -> f64 {
        self.rounds.iter().map(|r| r.coordinator_secs).sum()
    }

    fn current(&mut self, machines: usize) -> &mut RoundTiming {
        if self.rounds.is_empty() {
            self.open(Phase::Setup, machines);
        }
        self.rounds.last_mut().expect("non-empty")
    }

    fn open(&mut self, phase: Phase, machines: usize) {
        self.rounds.push(RoundTiming {
            phase,
            machine_secs: vec![0.0; machines],
            machine_work: vec![0; machines],
            coordinator_secs: 0.0,
        });
    }
}

/// Anything a machine can send: counted as points and scalars.
pub trait Payload {
    fn points(&self) -> usize;
    fn scalars(&self) -> usize;
}

impl Payload for Dataset {
    fn points(&self) -> usize {
        self.len()
    }
    fn scalars(&self) -> usize {
        0
    }
}

impl Payload for f64 {
    fn points(&self) -> usize {
        0
    }
    fn scalars(&self) -> usize {
        1
    }
}

impl Payload for usize {
    fn points(&self) -> usize {
        0
    }
    fn scalars(&self) -> usize {
        1
    }
}

impl<P: Payload> Payload for Vec<P> {
    fn points(&self) -> usize {
        self.iter().map(Payload::points).sum()
    }
    fn scalars(&self) -> usize {
        self.iter().map(Payload::scalars).sum()
    }
}

impl<A: Payload, B: Payload> Payload for (A, B) {
    fn points(&self) -> usize {
        self.0.points() + self.1.points()
    }
    fn scalars(&self) -> usize {
        self.0.scalars() + self.1.scalars()
    }
}

/// What every machine receives from one broadcast.
#[derive(Clone, Copy, Debug)]
pub struct Broadcast<'a> {
    pub centers: &'a CenterSet,
    pub scalars: &'a [f64],
}

pub struct Network<E = Serial> {
    machines: Vec<MachineState>,
    executor: E,
    ledger: CommLedger,
    timer: RoundTimer,
    total_points: usize,
}

impl<E: Executor> Network<E> {
    pub fn new(machines: Vec<MachineState>, executor: E) -> Self {
        let total_points = machines.iter().map(MachineState::original_len).sum();
        Self {
            machines,
            executor,
            ledger: CommLedger::default(),
            timer: RoundTimer::default(),
            total_points,
        }
    }

    /// Partitions `x` and wraps the shards in a fresh network.
    pub fn partitioned(x: &Dataset, m: usize, strategy: Partition, seed: u64, executor: E) -> Result<Self> {
        Ok(Self::new(partition(x, m, strategy, seed)?, executor))
    }

    pub fn machines(&self) -> &[MachineState] {
        &self.machines
    }

    pub fn machine_count(&self) -> usize {
        self.machines.len()
    }

    pub fn total_points(&self) -> usize {
        self.total_points
    }

    pub fn live_points(&self) -> usize {
        self.machines.iter().map(MachineState::live_len).sum()
    }

    pub fn ledger(&self) -> &CommLedger {
        &self.ledger
    }

    pub fn timer(&self) -> &RoundTimer {
        &self.timer
    }

    pub fn executor(&self) -> &E {
        &self.executor
    }

    pub fn begin_round(&mut self, phase: Phase) {
        self.ledger.rounds.push(RoundTraffic {
            phase,
            traffic: Traffic::default(),
        });
        self.timer.open(phase, self.machines.len());
    }

    /// Runs `f` on every machine, accumulating each machine's time and work
    /// into the current round. The first failing machine (by id) aborts the step.
    pub fn step<T, F>(&mut self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut MachineState) -> Result<T> + Sync + Send,
    {
        let work_before: Vec<u64> = self.machines.iter().map(|m| m.work).collect();
        let outcomes = self.executor.run(&mut self.machines, f);
        let m = self.machines.len();
        let timing = self.timer.current(m);
        let mut results = Vec::with_capacity(m);
        let mut first_err = None;
        for (j, (out, secs)) in outcomes.into_iter().enumerate() {
            timing.machine_secs[j] += secs;
            timing.machine_work[j] += self.machines[j].work - work_before[j];
            match out {
                Ok(v) => results.push(v),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(results),
        }
    }

    /// Delivers per-machine payloads to the coordinator, in machine-id order.
    pub fn gather<P: Payload>(&mut self, parts: Vec<P>) -> Vec<P> {
        let t = self.ledger.current();
        t.points_to_coordinator += parts.points();
        t.scalars_to_coordinator += parts.scalars();
        parts
    }

    /// Gathers point sets and concatenates them in machine-id order.
    pub fn gather_points(&mut self, dim: usize, parts: Vec<Dataset>) -> Result<Dataset> {
        let parts = self.gather(parts);
        let total = parts.iter().map(Dataset::len).sum();
        let mut out = Dataset::with_capacity(dim, total)?;
        for p in &parts {
            out.extend_from(p)?;
        }
        Ok(out)
    }

    pub fn broadcast<'a>(&mut self, centers: &'a CenterSet, scalars: &'a [f64]) -> Broadcast<'a> {
        let t = self.ledger.current();
        t.points_broadcast += centers.len();
        t.scalars_broadcast += scalars.len();
        Broadcast { centers, scalars }
    }

    /// Times coordinator-side work in the current round.
    pub fn coordinator<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let start = self.executor.now();
        let out = f();
        let secs = self.executor.now() - start;
        self.timer.current(self.machines.len()).coordinator_secs += secs;
        out
    }

    /// Live, removed and surrendered points partition the original index set.
    pub fn conservation_holds(&self) -> bool {
        let mut seen = vec![false; self.total_points];
        for m in &self.machines {
            for &local in m.live.iter().chain(&m.removed).chain(&m.surrendered) {
                let g = m.global_ids[local];
                if g >= seen.len() || seen[g] {
                    return false;
                }
                seen[g] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}
