//! SOCCER: sample, cluster, threshold and remove, until the live data fits the coordinator.
//!
//! Each loop round every machine sends two uniform samples `P1`, `P2` of its
//! live points, each an `alpha = eta / N` fraction. The coordinator clusters
//! `P1` into `k_plus` centers, estimates a removal radius `v` from the
//! truncated cost of those centers on `P2`, and broadcasts both. Machines then
//! drop every point within squared distance `v` of the centers. Once at most
//! `eta` points remain they are all sent to the coordinator and clustered into
//! `k` centers. The union of all centers is finally reduced to `k` by weighted
//! clustering.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::blackbox::{BlackBoxConfig, WeightedDataset};
use crate::error::{invalid, Error, Result};
use crate::geometry::{compensated_sum, cost, nearest_raw, truncated_sum, CenterSet, Dataset};
use crate::reduce::{reduce_to_k, Reduction};
use crate::seed;
use crate::simnet::{CommLedger, Executor, MachineState, Network, NoClock, Partition, RoundTimer, Serial};

/// Which logarithm argument the derived constants use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConstantsMode {
    /// `1.1 k / delta`. Reproduces the published coordinator sample sizes.
    #[default]
    Experiment,
    /// `1.1 k / (delta * epsilon)`, the form the round and size guarantees are stated for.
    Theory,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SamplingMode {
    /// Two independent uniform subsets of exactly `round(alpha * |X_j|)` points each.
    #[default]
    ExactFraction,
    /// Two independent passes keeping each point with probability `alpha`.
    Bernoulli,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoccerParams {
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub constants_mode: ConstantsMode,
    pub sampling_mode: SamplingMode,
    /// Defaults to `ceil(1 / epsilon) + 2` loop rounds.
    pub max_loop_rounds_guard: Option<usize>,
}

impl SoccerParams {
    pub fn new(k: usize, delta: f64, epsilon: f64) -> Self {
        Self {
            k,
            delta,
            epsilon,
            constants_mode: ConstantsMode::default(),
            sampling_mode: SamplingMode::default(),
            max_loop_rounds_guard: None,
        }
    }

    pub fn with_constants(mut self, mode: ConstantsMode) -> Self {
        self.constants_mode = mode;
        self
    }

    pub fn with_sampling(mut self, mode: SamplingMode) -> Self {
        self.sampling_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(invalid("k must be at least 2"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon must lie in (0, 1)"));
        }
        if self.max_loop_rounds_guard == Some(0) {
            return Err(invalid("the loop-round guard must be positive"));
        }
        Ok(())
    }

    pub fn loop_round_guard(&self) -> usize {
        self.max_loop_rounds_guard
            .unwrap_or_else(|| libm::ceil(1.0 / self.epsilon) as usize + 2)
    }

    /// The approximation and round guarantees assume `k >= 5`.
    pub fn outside_guarantee(&self) -> bool {
        self.k < 5
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedConstants {
    pub log_arg: f64,
    /// Coordinator capacity `36 k n^epsilon ln(log_arg)`.
    pub eta: f64,
    pub d_k: f64,
    pub k_plus: usize,
    /// Number of farthest points dropped from `P2`: `floor(1.5 (k + 1) d_k)`.
    pub truncation: usize,
}

impl DerivedConstants {
    /// Expected total size of `P1` in the first round.
    pub fn p1_size(&self) -> u64 {
        libm::floor(self.eta) as u64
    }
}

pub fn derive_constants(params: &SoccerParams, n: usize) -> Result<DerivedConstants> {
    params.validate()?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = params.k as f64;
    let log_arg = match params.constants_mode {
        ConstantsMode::Experiment => 1.1 * k / params.delta,
        ConstantsMode::Theory => 1.1 * k / (params.delta * params.epsilon),
    };
    if !(log_arg > 1.0) {
        return Err(Error::DegenerateConstants { log_arg });
    }
    let ln = libm::log(log_arg);
    let eta = 36.0 * k * libm::pow(n as f64, params.epsilon) * ln;
    let d_k = 6.5 * ln;
    let k_plus = libm::floor(k + 9.0 * ln) as usize;
    let truncation = libm::floor(1.5 * (k + 1.0) * d_k) as usize;
    Ok(DerivedConstants {
        log_arg,
        eta,
        d_k,
        k_plus,
        truncation,
    })
}

/// Draws the two independent samples `(P1_j, P2_j)` from a machine's live points.
pub fn machine_sample(machine: &mut MachineState, alpha: f64, mode: SamplingMode) -> (Dataset, Dataset) {
    let live = machine.live_len();
    let draw = |machine: &mut MachineState| -> Vec<usize> {
        match mode {
            SamplingMode::ExactFraction => {
                let size = (libm::round(alpha * live as f64) as usize).min(live);
                let mut picked = index::sample(&mut machine.rng, live, size).into_vec();
                picked.sort_unstable();
                picked
            }
            SamplingMode::Bernoulli => {
                let p = alpha.clamp(0.0, 1.0);
                (0..live).filter(|_| machine.rng.random_bool(p)).collect()
            }
        }
    };
    let first = draw(machine);
    let second = draw(machine);
    let to_points = |picked: &[usize]| {
        let locals: Vec<usize> = picked.iter().map(|&i| machine.live()[i]).collect();
        machine.original().select(&locals)
    };
    (to_points(&first), to_points(&second))
}

/// What the coordinator computes from one round's samples.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinatorOutcome {
    pub centers: CenterSet,
    pub truncated_cost: f64,
    /// Removal radius (squared).
    pub v: f64,
    /// `v k d_k / alpha`, the implied estimate of the truncated cost on the live data.
    pub psi: f64,
}

pub fn removal_threshold(truncated_cost: f64, k: usize, d_k: f64) -> f64 {
    2.0 * truncated_cost / (3.0 * k as f64 * d_k)
}

pub fn coordinator_round<R: Rng + ?Sized>(
    p1: &Dataset,
    p2: &Dataset,
    alpha: f64,
    k: usize,
    constants: &DerivedConstants,
    blackbox: &BlackBoxConfig,
    rng: &mut R,
) -> Result<CoordinatorOutcome> {
    if p1.is_empty() {
        return Err(Error::EmptySample);
    }
    let fit = blackbox.cluster(&WeightedDataset::uniform(p1.clone()), constants.k_plus, rng)?;
    let mut d: Vec<f64> = p2.iter().map(|x| nearest_raw(x, &fit.centers).1).collect();
    let truncated_cost = truncated_sum(&mut d, constants.truncation);
    let v = removal_threshold(truncated_cost, k, constants.d_k);
    let psi = v * k as f64 * constants.d_k / alpha;
    Ok(CoordinatorOutcome {
        centers: fit.centers,
        truncated_cost,
        v,
        psi,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Removal {
    /// Global indices of the removed points.
    pub removed_ids: Vec<usize>,
    /// Cost of the removed points against the round's centers.
    pub removed_cost: f64,
    pub remaining: usize,
}

/// Keeps exactly the live points whose squared distance to `centers` exceeds `v`.
pub fn machine_remove(machine: &mut MachineState, centers: &CenterSet, v: f64) -> Removal {
    machine.work += (machine.live_len() * centers.len()) as u64;
    let mut removed_d = Vec::new();
    let gone = machine.retain_live(|x| {
        let d = nearest_raw(x, centers).1;
        let keep = d > v;
        if !keep {
            removed_d.push(d);
        }
        keep
    });
    Removal {
        removed_ids: gone.iter().map(|&l| machine.global_id(l)).collect(),
        removed_cost: compensated_sum(removed_d),
        remaining: machine.live_len(),
    }
}

/// Everything observed in one loop round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// 1-based.
    pub index: usize,
    pub alpha: f64,
    /// Live points at the start of the round.
    pub live_before: usize,
    pub p1_size: usize,
    pub p2_size: usize,
    pub c_iter: CenterSet,
    pub truncated_cost: f64,
    pub v: f64,
    pub psi: f64,
    pub removed_count: usize,
    pub removed_ids: Vec<usize>,
    pub removed_cost: f64,
    pub remaining: usize,
}

#[derive(Clone, Debug)]
pub struct SoccerResult {
    pub constants: DerivedConstants,
    pub c_out: CenterSet,
    pub loop_rounds: usize,
    /// Loop rounds plus the final phase.
    pub total_rounds: usize,
    pub rounds: Vec<RoundRecord>,
    /// Points sent to the coordinator in the final phase.
    pub final_gathered: usize,
    /// Centers from the final phase; empty if nothing was left.
    pub final_centers: CenterSet,
    /// Cost of the final-phase points against the final centers.
    pub final_phase_cost: f64,
    /// `cost(X, c_out)`.
    pub c_out_cost: f64,
    pub reduction: Reduction,
    /// `cost(X, reduced centers)`.
    pub final_cost: f64,
    pub ledger: CommLedger,
    pub timer: RoundTimer,
    pub outside_guarantee: bool,
}

impl SoccerResult {
    pub fn reduced_centers(&self) -> &CenterSet {
        &self.reduction.centers
    }

    /// `sum_i cost(R_i, C_iter^i) + cost(V_final, C_final)`; bounds `c_out_cost` from above.
    pub fn decomposed_cost(&self) -> f64 {
        compensated_sum(
            self.rounds
                .iter()
                .map(|r| r.removed_cost)
                .chain([self.final_phase_cost]),
        )
    }
}

fn cost_over_shards<E: Executor>(net: &Network<E>, centers: &CenterSet) -> Result<f64> {
    let parts: Result<Vec<f64>> = net.machines().iter().map(|m| cost(m.original(), centers)).collect();
    Ok(compensated_sum(parts?))
}

/// Runs SOCCER on a freshly partitioned network. `seed` drives the coordinator's randomness.
pub fn run<E: Executor>(
    net: &mut Network<E>,
    params: &SoccerParams,
    blackbox: &BlackBoxConfig,
    seed: u64,
) -> Result<SoccerResult> {
    params.validate()?;
    blackbox.validate()?;
    let n = net.total_points();
    let constants = derive_constants(params, n)?;
    let dim = net
        .machines()
        .iter()
        .map(|m| m.original().dim())
        .next()
        .ok_or(Error::EmptyDataset)?;
    let mut rng = seed::stream_rng(seed, seed::COORDINATOR);
    let guard = params.loop_round_guard();

    let mut c_out = CenterSet::new(dim)?;
    let mut rounds = Vec::new();
    let mut live = net.live_points();
    while live as f64 > constants.eta {
        if rounds.len() >= guard {
            return Err(Error::RoundLimitExceeded {
                rounds: rounds.len(),
                remaining: live,
                eta: constants.eta,
            });
        }
        net.begin_round(crate::simnet::Phase::Loop);
        let alpha = constants.eta / live as f64;
        let mode = params.sampling_mode;
        let samples = net.step(|m| Ok(machine_sample(m, alpha, mode)))?;
        let (p1_parts, p2_parts): (Vec<Dataset>, Vec<Dataset>) = samples.into_iter().unzip();
        let p1 = net.gather_points(dim, p1_parts)?;
        let p2 = net.gather_points(dim, p2_parts)?;

        let outcome =
            net.coordinator(|| coordinator_round(&p1, &p2, alpha, params.k, &constants, blackbox, &mut rng))?;
        c_out.extend_from(&outcome.centers)?;

        let scalars = [outcome.v];
        let msg = net.broadcast(&outcome.centers, &scalars);
        let v = outcome.v;
        let removals = net.step(|m| Ok(machine_remove(m, msg.centers, v)))?;
        let remaining: Vec<usize> = net.gather(removals.iter().map(|r| r.remaining).collect());

        let live_after: usize = remaining.iter().sum();
        let removed_ids: Vec<usize> = removals.iter().flat_map(|r| r.removed_ids.iter().copied()).collect();
        rounds.push(RoundRecord {
            index: rounds.len() + 1,
            alpha,
            live_before: live,
            p1_size: p1.len(),
            p2_size: p2.len(),
            c_iter: outcome.centers,
            truncated_cost: outcome.truncated_cost,
            v,
            psi: outcome.psi,
            removed_count: removed_ids.len(),
            removed_ids,
            removed_cost: compensated_sum(removals.iter().map(|r| r.removed_cost)),
            remaining: live_after,
        });
        if live_after >= live {
            return Err(Error::RoundLimitExceeded {
                rounds: rounds.len(),
                remaining: live_after,
                eta: constants.eta,
            });
        }
        live = live_after;
    }

    net.begin_round(crate::simnet::Phase::Final);
    let parts = net.step(|m| Ok(m.surrender()))?;
    let rest = net.gather_points(dim, parts)?;
    let (final_centers, final_phase_cost) = if rest.is_empty() {
        (CenterSet::new(dim)?, 0.0)
    } else {
        let fit = net.coordinator(|| blackbox.cluster(&WeightedDataset::uniform(rest.clone()), params.k, &mut rng))?;
        (fit.centers, fit.cost)
    };
    c_out.extend_from(&final_centers)?;

    let reduction = reduce_to_k(net, &c_out, params.k, blackbox, &mut rng)?;
    let c_out_cost = cost_over_shards(net, &c_out)?;
    let final_cost = cost_over_shards(net, &reduction.centers)?;
    let loop_rounds = rounds.len();
    Ok(SoccerResult {
        constants,
        c_out,
        loop_rounds,
        total_rounds: loop_rounds + 1,
        rounds,
        final_gathered: rest.len(),
        final_centers,
        final_phase_cost,
        c_out_cost,
        reduction,
        final_cost,
        ledger: net.ledger().clone(),
        timer: net.timer().clone(),
        outside_guarantee: params.outside_guarantee(),
    })
}

/// Partitions `x` uniformly at random over `m` machines and runs SOCCER serially.
pub fn run_soccer(
    x: &Dataset,
    m: usize,
    params: &SoccerParams,
    blackbox: &BlackBoxConfig,
    seed: u64,
) -> Result<SoccerResult> {
    let mut net = Network::partitioned(x, m, Partition::UniformRandom, seed, Serial(NoClock))?;
    run(&mut net, params, blackbox, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::partition;
    use alloc::vec;

    fn params(k: usize, epsilon: f64) -> SoccerParams {
        SoccerParams::new(k, 0.1, epsilon)
    }

    #[test]
    fn published_sample_sizes() {
        let n = 10_000_000;
        for (k, eps, expected) in [
            (25, 0.2, 126_978u64),
            (25, 0.05, 11_316),
            (25, 0.01, 5_939),
            (100, 0.05, 56_440),
        ] {
            let c = derive_constants(&params(k, eps), n).unwrap();
            assert!(c.p1_size().abs_diff(expected) <= 1, "k={k} eps={eps}: {}", c.eta);
        }
    }

    #[test]
    fn theory_constants_use_epsilon_in_the_logarithm() {
        let c = derive_constants(&params(25, 0.05).with_constants(ConstantsMode::Theory), 1000).unwrap();
        assert!((c.log_arg - 5500.0).abs() < 1e-9);
        let ln = libm::log(5500.0);
        assert!((c.d_k - 6.5 * ln).abs() < 1e-12);
        assert_eq!(c.k_plus, (25.0 + 9.0 * ln) as usize);
    }

    #[test]
    fn invalid_parameters() {
        for p in [
            SoccerParams::new(1, 0.1, 0.1),
            SoccerParams::new(5, 0.0, 0.1),
            SoccerParams::new(5, 0.1, 1.0),
            SoccerParams {
                max_loop_rounds_guard: Some(0),
                ..params(5, 0.1)
            },
        ] {
            assert!(
                matches!(derive_constants(&p, 10), Err(Error::InvalidParameter(_))),
                "{p:?}"
            );
        }
        assert_eq!(derive_constants(&params(5, 0.1), 0), Err(Error::EmptyDataset));
        assert_eq!(params(5, 0.1).loop_round_guard(), 12);
        assert_eq!(params(5, 0.3).loop_round_guard(), 6);
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(removal_threshold(30.0, 5, 2.0), 2.0);
    }

    fn shard(values: &[f64]) -> MachineState {
        let x = Dataset::from_flat(1, values.to_vec()).unwrap();
        partition(&x, 1, Partition::Contiguous, 0).unwrap().remove(0)
    }

    #[test]
    fn full_sample_takes_everything() {
        let mut m = shard(&[1.0, 2.0, 3.0]);
        let (p1, p2) = machine_sample(&mut m, 1.0, SamplingMode::ExactFraction);
        assert_eq!(p1.as_flat(), &[1.0, 2.0, 3.0]);
        assert_eq!(p2.as_flat(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn exact_fraction_sizes() {
        let values: Vec<f64> = (0..1000).map(f64::from).collect();
        let mut m = shard(&values);
        let (p1, p2) = machine_sample(&mut m, 0.1, SamplingMode::ExactFraction);
        assert_eq!((p1.len(), p2.len()), (100, 100));
    }

    #[test]
    fn removal_boundary_is_inclusive() {
        let mut m = shard(&[0.0, 1.0, 2.0]);
        let c = CenterSet::from(Dataset::from_flat(1, vec![0.0]).unwrap());
        // squared distances 0, 1, 4 with v = 1: only the point at distance 4 survives
        let r = machine_remove(&mut m, &c, 1.0);
        assert_eq!(r.removed_ids, vec![0, 1]);
        assert_eq!(r.remaining, 1);
        assert_eq!(r.removed_cost, 1.0);

        let mut m = shard(&[0.5, 1.0, 2.0]);
        let c = CenterSet::from(Dataset::from_flat(1, vec![-1.0]).unwrap());
        let r = machine_remove(&mut m, &c, 0.0);
        assert_eq!(r.remaining, 3);
        let r = machine_remove(&mut m, &c, 9.0);
        assert_eq!(r.remaining, 0);
    }

    #[test]
    fn threshold_is_zero_for_exact_centers_or_full_truncation() {
        let p1 = Dataset::from_flat(1, vec![0.0, 0.0, 5.0, 5.0]).unwrap();
        let c = derive_constants(&params(2, 0.5), 100).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let out = coordinator_round(&p1, &p1, 0.5, 2, &c, &BlackBoxConfig::default(), &mut rng).unwrap();
        assert_eq!(out.v, 0.0);

        let spread = Dataset::from_flat(1, (0..50).map(|i| (i * i) as f64).collect()).unwrap();
        assert!(c.truncation >= spread.len());
        let out = coordinator_round(&p1, &spread, 0.5, 2, &c, &BlackBoxConfig::default(), &mut rng).unwrap();
        assert_eq!(out.v, 0.0);

        let empty = Dataset::new(1).unwrap();
        assert_eq!(
            coordinator_round(&empty, &p1, 0.5, 2, &c, &BlackBoxConfig::default(), &mut rng),
            Err(Error::EmptySample)
        );
    }

    use rand::SeedableRng;

    #[test]
    fn small_inputs_skip_the_loop() {
        let x = Dataset::from_flat(1, vec![0.0, 1.0, 10.0, 11.0, 50.0]).unwrap();
        let r = run_soccer(&x, 2, &params(2, 0.1), &BlackBoxConfig::default(), 1).unwrap();
        assert_eq!(r.loop_rounds, 0);
        assert_eq!(r.total_rounds, 1);
        assert_eq!(r.final_gathered, 5);
        assert!(r.c_out.len() <= 2);
        assert_eq!(r.final_cost, cost(&x, &r.c_out).unwrap());
        assert!(r.outside_guarantee);
    }

    #[test]
    fn guard_stops_runs_that_do_not_shrink() {
        // Mostly duplicates plus a long tail of distinct far points. The tail
        // points that reach P2 are all truncated away, so v = 0 and the tail survives.
        let mut coords = vec![0.0; 3000];
        coords.extend((1..=1000).map(|i| 1e3 * i as f64));
        let x = Dataset::from_flat(1, coords).unwrap();
        let mut p = params(2, 0.01);
        p.max_loop_rounds_guard = Some(1);
        let c = derive_constants(&p, x.len()).unwrap();
        assert!(c.eta < 300.0);
        match run_soccer(&x, 4, &p, &BlackBoxConfig::default(), 2) {
            Err(Error::RoundLimitExceeded {
                rounds: 1, remaining, ..
            }) => assert!(remaining > 900),
            other => panic!("unexpected {other:?}"),
        }
    }
}
