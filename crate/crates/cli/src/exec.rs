//! Wall-clock timing and a rayon-backed machine executor.

use std::time::Instant;

use rayon::prelude::*;
use soccer_core::simnet::{Clock, Executor, MachineState};

/// Seconds since construction.
#[derive(Clone, Copy, Debug)]
pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Runs every machine's closure on the rayon pool.
#[derive(Clone, Copy, Debug, Default)]
pub struct Threaded(pub WallClock);

impl Executor for Threaded {
    fn now(&self) -> f64 {
        self.0.now()
    }

    fn run<T, F>(&self, machines: &mut [MachineState], f: F) -> Vec<(T, f64)>
    where
        T: Send,
        F: Fn(&mut MachineState) -> T + Sync + Send,
    {
        machines
            .par_iter_mut()
            .map(|m| {
                let start = Instant::now();
                let out = f(m);
                (out, start.elapsed().as_secs_f64())
            })
            .collect()
    }
}
