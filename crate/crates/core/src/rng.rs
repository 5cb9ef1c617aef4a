//! Seeded random streams for trajectory ensembles.
//!
//! Every stream is a ChaCha8 keystream keyed by the master seed and a
//! purpose tag, positioned on the stream number of the trajectory. The
//! numbers a trajectory sees therefore depend only on
//! `(master_seed, purpose, trajectory_index)`, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrajectoryRng = ChaCha8Rng;

/// Independent families of random numbers drawn for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Input vacuum noise and all in-fiber noise of the propagated run.
    Propagation,
    /// Vacuum noise of the shot-noise reference ensemble.
    Reference,
    /// Excess phase jitter applied at detection.
    Gawbs,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Propagation => 0x5052_4f50_4147_4154,
            Stream::Reference => 0x5245_4645_5245_4e43,
            Stream::Gawbs => 0x4741_5742_5320_2020,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn trajectory_rng(master_seed: u64, trajectory_index: u64) -> TrajectoryRng {
    stream_rng(master_seed, trajectory_index, Stream::Propagation)
}

pub fn stream_rng(master_seed: u64, trajectory_index: u64, stream: Stream) -> TrajectoryRng {
    let mut key = [0u8; 32];
    let mut state = master_seed ^ stream.tag();
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trajectory_index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn same_key_same_stream() {
        let a: Vec<u64> = trajectory_rng(42, 3).sample_iter(rand::distributions::Standard).take(64).collect();
        let b: Vec<u64> = trajectory_rng(42, 3).sample_iter(rand::distributions::Standard).take(64).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn purposes_and_indices_differ() {
        let a: u64 = trajectory_rng(42, 0).gen();
        let b: u64 = trajectory_rng(42, 1).gen();
        let c: u64 = stream_rng(42, 0, Stream::Reference).gen();
        let d: u64 = trajectory_rng(43, 0).gen();
        assert!(a != b && a != c && a != d);
    }

    #[test]
    fn adjacent_streams_are_uncorrelated() {
        let n = 100_000;
        let mut r0 = trajectory_rng(2024, 0);
        let mut r1 = trajectory_rng(2024, 1);
        let mut sum = 0.0;
        for _ in 0..n {
            let x: f64 = r0.sample(StandardNormal);
            let y: f64 = r1.sample(StandardNormal);
            sum += x * y;
        }
        let corr = sum / n as f64;
        // standard error of the sample correlation is 1/√n
        assert!(corr.abs() < 5.0 / (n as f64).sqrt(), "corr = {corr}");
    }
}
