//! Named, reproducible random streams.
//!
//! Every consumer draws from its own ChaCha8 stream keyed by the run seed and
//! a label, so adding a consumer never shifts the numbers another one sees.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(FNV_OFFSET, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

pub fn stream(seed: u64, label: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(label))
}

/// Box–Muller pair from two uniforms; u1 is drawn from (0, 1].
fn box_muller(rng: &mut StreamRng) -> (f64, f64) {
    let u1 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (TAU * u2).sin_cos();
    (r * c, r * s)
}

pub fn standard_normal(rng: &mut StreamRng) -> f64 {
    box_muller(rng).0
}

/// Fills `out` consuming one uniform pair per two entries.
pub fn fill_standard_normal(rng: &mut StreamRng, out: &mut [f64]) {
    for pair in out.chunks_mut(2) {
        let (a, b) = box_muller(rng);
        pair[0] = a;
        if let Some(x) = pair.get_mut(1) {
            *x = b;
        }
    }
}
