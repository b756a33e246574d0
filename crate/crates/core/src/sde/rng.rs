use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Per-trajectory random stream.
pub type Substream = ChaCha8Rng;

/// Stream `index` of the generator keyed by `master_seed`.
///
/// ChaCha supports 2^64 independent streams per key, so every trajectory
/// gets its own stream regardless of which worker runs it.
pub fn substream(master_seed: u64, index: u64) -> Substream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// `dimension` independent N(0, dt) samples.
pub fn generate_wiener_increments<R: Rng + ?Sized>(rng: &mut R, dimension: usize, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; dimension];
    fill_wiener_increments(rng, dt, &mut out);
    out
}

pub fn fill_wiener_increments<R: Rng + ?Sized>(rng: &mut R, dt: f64, out: &mut [f64]) {
    let scale = dt.sqrt();
    for w in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *w = scale * z;
    }
}
