//! Low-discrepancy point sets and seed derivation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First primes, enough for the 200-dimensional rectangle-probability guard.
pub(crate) fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if out
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// SplitMix64 finalizer; used to derive independent child seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

/// Randomly shifted (Cranley–Patterson) Halton points in `[0,1)^d`.
pub fn shifted_halton(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let bases = primes(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (0..count as u64)
        .map(|k| {
            bases
                .iter()
                .zip(&shift)
                .map(|(&b, &s)| (radical_inverse(k, b) + s).fract())
                .collect()
        })
        .collect()
}

/// Richtmyer rank-1 lattice with per-replicate random shifts and the
/// baker's (tent) transform. The generator uses fractional parts of square
/// roots of primes.
#[derive(Clone, Debug)]
pub struct ShiftedLattice {
    generator: Vec<f64>,
    shifts: Vec<Vec<f64>>,
    points: usize,
}

impl ShiftedLattice {
    pub fn new(dim: usize, points: usize, replicates: usize, seed: u64) -> Self {
        let generator = primes(dim)
            .into_iter()
            .map(|p| (p as f64).sqrt().fract())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shifts = (0..replicates)
            .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
            .collect();
        Self {
            generator,
            shifts,
            points,
        }
    }

    pub fn dim(&self) -> usize {
        self.generator.len()
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn replicates(&self) -> usize {
        self.shifts.len()
    }

    /// Writes point `k` (1-based) of replicate `r` into `out`.
    #[inline]
    pub fn fill(&self, r: usize, k: usize, out: &mut [f64]) {
        let kf = k as f64;
        for ((o, &g), &s) in out.iter_mut().zip(&self.generator).zip(&self.shifts[r]) {
            let u = (kf * g + s).fract();
            *o = 1.0 - (2.0 * u - 1.0).abs();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes_are_primes() {
        assert_eq!(primes(8), vec![2, 3, 5, 7, 11, 13, 17, 19]);
        assert_eq!(primes(200)[199], 1223);
    }

    #[test]
    fn halton_in_unit_cube_and_seeded() {
        let a = shifted_halton(64, 3, 7);
        let b = shifted_halton(64, 3, 7);
        let c = shifted_halton(64, 3, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().flatten().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn halton_first_dimension_is_equidistributed() {
        // A shifted van der Corput set of size 2^k has one point per dyadic cell.
        let pts = shifted_halton(16, 1, 3);
        let mut cells = [0usize; 16];
        for p in &pts {
            cells[(p[0] * 16.0) as usize] += 1;
        }
        assert!(cells.iter().all(|&c| c == 1));
    }

    #[test]
    fn lattice_mean_is_accurate() {
        let lat = ShiftedLattice::new(4, 4096, 2, 11);
        let mut buf = [0.0; 4];
        let mut acc = 0.0;
        for k in 1..=4096 {
            lat.fill(0, k, &mut buf);
            acc += buf.iter().product::<f64>();
        }
        // E[∏ Uᵢ] = 1/16 for independent uniforms.
        assert!((acc / 4096.0 - 0.0625).abs() < 1e-3);
    }

    #[test]
    fn mixed_seeds_differ() {
        assert_ne!(mix_seed(0, 0), mix_seed(0, 1));
        assert_ne!(mix_seed(0, 1), mix_seed(1, 0));
        assert_eq!(mix_seed(5, 9), mix_seed(5, 9));
    }
}
