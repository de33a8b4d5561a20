//! Deterministic, counter-splittable random number generation.
//!
//! Every stochastic quantity in the simulator is drawn from a stream derived
//! from `(master_seed, point_index)` so that sweep points can be evaluated in
//! any order (or in parallel) and still produce bit-identical traces.

use std::f64::consts::PI;

/// SplitMix64 step. Passes through the full 64-bit state space; used both as
/// the stream generator and as the mixing function for substream derivation.
#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic random stream. Cheap to construct, `Copy`-free by intent
/// (each consumer owns and advances its own stream).
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn from_seed(seed: u64) -> Self {
        Stream { state: seed }
    }

    /// Derive an independent substream keyed by `index`. The key is folded in
    /// through two SplitMix rounds so that adjacent indices decorrelate.
    pub fn substream(master_seed: u64, index: u64) -> Self {
        let mut s = master_seed ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93);
        let a = splitmix64(&mut s);
        let b = splitmix64(&mut s);
        Stream {
            state: a ^ b.rotate_left(17),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.state)
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal via Box-Muller. One value per call; the sine branch is
    /// discarded to keep the draw count per sample fixed.
    pub fn normal(&mut self) -> f64 {
        let mut u1 = self.uniform();
        if u1 == 0.0 {
            u1 = f64::MIN_POSITIVE;
        }
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// Poisson-distributed count with mean `lambda`.
    ///
    /// Inversion by sequential search below `lambda` = 10 (exact, O(lambda)),
    /// Hörmann's PTRD transformed-rejection sampler above (exact for
    /// `lambda` >= 10). Both paths consume only `uniform()` draws.
    pub fn poisson(&mut self, lambda: f64) -> u64 {
        assert!(
            lambda.is_finite() && lambda >= 0.0,
            "poisson mean must be finite and non-negative, got {lambda}"
        );
        if lambda == 0.0 {
            0
        } else if lambda < 10.0 {
            self.poisson_inversion(lambda)
        } else {
            self.poisson_ptrd(lambda)
        }
    }

    fn poisson_inversion(&mut self, lambda: f64) -> u64 {
        let limit = (-lambda).exp();
        let mut k = 0u64;
        let mut product = self.uniform();
        while product > limit {
            k += 1;
            product *= self.uniform();
        }
        k
    }

    /// PTRD: W. Hörmann, "The transformed rejection method for generating
    /// Poisson random variables", Insurance Math. Econom. 12 (1993).
    fn poisson_ptrd(&mut self, lambda: f64) -> u64 {
        let smu = lambda.sqrt();
        let b = 0.931 + 2.53 * smu;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let v_r = 0.9277 - 3.6224 / (b - 2.0);

        loop {
            let mut v = self.uniform();
            if v <= 0.86 * v_r {
                let u = v / v_r - 0.43;
                let k = ((2.0 * a / (0.5 - u.abs()) + b) * u + lambda + 0.445).floor();
                return k as u64;
            }

            let u;
            if v >= v_r {
                u = self.uniform() - 0.5;
            } else {
                let u_candidate = v / v_r - 0.93;
                u = u_candidate.signum() * 0.5 - u_candidate;
                v = self.uniform() * v_r;
            }

            let us = 0.5 - u.abs();
            if us < 0.013 && v > us {
                continue;
            }

            let k = ((2.0 * a / us + b) * u + lambda + 0.445).floor();
            v *= inv_alpha / (a / (us * us) + b);
            if k >= 10.0 {
                // Stirling expansion of ln k! folded into the bound
                let rhs = (k + 0.5) * (lambda / k).ln() - lambda - LN_SQRT_2PI + k
                    - (1.0 / 12.0 - 1.0 / (360.0 * k * k)) / k;
                if (v * smu).ln() <= rhs {
                    return k as u64;
                }
            } else if k >= 0.0 && v.ln() <= k * lambda.ln() - lambda - LN_FACTORIAL[k as usize] {
                return k as u64;
            }
        }
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// ln(k!) for k = 0..=9, the only values the PTRD small-k branch can hit.
const LN_FACTORIAL: [f64; 10] = [
    0.0,
    0.0,
    std::f64::consts::LN_2,
    1.791_759_469_228_055,
    3.178_053_830_347_946,
    4.787_491_742_782_046,
    6.579_251_212_010_101,
    8.525_161_361_065_415,
    10.604_602_902_745_25,
    12.801_827_480_081_469,
];
