//! Reproducible random streams.
//!
//! Each stream is a xoshiro256** generator whose 256-bit state is derived
//! from `(seed, substream)` through SplitMix64, so chain `i` of a run seeded
//! with `s` always sees the same variates regardless of platform or thread
//! layout. Normals come from the polar Box–Muller transform with the spare
//! variate cached.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Full generator state, sufficient to resume a stream exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RngSnapshot {
    pub state: [u64; 4],
    pub spare_normal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RngStream {
    s: [u64; 4],
    spare: Option<f64>,
}

impl RngStream {
    /// Stream `substream` of the family identified by `seed`.
    pub fn new(seed: u64, substream: u64) -> Self {
        let mut sm = seed;
        let base = splitmix64(&mut sm);
        let mut sub = substream ^ base.rotate_left(17);
        let mut mix = splitmix64(&mut sub) ^ base;
        let mut s = [0u64; 4];
        for w in &mut s {
            *w = splitmix64(&mut mix);
        }
        if s == [0; 4] {
            s[0] = GOLDEN;
        }
        Self { s, spare: None }
    }

    pub fn snapshot(&self) -> RngSnapshot {
        RngSnapshot {
            state: self.s,
            spare_normal: self.spare,
        }
    }

    pub fn restore(snap: RngSnapshot) -> Self {
        Self {
            s: snap.state,
            spare: snap.spare_normal,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    /// `d` iid standard normals.
    pub fn normal_vector(&mut self, d: usize) -> Vec<f64> {
        (0..d).map(|_| self.normal()).collect()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }
}
