use std::sync::RwLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PmfModel;
use crate::error::{Error, Result};
use crate::summation::CompensatedSum;

/// Largest number of cached CDF entries.
const CACHE_CAP: usize = 1 << 22;

/// The table is closed once the certified remaining mass falls below this.
const CLOSURE_MASS: f64 = 1.0 / (1u64 << 60) as f64;

#[derive(Debug)]
struct CdfCache {
    cdf: Vec<f64>,
    log_mass: Vec<f64>,
    acc: CompensatedSum,
    /// Draws above the last cached CDF value map to the last index.
    closed: bool,
}

/// Inverse-transform sampler over a lazily extended CDF table.
///
/// The table grows on demand under a write lock; lookups take a read lock,
/// so a sampler can be shared across threads. Past the cache cap, families
/// with a closed-form survival function are inverted by bisection on
/// `P(X > k)`; the remaining families walk forward from the end of the table.
#[derive(Debug)]
pub struct Sampler {
    model: PmfModel,
    cache: RwLock<CdfCache>,
}

enum Lookup {
    Hit(u64, f64),
    Miss,
}

impl Sampler {
    pub fn new(model: PmfModel) -> Result<Self> {
        if !model.is_complete() {
            return Err(Error::CannotSampleTail);
        }
        let sampler = Self {
            model,
            cache: RwLock::new(CdfCache {
                cdf: Vec::new(),
                log_mass: Vec::new(),
                acc: CompensatedSum::new(),
                closed: false,
            }),
        };
        {
            let mut cache = sampler.cache.write().expect("sampler cache poisoned");
            sampler.extend(&mut cache, 64)?;
        }
        Ok(sampler)
    }

    pub fn model(&self) -> &PmfModel {
        &self.model
    }

    /// Number of cached CDF entries.
    pub fn cached_len(&self) -> usize {
        self.cache.read().expect("sampler cache poisoned").cdf.len()
    }

    /// Draws one outcome and returns it together with its log-mass.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(u64, f64)> {
        let u: f64 = rng.random();
        self.invert(u)
    }

    /// Smallest `k` with `F(k) > u`, for `u` in `[0, 1)`.
    pub fn invert(&self, u: f64) -> Result<(u64, f64)> {
        {
            let cache = self.cache.read().expect("sampler cache poisoned");
            if let Lookup::Hit(k, lp) = lookup(&cache, u) {
                return Ok((k, lp));
            }
        }
        let mut cache = self.cache.write().expect("sampler cache poisoned");
        loop {
            if let Lookup::Hit(k, lp) = lookup(&cache, u) {
                return Ok((k, lp));
            }
            let len = cache.cdf.len();
            if len >= CACHE_CAP {
                break;
            }
            self.extend(&mut cache, (2 * len).min(CACHE_CAP))?;
        }
        let len = cache.cdf.len() as u64;
        let acc = cache.acc;
        drop(cache);
        let k = match self.model.survival(len) {
            Some(_) => self.invert_survival(len, 1.0 - u),
            None => self.walk_forward(len, acc, u)?,
        };
        Ok((k, self.model.log_pmf(k)?))
    }

    fn extend(&self, cache: &mut CdfCache, target: usize) -> Result<()> {
        let listed = self.model.listed_len();
        let cert = self.model.tail_certificate().ok();
        while cache.cdf.len() < target && !cache.closed {
            let k = cache.cdf.len() as u64 + 1;
            let lp = self.model.log_pmf(k)?;
            cache.acc.add(lp.exp());
            cache.cdf.push(cache.acc.value());
            cache.log_mass.push(lp);
            cache.closed = match (listed, cert) {
                (Some(n), _) => k >= n,
                (None, Some(c)) => c
                    .tail_power_bound(&self.model, 1.0, k)?
                    .is_some_and(|rem| rem <= CLOSURE_MASS),
                (None, None) => false,
            };
        }
        Ok(())
    }

    fn invert_survival(&self, from: u64, v: f64) -> u64 {
        // smallest k > from with S(k) < v
        let surv = |k: u64| self.model.survival(k).expect("closed-form survival");
        let mut lo = from;
        let mut hi = from.max(1) * 2;
        while surv(hi) >= v {
            lo = hi;
            hi = hi.saturating_mul(2);
            if hi == u64::MAX {
                return hi;
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if surv(mid) < v {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    fn walk_forward(&self, from: u64, mut acc: CompensatedSum, u: f64) -> Result<u64> {
        let mut k = from;
        loop {
            k += 1;
            acc.add(self.model.pmf(k)?);
            if acc.value() > u || self.model.pmf(k)? == 0.0 {
                return Ok(k);
            }
        }
    }
}

fn lookup(cache: &CdfCache, u: f64) -> Lookup {
    let idx = cache.cdf.partition_point(|&c| c <= u);
    if idx < cache.cdf.len() {
        Lookup::Hit(idx as u64 + 1, cache.log_mass[idx])
    } else if cache.closed {
        let last = cache.cdf.len() - 1;
        Lookup::Hit(last as u64 + 1, cache.log_mass[last])
    } else {
        Lookup::Miss
    }
}

/// Draws `count` i.i.d. outcomes from `model`, reproducibly for a given seed.
pub fn sample(model: &PmfModel, seed: u64, count: usize) -> Result<Vec<u64>> {
    let sampler = Sampler::new(model.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| sampler.draw(&mut rng).map(|(k, _)| k))
        .collect()
}
