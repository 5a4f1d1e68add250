//! Rank statistics, effect sizes, resampling and small dense linear algebra.
//!
//! Every randomized routine takes a [`Seed`]; replicate `i` draws from its own
//! ChaCha stream, so output is independent of scheduling and thread count.

mod descriptive;
mod linalg;
mod rank;
mod resample;
mod hypothesis;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use descriptive::{mean, percentile, sd, variance};
pub use linalg::{classical_mds, residualize};
pub use rank::midranks;
pub use resample::{
    bootstrap, permutation_p, permutation_p_multi, resample, summarize, Summary,
};
pub use hypothesis::{
    cohens_d, cohens_d_one_sample, mann_whitney_u, pearson, spearman, wilcoxon_signed_rank,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
    TApprox,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    /// Alternative: the statistic is larger than under the null.
    Greater,
    Less,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub method: Method,
    pub sidedness: Sidedness,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl StatResult {
    pub(crate) fn new(statistic: f64, p_value: f64, n: usize, method: Method, sidedness: Sidedness) -> Self {
        Self {
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            n,
            m: None,
            method,
            sidedness,
            note: None,
        }
    }
}

/// Master seed for all resampling; replicate `i` uses stream `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub master: u64,
}

impl Seed {
    pub const fn new(master: u64) -> Self {
        Self { master }
    }

    /// Generator for replicate `stream`.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(stream);
        rng
    }

    /// Independent child seed for a named purpose, so two procedures run
    /// under one master seed never share streams.
    pub fn derive(&self, purpose: &str) -> Seed {
        // FNV-1a over the purpose, then a splitmix64 finalizer.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in purpose.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        let mut z = self.master ^ h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        Seed::new(z ^ (z >> 31))
    }
}

impl From<u64> for Seed {
    fn from(master: u64) -> Self {
        Seed::new(master)
    }
}
