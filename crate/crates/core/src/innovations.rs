//! Deterministic, splittable streams of iid innovations.
//!
//! Every stream is a ChaCha8 generator. The 256-bit key is the SplitMix64
//! expansion of the master seed and the 64-bit ChaCha stream (nonce) is the
//! stream id, so any `(master_seed, stream_id)` pair addresses its own
//! counter-based sequence without shared state. The generator, the key
//! expansion and the variate transforms below are frozen: golden outputs
//! depend on them.
//!
//! Variates: standard normal via the `rand_distr` ziggurat, Student-t via
//! `rand_distr::StudentT` (unscaled, variance `dof / (dof - 2)`), uniform on
//! `[0, 1)` from 53 random bits, Rademacher from one random bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Reserved high bit marking the independent pre-sample stream of a coupled copy.
pub const PRESAMPLE_TAG: u64 = 1 << 63;
/// Reserved bit for pilot and oracle runs, kept disjoint from replication streams.
pub const AUXILIARY_TAG: u64 = 1 << 62;
const COMPONENT_SHIFT: u32 = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InnovationSpec {
    #[default]
    StandardNormal,
    #[serde(rename = "uniform-0-1")]
    Uniform01,
    StudentT {
        dof: f64,
    },
    Rademacher,
}

impl InnovationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationSpec::StudentT { dof } if !(dof > 2.0) || !dof.is_finite() => Err(
                Error::param(format!("student-t innovations need dof > 2, got {dof}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            InnovationSpec::Uniform01 => 0.5,
            _ => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            InnovationSpec::StandardNormal | InnovationSpec::Rademacher => 1.0,
            InnovationSpec::Uniform01 => 1.0 / 3.0,
            InnovationSpec::StudentT { dof } => dof / (dof - 2.0),
        }
    }

    /// `E|eps|^q`, or `None` when the moment is infinite.
    pub fn abs_moment(&self, q: f64) -> Option<f64> {
        let sqrt_pi_ln = 0.5 * std::f64::consts::PI.ln();
        match *self {
            InnovationSpec::StandardNormal => {
                Some((0.5 * q * 2f64.ln() + ln_gamma(0.5 * (q + 1.0)) - sqrt_pi_ln).exp())
            }
            InnovationSpec::Uniform01 => Some(1.0 / (q + 1.0)),
            InnovationSpec::Rademacher => Some(1.0),
            InnovationSpec::StudentT { dof } => {
                if q >= dof {
                    return None;
                }
                let ln = 0.5 * q * dof.ln() + ln_gamma(0.5 * (q + 1.0)) + ln_gamma(0.5 * (dof - q))
                    - sqrt_pi_ln
                    - ln_gamma(0.5 * dof);
                Some(ln.exp())
            }
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, InnovationSpec::StandardNormal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        StreamKey { master_seed, stream_id }
    }

    /// Main stream of one Monte Carlo replication.
    pub fn replication(master_seed: u64, replication_id: u64) -> Self {
        StreamKey::new(master_seed, replication_id)
    }

    /// Stream for the `index`-th component series of a multi-series embedding.
    pub fn component(self, index: u64) -> Self {
        StreamKey::new(self.master_seed, self.stream_id ^ (index << COMPONENT_SHIFT))
    }

    /// Independent stream feeding the pre-sample history of the coupled copy.
    pub fn presample(self) -> Self {
        StreamKey::new(self.master_seed, self.stream_id | PRESAMPLE_TAG)
    }

    pub fn auxiliary(master_seed: u64, id: u64) -> Self {
        StreamKey::new(master_seed, id | AUXILIARY_TAG)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn seed_bytes(master_seed: u64) -> [u8; 32] {
    let mut state = master_seed;
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    out
}

/// A sequential source of iid innovations. Not shared across threads; clone
/// or derive a fresh stream per task instead.
#[derive(Debug, Clone)]
pub struct InnovationStream {
    rng: ChaCha8Rng,
    spec: InnovationSpec,
    student: Option<StudentT<f64>>,
    drawn: u64,
}

pub fn derive_stream(spec: InnovationSpec, key: StreamKey) -> InnovationStream {
    let mut rng = ChaCha8Rng::from_seed(seed_bytes(key.master_seed));
    rng.set_stream(key.stream_id);
    let student = match spec {
        InnovationSpec::StudentT { dof } => {
            Some(StudentT::new(dof).expect("student-t dof validated before stream derivation"))
        }
        _ => None,
    };
    InnovationStream { rng, spec, student, drawn: 0 }
}

impl InnovationStream {
    pub fn spec(&self) -> InnovationSpec {
        self.spec
    }

    /// Number of innovations handed out so far.
    pub fn position(&self) -> u64 {
        self.drawn
    }

    #[inline]
    pub fn next_value(&mut self) -> f64 {
        self.drawn += 1;
        match self.spec {
            InnovationSpec::StandardNormal => StandardNormal.sample(&mut self.rng),
            InnovationSpec::Uniform01 => self.rng.random::<f64>(),
            InnovationSpec::StudentT { .. } => self.student.as_ref().unwrap().sample(&mut self.rng),
            InnovationSpec::Rademacher => {
                if self.rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next_value();
        }
    }

    pub fn draw(&mut self, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        self.fill(&mut out);
        out
    }
}
