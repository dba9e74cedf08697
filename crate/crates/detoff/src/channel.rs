//! Radio channel model: Rayleigh fading, adaptive modulation, and
//! per-resource rates.
//!
//! Each pooled resource sees an instantaneous SINR `mean * X`, where `X` is
//! a unit-mean exponential gain drawn independently per slot, per link, and
//! per resource (Rayleigh envelope fading on power). The transmitter picks
//! the densest constellation whose SINR threshold the draw clears, pays the
//! corresponding bit error rate, and the resource then carries
//! `bandwidth * log2(1 + sinr) * (1 - ber)` bits per second. A link's rate
//! is the sum over the resources granted to it in that slot.
//!
//! Fading draws come from a counter-style hash of (seed, slot, link,
//! resource) instead of a stateful generator. Draws are therefore identical
//! no matter which transmissions are active or in which order rates get
//! computed: every candidate schedule evaluated under one seed faces the
//! exact same channel, and evaluation order (including parallel evaluation)
//! cannot perturb results.

use rand::Rng;

use crate::config::{mix64, McsConfig};
use crate::topology::LinkId;
use crate::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// One modulation and coding scheme of the adaptive ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct Mcs {
    /// Constellation size: 2 for BPSK, 4 for QPSK, 16/64/256 for QAM.
    pub constellation: u32,
    /// Minimum instantaneous SINR (dB) required to select this scheme.
    /// The BPSK floor carries negative infinity.
    pub min_sinr_db: f64,
    /// Fixed BER replacing the analytic approximation when set.
    pub fixed_ber: Option<f64>,
}

impl Mcs {
    pub fn name(&self) -> String {
        match self.constellation {
            2 => "BPSK".to_string(),
            4 => "QPSK".to_string(),
            m => format!("{m}-QAM"),
        }
    }
}

/// Bit error rate of `mcs` at instantaneous SINR `sinr` (linear). BPSK uses
/// the coherent approximation `0.5 * exp(-sinr)`; denser constellations use
/// `0.2 * exp(-1.5 * sinr / (M - 1))`. Results are clamped to [0, 0.5].
pub fn ber(mcs: &Mcs, sinr: f64) -> f64 {
    if let Some(fixed) = mcs.fixed_ber {
        return fixed.clamp(0.0, 0.5);
    }
    let raw = if mcs.constellation == 2 {
        0.5 * (-sinr).exp()
    } else {
        0.2 * (-1.5 * sinr / (mcs.constellation as f64 - 1.0)).exp()
    };
    raw.clamp(0.0, 0.5)
}

/// Bits per second carried by one resource of `bandwidth_hz` at SINR `sinr`
/// (linear) with the given bit error rate.
pub fn resource_rate(bandwidth_hz: f64, sinr: f64, ber: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr).log2() * (1.0 - ber)
}

/// A link's aggregate rate: the sum over its granted resources.
pub fn link_rate(per_resource: impl IntoIterator<Item = f64>) -> f64 {
    per_resource.into_iter().sum()
}

/// The adaptive modulation ladder, ordered from sparsest to densest.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    schemes: Vec<Mcs>,
    /// Selection thresholds precomputed in linear SINR.
    min_sinr_linear: Vec<f64>,
}

impl Default for McsTable {
    /// BPSK always available; QPSK from 5 dB, 16-QAM from 11 dB, 64-QAM
    /// from 18 dB, 256-QAM from 24 dB.
    fn default() -> Self {
        McsTable::with_ladder(vec![
            Mcs { constellation: 2, min_sinr_db: f64::NEG_INFINITY, fixed_ber: None },
            Mcs { constellation: 4, min_sinr_db: 5.0, fixed_ber: None },
            Mcs { constellation: 16, min_sinr_db: 11.0, fixed_ber: None },
            Mcs { constellation: 64, min_sinr_db: 18.0, fixed_ber: None },
            Mcs { constellation: 256, min_sinr_db: 24.0, fixed_ber: None },
        ])
    }
}

impl McsTable {
    fn with_ladder(schemes: Vec<Mcs>) -> Self {
        let min_sinr_linear = schemes.iter().map(|m| db_to_linear(m.min_sinr_db)).collect();
        McsTable { schemes, min_sinr_linear }
    }

    /// Apply a config override on top of the default ladder.
    pub fn from_config(cfg: &McsConfig) -> Result<McsTable> {
        let mut schemes = match &cfg.thresholds {
            None => McsTable::default().schemes,
            Some(entries) => {
                let mut ladder =
                    vec![Mcs { constellation: 2, min_sinr_db: f64::NEG_INFINITY, fixed_ber: None }];
                let mut prev = (2u32, f64::NEG_INFINITY);
                for e in entries {
                    if e.constellation < 4 || !e.constellation.is_power_of_two() {
                        return Err(Error::Config(format!(
                            "mcs.thresholds: constellation must be a power of two >= 4, got {}",
                            e.constellation
                        )));
                    }
                    if e.constellation <= prev.0 || e.min_sinr_db <= prev.1 {
                        return Err(Error::Config(
                            "mcs.thresholds: entries must strictly increase".to_string(),
                        ));
                    }
                    prev = (e.constellation, e.min_sinr_db);
                    ladder.push(Mcs {
                        constellation: e.constellation,
                        min_sinr_db: e.min_sinr_db,
                        fixed_ber: None,
                    });
                }
                ladder
            }
        };
        if let Some(map) = &cfg.ber_override {
            for (key, &fixed) in map {
                let m: u32 = key.parse().map_err(|_| {
                    Error::Config(format!("mcs.ber_override: bad constellation key {key:?}"))
                })?;
                if !(0.0..=0.5).contains(&fixed) {
                    return Err(Error::Config(format!(
                        "mcs.ber_override.{key}: BER must lie in [0, 0.5], got {fixed}"
                    )));
                }
                match schemes.iter_mut().find(|s| s.constellation == m) {
                    Some(s) => s.fixed_ber = Some(fixed),
                    None => {
                        return Err(Error::Config(format!(
                            "mcs.ber_override: no scheme with constellation {m} in the ladder"
                        )))
                    }
                }
            }
        }
        Ok(McsTable::with_ladder(schemes))
    }

    /// Densest scheme whose threshold the instantaneous SINR (linear)
    /// clears. Always succeeds thanks to the BPSK floor.
    pub fn select(&self, sinr: f64) -> &Mcs {
        for (i, &threshold) in self.min_sinr_linear.iter().enumerate().rev() {
            if sinr >= threshold {
                return &self.schemes[i];
            }
        }
        &self.schemes[0]
    }

    pub fn schemes(&self) -> &[Mcs] {
        &self.schemes
    }

    /// Rate of one resource at SINR `sinr` under adaptive modulation.
    #[inline]
    pub fn adaptive_rate(&self, bandwidth_hz: f64, sinr: f64) -> f64 {
        let mcs = self.select(sinr);
        resource_rate(bandwidth_hz, sinr, ber(mcs, sinr))
    }
}

/// Unit-mean exponential gain from a uniform draw in [0, 1).
#[inline]
fn exp_gain(u: f64) -> f64 {
    -(1.0 - u).ln()
}

/// One instantaneous SINR draw: `mean * X` with `X ~ Exp(1)`.
pub fn sample_fading<R: Rng + ?Sized>(mean_sinr_db: f64, rng: &mut R) -> f64 {
    db_to_linear(mean_sinr_db) * exp_gain(rng.gen::<f64>())
}

/// Stateless per-(slot, link, resource) fading source. See the module docs
/// for why fading is hashed rather than drawn from a sequential generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FadingField {
    pub seed: u64,
}

impl FadingField {
    /// Fold slot and link into a partial key; per-resource draws then cost
    /// one mix each.
    #[inline]
    pub fn at(&self, slot: u64, link: LinkId) -> SlotLinkFading {
        let z = mix64(self.seed ^ slot.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let z = mix64(z ^ (link.0 as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
        SlotLinkFading { key: z }
    }
}

/// Fading for all resources of one (slot, link) cell.
#[derive(Debug, Clone, Copy)]
pub struct SlotLinkFading {
    key: u64,
}

impl SlotLinkFading {
    /// Unit-mean exponential gain of one resource.
    #[inline]
    pub fn gain(&self, resource: usize) -> f64 {
        let z = mix64(self.key ^ (resource as u64).wrapping_mul(0x1656_67B1_9E37_79F9));
        let u = (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        exp_gain(u)
    }
}

/// Channel realization mode for a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fading {
    /// Hashed Rayleigh fading under the given seed.
    Seeded(FadingField),
    /// Gain pinned to 1 everywhere; SINR equals its mean. For closed-form
    /// tests.
    Unit,
}

impl Fading {
    pub fn seeded(seed: u64) -> Fading {
        Fading::Seeded(FadingField { seed })
    }
}
