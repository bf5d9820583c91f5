//! Scalar and vector quantizers and the composite-token bijection.
//!
//! All scalar quantizers share one rule: bound with `tanh`, then snap to the
//! symmetric grid `-1 + 2j / (L - 1)` with ties going to the larger index.
//! The many-to-one group quantizer first squeezes each group to a scalar
//! with a learned row vector and expands the quantized scalar back with a
//! learned column vector.

mod fsq;
mod gsq;
mod rd;
mod token;
mod vq;

use std::fmt;
use std::str::FromStr;

pub use fsq::{fsq_grid_value, fsq_index, fsq_quantize, fsq_tensor};
pub use gsq::{gsq_many_to_many, gsq_many_to_one, train_group_quantizer, GroupQuantizer, GsqParams, Quantized};
pub use rd::{fit_log2_slope, rate_distortion_probe, RdPoint, ScalarCodebook};
pub use token::{compose_token, decompose_token, vocab_size};
pub use vq::{vq_quantize, vq_tensor, Codebook, EmaState, ResidualVq};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Fsq,
    GsqManyToOne,
    GsqManyToMany,
    Vq,
}

impl Variant {
    /// Tag byte used in token-stream headers.
    pub fn tag(self) -> u8 {
        match self {
            Variant::Fsq => 0,
            Variant::GsqManyToOne => 1,
            Variant::GsqManyToMany => 2,
            Variant::Vq => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Variant> {
        Some(match tag {
            0 => Variant::Fsq,
            1 => Variant::GsqManyToOne,
            2 => Variant::GsqManyToMany,
            3 => Variant::Vq,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fsq => "fsq",
            Variant::GsqManyToOne => "gsq_m2o",
            Variant::GsqManyToMany => "gsq_m2m",
            Variant::Vq => "vq",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Variant::Fsq, Variant::GsqManyToOne, Variant::GsqManyToMany, Variant::Vq]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown quantizer variant {s:?}")))
    }
}

/// Variant plus level/group/dimension counts; fixes the bit budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizerSpec {
    pub variant: Variant,
    pub levels: u32,
    pub groups: usize,
    pub input_dim: usize,
    /// Only meaningful for [`Variant::Vq`].
    pub codebook_size: usize,
}

impl QuantizerSpec {
    pub fn new(variant: Variant, levels: u32, groups: usize, input_dim: usize) -> Result<Self> {
        let spec = QuantizerSpec {
            variant,
            levels,
            groups,
            input_dim,
            codebook_size: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant != Variant::Vq && self.levels < 2 {
            return Err(Error::Config(format!("levels must be >= 2, got {}", self.levels)));
        }
        if self.groups == 0 || self.input_dim == 0 || self.input_dim % self.groups != 0 {
            return Err(Error::Config(format!(
                "input_dim {} must be a positive multiple of groups {}",
                self.input_dim, self.groups
            )));
        }
        if self.variant == Variant::Vq && self.codebook_size == 0 {
            return Err(Error::Config("vq needs a codebook size".into()));
        }
        Ok(())
    }

    pub fn group_dim(&self) -> usize {
        self.input_dim / self.groups
    }

    /// Number of base-`L` digits in one composite token: one per group for
    /// many-to-one, one per latent dimension for the element-wise variants.
    pub fn token_digits(&self) -> usize {
        match self.variant {
            Variant::GsqManyToOne => self.groups,
            Variant::Fsq | Variant::GsqManyToMany => self.input_dim,
            Variant::Vq => 1,
        }
    }

    /// Size of the composite vocabulary, `None` if it exceeds `u64`.
    pub fn vocab_size(&self) -> Option<u64> {
        match self.variant {
            Variant::Vq => Some(self.codebook_size as u64),
            _ => vocab_size(self.levels, self.token_digits()),
        }
    }

    /// Payload bits per token: `ceil(log2 L)` per digit.
    pub fn bits_per_token(&self) -> u32 {
        let per_digit = |k: u64| 64 - (k - 1).leading_zeros();
        match self.variant {
            Variant::Vq => per_digit(self.codebook_size as u64),
            _ => per_digit(self.levels as u64) * self.token_digits() as u32,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_tags_round_trip() {
        for tag in 0..4 {
            let v = Variant::from_tag(tag).unwrap();
            assert_eq!(v.tag(), tag);
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!(Variant::from_tag(4).is_none());
        assert!("rvq".parse::<Variant>().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(QuantizerSpec::new(Variant::GsqManyToOne, 16, 4, 24).is_ok());
        assert!(QuantizerSpec::new(Variant::GsqManyToOne, 16, 5, 24).is_err());
        assert!(QuantizerSpec::new(Variant::Fsq, 1, 1, 4).is_err());
    }

    #[test]
    fn bit_budget() {
        let s = QuantizerSpec::new(Variant::GsqManyToOne, 16, 4, 24).unwrap();
        assert_eq!(s.bits_per_token(), 16);
        assert_eq!(s.vocab_size(), Some(65536));
        let f = QuantizerSpec::new(Variant::Fsq, 2, 1, 8).unwrap();
        assert_eq!(f.bits_per_token(), 8);
        assert_eq!(QuantizerSpec::new(Variant::Fsq, 16, 1, 24).unwrap().vocab_size(), None);
        let l5 = QuantizerSpec::new(Variant::GsqManyToOne, 5, 2, 4).unwrap();
        assert_eq!(l5.bits_per_token(), 6);
    }
}
