//! Token-rate and bitrate arithmetic on exact rationals.

use num_rational::Ratio;

use crate::codec::TokenStream;
use crate::error::{Error, Result};

pub type Rate = Ratio<u64>;

/// Tokens per second: `tokens * stages / seconds`.
pub fn tkr(tokens: u64, stages: u64, seconds: Rate) -> Result<Rate> {
    if *seconds.numer() == 0 {
        return Err(Error::InvalidArgument("token rate of a zero-length signal".into()));
    }
    let count = tokens
        .checked_mul(stages)
        .ok_or_else(|| Error::InvalidArgument("token count overflows".into()))?;
    Ok(Rate::from_integer(count) / seconds)
}

/// `ceil(log2 k)`, the bits needed to index a codebook of `k` entries.
pub fn index_bits(k: u64) -> Result<u32> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("codebook size must be >= 2, got {k}")));
    }
    Ok(64 - (k - 1).leading_zeros())
}

/// `frame_rate * sum_i ceil(log2 k_i)`.
pub fn bps(frame_rate: Rate, codebook_sizes: &[u64]) -> Result<Rate> {
    let bits = codebook_sizes.iter().map(|&k| index_bits(k).map(u64::from)).sum::<Result<u64>>()?;
    Ok(frame_rate * bits)
}

/// Duration of a stream's utterance in seconds, exactly.
pub fn stream_seconds(stream: &TokenStream) -> Rate {
    Rate::new(stream.header.utterance_sample_count, stream.header.sample_rate as u64)
}

/// One token per record, one stage.
pub fn stream_tkr(stream: &TokenStream) -> Result<Rate> {
    tkr(stream.records.len() as u64, 1, stream_seconds(stream))
}

/// Token rate times `ceil(log2 L)` bits per digit.
pub fn stream_bps_payload(stream: &TokenStream) -> Result<Rate> {
    let h = &stream.header;
    let digits = match h.variant {
        crate::quant::Variant::GsqManyToOne => h.groups as usize,
        crate::quant::Variant::Vq => 1,
        _ => h.hidden as usize,
    };
    bps(stream_tkr(stream)?, &vec![h.levels as u64; digits])
}

/// Serialized size in bits, header and segment lengths included, per second.
pub fn stream_bps_total(stream: &TokenStream) -> Result<Rate> {
    let seconds = stream_seconds(stream);
    if *seconds.numer() == 0 {
        return Err(Error::InvalidArgument("bitrate of a zero-length signal".into()));
    }
    Ok(Rate::from_integer(stream.to_bytes().len() as u64 * 8) / seconds)
}

pub fn to_f64(r: Rate) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_rates() {
        assert_eq!(bps(Rate::from_integer(50), &[1024]).unwrap(), Rate::from_integer(500));
        assert_eq!(bps(Rate::new(19, 2), &[65536]).unwrap(), Rate::from_integer(152));
        assert_eq!(bps(Rate::new(19, 2), &[16; 4]).unwrap(), Rate::from_integer(152));
        assert_eq!(bps(Rate::from_integer(20), &[65536]).unwrap(), Rate::from_integer(320));
        assert_eq!(tkr(50, 8, Rate::from_integer(1)).unwrap(), Rate::from_integer(400));
        assert_eq!(tkr(19, 1, Rate::from_integer(2)).unwrap(), Rate::new(19, 2));
        assert_eq!(tkr(0, 1, Rate::from_integer(1)).unwrap(), Rate::from_integer(0));
    }

    #[test]
    fn invalid_inputs() {
        assert!(tkr(1, 1, Rate::from_integer(0)).is_err());
        assert!(bps(Rate::from_integer(1), &[1]).is_err());
        assert_eq!(index_bits(2).unwrap(), 1);
        assert_eq!(index_bits(3).unwrap(), 2);
        assert_eq!(index_bits(u64::MAX).unwrap(), 64);
    }
}
