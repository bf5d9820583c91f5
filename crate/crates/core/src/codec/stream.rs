//! `.dtok` token streams.
//!
//! Layout, little-endian:
//!
//! ```text
//! "DTOK" | version u16 | sample_rate u32 | downsample_ratio u16 | variant u8
//! | levels u16 | groups u16 | hidden u16 | utterance_sample_count u64
//! | record_count u32 | records: (varint length, varint token) * record_count
//! ```
//!
//! Varints are unsigned LEB128 and must be minimally encoded, so every
//! valid stream has exactly one byte representation.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quant::{vocab_size, Variant};

pub const STREAM_MAGIC: &[u8; 4] = b"DTOK";
pub const STREAM_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 2 + 1 + 2 + 2 + 2 + 8 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub sample_rate: u32,
    pub downsample_ratio: u16,
    pub variant: Variant,
    pub levels: u16,
    pub groups: u16,
    pub hidden: u16,
    pub utterance_sample_count: u64,
}

impl StreamHeader {
    /// Frames covered by the records: `ceil(samples / ratio)`.
    pub fn frame_count(&self) -> u64 {
        self.utterance_sample_count.div_ceil(self.downsample_ratio as u64)
    }

    fn token_digits(&self) -> usize {
        match self.variant {
            Variant::GsqManyToOne => self.groups as usize,
            Variant::Fsq | Variant::GsqManyToMany => self.hidden as usize,
            Variant::Vq => 1,
        }
    }

    /// Exclusive token bound, `None` when it exceeds `u64`.
    pub fn token_bound(&self) -> Option<u64> {
        vocab_size(self.levels as u32, self.token_digits())
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.sample_rate == 0 {
            return Err("sample rate is zero".into());
        }
        if self.downsample_ratio == 0 {
            return Err("downsample ratio is zero".into());
        }
        if self.levels < 2 {
            return Err(format!("levels {} < 2", self.levels));
        }
        if self.groups == 0 || self.hidden == 0 || self.hidden % self.groups != 0 {
            return Err(format!("hidden {} is not a positive multiple of groups {}", self.hidden, self.groups));
        }
        Ok(())
    }
}

/// One token per segment plus the segment length in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Record {
    pub length: u64,
    pub token: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub header: StreamHeader,
    pub records: Vec<Record>,
}

impl TokenStream {
    /// Checks the header, token range and that lengths tile the frames.
    pub fn new(header: StreamHeader, records: Vec<Record>) -> Result<Self> {
        let s = TokenStream { header, records };
        s.validate().map_err(|m| Error::InvalidArgument(format!("token stream: {m}")))?;
        Ok(s)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        self.header.validate()?;
        let bound = self.header.token_bound();
        let mut sum: u64 = 0;
        for (i, r) in self.records.iter().enumerate() {
            if r.length == 0 {
                return Err(format!("record {i} has zero length"));
            }
            if bound.is_some_and(|b| r.token >= b) {
                return Err(format!("record {i} token {} out of range", r.token));
            }
            sum = sum.checked_add(r.length).ok_or("record lengths overflow")?;
        }
        if sum != self.header.frame_count() {
            return Err(format!(
                "record lengths sum to {sum}, header implies {} frames",
                self.header.frame_count()
            ));
        }
        Ok(())
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.length as usize).collect()
    }

    pub fn tokens(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.token).collect()
    }

    pub fn duration_secs(&self) -> f64 {
        self.header.utterance_sample_count as f64 / self.header.sample_rate as f64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(HEADER_LEN + self.records.len() * 4);
        out.extend_from_slice(STREAM_MAGIC);
        out.extend_from_slice(&STREAM_VERSION.to_le_bytes());
        out.extend_from_slice(&h.sample_rate.to_le_bytes());
        out.extend_from_slice(&h.downsample_ratio.to_le_bytes());
        out.push(h.variant.tag());
        out.extend_from_slice(&h.levels.to_le_bytes());
        out.extend_from_slice(&h.groups.to_le_bytes());
        out.extend_from_slice(&h.hidden.to_le_bytes());
        out.extend_from_slice(&h.utterance_sample_count.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            write_varint(&mut out, r.length);
            write_varint(&mut out, r.token);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(4, "header")? != STREAM_MAGIC {
            return Err(Error::stream(0, "bad magic"));
        }
        let version = r.u16()?;
        if version != STREAM_VERSION {
            return Err(Error::stream(4, format!("unsupported version {version}")));
        }
        let sample_rate = r.u32()?;
        let downsample_ratio = r.u16()?;
        let tag_at = r.pos;
        let tag = r.take(1, "header")?[0];
        let variant = Variant::from_tag(tag).ok_or_else(|| Error::stream(tag_at, format!("unknown variant tag {tag}")))?;
        let header = StreamHeader {
            sample_rate,
            downsample_ratio,
            variant,
            levels: r.u16()?,
            groups: r.u16()?,
            hidden: r.u16()?,
            utterance_sample_count: r.u64()?,
        };
        header.validate().map_err(|m| Error::stream(4, m))?;
        let count = r.u32()? as usize;
        let bound = header.token_bound();
        // each record needs at least two bytes
        let mut records = Vec::with_capacity(count.min(bytes.len() / 2));
        let mut sum: u64 = 0;
        for i in 0..count {
            let at = r.pos;
            let length = r.varint()?;
            let token_at = r.pos;
            let token = r.varint()?;
            if length == 0 {
                return Err(Error::stream(at, format!("record {i} has zero length")));
            }
            if bound.is_some_and(|b| token >= b) {
                return Err(Error::stream(token_at, format!("record {i} token {token} out of range")));
            }
            sum = sum
                .checked_add(length)
                .ok_or_else(|| Error::stream(at, "record lengths overflow"))?;
            records.push(Record { length, token });
        }
        if r.pos != bytes.len() {
            return Err(Error::stream(r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if sum != header.frame_count() {
            return Err(Error::stream(
                HEADER_LEN,
                format!("record lengths sum to {sum}, header implies {} frames", header.frame_count()),
            ));
        }
        Ok(TokenStream { header, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        TokenStream::from_bytes(&bytes)
    }
}

pub fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::stream(self.pos, format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, "header")?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, "header")?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, "header")?.try_into().unwrap()))
    }

    fn varint(&mut self) -> Result<u64> {
        let start = self.pos;
        let mut v: u64 = 0;
        for i in 0..10 {
            let b = self.take(1, "records")?[0];
            let bits = (b & 0x7f) as u64;
            if i == 9 && bits > 1 {
                return Err(Error::stream(start, "varint overflows u64"));
            }
            v |= bits << (7 * i);
            if b & 0x80 == 0 {
                if i > 0 && b == 0 {
                    return Err(Error::stream(start, "non-minimal varint"));
                }
                return Ok(v);
            }
        }
        Err(Error::stream(start, "varint longer than 10 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(samples: u64) -> StreamHeader {
        StreamHeader {
            sample_rate: 16000,
            downsample_ratio: 64,
            variant: Variant::GsqManyToOne,
            levels: 16,
            groups: 4,
            hidden: 24,
            utterance_sample_count: samples,
        }
    }

    #[test]
    fn empty_stream_round_trips() {
        let s = TokenStream::new(header(0), vec![]).unwrap();
        let b = s.to_bytes();
        assert_eq!(b.len(), HEADER_LEN);
        assert_eq!(TokenStream::from_bytes(&b).unwrap(), s);
    }

    #[test]
    fn layout_is_little_endian() {
        let s = TokenStream::new(header(640), vec![Record { length: 10, token: 300 }]).unwrap();
        let b = s.to_bytes();
        assert_eq!(&b[0..4], b"DTOK");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(&b[6..10], &16000u32.to_le_bytes());
        assert_eq!(&b[10..12], &[64, 0]);
        assert_eq!(b[12], 1);
        assert_eq!(&b[HEADER_LEN - 4..HEADER_LEN], &[1, 0, 0, 0]);
        assert_eq!(&b[HEADER_LEN..], &[10, 0xac, 0x02]);
    }

    #[test]
    fn corruption_errors_name_offsets() {
        let s = TokenStream::new(header(640), vec![Record { length: 10, token: 3 }]).unwrap();
        let mut b = s.to_bytes();
        b[1] = b'X';
        let e = TokenStream::from_bytes(&b).unwrap_err().to_string();
        assert!(e.contains("offset 0") && e.contains("magic"), "{e}");
        let b = s.to_bytes();
        let e = TokenStream::from_bytes(&b[..b.len() - 1]).unwrap_err().to_string();
        assert!(e.contains("truncated records"), "{e}");
        let mut long = b.clone();
        long.push(0);
        assert!(TokenStream::from_bytes(&long).is_err());
    }

    #[test]
    fn validation_rules() {
        assert!(TokenStream::new(header(640), vec![Record { length: 9, token: 0 }]).is_err());
        assert!(TokenStream::new(header(640), vec![Record { length: 10, token: 65536 }]).is_err());
        assert!(TokenStream::new(header(641), vec![Record { length: 11, token: 0 }]).is_ok());
        assert!(TokenStream::new(header(640), vec![Record { length: 0, token: 0 }, Record { length: 10, token: 0 }]).is_err());
    }

    #[test]
    fn varint_rules() {
        for v in [0u64, 1, 127, 128, 300, u32::MAX as u64, u64::MAX] {
            let mut out = Vec::new();
            write_varint(&mut out, v);
            let mut c = Cursor { bytes: &out, pos: 0 };
            assert_eq!(c.varint().unwrap(), v);
            assert_eq!(c.pos, out.len());
        }
        let mut c = Cursor { bytes: &[0x80, 0x00], pos: 0 };
        assert!(c.varint().is_err());
        let over = [0xff; 9].iter().chain(&[0x02]).copied().collect::<Vec<u8>>();
        let mut c = Cursor { bytes: &over, pos: 0 };
        assert!(c.varint().is_err());
    }

    proptest! {
        #[test]
        fn random_streams_round_trip(lengths in prop::collection::vec(1u64..200, 0..40), seed in any::<u64>()) {
            let frames: u64 = lengths.iter().sum();
            let h = header(frames * 64 - (seed % 64).min(frames * 64));
            let h = StreamHeader { utterance_sample_count: if frames == 0 { 0 } else { (frames - 1) * 64 + 1 + seed % 64 }, ..h };
            let records: Vec<Record> = lengths
                .iter()
                .enumerate()
                .map(|(i, &length)| Record { length, token: (seed.wrapping_mul(i as u64 + 1)) % 65536 })
                .collect();
            let s = TokenStream::new(h, records).unwrap();
            let b = s.to_bytes();
            let back = TokenStream::from_bytes(&b).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_bytes(), b);
        }
    }
}
