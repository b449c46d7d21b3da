//! The `.plcb` container: everything that is transmitted in place of the
//! original image, plus the bandwidth accounting against the original file.
//!
//! Layout (big-endian):
//!
//! ```text
//! "PLCB" | u16 version=1 | u32 width | u32 height | u64 original_byte_size | u8 section_count
//! per section: u8 tag | u32 payload_len | u32 crc32(payload) | payload
//! ```
//!
//! Sections are written in ascending tag order, at most one per tag.

use std::collections::BTreeMap;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"PLCB";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 23;
pub const SECTION_OVERHEAD: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum SectionTag {
    Prompt = 1,
    Canny = 2,
    ColorGrid = 3,
    Salient = 4,
    Meta = 5,
}

impl SectionTag {
    pub const ALL: [SectionTag; 5] = [
        SectionTag::Prompt,
        SectionTag::Canny,
        SectionTag::ColorGrid,
        SectionTag::Salient,
        SectionTag::Meta,
    ];

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| *t as u8 == v)
    }

    pub fn name(self) -> &'static str {
        match self {
            SectionTag::Prompt => "prompt",
            SectionTag::Canny => "canny",
            SectionTag::ColorGrid => "colorgrid",
            SectionTag::Salient => "salient",
            SectionTag::Meta => "meta",
        }
    }
}

impl std::fmt::Display for SectionTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", *self as u8, self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BundleError {
    #[error("duplicate section {0}")]
    DuplicateTag(SectionTag),
    #[error("bundle has no prompt section")]
    MissingPrompt,
    #[error("too many sections ({0})")]
    TooManySections(usize),
    #[error("section {tag} payload of {len} bytes exceeds the u32 length field")]
    SectionTooLarge { tag: SectionTag, len: usize },
    #[error("not a PLCB stream")]
    BadMagic,
    #[error("unsupported PLCB version {0}")]
    UnsupportedVersion(u16),
    #[error("CRC mismatch in section {tag}: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch {
        tag: SectionTag,
        stored: u32,
        computed: u32,
    },
    #[error("stream truncated")]
    Truncated,
    #[error("unknown section tag {0}")]
    UnknownTag(u8),
    #[error("sections out of order")]
    OutOfOrder,
    #[error("{0} trailing bytes after last section")]
    TrailingBytes(usize),
    #[error("prompt is not valid UTF-8")]
    PromptNotUtf8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub tag: SectionTag,
    pub payload: Vec<u8>,
}

impl Section {
    pub fn new(tag: SectionTag, payload: Vec<u8>) -> Self {
        Self { tag, payload }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub original_width: u32,
    pub original_height: u32,
    pub original_byte_size: u64,
    pub sections: Vec<Section>,
}

impl Bundle {
    pub fn section(&self, tag: SectionTag) -> Option<&[u8]> {
        self.sections
            .iter()
            .find(|s| s.tag == tag)
            .map(|s| s.payload.as_slice())
    }

    pub fn prompt(&self) -> Result<&str, BundleError> {
        let bytes = self.section(SectionTag::Prompt).ok_or(BundleError::MissingPrompt)?;
        std::str::from_utf8(bytes).map_err(|_| BundleError::PromptNotUtf8)
    }

    pub fn tags(&self) -> Vec<SectionTag> {
        self.sections.iter().map(|s| s.tag).collect()
    }

    /// Size `pack` will produce, without serializing.
    pub fn packed_len(&self) -> usize {
        HEADER_LEN
            + self
                .sections
                .iter()
                .map(|s| SECTION_OVERHEAD + s.payload.len())
                .sum::<usize>()
    }

    fn sorted_sections(&self) -> Result<Vec<&Section>, BundleError> {
        let mut sorted: Vec<&Section> = self.sections.iter().collect();
        sorted.sort_by_key(|s| s.tag);
        for pair in sorted.windows(2) {
            if pair[0].tag == pair[1].tag {
                return Err(BundleError::DuplicateTag(pair[0].tag));
            }
        }
        if sorted.first().map(|s| s.tag) != Some(SectionTag::Prompt) {
            return Err(BundleError::MissingPrompt);
        }
        if sorted.len() > u8::MAX as usize {
            return Err(BundleError::TooManySections(sorted.len()));
        }
        Ok(sorted)
    }
}

pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

pub fn pack(bundle: &Bundle) -> Result<Vec<u8>, BundleError> {
    let sections = bundle.sorted_sections()?;
    let mut out = Vec::with_capacity(bundle.packed_len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_be_bytes());
    out.extend_from_slice(&bundle.original_width.to_be_bytes());
    out.extend_from_slice(&bundle.original_height.to_be_bytes());
    out.extend_from_slice(&bundle.original_byte_size.to_be_bytes());
    out.push(sections.len() as u8);
    for s in sections {
        let len = u32::try_from(s.payload.len()).map_err(|_| BundleError::SectionTooLarge {
            tag: s.tag,
            len: s.payload.len(),
        })?;
        out.push(s.tag as u8);
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(&crc32(&s.payload).to_be_bytes());
        out.extend_from_slice(&s.payload);
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BundleError> {
        if self.buf.len() < n {
            return Err(BundleError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, BundleError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, BundleError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, BundleError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, BundleError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn unpack(bytes: &[u8]) -> Result<Bundle, BundleError> {
    let mut r = Reader { buf: bytes };
    if r.take(4).map_err(|_| BundleError::BadMagic)? != MAGIC {
        return Err(BundleError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(BundleError::UnsupportedVersion(version));
    }
    let original_width = r.u32()?;
    let original_height = r.u32()?;
    let original_byte_size = r.u64()?;
    let count = r.u8()?;
    let mut sections: Vec<Section> = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let raw_tag = r.u8()?;
        let tag = SectionTag::from_u8(raw_tag).ok_or(BundleError::UnknownTag(raw_tag))?;
        if let Some(prev) = sections.last() {
            if prev.tag == tag {
                return Err(BundleError::DuplicateTag(tag));
            }
            if prev.tag > tag {
                return Err(BundleError::OutOfOrder);
            }
        }
        let len = r.u32()? as usize;
        let stored = r.u32()?;
        let payload = r.take(len)?;
        let computed = crc32(payload);
        if computed != stored {
            return Err(BundleError::CrcMismatch {
                tag,
                stored,
                computed,
            });
        }
        sections.push(Section::new(tag, payload.to_vec()));
    }
    if !r.buf.is_empty() {
        return Err(BundleError::TrailingBytes(r.buf.len()));
    }
    if sections.first().map(|s| s.tag) != Some(SectionTag::Prompt) {
        return Err(BundleError::MissingPrompt);
    }
    Ok(Bundle {
        original_width,
        original_height,
        original_byte_size,
        sections,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingsReport {
    pub bundle_bytes: u64,
    pub original_bytes: u64,
    /// `1 - bundle_bytes / original_bytes`; negative when the bundle is
    /// larger than the original.
    pub savings: f64,
    /// Framed size (payload + 9 bytes of tag, length and CRC) per section.
    pub per_section_bytes: BTreeMap<SectionTag, u64>,
    pub below_break_even: bool,
}

impl SavingsReport {
    pub fn header_bytes(&self) -> u64 {
        HEADER_LEN as u64
    }
}

pub fn savings_from_sizes(bundle_bytes: u64, original_bytes: u64) -> f64 {
    1.0 - bundle_bytes as f64 / original_bytes as f64
}

pub fn savings_report(bundle: &Bundle) -> SavingsReport {
    let bundle_bytes = bundle.packed_len() as u64;
    let original_bytes = bundle.original_byte_size;
    let savings = if original_bytes == 0 {
        f64::NEG_INFINITY
    } else {
        savings_from_sizes(bundle_bytes, original_bytes)
    };
    let per_section_bytes = bundle
        .sections
        .iter()
        .map(|s| (s.tag, (SECTION_OVERHEAD + s.payload.len()) as u64))
        .collect();
    SavingsReport {
        bundle_bytes,
        original_bytes,
        savings,
        per_section_bytes,
        below_break_even: savings <= 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt_only(prompt: &str, original: u64) -> Bundle {
        Bundle {
            original_width: 640,
            original_height: 480,
            original_byte_size: original,
            sections: vec![Section::new(SectionTag::Prompt, prompt.as_bytes().to_vec())],
        }
    }

    #[test]
    fn prompt_only_layout() {
        let b = prompt_only("0123456789", 1000);
        let bytes = pack(&b).unwrap();
        assert_eq!(bytes.len(), 42);
        assert_eq!(&bytes[..4], b"PLCB");
        assert_eq!(&bytes[4..6], &[0, 1]);
        assert_eq!(bytes[22], 1);
        assert_eq!(bytes[23], 1);
        assert_eq!(&bytes[24..28], &[0, 0, 0, 10]);
        assert_eq!(&bytes[28..32], &crc32(b"0123456789").to_be_bytes());
        let back = unpack(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.sections.len(), 1);
        assert_eq!(back.prompt().unwrap(), "0123456789");
    }

    #[test]
    fn crc_is_the_reflected_ieee_polynomial() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
        assert_eq!(crc32(b""), 0);
    }

    #[test]
    fn pack_contract_errors() {
        let mut b = prompt_only("hi", 10);
        b.sections.push(Section::new(SectionTag::Canny, vec![1]));
        b.sections.push(Section::new(SectionTag::Canny, vec![2]));
        assert_eq!(pack(&b), Err(BundleError::DuplicateTag(SectionTag::Canny)));
        let no_prompt = Bundle {
            sections: vec![Section::new(SectionTag::Canny, vec![1])],
            ..prompt_only("", 10)
        };
        assert_eq!(pack(&no_prompt), Err(BundleError::MissingPrompt));
    }

    #[test]
    fn pack_sorts_sections() {
        let mut b = prompt_only("p", 10);
        b.sections.insert(0, Section::new(SectionTag::ColorGrid, vec![9, 9]));
        let bytes = pack(&b).unwrap();
        assert_eq!(unpack(&bytes).unwrap().tags(), vec![SectionTag::Prompt, SectionTag::ColorGrid]);
    }

    #[test]
    fn unpack_errors() {
        let mut b = prompt_only("hello", 10);
        b.sections.push(Section::new(SectionTag::Canny, vec![1, 2, 3, 4]));
        let bytes = pack(&b).unwrap();

        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 0x01;
        assert!(matches!(
            unpack(&flipped),
            Err(BundleError::CrcMismatch { tag: SectionTag::Canny, .. })
        ));

        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert_eq!(unpack(&magic), Err(BundleError::BadMagic));
        assert_eq!(unpack(b"PL"), Err(BundleError::BadMagic));

        let mut version = bytes.clone();
        version[5] = 2;
        assert_eq!(unpack(&version), Err(BundleError::UnsupportedVersion(2)));

        for cut in 4..bytes.len() {
            assert_eq!(unpack(&bytes[..cut]), Err(BundleError::Truncated), "cut at {cut}");
        }

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert_eq!(unpack(&trailing), Err(BundleError::TrailingBytes(1)));

        let mut unknown = bytes.clone();
        unknown[23] = 9;
        assert_eq!(unpack(&unknown), Err(BundleError::UnknownTag(9)));
    }

    #[test]
    fn savings_arithmetic() {
        let b = prompt_only(&"x".repeat(8000 - 32), 100_000);
        let r = savings_report(&b);
        assert_eq!(r.bundle_bytes, 8000);
        assert!((r.savings - 0.92).abs() < 1e-12);
        assert!(!r.below_break_even);
        assert_eq!(r.per_section_bytes[&SectionTag::Prompt], 8000 - 23);

        let r = savings_report(&prompt_only(&"y".repeat(268), 200_000));
        assert_eq!(r.bundle_bytes, 300);
        assert!(r.savings >= 0.998);

        let r = savings_report(&prompt_only(&"z".repeat(500), 100));
        assert!(r.savings < 0.0);
        assert!(r.below_break_even);
    }

    #[test]
    fn report_fields_are_consistent() {
        let mut b = prompt_only("abc", 5000);
        b.sections.push(Section::new(SectionTag::Salient, vec![0; 77]));
        let r = savings_report(&b);
        assert_eq!(r.bundle_bytes as usize, pack(&b).unwrap().len());
        assert_eq!(r.header_bytes() + r.per_section_bytes.values().sum::<u64>(), r.bundle_bytes);
        let recomputed = 1.0 - r.bundle_bytes as f64 / r.original_bytes as f64;
        assert!((r.savings - recomputed).abs() <= 1e-12);
    }

    #[test]
    fn adding_a_section_lowers_savings() {
        let mut b = prompt_only("abc", 5000);
        let before = savings_report(&b).savings;
        b.sections.push(Section::new(SectionTag::Meta, Vec::new()));
        assert!(savings_report(&b).savings < before);
    }
}
