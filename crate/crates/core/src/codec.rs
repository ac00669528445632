//! Byte-level protobuf wire encoding for the four CIFF record schemas.
//!
//! Only the subset of the protobuf wire format that CIFF needs is covered:
//! base-128 varints, field tags, 8-byte little-endian doubles and
//! length-delimited payloads (strings and embedded records). Writers always
//! produce the canonical form: ascending field numbers with default-valued
//! singular fields omitted. Readers accept any field order, skip unknown
//! fields, and let the last occurrence of a singular field win.

use thiserror::Error;

/// Longest possible encoding of a 64-bit varint.
pub const MAX_VARINT_LEN: usize = 10;

/// Largest field number a tag can carry.
pub const MAX_FIELD_NUMBER: u32 = (1 << 29) - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("truncated varint: stream ended with continuation bit set")]
    TruncatedVarint,
    #[error("overlong varint: more than 10 bytes or value exceeds 64 bits")]
    OverlongVarint,
    #[error("truncated record")]
    TruncatedRecord,
    #[error("unknown wire kind {0}")]
    UnknownWireKind(u8),
    #[error("invalid field number {0}")]
    InvalidFieldNumber(u64),
    #[error("field {field} has wire kind {found}, schema expects {expected}")]
    WireKindMismatch { field: u32, expected: u8, found: u8 },
    #[error("field {field} holds negative value {value}")]
    NegativeValue { field: u32, value: i64 },
    #[error("fields not in canonical ascending order at field {0}")]
    NonCanonicalOrder(u32),
}

/// Appends the base-128 encoding of `value` to `out`.
pub fn encode_varint_to(mut value: u64, out: &mut Vec<u8>) {
    while value >= 0x80 {
        out.push((value as u8) | 0x80);
        value >>= 7;
    }
    out.push(value as u8);
}

pub fn encode_varint(value: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(varint_len(value));
    encode_varint_to(value, &mut out);
    out
}

/// Number of bytes `encode_varint(value)` produces.
pub fn varint_len(value: u64) -> usize {
    let bits = 64 - (value | 1).leading_zeros() as usize;
    bits.div_ceil(7)
}

/// Decodes one varint starting at `offset`, returning the value and the
/// number of bytes consumed.
///
/// Panics if `offset > bytes.len()`.
pub fn decode_varint(bytes: &[u8], offset: usize) -> Result<(u64, usize), CodecError> {
    let input = &bytes[offset..];
    let mut value = 0u64;
    for (i, &byte) in input.iter().enumerate() {
        if i == MAX_VARINT_LEN {
            return Err(CodecError::OverlongVarint);
        }
        let payload = u64::from(byte & 0x7F);
        if i == MAX_VARINT_LEN - 1 && payload > 1 {
            return Err(CodecError::OverlongVarint);
        }
        value |= payload << (7 * i);
        if byte & 0x80 == 0 {
            return Ok((value, i + 1));
        }
    }
    if input.len() >= MAX_VARINT_LEN {
        Err(CodecError::OverlongVarint)
    } else {
        Err(CodecError::TruncatedVarint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WireKind {
    Varint,
    Fixed64,
    LengthDelimited,
}

impl WireKind {
    pub fn code(self) -> u8 {
        match self {
            WireKind::Varint => 0,
            WireKind::Fixed64 => 1,
            WireKind::LengthDelimited => 2,
        }
    }
}

/// A schema entry: which field number carries which wire kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldDescriptor {
    pub number: u32,
    pub kind: WireKind,
    /// Repeated fields emit every element, including empty ones, and are
    /// collected in order on decode.
    pub repeated: bool,
}

impl FieldDescriptor {
    pub const fn new(number: u32, kind: WireKind) -> Self {
        assert!(number >= 1 && number <= MAX_FIELD_NUMBER);
        Self { number, kind, repeated: false }
    }

    pub const fn repeated(number: u32, kind: WireKind) -> Self {
        assert!(number >= 1 && number <= MAX_FIELD_NUMBER);
        Self { number, kind, repeated: true }
    }

    pub fn tag(&self) -> u64 {
        (u64::from(self.number) << 3) | u64::from(self.kind.code())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    /// Signed integer carried as a varint. Negative values are representable
    /// on the wire (sign-extended to 64 bits) but CIFF never writes them.
    Int(i64),
    Double(f64),
    Bytes(Vec<u8>),
}

impl FieldValue {
    fn is_default(&self) -> bool {
        match self {
            FieldValue::Int(v) => *v == 0,
            FieldValue::Double(v) => v.to_bits() == 0,
            FieldValue::Bytes(b) => b.is_empty(),
        }
    }

    fn kind(&self) -> WireKind {
        match self {
            FieldValue::Int(_) => WireKind::Varint,
            FieldValue::Double(_) => WireKind::Fixed64,
            FieldValue::Bytes(_) => WireKind::LengthDelimited,
        }
    }
}

/// Schema-agnostic record: an ordered list of field values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawRecord {
    pub fields: Vec<(FieldDescriptor, FieldValue)>,
}

impl RawRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, field: FieldDescriptor, value: FieldValue) -> &mut Self {
        self.fields.push((field, value));
        self
    }

    /// Last value stored for field `number`.
    pub fn get(&self, number: u32) -> Option<&FieldValue> {
        self.fields.iter().rev().find(|(f, _)| f.number == number).map(|(_, v)| v)
    }

    pub fn int(&self, number: u32) -> i64 {
        match self.get(number) {
            Some(FieldValue::Int(v)) => *v,
            _ => 0,
        }
    }

    pub fn double(&self, number: u32) -> f64 {
        match self.get(number) {
            Some(FieldValue::Double(v)) => *v,
            _ => 0.0,
        }
    }

    pub fn bytes(&self, number: u32) -> &[u8] {
        match self.get(number) {
            Some(FieldValue::Bytes(v)) => v,
            _ => &[],
        }
    }

    /// Every value stored for a repeated field, in order.
    pub fn repeated_bytes(&self, number: u32) -> impl Iterator<Item = &[u8]> {
        self.fields.iter().filter_map(move |(f, v)| match v {
            FieldValue::Bytes(b) if f.number == number => Some(b.as_slice()),
            _ => None,
        })
    }
}

/// Serializes `record` in canonical form, appending to `out`.
pub fn encode_record_to(record: &RawRecord, out: &mut Vec<u8>) -> Result<(), CodecError> {
    let mut previous = 0u32;
    for (field, value) in &record.fields {
        if field.number < previous || (field.number == previous && !field.repeated) {
            return Err(CodecError::NonCanonicalOrder(field.number));
        }
        previous = field.number;
        if field.kind != value.kind() {
            return Err(CodecError::WireKindMismatch {
                field: field.number,
                expected: field.kind.code(),
                found: value.kind().code(),
            });
        }
        if !field.repeated && value.is_default() {
            continue;
        }
        encode_varint_to(field.tag(), out);
        match value {
            FieldValue::Int(v) => {
                if *v < 0 {
                    return Err(CodecError::NegativeValue { field: field.number, value: *v });
                }
                encode_varint_to(*v as u64, out);
            }
            FieldValue::Double(v) => out.extend_from_slice(&v.to_le_bytes()),
            FieldValue::Bytes(b) => {
                encode_varint_to(b.len() as u64, out);
                out.extend_from_slice(b);
            }
        }
    }
    Ok(())
}

pub fn encode_record(record: &RawRecord) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    encode_record_to(record, &mut out)?;
    Ok(out)
}

fn read_varint_in_record(bytes: &[u8], pos: &mut usize) -> Result<u64, CodecError> {
    let (value, used) = decode_varint(bytes, *pos).map_err(|e| match e {
        CodecError::TruncatedVarint => CodecError::TruncatedRecord,
        other => other,
    })?;
    *pos += used;
    Ok(value)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, len: u64) -> Result<&'a [u8], CodecError> {
    let remaining = (bytes.len() - *pos) as u64;
    if len > remaining {
        return Err(CodecError::TruncatedRecord);
    }
    let start = *pos;
    *pos += len as usize;
    Ok(&bytes[start..*pos])
}

/// Parses `bytes` against `schema`.
///
/// The result is in canonical order: singular fields keep their last
/// occurrence, repeated fields keep every occurrence in stream order.
/// Absent fields are simply missing from the record and read back as
/// defaults through the [`RawRecord`] accessors.
pub fn decode_record(bytes: &[u8], schema: &[FieldDescriptor]) -> Result<RawRecord, CodecError> {
    let mut seen: Vec<(FieldDescriptor, FieldValue)> = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let tag = read_varint_in_record(bytes, &mut pos)?;
        let number = tag >> 3;
        let code = (tag & 0x7) as u8;
        if number == 0 || number > u64::from(MAX_FIELD_NUMBER) {
            return Err(CodecError::InvalidFieldNumber(number));
        }
        let number = number as u32;
        let value = match code {
            0 => FieldValue::Int(read_varint_in_record(bytes, &mut pos)? as i64),
            1 => {
                let raw = take(bytes, &mut pos, 8)?;
                FieldValue::Double(f64::from_le_bytes(raw.try_into().expect("8 bytes")))
            }
            2 => {
                let len = read_varint_in_record(bytes, &mut pos)?;
                FieldValue::Bytes(take(bytes, &mut pos, len)?.to_vec())
            }
            5 => {
                take(bytes, &mut pos, 4)?;
                continue;
            }
            other => return Err(CodecError::UnknownWireKind(other)),
        };
        let Some(field) = schema.iter().find(|f| f.number == number) else {
            continue;
        };
        if value.kind() != field.kind {
            return Err(CodecError::WireKindMismatch {
                field: number,
                expected: field.kind.code(),
                found: code,
            });
        }
        if !field.repeated {
            seen.retain(|(f, _)| f.number != number);
        }
        seen.push((*field, value));
    }
    // stable: repeated elements keep their relative order
    seen.sort_by_key(|(f, _)| f.number);
    Ok(RawRecord { fields: seen })
}
