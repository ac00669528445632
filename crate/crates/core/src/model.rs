//! In-memory forms of the four CIFF records.
//!
//! Integer widths mirror the exchange schema (`int32`/`int64`) so that
//! foreign or corrupt exports can be represented faithfully and reported on
//! by the validator. Postings always hold absolute docids; the gap form only
//! exists on the wire.

use thiserror::Error;

use crate::codec::{
    decode_record, encode_record_to, CodecError, FieldDescriptor, FieldValue, RawRecord, WireKind,
};

/// The only export version this toolkit reads or writes.
pub const CIFF_VERSION: i32 = 1;

pub mod schema {
    use super::*;

    pub const HEADER: [FieldDescriptor; 8] = [
        FieldDescriptor::new(1, WireKind::Varint),
        FieldDescriptor::new(2, WireKind::Varint),
        FieldDescriptor::new(3, WireKind::Varint),
        FieldDescriptor::new(4, WireKind::Varint),
        FieldDescriptor::new(5, WireKind::Varint),
        FieldDescriptor::new(6, WireKind::Varint),
        FieldDescriptor::new(7, WireKind::Fixed64),
        FieldDescriptor::new(8, WireKind::LengthDelimited),
    ];

    pub const POSTING: [FieldDescriptor; 2] =
        [FieldDescriptor::new(1, WireKind::Varint), FieldDescriptor::new(2, WireKind::Varint)];

    pub const POSTINGS_LIST: [FieldDescriptor; 4] = [
        FieldDescriptor::new(1, WireKind::LengthDelimited),
        FieldDescriptor::new(2, WireKind::Varint),
        FieldDescriptor::new(3, WireKind::Varint),
        FieldDescriptor::repeated(4, WireKind::LengthDelimited),
    ];

    pub const DOC_RECORD: [FieldDescriptor; 3] = [
        FieldDescriptor::new(1, WireKind::Varint),
        FieldDescriptor::new(2, WireKind::LengthDelimited),
        FieldDescriptor::new(3, WireKind::Varint),
    ];
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("field {field} value {value} does not fit in int32")]
    OutOfRange { field: u32, value: i64 },
    #[error("field {field} is not valid UTF-8")]
    InvalidUtf8 { field: u32 },
    #[error("docids not strictly increasing at position {0}")]
    NotIncreasing(usize),
    #[error("zero gap at position {0} (duplicate docid)")]
    ZeroGap(usize),
    #[error("negative gap at position {0}")]
    NegativeGap(usize),
    #[error("docid overflow at position {0}")]
    DocidOverflow(usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CiffHeader {
    pub version: i32,
    pub num_postings_lists: i32,
    pub num_docs: i32,
    pub total_postings_lists: i32,
    pub total_docs: i32,
    pub total_terms_in_collection: i64,
    pub average_doclength: f64,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CiffPosting {
    pub docid: i32,
    pub tf: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CiffPostingsList {
    pub term: String,
    pub df: i64,
    pub cf: i64,
    pub postings: Vec<CiffPosting>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CiffDocRecord {
    pub docid: i32,
    pub collection_docid: String,
    pub doclength: i32,
}

/// A fully materialized export. Large exports should be streamed through
/// [`crate::export::ExportReader`] / [`crate::export::ExportWriter`] instead.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CiffExport {
    pub header: CiffHeader,
    pub postings_lists: Vec<CiffPostingsList>,
    pub doc_records: Vec<CiffDocRecord>,
}

impl CiffPostingsList {
    /// Builds a list from absolute postings, deriving df and cf.
    pub fn from_postings(term: impl Into<String>, postings: Vec<CiffPosting>) -> Self {
        let cf = postings.iter().map(|p| i64::from(p.tf)).sum();
        Self { term: term.into(), df: postings.len() as i64, cf, postings }
    }
}

/// Converts strictly increasing docids to gaps.
pub fn gap_encode(docids: &[i64]) -> Result<Vec<i64>, ModelError> {
    let mut out = Vec::with_capacity(docids.len());
    let mut previous = None;
    for (i, &d) in docids.iter().enumerate() {
        match previous {
            None if d < 0 => return Err(ModelError::NotIncreasing(i)),
            None => out.push(d),
            Some(p) if d <= p => return Err(ModelError::NotIncreasing(i)),
            Some(p) => out.push(d - p),
        }
        previous = Some(d);
    }
    Ok(out)
}

/// Prefix-sums gaps back to absolute docids.
pub fn gap_decode(gaps: &[i64]) -> Result<Vec<i64>, ModelError> {
    let mut out = Vec::with_capacity(gaps.len());
    let mut acc = 0i64;
    for (i, &g) in gaps.iter().enumerate() {
        if g < 0 {
            return Err(ModelError::NegativeGap(i));
        }
        if i > 0 && g == 0 {
            return Err(ModelError::ZeroGap(i));
        }
        acc = acc.checked_add(g).ok_or(ModelError::DocidOverflow(i))?;
        out.push(acc);
    }
    Ok(out)
}

fn int32(record: &RawRecord, field: u32) -> Result<i32, ModelError> {
    let value = record.int(field);
    // int32 fields arrive sign-extended to 64 bits
    i32::try_from(value).map_err(|_| ModelError::OutOfRange { field, value })
}

fn string(record: &RawRecord, field: u32) -> Result<String, ModelError> {
    String::from_utf8(record.bytes(field).to_vec()).map_err(|_| ModelError::InvalidUtf8 { field })
}

/// Wire form of an `int32` value: negative values sign-extend to 64 bits.
/// The encoder refuses them, which is what CIFF wants.
fn int_field(value: impl Into<i64>) -> FieldValue {
    FieldValue::Int(value.into())
}

impl CiffHeader {
    pub fn to_record(&self) -> RawRecord {
        let s = &schema::HEADER;
        let mut r = RawRecord::new();
        r.push(s[0], int_field(self.version))
            .push(s[1], int_field(self.num_postings_lists))
            .push(s[2], int_field(self.num_docs))
            .push(s[3], int_field(self.total_postings_lists))
            .push(s[4], int_field(self.total_docs))
            .push(s[5], int_field(self.total_terms_in_collection))
            .push(s[6], FieldValue::Double(self.average_doclength))
            .push(s[7], FieldValue::Bytes(self.description.as_bytes().to_vec()));
        r
    }

    pub fn from_record(r: &RawRecord) -> Result<Self, ModelError> {
        Ok(Self {
            version: int32(r, 1)?,
            num_postings_lists: int32(r, 2)?,
            num_docs: int32(r, 3)?,
            total_postings_lists: int32(r, 4)?,
            total_docs: int32(r, 5)?,
            total_terms_in_collection: r.int(6),
            average_doclength: r.double(7),
            description: string(r, 8)?,
        })
    }

    pub fn encode(&self) -> Result<Vec<u8>, ModelError> {
        let mut out = Vec::new();
        encode_record_to(&self.to_record(), &mut out)?;
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ModelError> {
        Self::from_record(&decode_record(bytes, &schema::HEADER)?)
    }
}

impl CiffPostingsList {
    /// Wire form, with docids gap-encoded. Postings must be strictly
    /// increasing by docid.
    pub fn encode(&self) -> Result<Vec<u8>, ModelError> {
        let s = &schema::POSTINGS_LIST;
        let mut r = RawRecord::new();
        r.push(s[0], FieldValue::Bytes(self.term.as_bytes().to_vec()))
            .push(s[1], int_field(self.df))
            .push(s[2], int_field(self.cf));
        let docids: Vec<i64> = self.postings.iter().map(|p| i64::from(p.docid)).collect();
        let gaps = gap_encode(&docids)?;
        let mut buf = Vec::with_capacity(8);
        for (gap, posting) in gaps.iter().zip(&self.postings) {
            let mut p = RawRecord::new();
            p.push(schema::POSTING[0], int_field(*gap)).push(schema::POSTING[1], int_field(posting.tf));
            buf.clear();
            encode_record_to(&p, &mut buf)?;
            r.push(s[3], FieldValue::Bytes(buf.clone()));
        }
        let mut out = Vec::new();
        encode_record_to(&r, &mut out)?;
        Ok(out)
    }

    /// Parses the wire form and prefix-sums the gaps.
    ///
    /// No ordering checks are applied: zero or negative gaps come back as
    /// non-increasing absolute docids for the validator to report.
    pub fn decode(bytes: &[u8]) -> Result<Self, ModelError> {
        let r = decode_record(bytes, &schema::POSTINGS_LIST)?;
        let mut postings = Vec::new();
        let mut docid = 0i64;
        for (i, raw) in r.repeated_bytes(4).enumerate() {
            let p = decode_record(raw, &schema::POSTING)?;
            let gap = i64::from(int32(&p, 1)?);
            docid = docid.checked_add(gap).ok_or(ModelError::DocidOverflow(i))?;
            let absolute =
                i32::try_from(docid).map_err(|_| ModelError::OutOfRange { field: 1, value: docid })?;
            postings.push(CiffPosting { docid: absolute, tf: int32(&p, 2)? });
        }
        Ok(Self { term: string(&r, 1)?, df: r.int(2), cf: r.int(3), postings })
    }
}

impl CiffDocRecord {
    pub fn encode(&self) -> Result<Vec<u8>, ModelError> {
        let s = &schema::DOC_RECORD;
        let mut r = RawRecord::new();
        r.push(s[0], int_field(self.docid))
            .push(s[1], FieldValue::Bytes(self.collection_docid.as_bytes().to_vec()))
            .push(s[2], int_field(self.doclength));
        let mut out = Vec::new();
        encode_record_to(&r, &mut out)?;
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ModelError> {
        let r = decode_record(bytes, &schema::DOC_RECORD)?;
        Ok(Self { docid: int32(&r, 1)?, collection_docid: string(&r, 2)?, doclength: int32(&r, 3)? })
    }
}
