use ciff_kit::codec::{decode_record, decode_varint, encode_varint, varint_len};
use ciff_kit::model::{
    gap_decode, gap_encode, schema, CiffDocRecord, CiffHeader, CiffPosting, CiffPostingsList,
};
use ciff_kit::stream::{sniff_gzip, write_delimited, DelimitedReader};
use flate2::write::GzEncoder;
use flate2::Compression;
use proptest::prelude::*;
use std::io::{Read, Write};

#[test]
fn varint_exhaustive_low_range() {
    for v in 0u64..=65535 {
        let bytes = encode_varint(v);
        assert_eq!(bytes.len(), varint_len(v));
        assert_eq!(decode_varint(&bytes, 0).unwrap(), (v, bytes.len()));
    }
}

fn header() -> impl Strategy<Value = CiffHeader> {
    (0..i32::MAX, 0..i32::MAX, 0..i32::MAX, 0..i32::MAX, 0..i64::MAX, 0.0f64..1e6, "\\PC{0,20}").prop_map(
        |(npl, nd, tpl, td, ttc, avdl, desc)| CiffHeader {
            version: 1,
            num_postings_lists: npl,
            num_docs: nd,
            total_postings_lists: tpl,
            total_docs: td,
            total_terms_in_collection: ttc,
            average_doclength: avdl,
            description: desc,
        },
    )
}

fn postings_list() -> impl Strategy<Value = CiffPostingsList> {
    ("[a-z0-9]{1,12}", prop::collection::btree_map(0i32..1_000_000, 1i32..10_000, 1..50)).prop_map(
        |(term, docs)| {
            CiffPostingsList::from_postings(
                term,
                docs.into_iter().map(|(docid, tf)| CiffPosting { docid, tf }).collect(),
            )
        },
    )
}

fn doc_record() -> impl Strategy<Value = CiffDocRecord> {
    (0..i32::MAX, "[A-Za-z0-9_-]{1,20}", 0..i32::MAX).prop_map(|(docid, id, len)| CiffDocRecord {
        docid,
        collection_docid: id,
        doclength: len,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn varint_random(v in any::<u64>()) {
        let bytes = encode_varint(v);
        prop_assert!(bytes.len() <= 10);
        prop_assert_eq!(decode_varint(&bytes, 0).unwrap(), (v, bytes.len()));
    }

    #[test]
    fn header_round_trip(h in header()) {
        prop_assert_eq!(CiffHeader::decode(&h.encode().unwrap()).unwrap(), h);
    }

    #[test]
    fn postings_list_round_trip(l in postings_list()) {
        prop_assert_eq!(CiffPostingsList::decode(&l.encode().unwrap()).unwrap(), l);
    }

    #[test]
    fn doc_record_round_trip(d in doc_record()) {
        prop_assert_eq!(CiffDocRecord::decode(&d.encode().unwrap()).unwrap(), d);
    }

    #[test]
    fn encoding_is_canonical(l in postings_list()) {
        let bytes = l.encode().unwrap();
        let again = CiffPostingsList::decode(&bytes).unwrap().encode().unwrap();
        prop_assert_eq!(bytes, again);
    }

    #[test]
    fn decoding_arbitrary_bytes_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_varint(&bytes, 0);
        let _ = decode_record(&bytes, &schema::HEADER);
        let _ = decode_record(&bytes, &schema::POSTINGS_LIST);
        let _ = CiffHeader::decode(&bytes);
        let _ = CiffPostingsList::decode(&bytes);
        let _ = CiffDocRecord::decode(&bytes);
    }

    #[test]
    fn gaps_invert(docs in prop::collection::btree_set(0i64..i64::from(i32::MAX), 0..100)) {
        let docs: Vec<i64> = docs.into_iter().collect();
        let gaps = gap_encode(&docs).unwrap();
        prop_assert!(gaps.iter().skip(1).all(|&g| g >= 1));
        prop_assert_eq!(gap_decode(&gaps).unwrap(), docs);
    }

    #[test]
    fn gzip_is_transparent(records in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..200), 0..20)) {
        let mut plain = Vec::new();
        for r in &records {
            write_delimited(r, &mut plain).unwrap();
        }
        let mut gz = GzEncoder::new(Vec::new(), Compression::default());
        gz.write_all(&plain).unwrap();
        let gz = gz.finish().unwrap();
        for source in [plain.clone(), gz] {
            let mut reader = DelimitedReader::new(sniff_gzip(std::io::Cursor::new(source)).unwrap());
            let mut got = Vec::new();
            while let Some(r) = reader.read_delimited().unwrap() {
                got.push(r);
            }
            prop_assert_eq!(&got, &records);
        }
        let mut all = Vec::new();
        sniff_gzip(std::io::Cursor::new(plain.clone())).unwrap().read_to_end(&mut all).unwrap();
        prop_assert_eq!(all, plain);
    }
}
