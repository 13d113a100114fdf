//! The container format.
//!
//! ```text
//! [u64 LE: header length N][N bytes: JSON header][data section]
//! ```
//!
//! The header maps each tensor name to `{"data_offsets":[b,e],"dtype":"F32"|"F64","shape":[..]}`
//! and may carry a `"__metadata__"` string map. Offsets are relative to the
//! start of the data section, which must be covered exactly: no gaps, no
//! overlaps, no trailing bytes. Writers emit the header with sorted keys and
//! no whitespace, so saving is deterministic.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

use super::checkpoint::{Checkpoint, METADATA_KEY};
use super::tensor::{element_count, DType, Tensor, TensorData};

const MAX_HEADER_LEN: u64 = 100 * 1024 * 1024;

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub allow_non_finite: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    dtype: String,
    shape: Vec<usize>,
    data_offsets: (usize, usize),
}

/// Header entries in file order, with duplicate keys preserved so they can
/// be reported instead of silently collapsed.
struct RawHeader(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for RawHeader {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct HeaderVisitor;

        impl<'de> Visitor<'de> for HeaderVisitor {
            type Value = RawHeader;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<RawHeader, A::Error> {
                let mut entries = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    entries.push((k, v));
                }
                Ok(RawHeader(entries))
            }
        }

        deserializer.deserialize_map(HeaderVisitor)
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    load_checkpoint_with(path, LoadOptions::default())
}

pub fn load_checkpoint_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, opts)
}

/// Writes `cp` to `path`. Nothing is written if `cp` cannot be encoded.
pub fn save_checkpoint(cp: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(cp)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode(cp: &Checkpoint) -> Result<Vec<u8>> {
    let mut header = Map::new();
    let mut seen = std::collections::HashSet::new();
    let mut offset = 0usize;
    for t in cp.tensors() {
        if !seen.insert(t.name()) {
            return Err(Error::tensor(t.name(), "duplicate tensor name"));
        }
        let end = offset + t.byte_len();
        header.insert(
            t.name().to_string(),
            json!({
                "dtype": t.dtype().tag(),
                "shape": t.shape(),
                "data_offsets": [offset, end],
            }),
        );
        offset = end;
    }
    if !cp.metadata().is_empty() {
        header.insert(METADATA_KEY.to_string(), json!(cp.metadata()));
    }
    let header = serde_json::to_vec(&Value::Object(header))
        .map_err(|e| Error::Format(format!("cannot serialize header: {e}")))?;

    let mut out = Vec::with_capacity(8 + header.len() + offset);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in cp.tensors() {
        t.data().write_le(&mut out);
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], opts: LoadOptions) -> Result<Checkpoint> {
    if bytes.len() < 8 {
        return Err(Error::Format("truncated header: file shorter than 8 bytes".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
    if n > MAX_HEADER_LEN || n > (bytes.len() - 8) as u64 {
        return Err(Error::Format(format!(
            "truncated header: declared {} bytes, {} available",
            n,
            bytes.len() - 8
        )));
    }
    let header_end = 8 + n as usize;
    let RawHeader(entries) = serde_json::from_slice(&bytes[8..header_end])
        .map_err(|e| Error::Format(format!("header is not a valid JSON object: {e}")))?;
    let data = &bytes[header_end..];

    let mut metadata = None;
    let mut metas = Vec::with_capacity(entries.len());
    let mut names = std::collections::HashSet::new();
    for (name, value) in entries {
        if !names.insert(name.clone()) {
            return Err(Error::Format(format!("duplicate header key `{name}`")));
        }
        if name == METADATA_KEY {
            let map: BTreeMap<String, String> = serde_json::from_value(value)
                .map_err(|e| Error::Format(format!("__metadata__ must be a string map: {e}")))?;
            metadata = Some(map);
            continue;
        }
        let raw: RawEntry =
            serde_json::from_value(value).map_err(|e| Error::tensor(&name, format!("malformed header entry: {e}")))?;
        let dtype = DType::from_tag(&raw.dtype)
            .ok_or_else(|| Error::tensor(&name, format!("unknown dtype `{}`", raw.dtype)))?;
        let (begin, end) = raw.data_offsets;
        if begin > end {
            return Err(Error::tensor(
                &name,
                format!("data offsets [{begin}, {end}] are reversed"),
            ));
        }
        if end > data.len() {
            return Err(Error::tensor(
                &name,
                format!("offset out of bounds: end {end} > data section {}", data.len()),
            ));
        }
        let expected = element_count(&raw.shape)
            .and_then(|c| c.checked_mul(dtype.size()))
            .ok_or_else(|| Error::tensor(&name, "shape product overflows"))?;
        if expected != end - begin {
            return Err(Error::tensor(
                &name,
                format!(
                    "shape {:?} x {} needs {} bytes, offsets span {}",
                    raw.shape,
                    dtype.tag(),
                    expected,
                    end - begin
                ),
            ));
        }
        metas.push((name, dtype, raw.shape, begin, end));
    }

    metas.sort_by(|a, b| (a.3, a.4, &a.0).cmp(&(b.3, b.4, &b.0)));
    let mut cursor = 0usize;
    for (name, _, _, begin, end) in &metas {
        if *begin < cursor {
            return Err(Error::tensor(
                name,
                format!("data region [{begin}, {end}] overlaps previous tensor"),
            ));
        }
        if *begin > cursor {
            return Err(Error::tensor(
                name,
                format!("gap in data section before offset {begin}"),
            ));
        }
        cursor = *end;
    }
    if cursor != data.len() {
        return Err(Error::Format(format!(
            "data section has {} trailing bytes",
            data.len() - cursor
        )));
    }

    let mut cp = Checkpoint::new();
    for (name, dtype, shape, begin, end) in metas {
        let values = TensorData::read_le(dtype, &data[begin..end]);
        if !opts.allow_non_finite {
            if let Some(i) = values.first_non_finite() {
                return Err(Error::tensor(&name, format!("non-finite value at element {i}")));
            }
        }
        cp.push(Tensor::new(name, shape, values)?)?;
    }
    if let Some(m) = metadata {
        *cp.metadata_mut() = m;
    }
    Ok(cp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_header(header: &str, data: &[u8]) -> Vec<u8> {
        let mut out = (header.len() as u64).to_le_bytes().to_vec();
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn minimal_empty_file() {
        let bytes = [0x02, 0, 0, 0, 0, 0, 0, 0, 0x7B, 0x7D];
        let cp = decode(&bytes, LoadOptions::default()).unwrap();
        assert!(cp.is_empty());
        assert_eq!(encode(&Checkpoint::new()).unwrap(), bytes.to_vec());
    }

    #[test]
    fn single_f32_one() {
        let bytes = with_header(
            r#"{"fc.weight":{"dtype":"F32","shape":[1],"data_offsets":[0,4]}}"#,
            &[0x00, 0x00, 0x80, 0x3F],
        );
        let cp = decode(&bytes, LoadOptions::default()).unwrap();
        assert_eq!(cp.get("fc.weight").unwrap().values(), vec![1.0]);
    }

    #[test]
    fn canonical_header_is_sorted_and_compact() {
        let mut cp = Checkpoint::new();
        cp.push(Tensor::from_f32("b", vec![1], vec![1.0]).unwrap()).unwrap();
        cp.push(Tensor::from_f64("a", vec![], vec![2.0]).unwrap()).unwrap();
        cp.metadata_mut().insert("format".into(), "pt".into());
        let bytes = encode(&cp).unwrap();
        let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[8..8 + n]).unwrap();
        assert_eq!(
            header,
            r#"{"__metadata__":{"format":"pt"},"a":{"data_offsets":[4,12],"dtype":"F64","shape":[]},"b":{"data_offsets":[0,4],"dtype":"F32","shape":[1]}}"#
        );
    }

    #[test]
    fn rejects_out_of_bounds_offsets() {
        let bytes = with_header(
            r#"{"w":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}}"#,
            &[0, 0, 0, 0],
        );
        let err = decode(&bytes, LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("offset out of bounds"), "{err}");
    }

    #[test]
    fn rejects_truncated_and_garbage_headers() {
        assert!(decode(&[1, 0, 0], LoadOptions::default())
            .unwrap_err()
            .to_string()
            .contains("truncated"));
        let too_long = with_header("{}", &[])[..9].to_vec();
        assert!(decode(&too_long, LoadOptions::default())
            .unwrap_err()
            .to_string()
            .contains("truncated"));
        let garbage = with_header("{not json", &[]);
        assert!(decode(&garbage, LoadOptions::default())
            .unwrap_err()
            .to_string()
            .contains("JSON"));
    }

    #[test]
    fn rejects_gaps_overlaps_and_trailing_bytes() {
        let gap = with_header(r#"{"a":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}}"#, &[0; 8]);
        assert!(decode(&gap, LoadOptions::default())
            .unwrap_err()
            .to_string()
            .contains("gap"));

        let overlap = with_header(
            r#"{"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},"b":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}}"#,
            &[0; 8],
        );
        assert!(decode(&overlap, LoadOptions::default())
            .unwrap_err()
            .to_string()
            .contains("overlap"));

        let trailing = with_header(r#"{"a":{"dtype":"F32","shape":[1],"data_offsets":[0,4]}}"#, &[0; 6]);
        assert!(decode(&trailing, LoadOptions::default())
            .unwrap_err()
            .to_string()
            .contains("trailing"));
    }

    #[test]
    fn rejects_size_mismatch_unknown_dtype_and_duplicates() {
        let mismatch = with_header(r#"{"a":{"dtype":"F64","shape":[1],"data_offsets":[0,4]}}"#, &[0; 4]);
        assert!(decode(&mismatch, LoadOptions::default())
            .unwrap_err()
            .to_string()
            .contains("needs 8 bytes"));

        let f16 = with_header(r#"{"a":{"dtype":"F16","shape":[2],"data_offsets":[0,4]}}"#, &[0; 4]);
        assert!(decode(&f16, LoadOptions::default())
            .unwrap_err()
            .to_string()
            .contains("unknown dtype"));

        let dup = with_header(
            r#"{"a":{"dtype":"F32","shape":[1],"data_offsets":[0,4]},"a":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}}"#,
            &[0; 8],
        );
        assert!(decode(&dup, LoadOptions::default())
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
    }

    #[test]
    fn non_finite_values_need_opt_in() {
        let bytes = with_header(
            r#"{"a":{"dtype":"F32","shape":[1],"data_offsets":[0,4]}}"#,
            &f32::NAN.to_le_bytes(),
        );
        assert!(decode(&bytes, LoadOptions::default())
            .unwrap_err()
            .to_string()
            .contains("non-finite"));
        let cp = decode(&bytes, LoadOptions { allow_non_finite: true }).unwrap();
        assert!(cp.get("a").unwrap().values()[0].is_nan());
    }

    #[test]
    fn save_refuses_invalid_checkpoint_without_writing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.ckpt");
        // Duplicates cannot enter through `push`, so the only path to an
        // invalid checkpoint is construction, which fails first.
        let a = Tensor::from_f32("w", vec![1], vec![1.0]).unwrap();
        let b = Tensor::from_f32("w", vec![1], vec![2.0]).unwrap();
        assert!(Checkpoint::from_tensors([a, b]).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn zero_sized_tensors_round_trip() {
        let cp = Checkpoint::from_tensors([
            Tensor::from_f32("empty", vec![0, 3], vec![]).unwrap(),
            Tensor::from_f64("x", vec![2], vec![1.5, -2.5]).unwrap(),
            Tensor::from_f32("also_empty", vec![0], vec![]).unwrap(),
        ])
        .unwrap();
        let bytes = encode(&cp).unwrap();
        let back = decode(&bytes, LoadOptions::default()).unwrap();
        assert_eq!(encode(&back).unwrap(), bytes);
    }
}
