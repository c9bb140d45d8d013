//! Record container (`MWV1`) and the per-record CSV format.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! "MWV1" | u32 record_count | record*
//! record = u32 id_len, id (UTF-8) | f64 sample_rate | u32 L | u32 T
//!          | (u32 name_len, name (UTF-8)) * L | f32 samples * (L*T), lead-major
//! ```

use std::io::{Read, Write};

use crate::record::{validate_record, MultiLeadRecord, ValidationReport};

pub const MAGIC: &[u8; 4] = b"MWV1";

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("bad magic bytes {0:?}, expected \"MWV1\"")]
    BadMagic([u8; 4]),
    #[error("truncated container: needed {needed} bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("record {record}: sample block holds {available} bytes, {leads}x{samples} f32 samples need {needed}")]
    SampleCountMismatch {
        record: usize,
        leads: usize,
        samples: usize,
        needed: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("invalid UTF-8 in {0}")]
    Utf8(&'static str),
    #[error("record {index} is invalid: {report}")]
    InvalidRecord { index: usize, report: ValidationReport },
    #[error("field too large for the container format: {0}")]
    TooLarge(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("csv: {0}")]
    CsvFormat(String),
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ContainerError> {
        if self.buf.len() - self.pos < n {
            return Err(ContainerError::Truncated {
                offset: self.pos,
                needed: n,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ContainerError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &'static str) -> Result<String, ContainerError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| ContainerError::Utf8(what))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Decodes a container. Every decoded record is validated.
pub fn read_container(bytes: &[u8]) -> Result<Vec<MultiLeadRecord>, ContainerError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic: [u8; 4] = match bytes.get(..4) {
        Some(m) => m.try_into().unwrap(),
        None => {
            return Err(ContainerError::Truncated {
                offset: 0,
                needed: 4,
            })
        }
    };
    if &magic != MAGIC {
        return Err(ContainerError::BadMagic(magic));
    }
    cur.pos = 4;
    let count = cur.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for index in 0..count {
        let record_id = cur.string("record id")?;
        let sample_rate = cur.f64()?;
        let n_leads = cur.u32()? as usize;
        let n_samples = cur.u32()? as usize;
        let mut lead_names = Vec::with_capacity(n_leads.min(1 << 12));
        for _ in 0..n_leads {
            lead_names.push(cur.string("lead name")?);
        }
        let needed = n_leads
            .checked_mul(n_samples)
            .and_then(|n| n.checked_mul(4))
            .ok_or(ContainerError::TooLarge("sample block"))?;
        if cur.remaining() < needed {
            return Err(ContainerError::SampleCountMismatch {
                record: index,
                leads: n_leads,
                samples: n_samples,
                needed,
                available: cur.remaining(),
            });
        }
        let block = cur.take(needed)?;
        let leads: Vec<Vec<f64>> = block
            .chunks_exact(4 * n_samples.max(1))
            .take(n_leads)
            .map(|lead| {
                lead.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                    .collect()
            })
            .collect();
        let leads = if n_samples == 0 { vec![Vec::new(); n_leads] } else { leads };
        let record = MultiLeadRecord {
            record_id,
            sample_rate,
            lead_names,
            leads,
        };
        let report = validate_record(&record);
        if !report.is_ok() {
            return Err(ContainerError::InvalidRecord { index, report });
        }
        records.push(record);
    }
    if cur.remaining() != 0 {
        return Err(ContainerError::TrailingBytes(cur.remaining()));
    }
    Ok(records)
}

fn put_len(out: &mut Vec<u8>, n: usize, what: &'static str) -> Result<(), ContainerError> {
    let n = u32::try_from(n).map_err(|_| ContainerError::TooLarge(what))?;
    out.extend_from_slice(&n.to_le_bytes());
    Ok(())
}

fn put_str(out: &mut Vec<u8>, s: &str, what: &'static str) -> Result<(), ContainerError> {
    put_len(out, s.len(), what)?;
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

/// Encodes records; samples are narrowed to `f32`.
pub fn write_container(records: &[MultiLeadRecord]) -> Result<Vec<u8>, ContainerError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_len(&mut out, records.len(), "record count")?;
    for (index, record) in records.iter().enumerate() {
        let report = validate_record(record);
        if !report.is_ok() {
            return Err(ContainerError::InvalidRecord { index, report });
        }
        put_str(&mut out, &record.record_id, "record id")?;
        out.extend_from_slice(&record.sample_rate.to_le_bytes());
        put_len(&mut out, record.n_leads(), "lead count")?;
        put_len(&mut out, record.n_samples(), "sample count")?;
        for name in &record.lead_names {
            put_str(&mut out, name, "lead name")?;
        }
        for lead in &record.leads {
            for &v in lead {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn load_container(path: &std::path::Path) -> Result<Vec<MultiLeadRecord>, ContainerError> {
    read_container(&std::fs::read(path)?)
}

pub fn save_container(path: &std::path::Path, records: &[MultiLeadRecord]) -> Result<(), ContainerError> {
    std::fs::write(path, write_container(records)?)?;
    Ok(())
}

/// Reads one record from CSV: a header row of lead names, then one row per
/// sample with one column per lead.
pub fn read_csv_record<R: Read>(
    reader: R,
    record_id: &str,
    sample_rate: f64,
) -> Result<MultiLeadRecord, ContainerError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let lead_names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut leads = vec![Vec::new(); lead_names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (lead, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| ContainerError::CsvFormat(format!("row {row}, column {lead}: {field:?} is not a number")))?;
            leads[lead].push(v);
        }
    }
    let record = MultiLeadRecord {
        record_id: record_id.to_string(),
        sample_rate,
        lead_names,
        leads,
    };
    let report = validate_record(&record);
    if !report.is_ok() {
        return Err(ContainerError::InvalidRecord { index: 0, report });
    }
    Ok(record)
}

pub fn write_csv_record<W: Write>(writer: W, record: &MultiLeadRecord) -> Result<(), ContainerError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(&record.lead_names)?;
    for t in 0..record.n_samples() {
        wtr.write_record(record.leads.iter().map(|l| l[t].to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_list_is_header_only() {
        let bytes = write_container(&[]).unwrap();
        assert_eq!(bytes, b"MWV1\0\0\0\0");
        assert!(read_container(&bytes).unwrap().is_empty());
    }

    #[test]
    fn zero_record_round_trips() {
        let r = MultiLeadRecord::from_leads("z", vec![vec![0.0; 4]; 2]).unwrap();
        let bytes = write_container(std::slice::from_ref(&r)).unwrap();
        assert_eq!(read_container(&bytes).unwrap(), vec![r]);
        // 8 header + (4+1 id) + 8 + 4 + 4 + 2*(4+2) names + 32 samples
        assert_eq!(bytes.len(), 8 + 5 + 16 + 12 + 32);
    }

    #[test]
    fn distinct_decode_errors() {
        let r = MultiLeadRecord::from_leads("z", vec![vec![1.0; 4]; 2]).unwrap();
        let bytes = write_container(&[r]).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_container(&bad), Err(ContainerError::BadMagic(_))));

        assert!(matches!(read_container(&bytes[..10]), Err(ContainerError::Truncated { .. })));
        assert!(matches!(read_container(&bytes[..2]), Err(ContainerError::Truncated { .. })));

        let cut = &bytes[..bytes.len() - 4];
        assert!(matches!(
            read_container(cut),
            Err(ContainerError::SampleCountMismatch { leads: 2, samples: 4, needed: 32, available: 28, .. })
        ));

        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(read_container(&extra), Err(ContainerError::TrailingBytes(1))));
    }

    #[test]
    fn csv_round_trip() {
        let r = MultiLeadRecord::new(
            "c",
            250.0,
            vec!["I".into(), "II".into()],
            vec![vec![0.1, -2.5, 3.0], vec![1e-7, 4.0, 5.5]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv_record(&mut buf, &r).unwrap();
        assert!(buf.starts_with(b"I,II\n"));
        let back = read_csv_record(buf.as_slice(), "c", 250.0).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_rejects_text() {
        let err = read_csv_record("a,b\n1,x\n2,3\n".as_bytes(), "c", 1.0).unwrap_err();
        assert!(matches!(err, ContainerError::CsvFormat(_)));
    }
}
