//! Time-tag files: a 16-byte header (8-byte magic, u32 version, u32
//! reserved) followed by little-endian records of `u8` detector id and
//! `u64` time in picoseconds, ordered by time. A CSV variant has the
//! columns `detector,time_ps`.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use super::{StreamMetadata, TimestampStream};
use crate::error::{Error, Result};

pub const TIMETAG_MAGIC: [u8; 8] = *b"MOLGTTAG";
const VERSION: u32 = 1;

fn merged(streams: &[&TimestampStream]) -> Vec<(u64, u8)> {
    let mut all: Vec<(u64, u8)> =
        streams.iter().flat_map(|s| s.timestamps.iter().map(move |&t| (t, s.detector_id))).collect();
    all.sort_unstable();
    all
}

pub fn write_timetags(streams: &[&TimestampStream], out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(&TIMETAG_MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    for (t, d) in merged(streams) {
        out.write_all(&[d])?;
        out.write_all(&t.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_timetags_csv(streams: &[&TimestampStream], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "detector,time_ps")?;
    for (t, d) in merged(streams) {
        writeln!(out, "{d},{t}")?;
    }
    Ok(())
}

/// Streams per detector id, ascending. The duration of every stream is
/// the last time tag in the file.
fn split(records: Vec<(u8, u64)>, generator: &str) -> Result<Vec<TimestampStream>> {
    let end = records.iter().map(|r| r.1).max().unwrap_or(0);
    let mut by: BTreeMap<u8, Vec<u64>> = BTreeMap::new();
    for (d, t) in records {
        by.entry(d).or_default().push(t);
    }
    by.into_iter()
        .map(|(d, mut ts)| {
            ts.sort_unstable();
            let meta = StreamMetadata { seed: 0, generator: generator.into(), parameters: BTreeMap::new() };
            TimestampStream::new(d, ts, end, meta).map_err(|e| e.context(format!("detector {d}")))
        })
        .collect()
}

pub fn read_timetags(input: &mut impl Read) -> Result<Vec<TimestampStream>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::Format(format!("reading time tags: {e}")))?;
    if bytes.len() < 16 || bytes[..8] != TIMETAG_MAGIC {
        return Err(Error::Format("not a time-tag file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported time-tag version {version}")));
    }
    let body = &bytes[16..];
    if body.len() % 9 != 0 {
        return Err(Error::Format(format!("truncated record at byte {}", 16 + body.len() / 9 * 9)));
    }
    let records =
        body.chunks_exact(9).map(|r| (r[0], u64::from_le_bytes(r[1..9].try_into().expect("8 bytes")))).collect();
    split(records, "time-tag file")
}

pub fn read_timetags_csv(input: &mut impl BufRead) -> Result<Vec<TimestampStream>> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Format(format!("reading time tags: {e}")))?;
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("detector")) {
            continue;
        }
        let parse = || -> Option<(u8, u64)> {
            let (d, t) = line.split_once(',')?;
            Some((d.trim().parse().ok()?, t.trim().parse().ok()?))
        };
        records.push(parse().ok_or_else(|| Error::Format(format!("line {}: expected detector,time_ps", n + 1)))?);
    }
    split(records, "time-tag csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(id: u8, ts: Vec<u64>) -> TimestampStream {
        TimestampStream::new(id, ts, 100, StreamMetadata::default()).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let a = stream(1, vec![3, 10, 99]);
        let b = stream(2, vec![4, 10]);
        let mut buf = Vec::new();
        write_timetags(&[&a, &b], &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 5 * 9);
        assert_eq!(&buf[..8], b"MOLGTTAG");
        let back = read_timetags(&mut buf.as_slice()).unwrap();
        assert_eq!(back[0].timestamps, a.timestamps);
        assert_eq!(back[1].timestamps, b.timestamps);
        assert_eq!(back[1].detector_id, 2);
        buf.pop();
        assert!(read_timetags(&mut buf.as_slice()).is_err());
        assert!(read_timetags(&mut &b"nonsense-header!"[..]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let a = stream(1, vec![3, 10]);
        let mut buf = Vec::new();
        write_timetags_csv(&[&a], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "detector,time_ps\n1,3\n1,10\n");
        let back = read_timetags_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(back[0].timestamps, vec![3, 10]);
        assert!(read_timetags_csv(&mut &b"detector,time_ps\n1;2\n"[..]).is_err());
    }
}
