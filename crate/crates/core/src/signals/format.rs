//! Recording persistence.
//!
//! Two layouts share one JSON header:
//!
//! * directory: `header.json` plus either `channels.csv` + `imu.csv`
//!   (`encoding = "csv"`) or `payload.bin` (`encoding = "f64le"`);
//! * container file: the header serialized on the first line, a `\n`,
//!   then the little-endian `f64` payload.
//!
//! The binary payload is channel-major: every biopotential channel in header
//! order, then the IMU x, y and z axes. Both encodings round-trip exactly.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChannelRole, Imu, Recording, SeizureAnnotation};
use crate::error::{CoreError, Result};

const FORMAT_TAG: &str = "earpipe-recording";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Csv,
    #[default]
    F64le,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Keep annotations shorter than the minimum event length (warns instead of failing).
    pub allow_short_events: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    patient_id: String,
    sample_rate: f64,
    start_time: f64,
    channels: Vec<String>,
    channel_lens: Vec<usize>,
    imu_rate: f64,
    imu_len: usize,
    annotations: Vec<(f64, f64, String)>,
    encoding: Encoding,
}

impl Header {
    fn of(rec: &Recording, encoding: Encoding) -> Header {
        Header {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            patient_id: rec.patient_id.clone(),
            sample_rate: rec.sample_rate,
            start_time: rec.start_time,
            channels: rec.channels.iter().map(|(r, _)| r.name().to_string()).collect(),
            channel_lens: rec.channels.iter().map(|(_, s)| s.len()).collect(),
            imu_rate: rec.imu.rate,
            imu_len: rec.imu.len(),
            annotations: rec
                .annotations
                .iter()
                .map(|a| (a.onset, a.offset, a.seizure_type.clone()))
                .collect(),
            encoding,
        }
    }

    fn roles(&self, source: &str) -> Result<Vec<ChannelRole>> {
        if self.format != FORMAT_TAG {
            return Err(CoreError::parse(
                format!("{source}: format"),
                format!("expected \"{FORMAT_TAG}\", found \"{}\"", self.format),
            ));
        }
        if self.channel_lens.len() != self.channels.len() {
            return Err(CoreError::parse(
                format!("{source}: channel_lens"),
                format!(
                    "{} lengths declared for {} channels",
                    self.channel_lens.len(),
                    self.channels.len()
                ),
            ));
        }
        self.channels
            .iter()
            .enumerate()
            .map(|(i, name)| {
                ChannelRole::from_name(name).ok_or_else(|| {
                    CoreError::parse(
                        format!("{source}: channels[{i}]"),
                        format!("unknown channel role \"{name}\""),
                    )
                })
            })
            .collect()
    }

    fn annotations(&self) -> Vec<SeizureAnnotation> {
        self.annotations
            .iter()
            .map(|(on, off, ty)| SeizureAnnotation::new(*on, *off, ty.clone()))
            .collect()
    }
}

/// Writes `rec`. CSV output is a directory; binary output is a single container file.
pub fn save_recording(rec: &Recording, path: impl AsRef<Path>, encoding: Encoding) -> Result<()> {
    let path = path.as_ref();
    let header = Header::of(rec, encoding);
    match encoding {
        Encoding::Csv => {
            fs::create_dir_all(path)?;
            fs::write(path.join("header.json"), serde_json::to_string_pretty(&header)?)?;
            write_columns_csv(
                &path.join("channels.csv"),
                &header.channels,
                &rec.channels.iter().map(|(_, s)| s.as_slice()).collect::<Vec<_>>(),
            )?;
            write_columns_csv(
                &path.join("imu.csv"),
                &["x".to_string(), "y".to_string(), "z".to_string()],
                &[&rec.imu.x, &rec.imu.y, &rec.imu.z],
            )?;
        }
        Encoding::F64le => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)?;
                }
            }
            let mut out = std::io::BufWriter::new(fs::File::create(path)?);
            out.write_all(serde_json::to_string(&header)?.as_bytes())?;
            out.write_all(b"\n")?;
            write_payload(&mut out, rec)?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn load_recording(path: impl AsRef<Path>) -> Result<Recording> {
    load_recording_with(path, LoadOptions::default())
}

pub fn load_recording_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Recording> {
    let path = path.as_ref();
    let (header, channels, imu) = if path.is_dir() {
        let header_path = path.join("header.json");
        let text = fs::read_to_string(&header_path)?;
        let header: Header = serde_json::from_str(&text).map_err(|e| {
            CoreError::parse(
                format!("header.json line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        let roles = header.roles("header.json")?;
        let (channels, imu) = match header.encoding {
            Encoding::Csv => {
                let cols = read_columns_csv(&path.join("channels.csv"), &header.channels)?;
                let channels = roles.into_iter().zip(cols).collect();
                let axes = ["x".to_string(), "y".to_string(), "z".to_string()];
                let mut imu_cols = read_columns_csv(&path.join("imu.csv"), &axes)?;
                let z = imu_cols.pop().unwrap_or_default();
                let y = imu_cols.pop().unwrap_or_default();
                let x = imu_cols.pop().unwrap_or_default();
                (channels, Imu::new(header.imu_rate, x, y, z))
            }
            Encoding::F64le => {
                let mut reader = BufReader::new(fs::File::open(path.join("payload.bin"))?);
                read_payload(&mut reader, &header, roles, 0)?
            }
        };
        (header, channels, imu)
    } else {
        let mut reader = BufReader::new(fs::File::open(path)?);
        let mut line = Vec::new();
        reader.read_until(b'\n', &mut line)?;
        if line.last() != Some(&b'\n') {
            return Err(CoreError::parse("byte 0", "container header not terminated by newline"));
        }
        let header: Header = serde_json::from_slice(&line[..line.len() - 1]).map_err(|e| {
            CoreError::parse(format!("header column {}", e.column()), e.to_string())
        })?;
        let roles = header.roles("header")?;
        let (channels, imu) = read_payload(&mut reader, &header, roles, line.len())?;
        (header, channels, imu)
    };
    let annotations = header.annotations();
    let mut rec = Recording {
        patient_id: header.patient_id,
        sample_rate: header.sample_rate,
        channels,
        imu,
        annotations,
        start_time: header.start_time,
    };
    if rec.imu.rate == 0.0 && rec.imu.is_empty() {
        rec.imu.rate = header.imu_rate;
    }
    rec.validate(opts.allow_short_events)?;
    Ok(rec)
}

fn write_payload(out: &mut impl Write, rec: &Recording) -> Result<()> {
    let series = rec
        .channels
        .iter()
        .map(|(_, s)| s.as_slice())
        .chain([rec.imu.x.as_slice(), rec.imu.y.as_slice(), rec.imu.z.as_slice()]);
    for s in series {
        for v in s {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

type Channels = Vec<(ChannelRole, Vec<f64>)>;

fn read_payload(
    reader: &mut impl Read,
    header: &Header,
    roles: Vec<ChannelRole>,
    base_offset: usize,
) -> Result<(Channels, Imu)> {
    let mut offset = base_offset;
    let mut read_series = |n: usize, what: &str| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; n * 8];
        reader.read_exact(&mut buf).map_err(|_| {
            CoreError::parse(
                format!("byte {offset}"),
                format!("payload truncated while reading {what} ({n} values expected)"),
            )
        })?;
        offset += buf.len();
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    };
    let mut channels = Vec::with_capacity(roles.len());
    for (role, &n) in roles.into_iter().zip(&header.channel_lens) {
        channels.push((role, read_series(n, role.name())?));
    }
    let x = read_series(header.imu_len, "imu x")?;
    let y = read_series(header.imu_len, "imu y")?;
    let z = read_series(header.imu_len, "imu z")?;
    let mut rest = [0u8; 1];
    if reader.read(&mut rest)? != 0 {
        return Err(CoreError::parse(
            format!("byte {offset}"),
            "trailing bytes after declared payload",
        ));
    }
    Ok((channels, Imu::new(header.imu_rate, x, y, z)))
}

fn write_columns_csv(path: &Path, names: &[String], cols: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(names).map_err(csv_err(path))?;
    let rows = cols.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut record = Vec::with_capacity(cols.len());
    for i in 0..rows {
        record.clear();
        record.extend(cols.iter().map(|c| c.get(i).map_or(String::new(), |v| format!("{v:?}"))));
        w.write_record(&record).map_err(csv_err(path))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads named columns; a column ends at its first empty cell.
fn read_columns_csv(path: &Path, expected: &[String]) -> Result<Vec<Vec<f64>>> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(CoreError::parse(
            format!("{name} line 1"),
            format!("columns {found:?} do not match header {expected:?}"),
        ));
    }
    let mut cols = vec![Vec::new(); expected.len()];
    let mut ended = vec![false; expected.len()];
    for (row, rec) in r.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(csv_err(path))?;
        for (j, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(j).unwrap_or("");
            if cell.is_empty() {
                ended[j] = true;
                continue;
            }
            if ended[j] {
                return Err(CoreError::parse(
                    format!("{name} line {line} column {}", j + 1),
                    "value after end of column",
                ));
            }
            let v: f64 = cell.trim().parse().map_err(|_| {
                CoreError::parse(
                    format!("{name} line {line} column {}", j + 1),
                    format!("not a number: \"{cell}\""),
                )
            })?;
            col.push(v);
        }
    }
    Ok(cols)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CoreError + '_ {
    move |e| {
        let location = match e.position() {
            Some(p) => format!("{} line {}", path.display(), p.line()),
            None => path.display().to_string(),
        };
        CoreError::parse(location, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Recording {
        let ramp: Vec<f64> = (0..250).map(|i| i as f64 * 0.001).collect();
        Recording::new(
            "p01",
            250.0,
            vec![
                (ChannelRole::MixedLeft, ramp.clone()),
                (ChannelRole::MixedRight, ramp.iter().map(|v| -v).collect()),
            ],
            Imu::empty(50.0),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn minimal_file_has_one_second() {
        let dir = tempfile::tempdir().unwrap();
        for enc in [Encoding::Csv, Encoding::F64le] {
            let p = dir.path().join(format!("rec_{enc:?}"));
            save_recording(&minimal(), &p, enc).unwrap();
            let back = load_recording(&p).unwrap();
            assert_eq!(back.duration(), 1.0);
            assert_eq!(back, minimal());
        }
    }

    #[test]
    fn empty_annotations_serialized_as_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec");
        save_recording(&minimal(), &p, Encoding::Csv).unwrap();
        let header: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p.join("header.json")).unwrap()).unwrap();
        assert_eq!(header["annotations"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn csv_channels_of_different_length_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec");
        save_recording(&minimal(), &p, Encoding::Csv).unwrap();
        let csv_path = p.join("channels.csv");
        let text = fs::read_to_string(&csv_path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let last = lines.len() - 1;
        lines[last] = format!("{},", lines[last].split(',').next().unwrap());
        fs::write(&csv_path, lines.join("\n") + "\n").unwrap();
        let err = load_recording(&p).unwrap_err();
        assert!(matches!(err, CoreError::LengthMismatch(_)), "{err}");
    }

    #[test]
    fn unknown_role_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec");
        save_recording(&minimal(), &p, Encoding::Csv).unwrap();
        let hp = p.join("header.json");
        let text = fs::read_to_string(&hp).unwrap().replace("MixedRight", "Bogus");
        fs::write(&hp, text).unwrap();
        match load_recording(&p).unwrap_err() {
            CoreError::Parse { location, .. } => assert!(location.contains("channels[1]")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn truncated_container_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec.bin");
        save_recording(&minimal(), &p, Encoding::F64le).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 16);
        fs::write(&p, bytes).unwrap();
        match load_recording(&p).unwrap_err() {
            CoreError::Parse { location, .. } => assert!(location.starts_with("byte ")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn malformed_header_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rec.bin");
        fs::write(&p, b"{not json\n").unwrap();
        assert!(matches!(load_recording(&p).unwrap_err(), CoreError::Parse { .. }));
    }
}
