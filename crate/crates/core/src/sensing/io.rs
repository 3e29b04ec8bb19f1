use std::io::{BufRead, Read, Write};

use super::TimeSeries;
use crate::error::{Result, SimError};

/// Little-endian `ODMR` tag at the start of the binary format.
pub const BINARY_MAGIC: u32 = 0x4F44_4D52;
pub const BINARY_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> SimError {
    SimError::Io {
        path: "<stream>".into(),
        source: e,
    }
}

/// Writes `t_s,value` CSV.
pub fn write_timeseries_csv<W: Write>(ts: &TimeSeries, mut w: W) -> Result<()> {
    writeln!(w, "t_s,value").map_err(io_err)?;
    for (i, v) in ts.values.iter().enumerate() {
        writeln!(w, "{:e},{:e}", ts.time(i), v).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads `t_s,value` CSV. Lines starting with `#` are skipped; the sample
/// rate is taken from the first two rows and spacing must be uniform.
pub fn read_timeseries_csv<R: BufRead>(r: R) -> Result<TimeSeries> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut header = false;
    for (ln, line) in r.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line != "t_s,value" {
                return Err(SimError::Format(format!("line {}: expected header `t_s,value`, got `{line}`", ln + 1)));
            }
            header = true;
            continue;
        }
        let mut it = line.split(',');
        let mut num = |what: &str| -> Result<f64> {
            it.next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| SimError::Format(format!("line {}: bad {what}", ln + 1)))
        };
        times.push(num("time")?);
        values.push(num("value")?);
    }
    if times.len() < 2 {
        return Err(SimError::InsufficientData("time series needs at least 2 rows".into()));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) / dt - 1.0).abs() > 1e-6) {
        return Err(SimError::Format("sample times are not uniformly spaced".into()));
    }
    let ts = TimeSeries {
        sample_rate: 1.0 / dt,
        t0_s: times[0],
        values,
    };
    ts.validate()?;
    Ok(ts)
}

/// Writes the compact binary format: magic, version, sample rate, count,
/// samples, all little-endian.
pub fn write_timeseries_binary<W: Write>(ts: &TimeSeries, mut w: W) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + 8 * ts.len());
    buf.extend_from_slice(&BINARY_MAGIC.to_le_bytes());
    buf.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    buf.extend_from_slice(&ts.sample_rate.to_le_bytes());
    buf.extend_from_slice(&(ts.len() as u64).to_le_bytes());
    for v in &ts.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn read_timeseries_binary<R: Read>(mut r: R) -> Result<TimeSeries> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() < 24 {
        return Err(SimError::Format("binary time series shorter than its header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    if u32_at(0) != BINARY_MAGIC {
        return Err(SimError::Format(format!("bad magic 0x{:08X}", u32_at(0))));
    }
    if u32_at(4) != BINARY_VERSION {
        return Err(SimError::Format(format!("unsupported version {}", u32_at(4))));
    }
    let sample_rate = f64::from_bits(u64_at(8));
    let count = u64_at(16) as usize;
    if bytes.len() != 24 + 8 * count {
        return Err(SimError::Format(format!("expected {count} samples, file holds {} bytes of data", bytes.len() - 24)));
    }
    let values = (0..count).map(|i| f64::from_bits(u64_at(24 + 8 * i))).collect();
    let ts = TimeSeries {
        sample_rate,
        t0_s: 0.0,
        values,
    };
    ts.validate()?;
    Ok(ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TimeSeries {
        TimeSeries::new(1200.0, vec![1.5, -2.25, 3.0e-9, 0.0]).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let mut buf = Vec::new();
        write_timeseries_binary(&sample(), &mut buf).unwrap();
        assert_eq!(&buf[..4], &[0x52, 0x4D, 0x44, 0x4F]);
        assert_eq!(buf.len(), 24 + 32);
        assert_eq!(read_timeseries_binary(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn binary_rejects_corruption() {
        let mut buf = Vec::new();
        write_timeseries_binary(&sample(), &mut buf).unwrap();
        assert!(read_timeseries_binary(&buf[..buf.len() - 1]).is_err());
        buf[0] = 0;
        assert!(read_timeseries_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_timeseries_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_s,value\n"));
        let back = read_timeseries_csv(text.as_bytes()).unwrap();
        assert_eq!(back.values, sample().values);
        assert!((back.sample_rate / 1200.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(read_timeseries_csv("time,v\n0,1\n1,2\n".as_bytes()).is_err());
    }
}
