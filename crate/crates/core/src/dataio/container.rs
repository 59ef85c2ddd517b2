use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const RECORDING_MAGIC: &[u8; 6] = b"EGTR1\0";
pub const RECORDING_VERSION: u32 = 1;

/// Multichannel recording of one participant listening to one song.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    participant_id: String,
    song_id: u16,
    channels: usize,
    samples: usize,
    sampling_rate: f32,
    /// Channel-major: `data[c * samples + t]`.
    data: Vec<f32>,
}

impl EegRecording {
    pub fn new(
        participant_id: impl Into<String>,
        song_id: u16,
        channels: usize,
        sampling_rate: f32,
        data: Vec<f32>,
    ) -> Result<Self> {
        let participant_id = participant_id.into();
        if participant_id.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument("participant id longer than 65535 bytes".into()));
        }
        if !(sampling_rate > 0.0 && sampling_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sampling rate must be positive, got {sampling_rate}"
            )));
        }
        if channels == 0 || !data.len().is_multiple_of(channels) {
            return Err(Error::shape(
                "recording",
                format!("a multiple of {channels} channels"),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self {
            participant_id,
            song_id,
            channels,
            samples: data.len() / channels,
            sampling_rate,
            data,
        })
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn song_id(&self) -> u16 {
        self.song_id
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn sampling_rate(&self) -> f32 {
        self.sampling_rate
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * self.samples..(c + 1) * self.samples]
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples as f64 / self.sampling_rate as f64
    }

    /// Serializes into the container layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let id = self.participant_id.as_bytes();
        let mut out = Vec::with_capacity(32 + id.len() + 4 * self.data.len());
        out.extend_from_slice(RECORDING_MAGIC);
        out.extend_from_slice(&RECORDING_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.channels as u32).to_le_bytes());
        out.extend_from_slice(&(self.samples as u64).to_le_bytes());
        out.extend_from_slice(&self.sampling_rate.to_le_bytes());
        out.extend_from_slice(&(id.len() as u16).to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&self.song_id.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the container layout; `path` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(RECORDING_MAGIC.len())? != RECORDING_MAGIC {
            return Err(Error::BadMagic {
                path: path.into(),
                expected: "EGTR1\\0",
            });
        }
        let version = r.u32()?;
        if version != RECORDING_VERSION {
            return Err(Error::UnsupportedVersion {
                path: path.into(),
                what: "recording",
                version,
            });
        }
        let channels = r.u32()? as usize;
        let samples = r.u64()?;
        let sampling_rate = f32::from_le_bytes(r.array()?);
        let id_len = r.u16()? as usize;
        let participant_id = std::str::from_utf8(r.take(id_len)?)
            .map_err(|e| Error::Malformed {
                what: "recording",
                detail: format!("participant id in {} is not UTF-8: {e}", path.display()),
            })?
            .to_owned();
        let song_id = r.u16()?;

        let values = (channels as u64)
            .checked_mul(samples)
            .filter(|&v| v <= usize::MAX as u64 / 4);
        let Some(values) = values else {
            return Err(Error::DimMismatch {
                path: path.into(),
                detail: format!("{channels} x {samples} does not fit in memory"),
            });
        };
        if channels == 0 {
            return Err(Error::DimMismatch {
                path: path.into(),
                detail: "zero channels".into(),
            });
        }
        let payload = &bytes[r.pos..];
        let want = values * 4;
        if (payload.len() as u64) < want {
            return Err(Error::Truncated {
                path: path.into(),
                expected: want,
                actual: payload.len() as u64,
            });
        }
        if payload.len() as u64 > want {
            return Err(Error::DimMismatch {
                path: path.into(),
                detail: format!(
                    "header declares {channels} x {samples} values but payload holds {} bytes",
                    payload.len()
                ),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        EegRecording::new(participant_id, song_id, channels, sampling_rate, data).map_err(|e| Error::Malformed {
            what: "recording",
            detail: format!("{}: {e}", path.display()),
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.into(),
                expected: end as u64,
                actual: self.bytes.len() as u64,
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("take returns N bytes"))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
}

pub fn save_recording(rec: &EegRecording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, rec.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_recording(path: impl AsRef<Path>) -> Result<EegRecording> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EegRecording::from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EegRecording {
        let data = (0..3 * 40).map(|v| (v as f32).sin() * 1e-3).collect();
        EegRecording::new("p07", 4, 3, 125.0, data).unwrap()
    }

    #[test]
    fn bytes_round_trip() {
        let rec = sample();
        let back = EegRecording::from_bytes(&rec.to_bytes(), Path::new("x")).unwrap();
        assert_eq!(back, rec);
        let bits = |r: &EegRecording| r.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&rec));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.egtr");
        save_recording(&sample(), &path).unwrap();
        assert_eq!(load_recording(&path).unwrap(), sample());
        assert!(matches!(
            load_recording(dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn header_layout() {
        let b = sample().to_bytes();
        assert_eq!(&b[..6], b"EGTR1\0");
        assert_eq!(u32::from_le_bytes(b[6..10].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[10..14].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(b[14..22].try_into().unwrap()), 40);
        assert_eq!(f32::from_le_bytes(b[22..26].try_into().unwrap()), 125.0);
        assert_eq!(u16::from_le_bytes(b[26..28].try_into().unwrap()), 3);
        assert_eq!(&b[28..31], b"p07");
        assert_eq!(u16::from_le_bytes(b[31..33].try_into().unwrap()), 4);
        assert_eq!(b.len(), 33 + 4 * 120);
    }

    #[test]
    fn distinct_errors() {
        let p = Path::new("x");
        let good = sample().to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(EegRecording::from_bytes(&bad, p), Err(Error::BadMagic { .. })));

        let mut bad = good.clone();
        bad[6] = 2;
        assert!(matches!(
            EegRecording::from_bytes(&bad, p),
            Err(Error::UnsupportedVersion { version: 2, .. })
        ));

        let err = EegRecording::from_bytes(&good[..good.len() - 4], p).unwrap_err();
        assert!(matches!(
            err,
            Error::Truncated {
                expected: 480,
                actual: 476,
                ..
            }
        ));
        assert!(matches!(
            EegRecording::from_bytes(&good[..12], p),
            Err(Error::Truncated { .. })
        ));

        let mut bad = good.clone();
        bad.extend_from_slice(&[0; 4]);
        assert!(matches!(
            EegRecording::from_bytes(&bad, p),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn short_payload_against_full_size_header() {
        // header claims 125 x 30000 but only a second of data follows
        let rec = EegRecording::new("p", 0, 125, 125.0, vec![0.0; 125 * 125]).unwrap();
        let mut bytes = rec.to_bytes();
        bytes[14..22].copy_from_slice(&30_000u64.to_le_bytes());
        match EegRecording::from_bytes(&bytes, Path::new("x")) {
            Err(Error::Truncated { expected, .. }) => assert_eq!(expected, 125 * 30_000 * 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validates_construction() {
        assert!(EegRecording::new("p", 0, 3, 0.0, vec![0.0; 3]).is_err());
        assert!(EegRecording::new("p", 0, 0, 1.0, vec![]).is_err());
        assert!(EegRecording::new("p", 0, 2, 1.0, vec![0.0; 3]).is_err());
        let r = EegRecording::new("p", 0, 125, 125.0, vec![0.0; 125 * 30_000]).unwrap();
        assert_eq!(r.duration_seconds(), 240.0);
    }
}
