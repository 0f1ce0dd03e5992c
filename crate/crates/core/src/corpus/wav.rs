use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::audio::Waveform;
use crate::error::{Error, Result};

/// Read a RIFF WAV file. Accepts 16/24/32-bit integer PCM and 32-bit float.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav { path: path.to_path_buf(), source };
    let mut reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader.samples::<f32>().collect::<Result<_, _>>().map_err(wav_err)?,
        (SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| (v as f64 * scale) as f32))
                .collect::<Result<_, _>>()
                .map_err(wav_err)?
        }
        (fmt, bits) => {
            return Err(Error::Validation(format!(
                "{}: unsupported wav encoding {fmt:?} {bits}-bit",
                path.display()
            )))
        }
    };
    Ok(Waveform { samples, rate_hz: spec.sample_rate, channels: spec.channels })
}

/// Write 16-bit PCM. The waveform's rate and channel count are kept as is;
/// pipeline outputs are normalized beforehand.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav { path: path.to_path_buf(), source };
    let spec = WavSpec {
        channels: w.channels,
        sample_rate: w.rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in &w.samples {
        let v = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcm16_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let w = Waveform::mono((0..1600).map(|i| ((i as f32) * 0.01).sin() * 0.8).collect(), 16_000);
        write_wav(&p, &w).unwrap();
        let r = read_wav(&p).unwrap();
        assert_eq!(r.rate_hz, 16_000);
        assert_eq!(r.channels, 1);
        assert_eq!(r.samples.len(), w.samples.len());
        for (a, b) in w.samples.iter().zip(&r.samples) {
            assert!((a - b).abs() <= 0.5 / 32768.0 + 1e-7);
        }
    }

    #[test]
    fn reads_float_and_24bit() {
        let dir = tempfile::tempdir().unwrap();
        let pf = dir.path().join("f.wav");
        let spec = WavSpec { channels: 2, sample_rate: 44_100, bits_per_sample: 32, sample_format: SampleFormat::Float };
        let mut wr = WavWriter::create(&pf, spec).unwrap();
        for v in [0.5f32, -0.25, 0.125, 1.0] {
            wr.write_sample(v).unwrap();
        }
        wr.finalize().unwrap();
        let r = read_wav(&pf).unwrap();
        assert_eq!(r.channels, 2);
        assert_eq!(r.samples, vec![0.5, -0.25, 0.125, 1.0]);

        let p24 = dir.path().join("i24.wav");
        let spec = WavSpec { channels: 1, sample_rate: 16_000, bits_per_sample: 24, sample_format: SampleFormat::Int };
        let mut wr = WavWriter::create(&p24, spec).unwrap();
        wr.write_sample(1 << 22).unwrap();
        wr.write_sample(-(1 << 23)).unwrap();
        wr.finalize().unwrap();
        assert_eq!(read_wav(&p24).unwrap().samples, vec![0.5, -1.0]);
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_wav("/nonexistent/x.wav").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.wav"));
    }
}
