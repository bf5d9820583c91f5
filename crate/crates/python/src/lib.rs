//! Python bindings. Audio crosses the boundary as a list of floats plus a
//! sample rate; configs are passed as the same `key = value` text the CLI reads.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use ::distok::audio::AudioBuffer;
use ::distok::codec::TokenStream;
use ::distok::config::RunConfig;
use ::distok::{detector, evalkit, quant};

fn err(e: ::distok::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_config(text: Option<&str>) -> PyResult<RunConfig> {
    text.map_or_else(|| Ok(RunConfig::default()), |t| RunConfig::parse(t).map_err(err))
}

fn buffer(samples: Vec<f64>, sample_rate: u32) -> PyResult<AudioBuffer> {
    AudioBuffer::new(samples, sample_rate).map_err(err)
}

/// Boundary detector.
#[pyclass(name = "Detector", unsendable)]
struct PyDetector(detector::Detector);

#[pymethods]
impl PyDetector {
    /// Freshly initialized (untrained) detector.
    #[new]
    #[pyo3(signature = (config=None, seed=0))]
    fn new(config: Option<&str>, seed: u64) -> PyResult<Self> {
        let cfg = run_config(config)?;
        Ok(Self(detector::Detector::new(&cfg.detector, seed).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (path, config=None))]
    fn load(path: PathBuf, config: Option<&str>) -> PyResult<Self> {
        let cfg = run_config(config)?;
        Ok(Self(detector::Detector::load(&cfg.detector, &path).map_err(err)?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    /// Interior boundary frame indices for `samples`.
    fn detect(&self, samples: Vec<f64>) -> PyResult<Vec<usize>> {
        Ok(self.0.detect(&samples).map_err(err)?.indices().to_vec())
    }

    /// Raw frame-to-frame dissimilarity trace.
    fn dissimilarity(&self, samples: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.dissimilarity(&samples).map_err(err)
    }

    /// Samples per detector frame.
    #[getter]
    fn hop(&self) -> usize {
        self.0.config().hop()
    }
}

/// Parsed `.dtok` token stream.
#[pyclass(name = "TokenStream", unsendable)]
struct PyTokenStream(TokenStream);

#[pymethods]
impl PyTokenStream {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self(TokenStream::from_bytes(data).map_err(err)?))
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self(TokenStream::read(&path).map_err(err)?))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_bytes())
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.0.write(&path).map_err(err)
    }

    fn tokens(&self) -> Vec<u64> {
        self.0.tokens()
    }

    /// Segment lengths in codec frames.
    fn lengths(&self) -> Vec<usize> {
        self.0.lengths()
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.0.header.sample_rate
    }

    #[getter]
    fn sample_count(&self) -> u64 {
        self.0.header.utterance_sample_count
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.0.header.variant.name()
    }

    fn tkr(&self) -> PyResult<f64> {
        Ok(evalkit::rates::to_f64(evalkit::stream_tkr(&self.0).map_err(err)?))
    }

    fn bps(&self) -> PyResult<f64> {
        Ok(evalkit::rates::to_f64(evalkit::stream_bps_payload(&self.0).map_err(err)?))
    }

    fn __len__(&self) -> usize {
        self.0.records.len()
    }

    fn __repr__(&self) -> String {
        let h = &self.0.header;
        format!(
            "TokenStream(variant={}, segments={}, samples={}, sample_rate={})",
            h.variant,
            self.0.records.len(),
            h.utterance_sample_count,
            h.sample_rate
        )
    }
}

/// Segment-level codec.
#[pyclass(name = "Codec", unsendable)]
struct PyCodec(::distok::codec::Codec);

#[pymethods]
impl PyCodec {
    #[new]
    #[pyo3(signature = (config=None, seed=0))]
    fn new(config: Option<&str>, seed: u64) -> PyResult<Self> {
        let cfg = run_config(config)?;
        Ok(Self(::distok::codec::Codec::new(&cfg.codec, seed).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (path, config=None))]
    fn load(path: PathBuf, config: Option<&str>) -> PyResult<Self> {
        let cfg = run_config(config)?;
        Ok(Self(::distok::codec::Codec::load(&cfg.codec, &path).map_err(err)?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.0.config().sample_rate
    }

    fn encode(&self, detector: &PyDetector, samples: Vec<f64>) -> PyResult<PyTokenStream> {
        let audio = buffer(samples, self.0.config().sample_rate)?;
        Ok(PyTokenStream(self.0.encode(&detector.0, &audio).map_err(err)?))
    }

    fn decode(&self, stream: &PyTokenStream) -> PyResult<Vec<f64>> {
        Ok(self.0.decode(&stream.0).map_err(err)?.into_samples())
    }
}

#[pyfunction]
fn compose_token(digits: Vec<u32>, levels: u32) -> PyResult<u64> {
    quant::compose_token(&digits, levels).map_err(err)
}

#[pyfunction]
fn decompose_token(token: u64, levels: u32, groups: usize) -> PyResult<Vec<u32>> {
    quant::decompose_token(token, levels, groups).map_err(err)
}

/// Bounded scalar quantization: returns (values, indices).
#[pyfunction]
fn fsq_quantize(x: Vec<f64>, levels: u32) -> PyResult<(Vec<f64>, Vec<u32>)> {
    quant::fsq_quantize(&x, levels).map_err(err)
}

#[pyfunction]
fn mel_error(reference: Vec<f64>, degraded: Vec<f64>, sample_rate: u32) -> PyResult<f64> {
    evalkit::mel_error(&buffer(reference, sample_rate)?, &buffer(degraded, sample_rate)?).map_err(err)
}

#[pyfunction]
fn stft_distance(reference: Vec<f64>, degraded: Vec<f64>, sample_rate: u32) -> PyResult<f64> {
    evalkit::stft_distance(&buffer(reference, sample_rate)?, &buffer(degraded, sample_rate)?).map_err(err)
}

#[pyfunction]
fn stoi(clean: Vec<f64>, degraded: Vec<f64>, sample_rate: u32) -> PyResult<f64> {
    evalkit::stoi(&buffer(clean, sample_rate)?, &buffer(degraded, sample_rate)?).map_err(err)
}

/// Returns (samples, sample_rate).
#[pyfunction]
fn read_wav(path: PathBuf) -> PyResult<(Vec<f64>, u32)> {
    let a = ::distok::audio::read_wav(&path).map_err(err)?;
    let rate = a.sample_rate();
    Ok((a.into_samples(), rate))
}

#[pyfunction]
fn write_wav(path: PathBuf, samples: Vec<f64>, sample_rate: u32) -> PyResult<()> {
    ::distok::audio::write_wav(&buffer(samples, sample_rate)?, &path).map_err(err)
}

/// Canonical text of a config (defaults filled in).
#[pyfunction]
#[pyo3(signature = (config=None))]
fn config_text(config: Option<&str>) -> PyResult<String> {
    Ok(run_config(config)?.to_text())
}

#[pymodule]
fn distok(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDetector>()?;
    m.add_class::<PyCodec>()?;
    m.add_class::<PyTokenStream>()?;
    m.add_function(wrap_pyfunction!(compose_token, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_token, m)?)?;
    m.add_function(wrap_pyfunction!(fsq_quantize, m)?)?;
    m.add_function(wrap_pyfunction!(mel_error, m)?)?;
    m.add_function(wrap_pyfunction!(stft_distance, m)?)?;
    m.add_function(wrap_pyfunction!(stoi, m)?)?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(config_text, m)?)?;
    Ok(())
}
