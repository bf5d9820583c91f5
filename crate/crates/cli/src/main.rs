use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use distok::audio::{read_wav, write_wav, AudioBuffer};
use distok::codec::{train_codec, Codec, TokenStream};
use distok::config::RunConfig;
use distok::corpus::{load_manifest, split_held_out, tone_corpus, write_corpus, ToneCorpusConfig};
use distok::detector::{train_detector, Detector, LossRecord};
use distok::evalkit::{
    codebook_utilization, evaluate_utterance, rates::to_f64, stream_bps_payload, stream_tkr, MetricReport,
};

#[derive(Parser)]
#[command(name = "distok", version, about = "Segment-level speech tokenizer")]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the boundary detector; writes a checkpoint and `<out>.loss.csv`.
    TrainDetector {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the codec against a trained detector.
    TrainCodec {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        detector: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Encode a WAV file into a `.dtok` token stream.
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        detector: PathBuf,
        #[arg(long)]
        codec: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a `.dtok` token stream back to a WAV file.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        codec: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode and decode every manifest entry and write a metrics report.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        detector: PathBuf,
        #[arg(long)]
        codec: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Score the input against itself instead of the reconstruction.
        /// Rates still come from the encoded stream.
        #[arg(long)]
        passthrough: bool,
    },
    /// Codebook utilization over a directory of `.dtok` streams; writes a
    /// JSON report and `<report>.csv` with the top code frequencies.
    Analyze {
        #[arg(long)]
        streams: PathBuf,
        /// Vocabulary size; defaults to the one implied by the stream headers.
        #[arg(long)]
        vocab: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Write a synthetic corpus of concatenated tones plus its manifest.
    MakeTones {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the effective configuration with every key.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_losses(path: &Path, history: &[LossRecord]) -> Result<()> {
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut csv = String::from("step,train_loss,held_out_loss\n");
    for r in history {
        csv.push_str(&format!("{},{},{}\n", r.step, fmt(r.train_loss), fmt(r.held_out_loss)));
    }
    fs::write(path, csv).with_context(|| format!("writing {}", path.display()))
}

fn load_split(manifest: &Path, cfg: &RunConfig) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let utts = load_manifest(manifest, cfg.codec.sample_rate)?;
    if utts.is_empty() {
        bail!("manifest {} lists no audio", manifest.display());
    }
    let samples: Vec<Vec<f64>> = utts.into_iter().map(|(_, a)| a.into_samples()).collect();
    let (train, held) = split_held_out(&samples, cfg.held_out_every);
    info!("{} training and {} held-out utterances", train.len(), held.len());
    Ok((train, held))
}

fn read_audio(path: &Path, rate: u32) -> Result<AudioBuffer> {
    let audio = read_wav(path)?;
    if audio.sample_rate() != rate {
        return Ok(distok::audio::resample_linear(&audio, rate)?);
    }
    Ok(audio)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainDetector {
            manifest,
            config,
            out,
            seed,
        } => {
            let cfg = load_config(config.as_deref())?;
            let (train, held) = load_split(&manifest, &cfg)?;
            let trained = train_detector(&cfg.detector, &cfg.detector_training, &train, &held, seed)?;
            trained.detector.save(&out)?;
            write_losses(&with_suffix(&out, ".loss.csv"), &trained.history)?;
            println!("wrote {}", out.display());
        }
        Command::TrainCodec {
            manifest,
            detector,
            config,
            out,
            seed,
        } => {
            let cfg = load_config(config.as_deref())?;
            let det = Detector::load(&cfg.detector, &detector)?;
            let (train, held) = load_split(&manifest, &cfg)?;
            let trained = train_codec(&cfg.codec, &cfg.codec_training, &det, &train, &held, seed)?;
            trained.codec.save(&out)?;
            write_losses(&with_suffix(&out, ".loss.csv"), &trained.history)?;
            println!("wrote {}", out.display());
        }
        Command::Encode {
            input,
            detector,
            codec,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let det = Detector::load(&cfg.detector, &detector)?;
            let codec = Codec::load(&cfg.codec, &codec)?;
            let audio = read_audio(&input, cfg.codec.sample_rate)?;
            let stream = codec.encode(&det, &audio)?;
            stream.write(&out)?;
            let (tkr, bps) = if audio.is_empty() {
                (0.0, 0.0)
            } else {
                (to_f64(stream_tkr(&stream)?), to_f64(stream_bps_payload(&stream)?))
            };
            println!("segments={} tkr={tkr} bps={bps}", stream.records.len());
        }
        Command::Decode {
            input,
            codec,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let codec = Codec::load(&cfg.codec, &codec)?;
            let stream = TokenStream::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let audio = codec.decode(&stream)?;
            write_wav(&audio, &out)?;
            println!("wrote {} ({} samples)", out.display(), audio.len());
        }
        Command::Eval {
            manifest,
            detector,
            codec,
            config,
            report,
            passthrough,
        } => {
            let cfg = load_config(config.as_deref())?;
            let det = Detector::load(&cfg.detector, &detector)?;
            let codec = Codec::load(&cfg.codec, &codec)?;
            let mut rows = Vec::new();
            for (path, audio) in load_manifest(&manifest, cfg.codec.sample_rate)? {
                let stream = codec.encode(&det, &audio)?;
                let recon = if passthrough { audio.clone() } else { codec.decode(&stream)? };
                let id = path.display().to_string();
                rows.push(evaluate_utterance(&id, &audio, &recon, &stream).with_context(|| format!("evaluating {id}"))?);
            }
            let r = MetricReport::new(rows)?;
            r.write(&report)?;
            let a = &r.aggregate;
            println!(
                "utterances={} mel_error={} stft_distance={} stoi={} tkr={} bps={}",
                a.utterances,
                a.mel_error,
                a.stft_distance,
                a.stoi.map_or("n/a".into(), |s| s.to_string()),
                a.tkr,
                a.bps_payload
            );
        }
        Command::Analyze {
            streams,
            vocab,
            config,
            report,
        } => {
            let cfg = load_config(config.as_deref())?;
            let mut paths: Vec<PathBuf> = fs::read_dir(&streams)
                .with_context(|| format!("listing {}", streams.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            paths.retain(|p| p.extension().is_some_and(|e| e == "dtok"));
            paths.sort();
            if paths.is_empty() {
                bail!("no .dtok files in {}", streams.display());
            }
            let parsed = paths
                .iter()
                .map(|p| TokenStream::read(p).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let vocab = match vocab {
                Some(v) => v,
                None => parsed[0]
                    .header
                    .token_bound()
                    .context("stream vocabulary exceeds 64 bits; pass --vocab")?,
            };
            let tokens: Vec<Vec<u64>> = parsed.iter().map(TokenStream::tokens).collect();
            let u = codebook_utilization(tokens.iter().map(Vec::as_slice), vocab)?;
            let json = serde_json::to_string_pretty(&u)?;
            fs::write(&report, json + "\n").with_context(|| format!("writing {}", report.display()))?;
            let csv = with_suffix(&report, ".csv");
            fs::write(&csv, u.frequency_csv(cfg.eval.top_k)).with_context(|| format!("writing {}", csv.display()))?;
            println!(
                "streams={} tokens={} used={} utilization={}",
                parsed.len(),
                u.total_tokens,
                u.used_count,
                u.utilization_rate
            );
        }
        Command::MakeTones { out, count, seed } => {
            let utts = tone_corpus(&ToneCorpusConfig::default(), count, seed)?;
            let audio: Vec<AudioBuffer> = utts.into_iter().map(|u| u.audio).collect();
            let manifest = write_corpus(&out, &audio)?;
            println!("wrote {}", manifest.display());
        }
        Command::Config { config } => {
            print!("{}", load_config(config.as_deref())?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::new().parse_filters(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
