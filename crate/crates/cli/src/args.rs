use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "earpipe", version, about = "Behind-the-ear seizure detection pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

/// Config file plus flags that override individual config fields.
#[derive(Debug, Clone, Default, Args)]
pub struct Global {
    /// JSON experiment config; missing fields take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Number of synthetic patients.
    #[arg(long, global = true)]
    pub patients: Option<usize>,

    /// Window stride in seconds (1..=9).
    #[arg(long, global = true)]
    pub stride: Option<u32>,

    /// Training balance ratio, 1:k.
    #[arg(long, global = true, value_name = "1:K")]
    pub ratio: Option<String>,

    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelArg>,

    #[arg(long, global = true, value_enum)]
    pub separation: Option<MethodArg>,

    /// Motion removal before separation.
    #[arg(long, global = true, value_enum)]
    pub motion: Option<Switch>,

    #[arg(long, global = true, value_enum)]
    pub normalization: Option<NormArg>,

    /// Add the [1, 30] Hz bandpass after conditioning.
    #[arg(long, global = true, value_enum)]
    pub bandpass_baseline: Option<Switch>,

    /// Directory of recordings used instead of the synthetic corpus.
    #[arg(long, global = true, value_name = "DIR")]
    pub recordings: Option<PathBuf>,

    /// Frequency template file used instead of training on the synthetic donor.
    #[arg(long, global = true, value_name = "FILE")]
    pub templates: Option<PathBuf>,

    /// Where to write the JSON result; stdout when absent.
    #[arg(long, global = true, value_name = "FILE")]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Svm,
    Knn,
    Rfc,
    Cnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Emd,
    Nnmf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    ZScore,
    MinMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    Csv,
    F64le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Stride,
    Ratio,
    Motion,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic patient corpus to a directory.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Recording length in seconds.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, value_enum, default_value = "f64le")]
        encoding: EncodingArg,
    },
    /// Notch, detrend, outlier clip and optional bandpass of the mixed channels.
    Preprocess {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Mains frequency (50 or 60 Hz).
        #[arg(long)]
        mains: Option<f64>,
        #[arg(long, value_name = "LO,HI")]
        bandpass: Option<String>,
    },
    /// VMD motion removal against the recording's IMU.
    Denoise {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        corr_threshold: Option<f64>,
        /// Per-block mode center frequencies and correlations as CSV.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Split each mixed channel into EEG, EOG and EMG estimates.
    Separate {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Learn NNMF frequency templates from clean per-modality recordings.
    TrainTemplates {
        #[arg(long, value_name = "FILE", requires_all = ["eog", "emg"])]
        eeg: Option<PathBuf>,
        #[arg(long, value_name = "FILE", requires_all = ["eeg", "emg"])]
        eog: Option<PathBuf>,
        #[arg(long, value_name = "FILE", requires_all = ["eeg", "eog"])]
        emg: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Window separated recordings and write the feature matrix.
    Features {
        /// Separated recordings (files or CSV directories).
        #[arg(long = "in", value_name = "FILE", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Fit one classifier on a feature matrix.
    Train {
        #[arg(long, value_name = "FILE")]
        features: Option<PathBuf>,
        /// Separated recordings for the CNN, which trains on raw windows.
        #[arg(long = "in", value_name = "FILE", num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Leave-one-patient-out evaluation.
    Evaluate {
        /// Per-fold table.
        #[arg(long, value_name = "FILE")]
        folds_csv: Option<PathBuf>,
    },
    /// One evaluation per value of a configuration axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Band SNR of a recording channel, or its change after processing.
    Snr {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Processed version of the same recording.
        #[arg(long, value_name = "FILE")]
        reconstructed: Option<PathBuf>,
        /// Channel name; defaults to the first channel.
        #[arg(long)]
        channel: Option<String>,
        /// Bands as LO,HI; defaults to the EEG band.
        #[arg(long = "band", value_name = "LO,HI")]
        bands: Vec<String>,
    },
}
