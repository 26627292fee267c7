mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use roomtune::geometry::Axis;

use crate::config::{parse_band, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "roomtune",
    version,
    about = "Room modes, wall-tuning bounds, FDTD cavity simulation and spectral analysis"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Config file of `key = value` lines; keys are the long flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Speed of sound, m/s [default: 343].
    #[arg(long, global = true)]
    speed_of_sound: Option<f64>,
    /// Just-noticeable frequency difference, Hz [default: 3].
    #[arg(long, global = true)]
    jnd_hz: Option<f64>,
    /// Analysis band LO:HI in Hz [default: 20:150].
    #[arg(long, global = true, value_parser = parse_band)]
    band: Option<roomtune::spectral::Band>,
    /// Directory for reports and data files [default: .].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Run the FDTD step loop on one thread.
    #[arg(long, global = true)]
    serial: bool,
    /// Chamber table (label,lx_cm,ly_cm,lz_cm) replacing the bundled one.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Grid spacing, m [default: 0.05].
    #[arg(long, global = true)]
    dx: Option<f64>,
    /// Courant number [default: 1/sqrt(3)].
    #[arg(long, global = true)]
    courant: Option<f64>,
    /// Simulated duration, s [default: 4].
    #[arg(long, global = true)]
    duration: Option<f64>,
    /// Minimum peak prominence, dB [default: 10].
    #[arg(long, global = true)]
    prominence: Option<f64>,
}

impl GlobalArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        macro_rules! over {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        over!(
            speed_of_sound,
            jnd_hz,
            band,
            out_dir,
            dx,
            courant,
            duration,
            prominence
        );
        if self.dataset.is_some() {
            cfg.dataset = self.dataset.clone();
        }
        cfg.serial |= self.serial;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pick {
    /// Peaks on the unsmoothed spectrum.
    Raw,
    /// Peaks on the Savitzky-Golay smoothed spectrum.
    Smoothed,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct RoomArgs {
    /// Chamber label from the dataset (all three walls must be known).
    #[arg(long)]
    chamber: Option<String>,
    /// Box dimensions LX,LY,LZ in meters.
    #[arg(long, value_parser = parse_triple)]
    room: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
pub struct PlacementArgs {
    /// Source position as fractions of the air region, FX,FY,FZ [default: 0,0,0].
    #[arg(long, value_parser = parse_triple)]
    source: Option<[f64; 3]>,
    /// Receiver position as fractions; repeat for several [default: 1,1,1].
    #[arg(long, value_parser = parse_triple)]
    receiver: Vec<[f64; 3]>,
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{s}': {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("'{s}' needs three comma-separated numbers"))
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List box modes of the chambers up to a frequency.
    Modes {
        /// Chamber labels [default: every chamber].
        #[arg(long, value_delimiter = ',')]
        chambers: Vec<String>,
        /// Highest frequency, Hz.
        #[arg(long, default_value_t = 100.0)]
        f_max: f64,
    },
    /// Associate peaks with chamber modes and compare with the reference table.
    Table1 {
        /// Peak frequencies, Hz [default: the eight tabulated peaks].
        #[arg(long, value_delimiter = ',')]
        peaks: Vec<f64>,
    },
    /// Simulate a box room or a closed mesh and analyse its response.
    Simulate {
        #[command(flatten)]
        room: SimRoomArgs,
        #[command(flatten)]
        placement: PlacementArgs,
        #[arg(long, value_enum, default_value_t = Pick::Raw)]
        pick: Pick,
    },
    /// Move one wall of a box room and compare the spectra.
    Perturb {
        #[command(flatten)]
        room: RoomArgs,
        #[command(flatten)]
        placement: PlacementArgs,
        /// Wall to move: x, y or z.
        #[arg(long)]
        axis: Axis,
        /// New wall length, m.
        #[arg(long)]
        length: f64,
        /// Highest mode frequency in the shift summary, Hz.
        #[arg(long, default_value_t = 100.0)]
        f_max: f64,
    },
    /// Turn a recorded exponential sweep into an impulse response.
    Deconvolve {
        /// Recording, .wav or .csv (time_s,pressure).
        #[arg(long)]
        recording: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        f1: f64,
        #[arg(long, default_value_t = 22_500.0)]
        f2: f64,
        /// Sweep length, s.
        #[arg(long, default_value_t = 45.0)]
        sweep_duration: f64,
        /// Silence after the sweep, s; also the impulse response length.
        #[arg(long, default_value_t = 17.0)]
        tail: f64,
        /// Out-of-band magnitude floor relative to the sweep peak, dB.
        #[arg(long, default_value_t = -120.0, allow_hyphen_values = true)]
        regularization_db: f64,
        #[arg(long, value_enum, default_value_t = Pick::Smoothed)]
        pick: Pick,
    },
    /// Compare consecutive peak ratios with the 10:9 and 9:8 whole tones.
    Ratios {
        /// Ascending peak frequencies, Hz [default: the nine prominent peaks].
        #[arg(long, value_delimiter = ',')]
        peaks: Vec<f64>,
        /// Deviation counted as conforming, cents.
        #[arg(long, default_value_t = 30.0)]
        tolerance_cents: f64,
    },
    /// Spectrum (and optionally spectrogram) of an impulse response.
    Spectrum {
        /// Impulse response, .wav or .csv.
        #[arg(long)]
        ir: PathBuf,
        /// Spectrogram window, s.
        #[arg(long)]
        window: Option<f64>,
        /// Spectrogram hop, s [default: window / 4].
        #[arg(long)]
        hop: Option<f64>,
    },
    /// Detect peaks in an impulse response or a spectrum CSV.
    Peaks {
        #[command(flatten)]
        input: PeakInput,
        #[arg(long, value_enum, default_value_t = Pick::Smoothed)]
        pick: Pick,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SimRoomArgs {
    #[arg(long)]
    chamber: Option<String>,
    #[arg(long, value_parser = parse_triple)]
    room: Option<[f64; 3]>,
    /// Closed triangle mesh, ASCII STL or OBJ, meters.
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PeakInput {
    /// Impulse response, .wav or .csv.
    #[arg(long)]
    ir: Option<PathBuf>,
    /// Spectrum CSV (frequency_hz,magnitude_db).
    #[arg(long)]
    spectrum: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.global.resolve()?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::io(format!("{}: {e}", cfg.out_dir.display())))?;
    match cli.command {
        Command::Modes { chambers, f_max } => commands::modes(&cfg, &chambers, f_max),
        Command::Table1 { peaks } => commands::table1(&cfg, &peaks),
        Command::Simulate {
            room,
            placement,
            pick,
        } => commands::simulate(&cfg, &room, &placement, pick),
        Command::Perturb {
            room,
            placement,
            axis,
            length,
            f_max,
        } => commands::perturb(&cfg, &room, &placement, axis, length, f_max),
        Command::Deconvolve {
            recording,
            f1,
            f2,
            sweep_duration,
            tail,
            regularization_db,
            pick,
        } => commands::deconvolve(
            &cfg,
            &recording,
            [f1, f2, sweep_duration, tail],
            regularization_db,
            pick,
        ),
        Command::Ratios {
            peaks,
            tolerance_cents,
        } => commands::ratios(&cfg, &peaks, tolerance_cents),
        Command::Spectrum { ir, window, hop } => commands::spectrum(&cfg, &ir, window, hop),
        Command::Peaks { input, pick } => commands::peaks(&cfg, &input, pick),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
