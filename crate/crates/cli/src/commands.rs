use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use roomtune::dataset::{
    diff_table1, table1_expected, DiffTolerance, PROMINENT_PEAKS_HZ, TABLE1_PEAKS_HZ,
};
use roomtune::fdtd::{run_perturbation_experiment, simulate_grid, Placement};
use roomtune::geometry::{box_to_grid, parse_mesh, voxelize, Axis, BoxRoom, OccupancyGrid};
use roomtune::io;
use roomtune::modal::{
    associate, enumerate_modes, mode_frequency, ratio_analysis, sensitivity, AssociationRow,
    Extents, Mode,
};
use roomtune::spectral::{
    find_peaks, smooth, spectrogram, spectrum as ir_spectrum, Peak, Spectrum,
};
use roomtune::sweep::{deconvolve as sweep_deconvolve, SweepSpec};
use roomtune::ImpulseResponse;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::{PeakInput, Pick, PlacementArgs, RoomArgs, SimRoomArgs};

/// Bin spacing above which neighbouring tabulated peaks (3.8 Hz apart at
/// the closest) fall into adjacent bins or closer.
const COARSE_DF_HZ: f64 = 1.9;

/// Collects output paths and writes the metadata record last.
struct Run<'a> {
    cfg: &'a RunConfig,
    command: &'static str,
    outputs: Vec<PathBuf>,
    warnings: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, command: &'static str) -> Self {
        Self {
            cfg,
            command,
            outputs: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.cfg.out_dir.join(name);
        self.outputs.push(p.clone());
        p
    }

    fn warn(&mut self, message: String) {
        eprintln!("warning: {message}");
        self.warnings.push(message);
    }

    fn finish(self, args: Value, results: Value) -> Result<(), CliError> {
        let path = self.cfg.out_dir.join(format!("{}.json", self.command));
        let record = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.cfg.to_json(),
            "args": args,
            "outputs": self.outputs,
            "warnings": self.warnings,
            "results": results,
        });
        io::write_json(&path, &record)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn kind(mode: &Mode) -> &'static str {
    match mode.index.order() {
        1 => "axial",
        2 => "tangential",
        _ => "oblique",
    }
}

pub fn modes(cfg: &RunConfig, labels: &[String], f_max: f64) -> Result<(), CliError> {
    if !(f_max.is_finite() && f_max > 0.0) {
        return Err(CliError::validation(format!(
            "f-max must be positive, got {f_max}"
        )));
    }
    let ds = cfg.dataset()?;
    let chambers = if labels.is_empty() {
        ds.chambers().to_vec()
    } else {
        ds.select(labels)?
    };
    let mut run = Run::new(cfg, "modes");
    let mut rows = Vec::new();
    let mut counts = serde_json::Map::new();
    for ch in &chambers {
        let modes = enumerate_modes(ch, cfg.speed_of_sound, f_max);
        println!(
            "chamber {}: {} modes up to {f_max} Hz",
            ch.label(),
            modes.len()
        );
        counts.insert(ch.label().to_string(), json!(modes.len()));
        for m in &modes {
            rows.push(vec![
                m.chamber.clone(),
                m.index.to_string(),
                kind(m).to_string(),
                format!("{:.3}", m.frequency),
            ]);
        }
    }
    io::write_table(
        &run.path("modes.csv"),
        &["chamber", "mode", "kind", "frequency_hz"],
        &rows,
    )?;
    run.finish(
        json!({ "chambers": labels, "f_max": f_max }),
        json!({ "modes": counts }),
    )
}

/// Aligned text rendering of association rows.
pub fn table_text(rows: &[AssociationRow]) -> String {
    let mut out = format!(
        "{:>9}  {:>7}  {:>9}  {:>13}  {}\n",
        "Peak (Hz)", "Chamber", "Mode", "Modal f (Hz)", "Wall (cm) ± bound (cm)"
    );
    for r in rows {
        let walls: Vec<String> = r
            .bounds
            .iter()
            .map(|b| format!("{:.0} ± {:.1}", b.wall_cm, b.bound_cm))
            .collect();
        let _ = writeln!(
            out,
            "{:>9.1}  {:>7}  {:>9}  {:>13.1}  {}",
            r.peak_hz,
            r.chamber,
            r.mode.to_string(),
            r.modal_freq_hz,
            walls.join(", ")
        );
    }
    out
}

pub fn table1(cfg: &RunConfig, peaks: &[f64]) -> Result<(), CliError> {
    let peaks: Vec<f64> = if peaks.is_empty() {
        TABLE1_PEAKS_HZ.to_vec()
    } else {
        peaks.to_vec()
    };
    let ds = cfg.dataset()?;
    let rows = associate(&peaks, ds.chambers(), cfg.speed_of_sound, cfg.jnd()?);
    let mut run = Run::new(cfg, "table1");

    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .flat_map(|r| {
            r.bounds.iter().map(move |b| {
                vec![
                    format!("{:.1}", r.peak_hz),
                    r.chamber.clone(),
                    r.mode.to_string(),
                    format!("{:.2}", r.modal_freq_hz),
                    format!("{:.0}", b.wall_cm),
                    format!("{:.2}", b.bound_cm),
                ]
            })
        })
        .collect();
    io::write_table(
        &run.path("table1.csv"),
        &[
            "peak_hz",
            "chamber",
            "mode",
            "modal_freq_hz",
            "wall_cm",
            "bound_cm",
        ],
        &csv_rows,
    )?;
    let text = table_text(&rows);
    io::write_text(&run.path("table1.txt"), &text)?;
    print!("{text}");

    // compare only against reference rows for the peaks asked about
    let expected: Vec<_> = table1_expected()
        .into_iter()
        .filter(|e| peaks.iter().any(|p| (p - e.peak_hz).abs() < 1e-6))
        .collect();
    let diffs = diff_table1(&rows, &expected, DiffTolerance::default());
    let mut diff_text = format!("{} difference(s) from the reference table\n", diffs.len());
    for d in &diffs {
        let _ = writeln!(diff_text, "  {d}");
    }
    io::write_text(&run.path("table1_diff.txt"), &diff_text)?;
    print!("{diff_text}");

    run.finish(
        json!({ "peaks": peaks }),
        json!({
            "rows": rows.len(),
            "bounds": csv_rows.len(),
            "differences": diffs.iter().map(ToString::to_string).collect::<Vec<_>>(),
        }),
    )
}

fn box_room(
    cfg: &RunConfig,
    chamber: &Option<String>,
    room: &Option<[f64; 3]>,
) -> Result<BoxRoom, CliError> {
    if let Some(label) = chamber {
        let ds = cfg.dataset()?;
        let ch = ds.select(&[label])?.remove(0);
        return ch.box_room().ok_or_else(|| {
            CliError::validation(format!("chamber {label} has an unknown wall length"))
        });
    }
    let [x, y, z] = room.ok_or_else(|| CliError::validation("no room given"))?;
    Ok(BoxRoom::new("room", x, y, z)?)
}

fn placement(args: &PlacementArgs) -> Placement {
    let default = Placement::default();
    Placement {
        source: args.source.unwrap_or(default.source),
        receivers: if args.receiver.is_empty() {
            default.receivers
        } else {
            args.receiver.clone()
        },
    }
}

fn pick_peaks(cfg: &RunConfig, s: &Spectrum, pick: Pick) -> Result<Vec<Peak>, CliError> {
    Ok(find_peaks(s, &cfg.peak_options(pick == Pick::Smoothed))?)
}

fn print_peaks(peaks: &[Peak], room: Option<&BoxRoom>, c: f64, f_max: f64) -> Vec<Value> {
    let modes = room
        .map(|r| enumerate_modes(r, c, f_max))
        .unwrap_or_default();
    println!(
        "{:>12}  {:>10}  {:>10}  {:>8}  nearest box mode",
        "freq (Hz)", "level (dB)", "prom (dB)", "fwhm"
    );
    peaks
        .iter()
        .map(|p| {
            let near = modes
                .iter()
                .min_by(|a, b| (a.frequency - p.frequency).abs().total_cmp(&(b.frequency - p.frequency).abs()));
            let note = near.map_or(String::new(), |m| {
                format!("{} {:.2} Hz ({:+.2}%)", m.index, m.frequency, 100.0 * (p.frequency - m.frequency) / m.frequency)
            });
            println!(
                "{:>12.3}  {:>10.2}  {:>10.2}  {:>8.3}  {note}",
                p.frequency, p.magnitude, p.prominence, p.fwhm
            );
            json!({
                "frequency_hz": p.frequency,
                "magnitude_db": p.magnitude,
                "prominence_db": p.prominence,
                "fwhm_hz": p.fwhm,
                "nearest_mode": near.map(|m| json!({ "mode": m.index.to_string(), "frequency_hz": m.frequency })),
            })
        })
        .collect()
}

fn write_ir(run: &mut Run, stem: &str, ir: &ImpulseResponse) -> Result<(), CliError> {
    let wav = run.path(&format!("{stem}.wav"));
    io::write_wav(&wav, ir)?;
    run.outputs.push(io::sidecar_path(&wav));
    io::write_ir_csv(&run.path(&format!("{stem}.csv")), ir)?;
    Ok(())
}

pub fn simulate(
    cfg: &RunConfig,
    room: &SimRoomArgs,
    place: &PlacementArgs,
    pick: Pick,
) -> Result<(), CliError> {
    let (grid, boxed): (OccupancyGrid, Option<BoxRoom>) = match &room.mesh {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            let mesh =
                parse_mesh(&text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            (voxelize(&mesh, cfg.dx)?, None)
        }
        None => {
            let b = box_room(cfg, &room.chamber, &room.room)?;
            (box_to_grid(&b, cfg.dx)?, Some(b))
        }
    };
    let mut run = Run::new(cfg, "simulate");
    let exp = cfg.experiment(placement(place));
    let sim = exp.sim_config(&grid);
    let ir = simulate_grid(&grid, &exp)?;
    let s = ir_spectrum(&ir, cfg.band)?;
    if s.df() > COARSE_DF_HZ {
        run.warn(format!(
            "spectral resolution {:.2} Hz is too coarse to separate the tabulated peaks; use a duration of at least {:.2} s",
            s.df(),
            1.0 / COARSE_DF_HZ
        ));
    }
    let peaks = pick_peaks(cfg, &s, pick)?;
    write_ir(&mut run, "simulate_ir", &ir)?;
    io::write_spectrum_csv(&run.path("simulate_spectrum.csv"), &s)?;
    io::write_text(
        &run.path("simulate_spectrum.gp"),
        &io::gnuplot_spectra(&[("spectrum", &s)]),
    )?;
    io::write_peaks_csv(&run.path("simulate_peaks.csv"), &peaks)?;
    println!(
        "grid {:?} cells, {} air, {} samples at {:.3} Hz, df = {:.4} Hz",
        grid.dims(),
        grid.air_count(),
        ir.len(),
        ir.sample_rate(),
        s.df()
    );
    let listed = print_peaks(&peaks, boxed.as_ref(), cfg.speed_of_sound, cfg.band.hi);
    run.finish(
        json!({
            "room": boxed.as_ref().map(|b| json!({ "label": b.label(), "dims_m": b.dims() })),
            "mesh": room.mesh,
            "placement": exp.placement,
            "sim": sim,
            "pick": format!("{pick:?}").to_lowercase(),
        }),
        json!({
            "grid_dims": grid.dims(),
            "air_cells": grid.air_count(),
            "sample_rate_hz": ir.sample_rate(),
            "dt_s": 1.0 / ir.sample_rate(),
            "samples": ir.len(),
            "df_hz": s.df(),
            "peaks": listed,
        }),
    )
}

fn nearest_within(peaks: &[Peak], f: f64, tol: f64) -> Option<f64> {
    peaks
        .iter()
        .map(|p| p.frequency)
        .filter(|p| (p - f).abs() <= tol)
        .min_by(|a, b| (a - f).abs().total_cmp(&(b - f).abs()))
}

pub fn perturb(
    cfg: &RunConfig,
    room: &RoomArgs,
    place: &PlacementArgs,
    axis: Axis,
    length: f64,
    f_max: f64,
) -> Result<(), CliError> {
    let base = box_room(cfg, &room.chamber, &room.room)?;
    let exp = cfg.experiment(placement(place));
    let out = run_perturbation_experiment(&base, axis, length, &exp)?;
    let mut run = Run::new(cfg, "perturb");
    io::write_spectrum_csv(&run.path("perturb_before.csv"), &out.before)?;
    io::write_spectrum_csv(&run.path("perturb_after.csv"), &out.after)?;
    io::write_text(
        &run.path("perturb_spectra.gp"),
        &io::gnuplot_spectra(&[("before", &out.before), ("after", &out.after)]),
    )?;

    let before = pick_peaks(cfg, &out.before, Pick::Raw)?;
    let after = pick_peaks(cfg, &out.after, Pick::Raw)?;
    let c = cfg.speed_of_sound;
    let dl = length - base.length(axis);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    println!(
        "{} {axis}: {:.3} m -> {length:.3} m",
        base.label(),
        base.length(axis)
    );
    println!(
        "{:>9}  {:>9}  {:>9}  {:>9}  {:>8}  {:>10}  {:>9}",
        "mode", "model", "before", "after", "shift", "linear", "model new"
    );
    for m in enumerate_modes(&base, c, f_max.min(cfg.band.hi)) {
        if !cfg.band.contains(m.frequency) {
            continue;
        }
        let model_after = mode_frequency(&out.perturbed, m.index, c)?;
        let linear = sensitivity(&base, m.index, axis, c)? * dl;
        let (Some(b), Some(a)) = (
            nearest_within(&before, m.frequency, 0.01 * m.frequency),
            nearest_within(&after, model_after, 0.01 * model_after),
        ) else {
            continue;
        };
        println!(
            "{:>9}  {:>9.2}  {:>9.2}  {:>9.2}  {:>+8.2}  {:>+10.2}  {:>9.2}",
            m.index.to_string(),
            m.frequency,
            b,
            a,
            a - b,
            linear,
            model_after
        );
        rows.push(vec![
            m.index.to_string(),
            format!("{:.3}", m.frequency),
            format!("{b:.3}"),
            format!("{a:.3}"),
            format!("{:.3}", a - b),
            format!("{linear:.3}"),
            format!("{model_after:.3}"),
        ]);
        summary.push(json!({
            "mode": m.index.to_string(),
            "model_before_hz": m.frequency,
            "before_hz": b,
            "after_hz": a,
            "shift_hz": a - b,
            "linear_shift_hz": linear,
            "model_after_hz": model_after,
        }));
    }
    io::write_table(
        &run.path("perturb_shifts.csv"),
        &[
            "mode",
            "model_before_hz",
            "before_hz",
            "after_hz",
            "shift_hz",
            "linear_shift_hz",
            "model_after_hz",
        ],
        &rows,
    )?;
    run.finish(
        json!({
            "room": { "label": base.label(), "dims_m": base.dims() },
            "axis": axis,
            "length_m": length,
            "f_max": f_max,
            "experiment": exp,
        }),
        json!({ "shifts": summary }),
    )
}

pub fn deconvolve(
    cfg: &RunConfig,
    recording: &Path,
    [f1, f2, duration, tail]: [f64; 4],
    regularization_db: f64,
    pick: Pick,
) -> Result<(), CliError> {
    let rec = io::read_ir(recording)?;
    let spec = SweepSpec::new(f1, f2, duration, rec.sample_rate(), tail)?;
    let ir = sweep_deconvolve(rec.samples(), &spec, regularization_db)?;
    let mut run = Run::new(cfg, "deconvolve");
    write_ir(&mut run, "deconvolve_ir", &ir)?;
    let band = cfg.band;
    let s = ir_spectrum(&ir, band)?;
    let peaks = pick_peaks(cfg, &s, pick)?;
    io::write_spectrum_csv(&run.path("deconvolve_spectrum.csv"), &s)?;
    io::write_peaks_csv(&run.path("deconvolve_peaks.csv"), &peaks)?;
    println!(
        "{}: {} samples at {} Hz -> {} sample impulse response",
        recording.display(),
        rec.len(),
        rec.sample_rate(),
        ir.len()
    );
    let listed = print_peaks(&peaks, None, cfg.speed_of_sound, band.hi);
    run.finish(
        json!({
            "recording": recording,
            "sweep": spec,
            "regularization_db": regularization_db,
            "pick": format!("{pick:?}").to_lowercase(),
        }),
        json!({ "ir_samples": ir.len(), "peaks": listed }),
    )
}

pub fn ratios(cfg: &RunConfig, peaks: &[f64], tolerance: f64) -> Result<(), CliError> {
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(CliError::validation(format!(
            "tolerance-cents must be non-negative, got {tolerance}"
        )));
    }
    let peaks: Vec<f64> = if peaks.is_empty() {
        PROMINENT_PEAKS_HZ.to_vec()
    } else {
        peaks.to_vec()
    };
    let rows = ratio_analysis(&peaks)?;
    let mut run = Run::new(cfg, "ratios");
    println!(
        "{:>8}  {:>8}  {:>8}  {:>5}  {:>8}  within {tolerance} cents",
        "f_lo", "f_hi", "ratio", "tone", "cents"
    );
    let mut table = Vec::new();
    for r in &rows {
        println!(
            "{:>8.1}  {:>8.1}  {:>8.5}  {:>5}  {:>+8.2}  {}",
            r.lower_hz,
            r.upper_hz,
            r.ratio,
            r.nearest.label(),
            r.cents,
            if r.conforms(tolerance) { "yes" } else { "no" }
        );
        table.push(vec![
            format!("{}", r.lower_hz),
            format!("{}", r.upper_hz),
            format!("{:.6}", r.ratio),
            r.nearest.label().to_string(),
            format!("{:.3}", r.cents),
            r.conforms(tolerance).to_string(),
        ]);
    }
    io::write_table(
        &run.path("ratios.csv"),
        &["f_lo", "f_hi", "ratio", "just_ratio", "cents", "conforms"],
        &table,
    )?;
    let max = rows.iter().map(|r| r.cents.abs()).fold(0.0, f64::max);
    let conforming = rows.iter().filter(|r| r.conforms(tolerance)).count();
    println!(
        "{conforming} of {} pairs within {tolerance} cents; max |deviation| {max:.2} cents",
        rows.len()
    );
    run.finish(
        json!({ "peaks": peaks, "tolerance_cents": tolerance }),
        json!({ "pairs": rows.len(), "conforming": conforming, "max_abs_cents": max }),
    )
}

pub fn spectrum(
    cfg: &RunConfig,
    path: &Path,
    window: Option<f64>,
    hop: Option<f64>,
) -> Result<(), CliError> {
    let ir = io::read_ir(path)?;
    let s = ir_spectrum(&ir, cfg.band)?;
    let smoothed = smooth(&s, cfg.savgol_window, cfg.savgol_order)?;
    let mut run = Run::new(cfg, "spectrum");
    io::write_spectrum_csv(&run.path("spectrum.csv"), &s)?;
    io::write_spectrum_csv(&run.path("spectrum_smoothed.csv"), &smoothed)?;
    io::write_text(
        &run.path("spectrum.gp"),
        &io::gnuplot_spectra(&[("raw", &s), ("smoothed", &smoothed)]),
    )?;
    let mut frames = None;
    if let Some(w) = window {
        let sg = spectrogram(&ir, w, hop.unwrap_or(w / 4.0), cfg.band)?;
        io::write_spectrogram_csv(&run.path("spectrogram.csv"), &sg)?;
        io::write_text(
            &run.path("spectrogram.gp"),
            &io::gnuplot_spectrogram("spectrogram", &sg),
        )?;
        frames = Some(sg.frames.len());
    }
    println!(
        "{}: {} bins from {:.3} Hz, df = {:.4} Hz",
        path.display(),
        s.len(),
        s.f0(),
        s.df()
    );
    run.finish(
        json!({ "ir": path, "window_s": window, "hop_s": hop }),
        json!({ "bins": s.len(), "df_hz": s.df(), "spectrogram_frames": frames }),
    )
}

pub fn peaks(cfg: &RunConfig, input: &PeakInput, pick: Pick) -> Result<(), CliError> {
    let s = match (&input.ir, &input.spectrum) {
        (Some(ir), _) => ir_spectrum(&io::read_ir(ir)?, cfg.band)?,
        (None, Some(path)) => io::read_spectrum_csv(path)?,
        (None, None) => return Err(CliError::validation("no input given")),
    };
    let found = pick_peaks(cfg, &s, pick)?;
    let mut run = Run::new(cfg, "peaks");
    io::write_peaks_csv(&run.path("peaks.csv"), &found)?;
    let listed = print_peaks(&found, None, cfg.speed_of_sound, cfg.band.hi);
    run.finish(
        json!({ "ir": input.ir, "spectrum": input.spectrum, "pick": format!("{pick:?}").to_lowercase() }),
        json!({ "peaks": listed }),
    )
}
