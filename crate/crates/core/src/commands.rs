//! Command implementations behind the `levsqueeze` binary. Every command
//! writes plot-ready CSV/JSON and a `manifest.json` into its output
//! directory. When a stage fails, the partial outputs are moved into
//! `failed/` next to an `error.json` naming the stage.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fit::{fit_squeezing_curve, model_lambda, FitInit, SqueezingCurve};
use crate::pipeline::{self, Analysis};
use crate::sigproc::{lorentzian_fit, welch_psd, PhaseSpaceCloud, Psd};
use crate::sim::{read_ensemble, read_trace_csv, write_ensemble_binary};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FAILED_DIR: &str = "failed";
pub const ERROR_FILE: &str = "error.json";
/// Version of the on-disk output layout.
pub const OUTPUT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1c,
    Fig1d,
    Fig2,
    Fig4a,
    Fig4b,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig1c, Figure::Fig1d, Figure::Fig2, Figure::Fig4a, Figure::Fig4b];

    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig1c => "fig1c",
            Figure::Fig1d => "fig1d",
            Figure::Fig2 => "fig2",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::validation("figure", format!("unknown figure {s:?}; expected fig1c, fig1d, fig2, fig4a or fig4b")))
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    crate_name: &'static str,
    crate_version: &'static str,
    output_format_version: u32,
    config: Option<Value>,
    seeds: Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    started_unix_s: f64,
    wall_time_s: f64,
    summary: Value,
}

/// Collects output files and writes the manifest at the end.
struct Run {
    command: String,
    out: PathBuf,
    started: Instant,
    started_unix: f64,
    outputs: Vec<String>,
    inputs: Vec<String>,
    config: Option<Value>,
    seeds: Value,
    stage: &'static str,
}

impl Run {
    fn start(command: &str, out: &Path) -> Result<Run> {
        std::fs::create_dir_all(out)?;
        Ok(Run {
            command: command.into(),
            out: out.to_path_buf(),
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0.0, |d| d.as_secs_f64()),
            outputs: Vec::new(),
            inputs: Vec::new(),
            config: None,
            seeds: Value::Null,
            stage: "setup",
        })
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.out.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.outputs.push(name.into());
        Ok(p)
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(p, text)?;
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
        let p = self.path(name)?;
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    fn with_config(&mut self, cfg: &ExperimentConfig) -> Result<()> {
        self.config = Some(cfg.to_json());
        let p = self.path("config.toml")?;
        std::fs::write(p, cfg.to_toml())?;
        Ok(())
    }

    fn finish(self, summary: Value) -> Result<Value> {
        let manifest = Manifest {
            command: &self.command,
            crate_name: env!("CARGO_PKG_NAME"),
            crate_version: env!("CARGO_PKG_VERSION"),
            output_format_version: OUTPUT_FORMAT_VERSION,
            config: self.config.clone(),
            seeds: self.seeds.clone(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            started_unix_s: self.started_unix,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            summary: summary.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.out.join(MANIFEST_FILE), text)?;
        Ok(summary)
    }

    /// Moves everything written so far into `failed/` and records the error.
    fn fail(self, err: Error) -> Error {
        let failed = self.out.join(FAILED_DIR);
        let moved: Result<()> = (|| {
            std::fs::create_dir_all(&failed)?;
            for entry in std::fs::read_dir(&self.out)? {
                let entry = entry?;
                if entry.file_name() != FAILED_DIR {
                    std::fs::rename(entry.path(), failed.join(entry.file_name()))?;
                }
            }
            let report = json!({
                "command": self.command,
                "stage": self.stage,
                "error": err.to_string(),
                "exit_code": err.exit_code(),
                "partial_outputs": self.outputs,
                "config": self.config,
            });
            std::fs::write(failed.join(ERROR_FILE), serde_json::to_string_pretty(&report)?)?;
            Ok(())
        })();
        if let Err(e) = moved {
            eprintln!("warning: could not persist failure artifacts: {e}");
        }
        err
    }
}

/// Runs `body`, turning an error into a `failed/` directory.
fn guarded(command: &str, out: &Path, body: impl FnOnce(&mut Run) -> Result<Value>) -> Result<Value> {
    let mut run = Run::start(command, out)?;
    match body(&mut run) {
        Ok(summary) => run.finish(summary),
        Err(e) => Err(run.fail(e)),
    }
}

fn series(run: &mut Run, name: &str, dt: f64, header: &[&str], cols: &[&[f64]]) -> Result<()> {
    let n = cols.first().map_or(0, |c| c.len());
    run.csv(
        name,
        header,
        (0..n).map(|k| std::iter::once(k as f64 * dt).chain(cols.iter().map(|c| c[k])).collect()),
    )
}

fn write_cloud(run: &mut Run, name: &str, cloud: &PhaseSpaceCloud) -> Result<()> {
    run.csv(name, &["x", "p"], cloud.points.iter().map(|q| vec![q[0], q[1]]))
}

fn write_analysis(run: &mut Run, a: &Analysis) -> Result<()> {
    series(run, "rms.csv", a.dt, &["t_s", "z_rms_m"], &[&a.rms])?;
    series(run, "mean.csv", a.dt, &["t_s", "z_mean_m"], &[&a.mean])?;
    for (summary, cloud) in &a.clouds {
        write_cloud(run, &format!("clouds/{}.csv", summary.label), cloud)?;
    }
    run.json("analysis.json", &json!({
        "pulse_window_s": a.pulse_window,
        "settle_samples": a.settle_samples,
        "squeezing": a.squeezing,
        "envelope": a.envelope,
        "clouds": a.cloud_summaries(),
    }))
}

/// Simulates the configured ensemble and stores it with its config.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    guarded("simulate", out, |run| {
        run.with_config(cfg)?;
        run.stage = "simulate";
        let ens = pipeline::simulate(cfg)?;
        run.seeds = json!({ "master": cfg.seed, "n_traces": ens.seeds.len() });
        run.stage = "write";
        let sidecar = write_ensemble_binary(&ens, out, "ensemble", cfg.measurement_floor_m_rthz, Some(cfg.to_json()))?;
        run.outputs.extend(["ensemble.bin".to_string(), "ensemble.json".to_string()]);
        Ok(json!({
            "ensemble": sidecar,
            "n_traces": ens.n_traces(),
            "n_samples": ens.n_samples(),
        }))
    })
}

/// Analyses a stored ensemble with the config embedded in its sidecar,
/// or `cfg` when given.
pub fn cmd_analyze(ensemble: &Path, out: &Path, cfg: Option<&ExperimentConfig>) -> Result<Value> {
    guarded("analyze", out, |run| {
        run.inputs.push(ensemble.display().to_string());
        run.stage = "load";
        let (ens, sidecar) = read_ensemble(ensemble)?;
        let cfg = match (cfg, &sidecar.config) {
            (Some(c), _) => c.clone(),
            (None, Some(v)) => {
                let c: ExperimentConfig = serde_json::from_value(v.clone())?;
                c.validate()?;
                c
            }
            (None, None) => return Err(Error::Config("ensemble has no embedded config; pass --config".into())),
        };
        run.with_config(&cfg)?;
        run.seeds = json!({ "master": sidecar.meta.master_seed });
        run.stage = "analyze";
        let window = (sidecar.meta.params.pulse_start, sidecar.meta.pulse_end);
        let a = pipeline::analyze(&cfg, &ens.traces, ens.dt, window)?;
        run.stage = "write";
        write_analysis(run, &a)?;
        Ok(json!({
            "lambda_db": a.squeezing.lambda_db,
            "envelope_gamma_rad_s": a.envelope.as_ref().map(|e| e.gamma),
        }))
    })
}

/// Settings for [`cmd_fit_psd`].
#[derive(Clone, Copy, Debug)]
pub struct PsdOptions {
    pub segment_length: usize,
    pub overlap: f64,
    /// Half-width of the fit band around the strongest peak, rad/s.
    pub fit_halfwidth: f64,
}

fn write_psd(run: &mut Run, psd: &Psd, model: impl Fn(f64) -> f64) -> Result<()> {
    run.csv(
        "psd.csv",
        &["f_hz", "psd_m2_per_hz", "fit_m2_per_hz"],
        psd.frequencies_hz
            .iter()
            .zip(&psd.density)
            .map(|(f, d)| vec![*f, *d, model(std::f64::consts::TAU * f)]),
    )
}

/// Welch PSD and Lorentzian fit of the first trace in a CSV file.
pub fn cmd_fit_psd(trace: &Path, out: &Path, opts: PsdOptions) -> Result<Value> {
    guarded("fit-psd", out, |run| {
        run.inputs.push(trace.display().to_string());
        run.stage = "load";
        let (dt, z) = read_trace_csv(trace)?;
        run.stage = "psd";
        let psd = welch_psd(&z, dt, opts.segment_length.min(z.len()), opts.overlap)?;
        let (k, _) = psd
            .density
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::domain("spectrum is empty"))?;
        let peak = std::f64::consts::TAU * psd.frequencies_hz[k];
        let (w, s) = pipeline::psd_band(&psd, peak - opts.fit_halfwidth, peak + opts.fit_halfwidth);
        run.stage = "fit";
        let fit = lorentzian_fit(&w, &s, None)?;
        run.stage = "write";
        write_psd(run, &psd, |w| fit.evaluate(w))?;
        run.json("lorentzian_fit.json", &fit)?;
        Ok(json!({ "center_rad_s": fit.center, "gamma_rad_s": fit.gamma }))
    })
}

fn write_model_curve(run: &mut Run, omega1: f64, omega2: f64, eta: f64, tau_max: f64) -> Result<()> {
    let rows = (0..=400)
        .map(|k| {
            let t = tau_max * k as f64 / 400.0;
            model_lambda(t, omega1, omega2, eta, 1.0).map(|l| vec![t, l])
        })
        .collect::<Result<Vec<_>>>()?;
    run.csv("model_curve.csv", &["tau_s", "lambda_db"], rows.into_iter())
}

/// Fits `(ω₂, η)` to a `tau_s,lambda_db[,sigma_db]` CSV.
pub fn cmd_fit_squeezing(curve: &Path, out: &Path, omega1: f64, init: FitInit) -> Result<Value> {
    guarded("fit-squeezing", out, |run| {
        run.inputs.push(curve.display().to_string());
        run.stage = "load";
        let data = SqueezingCurve::from_csv(curve)?;
        run.stage = "fit";
        let fit = fit_squeezing_curve(&data, omega1, init)?;
        run.stage = "write";
        run.json("fit.json", &fit)?;
        let tau_max = data.taus.last().copied().unwrap_or(0.0).max(std::f64::consts::PI / fit.omega2);
        write_model_curve(run, omega1, fit.omega2, fit.eta, tau_max)?;
        Ok(json!({ "omega2_rad_s": fit.omega2, "eta": fit.eta }))
    })
}

/// Runs one figure pipeline end to end.
pub fn cmd_reproduce(figure: Figure, cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    guarded(&format!("reproduce {figure}"), out, |run| {
        run.with_config(cfg)?;
        run.seeds = json!({ "master": cfg.seed });
        match figure {
            Figure::Fig1c | Figure::Fig1d | Figure::Fig2 => {
                run.stage = "simulate";
                let ens = pipeline::simulate(cfg)?;
                run.stage = "analyze";
                let a = pipeline::analyze(cfg, &ens.traces, ens.dt, pipeline::pulse_window(cfg))?;
                run.stage = "write";
                match figure {
                    Figure::Fig1c => {
                        let env: Vec<f64> = match (&a.envelope, a.envelope_start) {
                            (Some(e), Some(s)) => (0..a.rms.len())
                                .map(|k| if k < s { f64::NAN } else { e.upper_envelope((k - s) as f64 * a.dt).sqrt() })
                                .collect(),
                            _ => vec![f64::NAN; a.rms.len()],
                        };
                        series(run, "rms.csv", a.dt, &["t_s", "z_rms_m", "envelope_m"], &[&a.rms, &env])?;
                        run.json("envelope_fit.json", &a.envelope)?;
                        Ok(json!({
                            "envelope_gamma_rad_s": a.envelope.as_ref().map(|e| e.gamma),
                            "injected_gamma_rad_s": cfg.gamma_rad_s,
                        }))
                    }
                    Figure::Fig1d => {
                        series(run, "mean.csv", a.dt, &["t_s", "z_mean_m"], &[&a.mean])?;
                        let peak = pipeline::mean_peak_frequency(&a)?;
                        run.json("mean_spectrum.json", &json!({ "peak_hz": peak, "omega1_hz": cfg.omega1_rad_s / std::f64::consts::TAU }))?;
                        Ok(json!({ "mean_peak_hz": peak }))
                    }
                    _ => {
                        for (summary, cloud) in &a.clouds {
                            write_cloud(run, &format!("clouds/{}.csv", summary.label), cloud)?;
                        }
                        run.json("clouds.json", &json!({
                            "clouds": a.cloud_summaries(),
                            "squeezing": a.squeezing,
                        }))?;
                        Ok(json!({ "lambda_db": a.squeezing.lambda_db }))
                    }
                }
            }
            Figure::Fig4a => {
                run.stage = "sweep";
                let sweep = pipeline::squeezing_sweep(cfg)?;
                run.stage = "write";
                sweep.curve.to_csv(&run.path("squeezing_curve.csv")?)?;
                run.json("fit.json", &sweep.fit)?;
                run.json("sweep.json", &sweep)?;
                let tau_max = std::f64::consts::PI / sweep.fit.omega2;
                write_model_curve(run, cfg.omega1_rad_s, sweep.fit.omega2, sweep.fit.eta, tau_max)?;
                Ok(json!({
                    "omega2_rad_s": sweep.fit.omega2,
                    "eta": sweep.fit.eta,
                    "fitted_peak_db": sweep.fitted_peak_db,
                    "injected_omega2_rad_s": sweep.injected_omega2,
                    "injected_eta": sweep.injected_eta,
                }))
            }
            Figure::Fig4b => {
                run.stage = "spectrum";
                let spec = pipeline::thermal_spectrum(cfg)?;
                run.stage = "write";
                write_psd(run, &spec.psd, |w| spec.fit.evaluate(w))?;
                run.json("lorentzian_fit.json", &spec)?;
                Ok(json!({
                    "center_rad_s": spec.fit.center,
                    "gamma_rad_s": spec.fit.gamma,
                    "inferred_radius_m": spec.inferred_radius_m,
                }))
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_names_round_trip() {
        for f in Figure::ALL {
            assert_eq!(f.name().parse::<Figure>().unwrap(), f);
        }
        assert!("fig3".parse::<Figure>().is_err());
    }

    #[test]
    fn failure_moves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let err = guarded("demo", dir.path(), |run| {
            run.json("partial.json", &json!({"a": 1}))?;
            run.stage = "explode";
            Err(Error::Numerical("boom".into()))
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let failed = dir.path().join(FAILED_DIR);
        assert!(failed.join("partial.json").exists());
        assert!(!dir.path().join("partial.json").exists());
        let report: Value = serde_json::from_str(&std::fs::read_to_string(failed.join(ERROR_FILE)).unwrap()).unwrap();
        assert_eq!(report["stage"], "explode");
    }
}
