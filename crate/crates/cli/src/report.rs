//! CSV outputs.

use std::io::Write;

use sinkbss::evaluation::{EvalReport, Histogram};
use sinkbss::separation::IterationStats;

pub const EVAL_HEADER: [&str; 8] = [
    "source",
    "permuted_to",
    "sdr_db",
    "sir_db",
    "sar_db",
    "delta_sdr_db",
    "delta_sir_db",
    "delta_sar_db",
];

/// Rows are 1-based estimate and reference indices.
pub fn write_eval<W: Write>(out: W, report: &EvalReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVAL_HEADER)?;
    for s in &report.sources {
        let d = s.delta();
        w.write_record([
            (s.estimate + 1).to_string(),
            (s.reference + 1).to_string(),
            s.scores.sdr.to_string(),
            s.scores.sir.to_string(),
            s.scores.sar.to_string(),
            d.sdr.to_string(),
            d.sir.to_string(),
            d.sar.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histograms<W: Write>(out: W, hists: &[Histogram]) -> csv::Result<()> {
    let per_band = hists.iter().any(|h| h.freq_bin.is_some());
    let mut w = csv::Writer::from_writer(out);
    if per_band {
        w.write_record(["bin_left", "bin_right", "probability", "freq_bin"])?;
    } else {
        w.write_record(["bin_left", "bin_right", "probability"])?;
    }
    for h in hists {
        for (k, p) in h.probabilities.iter().enumerate() {
            let mut row = vec![h.edges[k].to_string(), h.edges[k + 1].to_string(), p.to_string()];
            if let Some(f) = h.freq_bin {
                row.push(f.to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format: one row per pair of frequency bins.
pub fn write_interband<W: Write>(out: W, corr: &[f64], bins: usize) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["freq_bin_a", "freq_bin_b", "correlation"])?;
    for a in 0..bins {
        for b in 0..bins {
            w.write_record([a.to_string(), b.to_string(), corr[a * bins + b].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `wall_ms` is left empty when `timing` is `None`.
pub fn write_trace<W: Write>(out: W, trace: &[IterationStats], timing: Option<&[f64]>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "objective", "wall_ms"])?;
    for (i, s) in trace.iter().enumerate() {
        let ms = timing.map_or(String::new(), |t| format!("{:.3}", t[i]));
        w.write_record([s.iteration.to_string(), s.objective.to_string(), ms])?;
    }
    w.flush()?;
    Ok(())
}
