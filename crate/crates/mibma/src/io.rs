//! CSV readers and writers. Every float is written with 17 significant digits
//! so values round-trip exactly.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use mibma_core::metrics::MetricsRow;
use mibma_core::{Dataset, Family, FitResult, MIOutput, Matrix, PosteriorModelDist};

use crate::error::CliError;

/// `{:.16e}` formatting: 17 significant digits, exact round trip.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Names of the parameter slots: `beta0..beta{p}` then `log_sigma2`.
pub fn param_names(p_free: usize, dispersion: bool) -> Vec<String> {
    let mut names: Vec<String> = (0..=p_free).map(|j| format!("beta{j}")).collect();
    if dispersion {
        names.push("log_sigma2".to_string());
    }
    names
}

/// Reads a sample with header columns `y, delta, pi, x1..xp` (any order).
///
/// `y` may be empty or `NA` where `delta = 0`.
pub fn read_dataset(path: &Path, family: Family) -> Result<Dataset, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{}: missing required column '{name}'",
                    path.display()
                ))
            })
    };
    let (iy, idelta, ipi) = (find("y")?, find("delta")?, find("pi")?);
    let mut xcols = Vec::new();
    for j in 1.. {
        match headers.iter().position(|h| h.trim() == format!("x{j}")) {
            Some(i) => xcols.push(i),
            None => break,
        }
    }

    let bad =
        |row: usize, what: &str| CliError::Usage(format!("{}: row {row}: {what}", path.display()));
    let parse = |s: &str, row: usize, col: &str| -> Result<f64, CliError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(row, &format!("cannot parse {col} value '{s}'")))
    };
    let (mut x, mut y, mut delta, mut pi) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let row = row + 1;
        let d = match rec.get(idelta).map(str::trim) {
            Some("1") => true,
            Some("0") => false,
            other => return Err(bad(row, &format!("delta must be 0 or 1, got {other:?}"))),
        };
        let raw_y = rec.get(iy).unwrap_or("").trim();
        let yv = if !d && (raw_y.is_empty() || raw_y.eq_ignore_ascii_case("na")) {
            f64::NAN
        } else {
            parse(raw_y, row, "y")?
        };
        x.push(1.0);
        for &c in &xcols {
            x.push(parse(rec.get(c).unwrap_or(""), row, &headers[c])?);
        }
        y.push(yv);
        delta.push(d);
        pi.push(parse(rec.get(ipi).unwrap_or(""), row, "pi")?);
    }
    let n = y.len();
    let x = Matrix::from_vec(n, xcols.len() + 1, x).map_err(|e| CliError::Usage(e.to_string()))?;
    Dataset::new(x, y, delta, pi, family)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Writes a sample in the format read by [`read_dataset`].
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec!["y".to_string(), "delta".to_string(), "pi".to_string()];
    header.extend((1..=data.p_free()).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..data.n() {
        let observed = data.delta()[i];
        let mut rec = vec![
            if observed {
                fmt_float(data.y()[i])
            } else {
                String::new()
            },
            u8::from(observed).to_string(),
            fmt_float(data.pi()[i]),
        ];
        rec.extend(data.x().row(i)[1..].iter().map(|&v| fmt_float(v)));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

pub fn write_metrics(path: &Path, scenario: &str, rows: &[MetricsRow]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "scenario",
        "method",
        "target",
        "cp",
        "var",
        "bias",
        "mse",
        "tpr",
        "tnr",
        "replications",
        "failures",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            scenario.to_string(),
            r.method.name().to_string(),
            r.target_name().to_string(),
            fmt_float(r.cp),
            fmt_float(r.var),
            fmt_float(r.bias),
            fmt_float(r.mse),
            fmt_float(r.tpr),
            fmt_float(r.tnr),
            r.replications.to_string(),
            r.failures.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// `param, estimate, std_error` for each slot of the fit.
pub fn write_fit(path: &Path, fit: &FitResult) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["param", "estimate", "std_error"])
        .map_err(|e| csv_err(path, e))?;
    let names = param_names(fit.kappa.p_free(), fit.kappa.has_dispersion());
    for ((name, est), se) in names.iter().zip(&fit.theta_hat).zip(fit.std_errors()) {
        w.write_record([name.clone(), fmt_float(*est), fmt_float(se)])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// `mask, probability` rows of a model distribution.
pub fn write_posterior(path: &Path, dist: &PosteriorModelDist) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["mask", "probability"])
        .map_err(|e| csv_err(path, e))?;
    for (m, lp) in dist.entries() {
        w.write_record([m.to_hex(), fmt_float(lp.exp())])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// Pooled estimates: `param, estimate, v_mi, std_error`.
pub fn write_pooled(path: &Path, out: &MIOutput) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["param", "estimate", "v_mi", "std_error"])
        .map_err(|e| csv_err(path, e))?;
    let kappa = out.draws[0].kappa;
    let names = param_names(kappa.p_free(), kappa.has_dispersion());
    for (k, name) in names.iter().enumerate() {
        let v = out.pooled.v_mi[(k, k)];
        w.write_record([
            name.clone(),
            fmt_float(out.pooled.theta_mi[k]),
            fmt_float(v),
            fmt_float(v.max(0.0).sqrt()),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// `covariate, inclusion_frequency` across the retained imputation models.
pub fn write_inclusion(path: &Path, out: &MIOutput) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["covariate", "inclusion_frequency"])
        .map_err(|e| csv_err(path, e))?;
    for (j, f) in out.inclusion_frequencies().iter().enumerate() {
        w.write_record([format!("x{}", j + 1), fmt_float(*f)])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}

/// One row per retained draw (`draw, mask, θ…`) followed by a `pooled` row.
/// With `label`, a leading `method` column carries it.
pub fn write_draws<W: Write>(
    w: &mut csv::Writer<W>,
    label: Option<&str>,
    out: &MIOutput,
    header: bool,
) -> csv::Result<()> {
    let kappa = out.draws[0].kappa;
    if header {
        let mut h: Vec<String> = Vec::new();
        if label.is_some() {
            h.push("method".into());
        }
        h.push("draw".into());
        h.push("mask".into());
        h.extend(param_names(kappa.p_free(), kappa.has_dispersion()));
        w.write_record(&h)?;
    }
    let prefix = |rec: &mut Vec<String>| {
        if let Some(l) = label {
            rec.push(l.to_string());
        }
    };
    for (m, d) in out.draws.iter().enumerate() {
        let mut rec = Vec::new();
        prefix(&mut rec);
        rec.push((m + 1).to_string());
        rec.push(d.kappa.to_hex());
        rec.extend(d.theta.iter().map(|&v| fmt_float(v)));
        w.write_record(&rec)?;
    }
    let mut rec = Vec::new();
    prefix(&mut rec);
    rec.push("pooled".into());
    rec.push(String::new());
    rec.extend(out.pooled.theta_mi.iter().map(|&v| fmt_float(v)));
    w.write_record(&rec)
}

pub fn write_draws_file(path: &Path, outputs: &[(&str, &MIOutput)]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    for (i, (label, out)) in outputs.iter().enumerate() {
        write_draws(&mut w, Some(label), out, i == 0).map_err(|e| csv_err(path, e))?;
    }
    finish(w, path)
}
