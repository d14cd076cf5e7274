//! CSV and manifest emission.
//!
//! Floats are written with 17 significant digits so a CSV read back gives
//! the same bits. Each CSV `<name>.csv` is paired with `<name>.manifest`
//! holding the resolved configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bound::{bound_trace, AVariant, BoundRow, BoundScenario};
use crate::config::{build_federation, BoundConfig, RunConfig};
use crate::error::Result;
use crate::trainer::{run_experiment, RoundRecord, Scenario};

pub const ROUND_COLUMNS: [&str; 9] = [
    "t",
    "participants",
    "C_t",
    "loss",
    "accuracy",
    "sig_power",
    "int_power",
    "noise_power",
    "skipped",
];

pub const BOUND_COLUMNS: [&str; 6] = ["scenario", "t", "X", "Y", "bound_dist", "bound_loss"];

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub fn write_rounds<W: Write>(records: &[RoundRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROUND_COLUMNS)?;
    for r in records {
        w.write_record([
            r.round.to_string(),
            r.participants.to_string(),
            float(r.total_weight),
            float(r.loss),
            opt(r.accuracy),
            opt(r.powers.map(|p| p.signal)),
            opt(r.powers.map(|p| p.interference)),
            opt(r.powers.map(|p| p.noise)),
            u8::from(r.skipped).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bound_rows<W: Write>(curves: &[(&str, Vec<BoundRow>)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUND_COLUMNS)?;
    for (name, rows) in curves {
        for r in rows {
            w.write_record([
                name.to_string(),
                r.t.to_string(),
                float(r.x),
                float(r.y.total()),
                float(r.dist),
                float(r.loss),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_pair(dir: &Path, name: &str, manifest: &str, csv: impl FnOnce(fs::File) -> Result<()>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.csv"));
    csv(fs::File::create(&path)?)?;
    fs::write(dir.join(format!("{name}.manifest")), manifest)?;
    Ok(path)
}

/// Runs `cfg.scenario` and writes `<out_dir>/<scenario>.csv`.
pub fn simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let fed = build_federation(cfg)?;
    let (records, _) = run_experiment(&fed, cfg.scenario_config()?)?;
    write_pair(&cfg.out_dir, cfg.scenario.name(), &cfg.manifest(), |f| write_rounds(&records, f))
}

/// Runs every scenario on the same federation. With `vary = Some((key,
/// values))` the matrix is repeated per value under `<out_dir>/<key>=<value>/`.
pub fn sweep(cfg: &RunConfig, vary: Option<(&str, &[String])>) -> Result<Vec<PathBuf>> {
    let mut configs = Vec::new();
    match vary {
        None => configs.push(cfg.clone()),
        Some((key, values)) => {
            for v in values {
                let mut c = cfg.clone();
                c.set(key, v)?;
                c.validate()?;
                c.out_dir = cfg.out_dir.join(format!("{key}={v}"));
                configs.push(c);
            }
        }
    }
    let mut paths = Vec::new();
    for c in configs {
        let fed = build_federation(&c)?;
        let results: Vec<Result<PathBuf>> = Scenario::ALL
            .par_iter()
            .map(|&scenario| {
                let sc = RunConfig { scenario, ..c.clone() };
                let (records, _) = run_experiment(&fed, sc.scenario_config()?)?;
                write_pair(&sc.out_dir, scenario.name(), &sc.manifest(), |f| write_rounds(&records, f))
            })
            .collect();
        for r in results {
            paths.push(r?);
        }
    }
    Ok(paths)
}

/// Writes `bound.csv` with the three scenario curves for the configured
/// coefficient variant, and `bound_<other variant>.csv` with the alternative.
pub fn bound(cfg: &BoundConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let other = match cfg.params.variant {
        AVariant::Plus => AVariant::Minus,
        AVariant::Minus => AVariant::Plus,
    };
    let mut paths = Vec::new();
    for (name, variant) in [("bound".to_string(), cfg.params.variant), (format!("bound_{other}"), other)] {
        let mut base = cfg.params.clone();
        base.variant = variant;
        let curves = BoundScenario::ALL
            .iter()
            .map(|s| Ok((s.name(), bound_trace(&s.apply(&base, cfg.eh_alpha))?)))
            .collect::<Result<Vec<_>>>()?;
        let manifest = BoundConfig { params: base, ..cfg.clone() }.manifest();
        paths.push(write_pair(&cfg.out_dir, &name, &manifest, |f| write_bound_rows(&curves, f))?);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ota::TermPowers;
    use std::time::Duration;

    #[test]
    fn floats_carry_seventeen_digits() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678901234567] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn round_csv_layout() {
        let rec = RoundRecord {
            round: 3,
            participants: 2,
            total_weight: 0.5,
            loss: 1.25,
            accuracy: None,
            powers: Some(TermPowers { signal: 1.0, interference: 0.5, noise: 0.25 }),
            transmit_energy: 0.0,
            skipped: false,
            wall_time: Duration::ZERO,
        };
        let mut buf = Vec::new();
        write_rounds(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ROUND_COLUMNS.join(","));
        assert!(lines[1].starts_with("3,2,5.0000000000000000e-1,1.2500000000000000e0,,1.0"));
        assert!(lines[1].ends_with(",0"));
    }
}
