use std::path::Path;

use serde::Serialize;

use super::{summarize, SweepRecord, SweepSummary};
use crate::io::{self, IoError};

#[derive(Serialize)]
struct CooperativityRow {
    index: usize,
    gamma_bar_hz: f64,
    c_r_true: f64,
    gamma_bar_hz_est: Option<f64>,
    c_r_est: Option<f64>,
    ci95_c_r: Option<f64>,
}

#[derive(Serialize)]
struct RatiosRow {
    index: usize,
    gamma_bar_hz: f64,
    gamma_ratio_true: f64,
    occupancy_ratio_true: f64,
    gamma_bar_hz_est: Option<f64>,
    gamma_ratio_est: Option<f64>,
    occupancy_ratio_cal: Option<f64>,
}

#[derive(Serialize)]
struct CoolingRow {
    index: usize,
    n_c: f64,
    gamma_bar_hz: f64,
    n_c_true: f64,
    n_ideal: f64,
    gamma_bar_hz_est: Option<f64>,
    n_c_est: Option<f64>,
    ci95_n_c: Option<f64>,
    n_c_cal: Option<f64>,
    n_plus_est: Option<f64>,
    n_minus_est: Option<f64>,
}

#[derive(Serialize)]
struct AsymmetryRow {
    index: usize,
    n_c_true: f64,
    n_c_cal: Option<f64>,
    n_c_est: Option<f64>,
    ci95_n_c: Option<f64>,
    eta_prime_est: Option<f64>,
    ci95_eta_prime: Option<f64>,
    eta_quantum: f64,
    eta_classical: f64,
}

/// The four sweep tables as CSV text plus a TOML summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportTables {
    pub cooperativity: String,
    pub ratios: String,
    pub cooling: String,
    pub asymmetry: String,
    pub summary: String,
}

impl ReportTables {
    pub const FILES: [&'static str; 5] = [
        "fig4a_cooperativity.csv",
        "fig4b_ratios.csv",
        "fig4c_cooling.csv",
        "fig4d_asymmetry.csv",
        "summary.toml",
    ];

    fn contents(&self) -> [&str; 5] {
        [
            &self.cooperativity,
            &self.ratios,
            &self.cooling,
            &self.asymmetry,
            &self.summary,
        ]
    }

    pub fn write(&self, dir: &Path) -> Result<(), IoError> {
        for (name, text) in Self::FILES.iter().zip(self.contents()) {
            io::atomic_write(&dir.join(name), text.as_bytes())?;
        }
        Ok(())
    }
}

fn csv<T: Serialize>(rows: &[T]) -> String {
    io::format_csv(rows).expect("flat rows serialize")
}

/// Builds the report tables. Output depends only on `records`.
pub fn report(records: &[SweepRecord]) -> ReportTables {
    let ratio = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        _ => None,
    };
    let cooperativity: Vec<_> = records
        .iter()
        .map(|r| CooperativityRow {
            index: r.index,
            gamma_bar_hz: r.gamma_bar_hz,
            c_r_true: r.c_r_true,
            gamma_bar_hz_est: r.gamma_bar_hz_est,
            c_r_est: r.c_r_est,
            ci95_c_r: r.ci95_c_r,
        })
        .collect();
    let ratios: Vec<_> = records
        .iter()
        .map(|r| RatiosRow {
            index: r.index,
            gamma_bar_hz: r.gamma_bar_hz,
            gamma_ratio_true: r.gamma_minus_hz / r.gamma_plus_hz,
            occupancy_ratio_true: r.n_plus_true / r.n_minus_true,
            gamma_bar_hz_est: r.gamma_bar_hz_est,
            gamma_ratio_est: ratio(r.gamma_minus_hz_est, r.gamma_plus_hz_est),
            occupancy_ratio_cal: ratio(r.n_plus_cal, r.n_minus_cal),
        })
        .collect();
    let cooling: Vec<_> = records
        .iter()
        .map(|r| CoolingRow {
            index: r.index,
            n_c: r.n_c,
            gamma_bar_hz: r.gamma_bar_hz,
            n_c_true: r.n_c_true,
            n_ideal: r.n_ideal,
            gamma_bar_hz_est: r.gamma_bar_hz_est,
            n_c_est: r.n_c_est,
            ci95_n_c: r.ci95_n_c,
            n_c_cal: r.n_c_cal,
            n_plus_est: r.n_plus_est,
            n_minus_est: r.n_minus_est,
        })
        .collect();
    let asymmetry: Vec<_> = records
        .iter()
        .map(|r| AsymmetryRow {
            index: r.index,
            n_c_true: r.n_c_true,
            n_c_cal: r.n_c_cal,
            n_c_est: r.n_c_est,
            ci95_n_c: r.ci95_n_c,
            eta_prime_est: r.eta_prime_est,
            ci95_eta_prime: r.ci95_eta_prime,
            eta_quantum: 1.0 / r.n_c_true,
            eta_classical: 0.0,
        })
        .collect();
    let summary: SweepSummary = summarize(records);
    ReportTables {
        cooperativity: csv(&cooperativity),
        ratios: csv(&ratios),
        cooling: csv(&cooling),
        asymmetry: csv(&asymmetry),
        summary: toml::to_string(&summary).expect("summary serializes"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{run_point, Scenario};

    #[test]
    fn single_record_gives_single_rows() {
        let s = Scenario::default_device();
        let r = run_point(&s, 0, 160.0).unwrap();
        let tables = report(std::slice::from_ref(&r));
        for t in [
            &tables.cooperativity,
            &tables.ratios,
            &tables.cooling,
            &tables.asymmetry,
        ] {
            assert_eq!(t.lines().count(), 2, "{t}");
        }
        assert!(tables.summary.contains("points = 1"));
        assert_eq!(report(&[r]), tables);
    }
}
