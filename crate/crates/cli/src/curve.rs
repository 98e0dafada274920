//! BER-vs-Eb/N0 curves aggregated over seeds, and their CSV form.

/// One aggregated grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub ebn0_db: f64,
    /// Mean BER across seeds.
    pub ber: f64,
    /// Sample standard deviation across seeds; absent for a single seed.
    pub ber_std: Option<f64>,
    /// Seed count behind this point.
    pub n: usize,
    /// True when no seed observed a single bit error.
    pub zero_errors: bool,
}

/// A full evaluated curve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BerCurve {
    pub points: Vec<CurvePoint>,
}

pub const CURVE_CSV_HEADER: &str = "ebn0_db,ber,ber_std,n,flag";

impl BerCurve {
    /// Aggregates per-seed BER measurements at one grid point.
    pub fn push_samples(&mut self, ebn0_db: f64, bers: &[f64], total_errors: u64) {
        let n = bers.len();
        let mean = bers.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| {
            let var = bers.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            var.sqrt()
        });
        self.points.push(CurvePoint {
            ebn0_db,
            ber: mean,
            ber_std: std,
            n,
            zero_errors: total_errors == 0,
        });
    }

    pub fn to_csv_string(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from(CURVE_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let std = p.ber_std.map(|s| s.to_string()).unwrap_or_default();
            let flag = if p.zero_errors { "zero_errors" } else { "" };
            let _ = writeln!(out, "{},{},{},{},{}", p.ebn0_db, p.ber, std, p.n, flag);
        }
        out
    }
}
