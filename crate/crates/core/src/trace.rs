//! Per-round run traces and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Single-machine SGD over the whole dataset.
    Sgd,
    /// Single-machine SGD with its gradient count divided by the machine count.
    IdealDistSgd,
    /// Local SGD with periodic iterate averaging.
    DistSgd,
    DaneExact,
    DaneSgd,
    DaneSvrg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Sgd,
        Algorithm::IdealDistSgd,
        Algorithm::DistSgd,
        Algorithm::DaneExact,
        Algorithm::DaneSgd,
        Algorithm::DaneSvrg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sgd => "Sgd",
            Algorithm::IdealDistSgd => "IdealDistSgd",
            Algorithm::DistSgd => "DistSgd",
            Algorithm::DaneExact => "DaneExact",
            Algorithm::DaneSgd => "DaneSgd",
            Algorithm::DaneSvrg => "DaneSvrg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(s))
    }

    pub fn is_dane(self) -> bool {
        matches!(self, Algorithm::DaneExact | Algorithm::DaneSgd | Algorithm::DaneSvrg)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Outer round; 0 is the starting point.
    pub round: usize,
    /// Fractional only for the ideal distributed SGD relabelling.
    pub max_grads_per_machine: f64,
    pub comm_rounds: u64,
    pub floats_communicated: u64,
    pub train_subopt: f64,
    pub log10_subopt: f64,
    pub pop_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub points: Vec<TracePoint>,
}

/// Lower clamp applied to suboptimality before taking `log10`.
pub const SUBOPT_FLOOR: f64 = 1e-16;

pub const CSV_COLUMNS: [&str; 8] = [
    "algorithm",
    "round",
    "max_grads_per_machine",
    "comm_rounds",
    "floats_communicated",
    "train_subopt",
    "log10_subopt",
    "pop_error",
];

impl Trace {
    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }

    /// Writes the trace as CSV preceded by `#` comment lines describing units.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# log_base=10")?;
        writeln!(out, "# subopt_floor={SUBOPT_FLOOR:e}")?;
        writeln!(out, "# comm_rounds_per_dane_round=2 (gradient exchange + iterate averaging)")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for p in &self.points {
            w.write_record([
                self.algorithm.name().to_string(),
                p.round.to_string(),
                p.max_grads_per_machine.to_string(),
                p.comm_rounds.to_string(),
                p.floats_communicated.to_string(),
                p.train_subopt.to_string(),
                p.log10_subopt.to_string(),
                p.pop_error.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().ne(CSV_COLUMNS) {
            return Err(Error::config(
                "header",
                format!("expected columns {}, got {}", CSV_COLUMNS.join(","), header.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut algorithm = None;
        let mut points = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |col: &str| Error::config(format!("row {row}"), format!("cannot parse column `{col}`"));
            let alg = Algorithm::parse(&rec[0]).ok_or_else(|| bad("algorithm"))?;
            if *algorithm.get_or_insert(alg) != alg {
                return Err(Error::config(format!("row {row}"), "mixed algorithms in one trace"));
            }
            points.push(TracePoint {
                round: rec[1].parse().map_err(|_| bad("round"))?,
                max_grads_per_machine: rec[2].parse().map_err(|_| bad("max_grads_per_machine"))?,
                comm_rounds: rec[3].parse().map_err(|_| bad("comm_rounds"))?,
                floats_communicated: rec[4].parse().map_err(|_| bad("floats_communicated"))?,
                train_subopt: rec[5].parse().map_err(|_| bad("train_subopt"))?,
                log10_subopt: rec[6].parse().map_err(|_| bad("log10_subopt"))?,
                pop_error: rec[7].parse().map_err(|_| bad("pop_error"))?,
            });
        }
        let algorithm = algorithm.ok_or_else(|| Error::config("rows", "trace has no rows"))?;
        Ok(Trace { algorithm, points })
    }
}
