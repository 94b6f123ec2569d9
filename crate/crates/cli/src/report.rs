//! CSV tables and gnuplot scripts produced by an experiment.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use ucp_core::metrics::fmt_opt;
use ucp_core::ConvergenceTable;

use crate::config::Experiment;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub p: usize,
    pub table: ConvergenceTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Relative L² error in B.
    pub relative: f64,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSeries {
    pub name: String,
    pub parameter: String,
    pub p: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepSeries {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},rel_error_B,kappa\n", self.parameter);
        for r in &self.rows {
            writeln!(s, "{:.6e},{:.10e},{}", r.value, r.relative, fmt_opt(r.kappa)).unwrap();
        }
        s
    }
}

/// Fitted log-log slope of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct Slope {
    pub name: String,
    pub p: usize,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: Experiment,
    pub series: Vec<Series>,
    pub sweeps: Vec<SweepSeries>,
    pub slopes: Vec<Slope>,
}

impl Report {
    pub fn new(experiment: Experiment) -> Self {
        Report { experiment, series: Vec::new(), sweeps: Vec::new(), slopes: Vec::new() }
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn slope(&self, name: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.name == name).and_then(|s| s.value)
    }

    /// File name and contents of every output, in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for s in &self.series {
            out.push((format!("{}.csv", s.name), s.table.to_csv()));
        }
        for s in &self.sweeps {
            out.push((format!("{}.csv", s.name), s.to_csv()));
        }
        if !self.slopes.is_empty() {
            let mut csv = String::from("series,p,slope\n");
            for s in &self.slopes {
                writeln!(csv, "{},{},{}", s.name, s.p, fmt_opt(s.value)).unwrap();
            }
            out.push((format!("{}_slopes.csv", self.experiment.name()), csv));
        }
        out.push((format!("{}.gp", self.experiment.name()), self.gnuplot()));
        out
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut names = Vec::new();
        for (name, contents) in self.files() {
            let path = dir.join(&name);
            std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
            names.push(name);
        }
        Ok(names)
    }

    /// Script plotting every table of the report; run from the output
    /// directory.
    pub fn gnuplot(&self) -> String {
        let name = self.experiment.name();
        let mut s = String::new();
        writeln!(s, "set terminal pngcairo size 900,600").unwrap();
        writeln!(s, "set output '{name}.png'").unwrap();
        writeln!(s, "set datafile separator ','").unwrap();
        writeln!(s, "set key outside right").unwrap();
        writeln!(s, "set logscale xy").unwrap();
        writeln!(s, "set format y '%.0e'").unwrap();
        let mut plots = Vec::new();
        match self.experiment {
            Experiment::Sweep => {
                let param = self.sweeps.first().map_or("value", |s| s.parameter.as_str());
                writeln!(s, "set xlabel '{param}'\nset ylabel 'relative L2 error in B'").unwrap();
                for sw in &self.sweeps {
                    plots.push(format!("'{}.csv' using 1:2 with linespoints title 'p={}'", sw.name, sw.p));
                }
            }
            Experiment::Pollution => {
                writeln!(s, "set xlabel 'k'\nset ylabel 'k|u-u_h|_B + |grad(u-u_h)|_B'").unwrap();
                for se in &self.series {
                    let col = column(&se.table, "weighted");
                    plots.push(format!("'{}.csv' using 4:{col} with linespoints title '{}'", se.name, se.name));
                }
            }
            Experiment::Condition => {
                writeln!(s, "set xlabel 'h'\nset ylabel 'condition estimate'").unwrap();
                for se in &self.series {
                    let col = column(&se.table, "kappa");
                    plots.push(format!("'{}.csv' using 2:{col} with linespoints title 'p={}'", se.name, se.p));
                }
            }
            _ => {
                writeln!(s, "set xlabel 'h'\nset ylabel 'relative L2 error'").unwrap();
                for se in &self.series {
                    for r in &se.table.regions {
                        let col = column(&se.table, &format!("{r}_rel"));
                        plots.push(format!(
                            "'{}.csv' using 2:{col} with linespoints title '{} {}'",
                            se.name, se.name, r
                        ));
                    }
                }
            }
        }
        if plots.is_empty() {
            writeln!(s, "# nothing to plot").unwrap();
        } else {
            writeln!(s, "plot {}", plots.join(", \\\n     ")).unwrap();
        }
        s
    }
}

/// 1-based CSV column of `header` in the table layout.
fn column(table: &ConvergenceTable, header: &str) -> usize {
    let csv = table.to_csv();
    let first = csv.lines().next().unwrap_or_default();
    first.split(',').position(|h| h == header).map_or(0, |i| i + 1)
}
