//! Plain-text output formats for trajectories and matrices.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::dynamics::Snapshot;

/// Long-format trajectory with header `t,agent,y,y_hat`.
pub fn trajectory_csv(trajectory: &[Snapshot]) -> String {
    let mut out = String::from("t,agent,y,y_hat\n");
    for snap in trajectory {
        for (agent, (y, yh)) in snap.y.iter().zip(snap.y_hat.iter()).enumerate() {
            writeln!(out, "{},{agent},{y},{yh}", snap.t).unwrap();
        }
    }
    out
}

/// Which opinion a plot series holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Private,
    Expressed,
}

/// Wide-format series `t,a0,a1,...` of one opinion kind, one row per
/// recorded step.
pub fn series_csv(trajectory: &[Snapshot], series: Series) -> String {
    let n = trajectory.first().map_or(0, |s| s.y.len());
    let mut out = String::from("t");
    for i in 0..n {
        write!(out, ",a{i}").unwrap();
    }
    out.push('\n');
    for snap in trajectory {
        let v = match series {
            Series::Private => &snap.y,
            Series::Expressed => &snap.y_hat,
        };
        write!(out, "{}", snap.t).unwrap();
        for x in v.iter() {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Gnuplot script drawing private opinions dotted and expressed opinions
/// solid from the two series files.
pub fn gnuplot_script(private_file: &str, expressed_file: &str, n: usize, title: &str) -> String {
    let mut out = String::new();
    writeln!(out, "set datafile separator ','").unwrap();
    writeln!(out, "set key off").unwrap();
    writeln!(out, "set xlabel 't'").unwrap();
    writeln!(out, "set ylabel 'opinion'").unwrap();
    writeln!(out, "set title '{title}'").unwrap();
    write!(out, "plot ").unwrap();
    let mut parts = Vec::with_capacity(2 * n);
    for i in 0..n {
        parts.push(format!(
            "'{private_file}' using 1:{} with lines dashtype 3 lc rgb 'blue'",
            i + 2
        ));
        parts.push(format!(
            "'{expressed_file}' using 1:{} with lines lc rgb 'dark-green'",
            i + 2
        ));
    }
    out.push_str(&parts.join(", \\\n     "));
    out.push('\n');
    out
}

/// Dense matrix as comma-separated rows without a header.
pub fn matrix_csv(a: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in a.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
