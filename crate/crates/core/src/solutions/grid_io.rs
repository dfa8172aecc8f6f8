//! Plain-text cache for solved grids.
//!
//! A short `key=value` header is followed by a `values` line and one
//! `u,du1,du2[,du3]` row per node in row-major order. Exterior nodes are `nan`.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use super::solver::{GridSolution, SolverStats};
use crate::error::{Error, Result};

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.17e}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_grid_csv<W: Write>(grid: &GridSolution, mut out: W) -> Result<()> {
    let n = grid.dim;
    let s = grid.stats;
    let mut head = String::new();
    let _ = writeln!(head, "n={n}");
    let _ = writeln!(head, "h={:.17e}", grid.h);
    let _ = writeln!(head, "bbox_min={}", join(&grid.lo[..n]));
    let hi: Vec<f64> = (0..n)
        .map(|d| grid.lo[d] + grid.h * (grid.counts[d] - 1) as f64)
        .collect();
    let _ = writeln!(head, "bbox_max={}", join(&hi));
    let counts: Vec<String> = grid.counts[..n].iter().map(|c| c.to_string()).collect();
    let _ = writeln!(head, "counts={}", counts.join(","));
    let _ = writeln!(head, "center={}", join(&grid.center[..n]));
    let _ = writeln!(head, "radius={:.17e}", grid.radius);
    let _ = writeln!(head, "unknowns={}", s.unknowns);
    let _ = writeln!(head, "residual_inf={:.17e}", s.residual_inf);
    let _ = writeln!(head, "mixed={},{}", s.mixed_one_sided, s.mixed_dropped);
    head.push_str("values\n");
    out.write_all(head.as_bytes())?;
    let mut line = String::new();
    for (u, g) in grid.values.iter().zip(&grid.grads) {
        line.clear();
        if u.is_finite() {
            let _ = write!(line, "{u:.17e}");
            for gd in &g[..n] {
                let _ = write!(line, ",{gd:.17e}");
            }
        } else {
            line.push_str("nan");
            for _ in 0..n {
                line.push_str(",nan");
            }
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

fn floats(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("`{key}`: {e} in {t:?}")))
        })
        .collect()
}

pub fn read_grid_csv<R: Read>(input: R) -> Result<GridSolution> {
    let mut lines = BufReader::new(input).lines();
    let mut header = std::collections::HashMap::new();
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("grid file ended before `values`".into()))??;
        let line = line.trim().to_string();
        if line == "values" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header line {line:?}")))?;
        header.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| {
        header
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::Parse(format!("missing header `{k}`")))
    };
    let n: usize = get("n")?
        .parse()
        .map_err(|e| Error::Parse(format!("`n`: {e}")))?;
    if n != 2 && n != 3 {
        return Err(Error::Parse(format!("dimension {n} not supported")));
    }
    let h = floats("h", get("h")?)?[0];
    let lo_v = floats("bbox_min", get("bbox_min")?)?;
    let c_v = floats("center", get("center")?)?;
    let radius = floats("radius", get("radius")?)?[0];
    let residual_inf = floats("residual_inf", get("residual_inf")?)?[0];
    let counts_v: Vec<usize> = get("counts")?
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("`counts`: {e}")))?;
    let unknowns = get("unknowns")?
        .parse()
        .map_err(|e| Error::Parse(format!("`unknowns`: {e}")))?;
    let mixed: Vec<usize> = get("mixed")?
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("`mixed`: {e}")))?;
    if lo_v.len() != n || c_v.len() != n || counts_v.len() != n || mixed.len() != 2 {
        return Err(Error::Parse("header vectors disagree with `n`".into()));
    }
    if counts_v.iter().any(|&c| c < 2) || !(h > 0.0) {
        return Err(Error::Parse("degenerate grid header".into()));
    }
    let (mut lo, mut center, mut counts) = ([0.0; 3], [0.0; 3], [1usize; 3]);
    lo[..n].copy_from_slice(&lo_v);
    center[..n].copy_from_slice(&c_v);
    counts[..n].copy_from_slice(&counts_v);
    let total: usize = counts_v.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut grads = Vec::with_capacity(total);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = floats("values", &line)?;
        if row.len() != n + 1 {
            return Err(Error::Parse(format!("row has {} columns, expected {}", row.len(), n + 1)));
        }
        values.push(row[0]);
        let mut g = [0.0; 3];
        g[..n].copy_from_slice(&row[1..]);
        grads.push(g);
    }
    if values.len() != total {
        return Err(Error::Parse(format!("{} rows, expected {total}", values.len())));
    }
    Ok(GridSolution {
        dim: n,
        h,
        lo,
        counts,
        center,
        radius,
        values,
        grads,
        stats: SolverStats {
            h,
            unknowns,
            residual_inf,
            mixed_one_sided: mixed[0],
            mixed_dropped: mixed[1],
        },
    })
}
