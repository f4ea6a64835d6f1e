//! Text file formats: matrix CSV, sequence tensors and ASCII PGM.
//!
//! Matrix CSV: a `rows,cols` header line, then the values in row-major
//! order, one matrix row per line. Values are written with 17 significant
//! digits; scientific notation is accepted on input.
//!
//! Sequence tensor: an `H W d` header line, then `H * W` lines of `d`
//! comma-separated values, token-major over the grid.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::structured::DenseMatrix;
use crate::tensor::{GridShape, SequenceTensor};

/// Shortest-round-trip-safe formatting: 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_value(token: &str, line: usize) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("`{}` is not a number", token.trim()),
    })
}

fn parse_count(token: &str, line: usize) -> Result<usize> {
    token.trim().parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("`{}` is not a non-negative integer", token.trim()),
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = format!("{},{}\n", m.rows(), m.cols());
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|&v| format_value(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DenseMatrix> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing `rows,cols` header".into(),
    })?;
    let (r, c) = header.split_once(',').ok_or_else(|| Error::Parse {
        line: hline,
        msg: "header must be `rows,cols`".into(),
    })?;
    let rows = parse_count(r, hline)?;
    let cols = parse_count(c, hline)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut last = hline;
    for (line, text) in lines {
        last = line;
        for token in text.split(',') {
            data.push(parse_value(token, line)?);
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Parse {
            line: last,
            msg: format!("expected {} values for a {rows}x{cols} matrix, found {}", rows * cols, data.len()),
        });
    }
    DenseMatrix::new(rows, cols, data)
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    matrix_from_csv(&text)
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    fs::write(path, matrix_to_csv(m)).map_err(|e| Error::io(path, e))
}

pub fn tensor_to_text(t: &SequenceTensor) -> String {
    let shape = t.shape();
    let mut out = format!("{} {} {}\n", shape.height(), shape.width(), t.channels());
    for i in 0..t.n() {
        let row: Vec<String> = t.row(i).iter().map(|&v| format_value(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn tensor_from_text(text: &str) -> Result<SequenceTensor> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing `H W d` header".into(),
    })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(Error::Parse {
            line: hline,
            msg: "header must be `H W d`".into(),
        });
    }
    let h = parse_count(dims[0], hline)?;
    let w = parse_count(dims[1], hline)?;
    let d = parse_count(dims[2], hline)?;
    let shape = GridShape::new(h, w).map_err(|e| Error::Parse {
        line: hline,
        msg: e.to_string(),
    })?;
    let mut data = Vec::with_capacity(shape.n() * d);
    let mut tokens = 0;
    for (line, text) in lines {
        let row: Vec<f64> = text.split(',').map(|t| parse_value(t, line)).collect::<Result<_>>()?;
        if row.len() != d {
            return Err(Error::Parse {
                line,
                msg: format!("token row has {} values, expected {d}", row.len()),
            });
        }
        data.extend(row);
        tokens += 1;
    }
    if tokens != shape.n() {
        return Err(Error::Parse {
            line: hline,
            msg: format!("expected {} token rows, found {tokens}", shape.n()),
        });
    }
    SequenceTensor::new(shape, d, data)
}

pub fn read_tensor(path: &Path) -> Result<SequenceTensor> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    tensor_from_text(&text)
}

pub fn write_tensor(path: &Path, t: &SequenceTensor) -> Result<()> {
    fs::write(path, tensor_to_text(t)).map_err(|e| Error::io(path, e))
}

/// Min-max quantization to `0..=255`, rounding half up. Constant grids map to 128.
pub fn quantize_grid(grid: &[Vec<f64>]) -> Result<Vec<Vec<u8>>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in grid.iter().flatten() {
        if !v.is_finite() {
            return Err(Error::Domain("cannot render a non-finite kernel".into()));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    Ok(grid
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| {
                    if span == 0.0 {
                        128
                    } else {
                        (255.0 * (v - lo) / span + 0.5).floor().clamp(0.0, 255.0) as u8
                    }
                })
                .collect()
        })
        .collect())
}

/// ASCII PGM (`P2`, maxval 255) of a min-max normalized grid.
pub fn pgm_to_text(grid: &[Vec<f64>]) -> Result<String> {
    let pixels = quantize_grid(grid)?;
    let height = pixels.len();
    let width = pixels.first().map_or(0, Vec::len);
    let mut out = String::new();
    let _ = writeln!(out, "P2\n{width} {height}\n255");
    for row in &pixels {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn export_kernel_pgm(grid: &[Vec<f64>], path: &Path) -> Result<()> {
    let text = pgm_to_text(grid)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses an ASCII PGM back into pixel rows.
pub fn parse_pgm(text: &str) -> Result<Vec<Vec<u8>>> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::Parse {
            line: 1,
            msg: "missing P2 magic".into(),
        });
    }
    let mut header = |what: &str| -> Result<usize> {
        let t = tokens.next().ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing {what}"),
        })?;
        parse_count(t, 0)
    };
    let width = header("width")?;
    let height = header("height")?;
    let maxval = header("maxval")?;
    if maxval != 255 {
        return Err(Error::Parse {
            line: 0,
            msg: format!("unsupported maxval {maxval}"),
        });
    }
    let values: Vec<u8> = tokens
        .map(|t| {
            t.parse::<u8>().map_err(|_| Error::Parse {
                line: 0,
                msg: format!("bad pixel `{t}`"),
            })
        })
        .collect::<Result<_>>()?;
    if values.len() != width * height {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {} pixels, found {}", width * height, values.len()),
        });
    }
    Ok(values.chunks(width.max(1)).map(<[u8]>::to_vec).collect())
}
