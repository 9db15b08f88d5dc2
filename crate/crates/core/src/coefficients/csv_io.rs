//! Plain-text coefficient dump: `#` metadata lines, then `j1,..,jd,value`.

use std::io::{BufRead, Write};

use crate::error::{Result, TflError};
use crate::params::TflParams;

use super::{for_each_index, CoefficientTensor};

pub fn write_coefficients_csv<W: Write>(tensor: &CoefficientTensor, mut out: W) -> Result<()> {
    let params = serde_json::to_string(tensor.params())?;
    writeln!(out, "# params={params}")?;
    writeln!(out, "# n_per_dim={}", tensor.n_per_dim())?;
    writeln!(out, "# nf={}", tensor.fft_resolution())?;
    writeln!(out, "# ng={}", tensor.quadrature_order())?;
    let d = tensor.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=d).map(|l| format!("j{l}")).collect();
    header.push("value".into());
    w.write_record(&header).map_err(csv_err)?;
    let mut k = 0;
    let mut res = Ok(());
    for_each_index(tensor.n_per_dim(), d, |j| {
        if res.is_err() {
            return;
        }
        let mut rec: Vec<String> = j.iter().map(|v| v.to_string()).collect();
        rec.push(format!("{:e}", tensor.data()[k]));
        k += 1;
        res = w.write_record(&rec).map_err(csv_err);
    });
    res?;
    w.flush()?;
    Ok(())
}

pub fn read_coefficients_csv<R: BufRead>(input: R) -> Result<CoefficientTensor> {
    let mut params: Option<TflParams> = None;
    let mut n1 = None;
    let mut nf = None;
    let mut ng = None;
    let mut body = String::new();
    for line in input.lines() {
        let line = line?;
        if let Some(meta) = line.strip_prefix('#') {
            let (key, value) = meta
                .trim()
                .split_once('=')
                .ok_or_else(|| TflError::Format(format!("bad metadata line: {line}")))?;
            match key.trim() {
                "params" => params = Some(serde_json::from_str(value)?),
                "n_per_dim" => n1 = Some(parse_usize(value)?),
                "nf" => nf = Some(parse_usize(value)?),
                "ng" => ng = Some(parse_usize(value)?),
                _ => {}
            }
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let missing = |k: &str| TflError::Format(format!("missing metadata `{k}`"));
    let params = params.ok_or_else(|| missing("params"))?;
    let n1 = n1.ok_or_else(|| missing("n_per_dim"))?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut data = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let v = rec
            .get(rec.len().saturating_sub(1))
            .ok_or_else(|| TflError::Format("empty coefficient row".into()))?;
        data.push(
            v.trim()
                .parse::<f64>()
                .map_err(|e| TflError::Format(format!("bad value `{v}`: {e}")))?,
        );
    }
    CoefficientTensor::from_parts(
        params,
        n1,
        nf.ok_or_else(|| missing("nf"))?,
        ng.ok_or_else(|| missing("ng"))?,
        data,
    )
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|e| TflError::Format(format!("bad integer `{s}`: {e}")))
}

pub(crate) fn csv_err(e: csv::Error) -> TflError {
    TflError::Format(e.to_string())
}
