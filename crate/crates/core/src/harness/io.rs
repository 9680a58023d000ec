//! CSV readers and writers for the external file formats.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate};

use crate::error::{Error, Result};
use crate::evalkit::{FrontierPoint, GmvpResult};
use crate::linalg::Matrix;
use crate::matxform::{vech_position, SpdMatrix};
use crate::rvest::{IntradayPanel, SummaryStats, Tick};
use crate::series::CovarianceSeries;

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: non-finite value {s:?}")));
    }
    Ok(v)
}

fn parse_index(s: &str, line: usize) -> Result<usize> {
    match s.trim().parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(Error::Parse(format!("line {line}: bad 1-based index {s:?}"))),
    }
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|_| Error::Parse(format!("line {line}: bad date {s:?}")))
}

fn check_header(rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<()> {
    let h = rdr.headers()?;
    let got: Vec<&str> = h.iter().map(str::trim).collect();
    if got != want {
        return Err(Error::Parse(format!(
            "expected header {}, got {}",
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// `timestamp,symbol,logprice` with RFC-3339 timestamps. Times are kept in
/// the local time of their offset.
pub fn read_intraday_csv(r: impl Read) -> Result<Vec<Tick<f64>>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &["timestamp", "symbol", "logprice"])?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let ts = DateTime::parse_from_rfc3339(rec[0].trim())
            .map_err(|_| Error::Parse(format!("line {line}: bad timestamp {:?}", &rec[0])))?;
        out.push(Tick {
            timestamp: ts.naive_local(),
            symbol: rec[1].trim().to_string(),
            logprice: parse_f64(&rec[2], line)?,
        });
    }
    if out.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::Parse("intraday rows are not sorted by timestamp".into()));
    }
    Ok(out)
}

pub fn write_intraday_csv(panel: &IntradayPanel<f64>, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["timestamp", "symbol", "logprice"])?;
    for d in 0..panel.days().len() {
        let p = panel.prices(d);
        for (k, ts) in panel.grid(d).iter().enumerate() {
            let stamp = format!("{}Z", ts.format("%Y-%m-%dT%H:%M:%S"));
            for (a, name) in panel.assets().iter().enumerate() {
                wtr.write_record([stamp.as_str(), name, &p[(k, a)].to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `date,i,j,value`, 1-based, upper triangle only, every entry present.
pub fn read_covariance_csv(r: impl Read) -> Result<CovarianceSeries<f64>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &["date", "i", "j", "value"])?;
    let mut days: BTreeMap<NaiveDate, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
    let mut n = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let date = parse_date(&rec[0], line)?;
        let (i, j) = (parse_index(&rec[1], line)?, parse_index(&rec[2], line)?);
        if i > j {
            return Err(Error::Parse(format!(
                "line {line}: ({i},{j}) is below the diagonal"
            )));
        }
        n = n.max(j);
        if days
            .entry(date)
            .or_default()
            .insert((i - 1, j - 1), parse_f64(&rec[3], line)?)
            .is_some()
        {
            return Err(Error::Parse(format!("line {line}: duplicate entry ({i},{j}) on {date}")));
        }
    }
    if days.is_empty() {
        return Err(Error::InsufficientData {
            what: "covariance rows",
            required: 1,
            actual: 0,
        });
    }
    let mut dates = Vec::with_capacity(days.len());
    let mut mats = Vec::with_capacity(days.len());
    for (date, entries) in days {
        if entries.len() != n * (n + 1) / 2 {
            return Err(Error::Parse(format!(
                "{date}: {} entries, expected {} for {n} assets",
                entries.len(),
                n * (n + 1) / 2
            )));
        }
        let mut m = Matrix::zeros(n, n);
        for ((i, j), v) in entries {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        let spd = SpdMatrix::new(m).map_err(|_| {
            Error::Parse(format!("{date}: covariance matrix is not positive definite"))
        })?;
        dates.push(date);
        mats.push(spd);
    }
    CovarianceSeries::new(dates, mats)
}

fn write_upper(
    wtr: &mut csv::Writer<impl Write>,
    prefix: &[&str],
    m: &Matrix<f64>,
) -> Result<()> {
    let n = m.rows();
    for j in 0..n {
        for i in 0..=j {
            let mut rec: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
            rec.extend([(i + 1).to_string(), (j + 1).to_string(), m[(i, j)].to_string()]);
            wtr.write_record(&rec)?;
        }
    }
    Ok(())
}

pub fn write_covariance_csv(series: &CovarianceSeries<f64>, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["date", "i", "j", "value"])?;
    for (d, m) in series.dates().iter().zip(series.mats()) {
        write_upper(&mut wtr, &[&d.to_string()], m.as_matrix())?;
    }
    wtr.flush()?;
    Ok(())
}

/// `date,asset,return` with 1-based asset indices; returns a `dates × n`
/// matrix aligned to `dates`.
pub fn read_returns_csv(r: impl Read, dates: &[NaiveDate], n: usize) -> Result<Matrix<f64>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &["date", "asset", "return"])?;
    let pos: BTreeMap<NaiveDate, usize> = dates.iter().enumerate().map(|(k, d)| (*d, k)).collect();
    let mut out = Matrix::zeros(dates.len(), n);
    let mut seen = vec![false; dates.len() * n];
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let date = parse_date(&rec[0], line)?;
        let a = parse_index(&rec[1], line)?;
        if a > n {
            return Err(Error::Parse(format!("line {line}: asset {a} exceeds {n}")));
        }
        let Some(&t) = pos.get(&date) else {
            continue;
        };
        out[(t, a - 1)] = parse_f64(&rec[2], line)?;
        seen[t * n + a - 1] = true;
    }
    if let Some(miss) = seen.iter().position(|s| !s) {
        return Err(Error::Parse(format!(
            "missing return for asset {} on {}",
            miss % n + 1,
            dates[miss / n]
        )));
    }
    Ok(out)
}

pub fn write_returns_csv(dates: &[NaiveDate], returns: &Matrix<f64>, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["date", "asset", "return"])?;
    for (t, d) in dates.iter().enumerate() {
        for a in 0..returns.cols() {
            wtr.write_record([d.to_string(), (a + 1).to_string(), returns[(t, a)].to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// One row per model and forecast day.
pub struct ForecastRow<'a> {
    pub date: NaiveDate,
    pub model: &'a str,
    pub matrix: &'a Matrix<f64>,
}

/// `date,model,i,j,value`, upper triangle.
pub fn write_forecasts_csv<'a>(rows: impl IntoIterator<Item = ForecastRow<'a>>, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["date", "model", "i", "j", "value"])?;
    for r in rows {
        write_upper(&mut wtr, &[&r.date.to_string(), r.model], r.matrix)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a forecast CSV back into per-model series.
pub fn read_forecasts_csv(r: impl Read) -> Result<BTreeMap<String, CovarianceSeries<f64>>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &["date", "model", "i", "j", "value"])?;
    let mut buf = Vec::new();
    let mut models: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let body = models.entry(rec[1].to_string()).or_default();
        if body.is_empty() {
            body.extend_from_slice(b"date,i,j,value\n");
        }
        buf.clear();
        parse_f64(&rec[4], line)?;
        writeln!(buf, "{},{},{},{}", &rec[0], &rec[2], &rec[3], &rec[4])?;
        body.extend_from_slice(&buf);
    }
    models
        .into_iter()
        .map(|(m, body)| Ok((m, read_covariance_csv(body.as_slice())?)))
        .collect()
}

/// `model,mu_p,avg_sd,n_feasible_days`.
pub fn write_frontier_csv(points: &[FrontierPoint], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["model", "mu_p", "avg_sd", "n_feasible_days"])?;
    for p in points {
        wtr.write_record([
            p.model.clone(),
            p.mu_p.to_string(),
            p.avg_sd.to_string(),
            p.n_feasible_days.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `date,model,asset,weight` with 1-based assets.
pub fn write_gmvp_csv<'a>(
    rows: impl IntoIterator<Item = (NaiveDate, &'a str, &'a GmvpResult)>,
    w: impl Write,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["date", "model", "asset", "weight"])?;
    for (d, model, res) in rows {
        for (a, wt) in res.weights.iter().enumerate() {
            wtr.write_record([d.to_string(), model.to_string(), (a + 1).to_string(), wt.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `row,col,rho`, 1-based.
pub fn write_rank_csv(rho: &Matrix<f64>, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["row", "col", "rho"])?;
    for i in 0..rho.rows() {
        for j in 0..rho.cols() {
            wtr.write_record([(i + 1).to_string(), (j + 1).to_string(), rho[(i, j)].to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Label of vech element `k`: the asset for a diagonal entry, `A-B`
/// otherwise.
pub fn element_label(assets: &[String], k: usize) -> String {
    let (i, j) = vech_position(k);
    if i == j {
        assets[i].clone()
    } else {
        format!("{}-{}", assets[i], assets[j])
    }
}

/// `coord,element,mean,max,min,std,skewness,kurtosis,hurst`; unavailable
/// statistics are written as `NA`.
pub fn write_stats_csv<'a>(
    rows: impl IntoIterator<Item = (&'a str, String, &'a SummaryStats)>,
    w: impl Write,
) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["coord", "element", "mean", "max", "min", "std", "skewness", "kurtosis", "hurst"])?;
    for (coord, element, s) in rows {
        wtr.write_record([
            coord.to_string(),
            element,
            s.mean.to_string(),
            s.max.to_string(),
            s.min.to_string(),
            s.std.to_string(),
            opt(s.skewness),
            opt(s.kurtosis),
            opt(s.hurst),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
