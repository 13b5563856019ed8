//! CSV and text formats shared by the library and the command line.

use std::io::{BufRead, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::deviation::{LilTrace, TailEstimate};
use crate::error::{Error, Result};
use crate::kernel::Kernel2D;
use crate::lattice::Point;
use crate::occupation::OccupationMap;
use crate::polymer::CollapseRow;
use crate::walk::Path;

/// `experiment,dist,n,b_rule,param,trials,estimate,ci_lo,ci_hi,theory,seed`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub dist: String,
    pub n: usize,
    pub b_rule: String,
    pub param: f64,
    pub trials: usize,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub theory: Option<f64>,
    pub seed: u64,
}

impl ResultRow {
    pub fn from_estimate(est: &TailEstimate, dist: &str, b_rule: &str) -> Self {
        ResultRow {
            experiment: est.kind.as_str().to_string(),
            dist: dist.to_string(),
            n: est.n,
            b_rule: b_rule.to_string(),
            param: est.param,
            trials: est.trials,
            estimate: est.estimate,
            ci_lo: est.ci.0,
            ci_hi: est.ci.1,
            theory: est.theory,
            seed: est.seed,
        }
    }
}

/// `zeta,n,sweeps,mean_B_over_n,msd,diameter,ci_B_lo,ci_B_hi,ci_msd_lo,ci_msd_hi,ci_diam_lo,ci_diam_hi,acceptance_rate,seed`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolymerRow {
    pub zeta: f64,
    pub n: usize,
    pub sweeps: usize,
    #[serde(rename = "mean_B_over_n")]
    pub mean_b_over_n: f64,
    pub msd: f64,
    pub diameter: f64,
    #[serde(rename = "ci_B_lo")]
    pub ci_b_lo: f64,
    #[serde(rename = "ci_B_hi")]
    pub ci_b_hi: f64,
    pub ci_msd_lo: f64,
    pub ci_msd_hi: f64,
    pub ci_diam_lo: f64,
    pub ci_diam_hi: f64,
    pub acceptance_rate: f64,
    pub seed: u64,
}

impl From<&CollapseRow> for PolymerRow {
    fn from(r: &CollapseRow) -> Self {
        PolymerRow {
            zeta: r.zeta,
            n: r.n,
            sweeps: r.sweeps,
            mean_b_over_n: r.b_over_n.mean,
            msd: r.msd.mean,
            diameter: r.diameter.mean,
            ci_b_lo: r.b_over_n.lo(),
            ci_b_hi: r.b_over_n.hi(),
            ci_msd_lo: r.msd.lo(),
            ci_msd_hi: r.msd.hi(),
            ci_diam_lo: r.diameter.lo(),
            ci_diam_hi: r.diameter.hi(),
            acceptance_rate: r.acceptance_rate,
            seed: r.seed,
        }
    }
}

/// `seed,n,gamma_over_n,upper_ratio,lower_ratio,running_max,running_min`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilRow {
    pub seed: u64,
    pub n: usize,
    pub gamma_over_n: f64,
    pub upper_ratio: f64,
    pub lower_ratio: f64,
    pub running_max: f64,
    pub running_min: f64,
}

pub fn lil_rows(trace: &LilTrace) -> Vec<LilRow> {
    (0..trace.checkpoints.len())
        .map(|i| LilRow {
            seed: trace.seed,
            n: trace.checkpoints[i],
            gamma_over_n: trace.gamma_over_n[i],
            upper_ratio: trace.upper[i],
            lower_ratio: trace.lower[i],
            running_max: trace.running_max[i],
            running_min: trace.running_min[i],
        })
        .collect()
}

/// Writes serializable rows with a header line.
pub fn write_rows<T: Serialize, W: Write>(w: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads rows written by [`write_rows`]. An empty input yields no rows.
pub fn read_rows<T: DeserializeOwned, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Rows to a CSV string.
pub fn rows_to_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRow {
    step: usize,
    x: i32,
    y: i32,
}

/// `step,x,y`, one row per S_k, k = 1..n.
pub fn write_path_csv<W: Write>(w: W, path: &Path) -> Result<()> {
    let rows: Vec<PathRow> = path
        .points()
        .iter()
        .enumerate()
        .map(|(k, p)| PathRow { step: k + 1, x: p.x, y: p.y })
        .collect();
    write_rows(w, &rows)
}

pub fn read_path_csv<R: Read>(r: R) -> Result<Path> {
    let rows: Vec<PathRow> = read_rows(r)?;
    for (k, row) in rows.iter().enumerate() {
        if row.step != k + 1 {
            return Err(Error::Parse(format!("path rows must be numbered 1, 2, ...; row {} has step {}", k + 1, row.step)));
        }
    }
    Ok(Path::from_points(rows.into_iter().map(|r| Point::new(r.x, r.y)).collect()))
}

#[derive(Debug, Serialize, Deserialize)]
struct OccupationRow {
    x: i32,
    y: i32,
    count: u32,
}

/// `x,y,count` for every visited site, sorted by (x, y).
pub fn write_occupation_csv<W: Write>(w: W, occ: &OccupationMap) -> Result<()> {
    let rows: Vec<OccupationRow> = occ
        .sorted()
        .into_iter()
        .map(|(p, count)| OccupationRow { x: p.x, y: p.y, count })
        .collect();
    write_rows(w, &rows)
}

pub fn read_occupation_csv<R: Read>(r: R) -> Result<Vec<(Point, u32)>> {
    let rows: Vec<OccupationRow> = read_rows(r)?;
    Ok(rows.into_iter().map(|r| (Point::new(r.x, r.y), r.count)).collect())
}

/// Kernel grid dump: a `h,size` header, the two values, then `size` rows of
/// `size` comma-separated values (x index outer).
pub fn write_kernel<W: Write>(mut w: W, k: &Kernel2D) -> Result<()> {
    writeln!(w, "h,size")?;
    writeln!(w, "{},{}", k.h(), k.side())?;
    for row in k.values().chunks(k.side()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_kernel<R: BufRead>(r: R) -> Result<Kernel2D> {
    let mut lines = r.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse("kernel file ended early".into()))?
            .map_err(Error::from)
    };
    if next()?.trim() != "h,size" {
        return Err(Error::Parse("kernel file must start with the header 'h,size'".into()));
    }
    let dims = next()?;
    let (h, size) = dims
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("bad kernel dimensions line '{dims}'")))?;
    let h: f64 = h.trim().parse().map_err(|_| Error::Parse(format!("bad spacing '{h}'")))?;
    let size: usize = size.trim().parse().map_err(|_| Error::Parse(format!("bad size '{size}'")))?;
    let mut values = Vec::with_capacity(size * size);
    for i in 0..size {
        let line = next()?;
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad kernel value '{t}' in row {i}"))))
            .collect::<Result<_>>()?;
        if row.len() != size {
            return Err(Error::Parse(format!("kernel row {i} has {} values, expected {size}", row.len())));
        }
        values.extend(row);
    }
    Kernel2D::from_values(h, size, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deviation::EstimateKind;
    use crate::kernel::Mollifier;
    use crate::walk::{sample_path, StepDistribution};

    #[test]
    fn path_roundtrip() {
        let p = sample_path(&StepDistribution::king(), 50, 1, 2).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &p).unwrap();
        assert!(buf.starts_with(b"step,x,y\n1,"));
        let back = read_path_csv(&buf[..]).unwrap();
        assert_eq!(back.points(), p.points());
    }

    #[test]
    fn result_row_roundtrip_with_infinities() {
        let est = TailEstimate {
            kind: EstimateKind::UpperTail,
            n: 1024,
            b_n: 6.93,
            param: 0.5,
            trials: 1000,
            successes: Some(0),
            p_hat: Some(0.0),
            estimate: f64::NEG_INFINITY,
            ci: (f64::NEG_INFINITY, -0.83),
            theory: Some(-0.731),
            flagged: true,
            seed: 7,
        };
        let rows = vec![
            ResultRow::from_estimate(&est, "lazy", "log"),
            ResultRow {
                theory: None,
                estimate: 0.1 + 0.2,
                ..ResultRow::from_estimate(&est, "king", "pow:0.75")
            },
        ];
        let text = rows_to_string(&rows).unwrap();
        assert!(text.starts_with("experiment,dist,n,b_rule,param,trials,estimate,ci_lo,ci_hi,theory,seed\n"));
        let back: Vec<ResultRow> = read_rows(text.as_bytes()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn polymer_header() {
        let row = PolymerRow {
            zeta: 1.0,
            n: 8,
            sweeps: 10,
            mean_b_over_n: 1.0,
            msd: 2.0,
            diameter: 3.0,
            ci_b_lo: 0.5,
            ci_b_hi: 1.5,
            ci_msd_lo: 1.0,
            ci_msd_hi: 3.0,
            ci_diam_lo: 2.0,
            ci_diam_hi: 4.0,
            acceptance_rate: 0.5,
            seed: 1,
        };
        let text = rows_to_string(std::slice::from_ref(&row)).unwrap();
        assert!(text.starts_with(
            "zeta,n,sweeps,mean_B_over_n,msd,diameter,ci_B_lo,ci_B_hi,ci_msd_lo,ci_msd_hi,ci_diam_lo,ci_diam_hi,acceptance_rate,seed\n"
        ));
        let back: Vec<PolymerRow> = read_rows(text.as_bytes()).unwrap();
        assert_eq!(back, vec![row]);
    }

    #[test]
    fn kernel_roundtrip() {
        let k = Kernel2D::sample(Mollifier::band_limited(), 1.0).unwrap();
        let mut buf = Vec::new();
        write_kernel(&mut buf, &k).unwrap();
        let back = read_kernel(&buf[..]).unwrap();
        assert_eq!(back.values(), k.values());
        assert_eq!(back.side(), k.side());
    }

    #[test]
    fn occupation_csv_sorted() {
        let mut occ = OccupationMap::new();
        for p in [Point::new(2, 0), Point::new(-1, 3), Point::new(2, 0)] {
            occ.increment(p);
        }
        let mut buf = Vec::new();
        write_occupation_csv(&mut buf, &occ).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "x,y,count\n-1,3,1\n2,0,2\n");
        assert_eq!(read_occupation_csv(&buf[..]).unwrap().len(), 2);
    }
}
