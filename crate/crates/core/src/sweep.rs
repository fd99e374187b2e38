//! Parameter sweeps, hump detection, numerical comparative statics and
//! tabular export.
//!
//! # Table schemas
//!
//! The first column is always the swept parameter, named by [`Axis::name`].
//!
//! One-type model:
//! `s_star, psi, upsilon, m_weighted, exists, m_summed, residual,
//! threshold, a_bar, ds_da, iterations, status`.
//!
//! Two-type model:
//! `s_h_star, s_l_star, psi_hh, psi_lh, psi_ll, psi_hl, psi_l_total,
//! ups_hh, ups_hl, ups_lh, ups_ll, m_summed_h, m_summed_l, exists, status,
//! residual_h, residual_l, iterations, roots, other_roots`.
//!
//! Fixed profile:
//! `s_h, s_l, psi_hh, psi_lh, psi_ll, psi_hl, psi_l_total, ups_hh, ups_hl,
//! ups_lh, ups_ll, m_summed_h, m_summed_l, exists`.
//!
//! `psi_l_total` is `psi_lh + psi_ll`. `other_roots` lists the secondary
//! two-type roots as `s_h:s_l` pairs separated by `;`. Cells that have no
//! value at a point (for instance the comparative-statics columns where
//! only the zero equilibrium exists) are empty. Points where the solver
//! failed carry `exists = false` and `status = error: <message>`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Serialize, Serializer};

use crate::equilibrium::{
    a_bar, ds_da_implicit, solve_heterogeneous, solve_homogeneous, HeterogeneousOptions,
};
use crate::error::{Error, Result};
use crate::numdiff;
use crate::params::{Education, ModelParams, Profile};
use crate::rates::{
    marriage_rate, marriage_rate_homogeneous, psi_homogeneous, upsilon_homogeneous, MarriageRateVariant,
    MatchingRates, RateOptions,
};
use crate::scalar::{lit, to_f64, Scalar};

/// A sweepable market parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "a")]
    Arrival,
    #[serde(rename = "d")]
    Divorce,
    #[serde(rename = "c")]
    Cost,
    #[serde(rename = "h")]
    HighShare,
    #[serde(rename = "Y")]
    HighGain,
    #[serde(rename = "V")]
    MarriageValue,
}

impl Axis {
    pub const ALL: [Axis; 6] = [
        Axis::Arrival,
        Axis::Divorce,
        Axis::Cost,
        Axis::HighShare,
        Axis::HighGain,
        Axis::MarriageValue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Arrival => "a",
            Axis::Divorce => "d",
            Axis::Cost => "c",
            Axis::HighShare => "h",
            Axis::HighGain => "Y",
            Axis::MarriageValue => "V",
        }
    }

    pub fn get<T: Scalar>(self, p: &ModelParams<T>) -> T {
        match self {
            Axis::Arrival => p.arrival,
            Axis::Divorce => p.divorce,
            Axis::Cost => p.cost,
            Axis::HighShare => p.high_share,
            Axis::HighGain => p.high_gain,
            Axis::MarriageValue => p.marriage_value,
        }
    }

    pub fn set<T: Scalar>(self, p: &mut ModelParams<T>, v: T) {
        match self {
            Axis::Arrival => p.arrival = v,
            Axis::Divorce => p.divorce = v,
            Axis::Cost => p.cost = v,
            Axis::HighShare => p.high_share = v,
            Axis::HighGain => p.high_gain = v,
            Axis::MarriageValue => p.marriage_value = v,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown axis `{s}`; expected one of a, d, c, h, Y, V")))
    }
}

/// What is evaluated at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model<T> {
    /// One-type equilibrium.
    Homogeneous,
    /// Two-type equilibrium.
    Heterogeneous,
    /// Two-type rates at a fixed socialization profile.
    Exogenous(Profile<T>),
}

impl<T> Model<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Homogeneous => "homogeneous",
            Model::Heterogeneous => "heterogeneous",
            Model::Exogenous(_) => "exogenous",
        }
    }
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell<T> {
    Num(T),
    Int(usize),
    Bool(bool),
    Text(String),
    Empty,
}

impl<T: Scalar> Cell<T> {
    pub fn as_num(&self) -> Option<T> {
        match self {
            Cell::Num(x) => Some(*x),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            // Debug formatting is the shortest representation that parses
            // back to the same value.
            Cell::Num(x) => format!("{x:?}"),
            Cell::Int(k) => k.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl<T: Scalar> Serialize for Cell<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Num(x) => {
                let v = to_f64(*x);
                if v.is_finite() {
                    s.serialize_f64(v)
                } else {
                    s.serialize_none()
                }
            }
            Cell::Int(k) => s.serialize_u64(*k as u64),
            Cell::Bool(b) => s.serialize_bool(*b),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Empty => s.serialize_none(),
        }
    }
}

/// One record per grid point, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable<T> {
    pub axis: Axis,
    pub model: Model<T>,
    /// Parameters shared by all points; the swept field holds the base value.
    pub params: ModelParams<T>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell<T>>>,
}

impl<T: Scalar> SweepTable<T> {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    pub fn grid(&self) -> Vec<T> {
        self.rows.iter().filter_map(|r| r[0].as_num()).collect()
    }

    pub fn exists(&self, row: usize) -> bool {
        let k = self.column("exists").expect("every table has an exists column");
        matches!(self.rows[row][k], Cell::Bool(true))
    }

    /// Values of a numeric column, `None` where a cell is not a number.
    pub fn values(&self, name: &str) -> Result<Vec<Option<T>>> {
        let k = self
            .column(name)
            .ok_or_else(|| Error::Format(format!("no column `{name}` in the {} table", self.model.name())))?;
        Ok(self.rows.iter().map(|r| r[k].as_num()).collect())
    }

    /// `(axis value, column value)` at points where the equilibrium
    /// exists and the cell is a finite number.
    pub fn valid_points(&self, name: &str) -> Result<Vec<(T, T)>> {
        let values = self.values(name)?;
        let grid = self.grid();
        Ok((0..self.rows.len())
            .filter(|&i| self.exists(i))
            .filter_map(|i| values[i].filter(|v| v.is_finite()).map(|v| (grid[i], v)))
            .collect())
    }
}

/// Evenly spaced grid `from, from + step, ...` up to `to` inclusive.
/// Values are rounded to 12 decimals so that `.3 + 7 * .01` prints as `.37`.
pub fn grid<T: Scalar>(from: T, to: T, step: T) -> Result<Vec<T>> {
    let (from, to, step) = (to_f64(from), to_f64(to), to_f64(step));
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() {
        return Err(Error::Format(format!(
            "grid needs finite bounds and a positive step, got from={from}, to={to}, step={step}"
        )));
    }
    if to < from {
        return Ok(Vec::new());
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = from + i as f64 * step;
            lit((v * 1e12).round() / 1e12)
        })
        .collect())
}

fn header<T>(axis: Axis, model: &Model<T>) -> Vec<&'static str> {
    let mut cols = vec![axis.name()];
    let rest: &[&'static str] = match model {
        Model::Homogeneous => &[
            "s_star",
            "psi",
            "upsilon",
            "m_weighted",
            "exists",
            "m_summed",
            "residual",
            "threshold",
            "a_bar",
            "ds_da",
            "iterations",
            "status",
        ],
        Model::Heterogeneous => &[
            "s_h_star",
            "s_l_star",
            "psi_hh",
            "psi_lh",
            "psi_ll",
            "psi_hl",
            "psi_l_total",
            "ups_hh",
            "ups_hl",
            "ups_lh",
            "ups_ll",
            "m_summed_h",
            "m_summed_l",
            "exists",
            "status",
            "residual_h",
            "residual_l",
            "iterations",
            "roots",
            "other_roots",
        ],
        Model::Exogenous(_) => &[
            "s_h",
            "s_l",
            "psi_hh",
            "psi_lh",
            "psi_ll",
            "psi_hl",
            "psi_l_total",
            "ups_hh",
            "ups_hl",
            "ups_lh",
            "ups_ll",
            "m_summed_h",
            "m_summed_l",
            "exists",
        ],
    };
    cols.extend_from_slice(rest);
    cols
}

/// Solves or evaluates the model at every grid point. Points run in
/// parallel on the current rayon pool; rows follow grid order.
pub fn sweep<T: Scalar>(axis: Axis, grid: &[T], params: &ModelParams<T>, model: &Model<T>) -> Result<SweepTable<T>> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Format("sweep grid must be strictly increasing".into()));
    }
    if let Model::Exogenous(profile) = model {
        profile.validate()?;
    }
    let points: Vec<ModelParams<T>> = grid
        .iter()
        .map(|&v| {
            let mut p = *params;
            axis.set(&mut p, v);
            p.validate().map(|_| p)
        })
        .collect::<Result<_>>()?;
    let rows = points
        .par_iter()
        .map(|p| {
            let x = Cell::Num(axis.get(p));
            let mut row = vec![x];
            match model {
                Model::Homogeneous => row.extend(homogeneous_row(p)),
                Model::Heterogeneous => row.extend(heterogeneous_row(p)),
                Model::Exogenous(profile) => row.extend(exogenous_row(p, profile)),
            }
            row
        })
        .collect();
    Ok(SweepTable {
        axis,
        model: *model,
        params: *params,
        columns: header(axis, model),
        rows,
    })
}

fn homogeneous_row<T: Scalar>(p: &ModelParams<T>) -> Vec<Cell<T>> {
    use Cell::*;
    let eq = match solve_homogeneous(p, crate::equilibrium::default_tol_homogeneous()) {
        Ok(eq) => eq,
        Err(e) => {
            let mut row = vec![Empty, Empty, Empty, Empty, Bool(false)];
            row.extend([Empty, Empty, Empty, Empty, Empty, Empty, Text(format!("error: {e}"))]);
            return row;
        }
    };
    let s = eq.s_star;
    let (a, d) = (p.arrival, p.divorce);
    let (bar, slope) = if eq.exists {
        (
            Num(a_bar(d, s)),
            ds_da_implicit(s, p).map(Num).unwrap_or(Empty),
        )
    } else {
        (Empty, Empty)
    };
    vec![
        Num(s),
        Num(psi_homogeneous(s, a, d)),
        Num(upsilon_homogeneous(s, d)),
        Num(marriage_rate_homogeneous(s, p, MarriageRateVariant::Weighted)),
        Bool(eq.exists),
        Num(marriage_rate_homogeneous(s, p, MarriageRateVariant::Summed)),
        Num(eq.residual),
        Num(eq.threshold),
        bar,
        slope,
        Int(eq.iterations),
        Text(if eq.exists { "interior" } else { "zero-equilibrium" }.into()),
    ]
}

fn rate_cells<T: Scalar>(profile: &Profile<T>, p: &ModelParams<T>) -> Vec<Cell<T>> {
    let opts = RateOptions::default();
    let (r, mh, ml) = match MatchingRates::evaluate(profile, p, opts) {
        Ok(r) => {
            let m = |e| marriage_rate(e, profile, p, MarriageRateVariant::Summed, opts).unwrap_or(T::nan());
            (r, m(Education::High), m(Education::Low))
        }
        // Nobody socializes: every channel is shut.
        Err(_) => (MatchingRates::zero(), T::zero(), T::zero()),
    };
    [
        r.psi_hh,
        r.psi_lh,
        r.psi_ll,
        r.psi_hl,
        r.psi_lh + r.psi_ll,
        r.ups_hh,
        r.ups_hl,
        r.ups_lh,
        r.ups_ll,
        mh,
        ml,
    ]
    .into_iter()
    .map(Cell::Num)
    .collect()
}

fn heterogeneous_row<T: Scalar>(p: &ModelParams<T>) -> Vec<Cell<T>> {
    use Cell::*;
    match solve_heterogeneous(p, &HeterogeneousOptions::default()) {
        Ok(eq) => {
            let profile = eq.profile();
            let mut row = vec![Num(eq.s_h_star), Num(eq.s_l_star)];
            row.extend(rate_cells(&profile, p));
            let others: Vec<String> = eq
                .roots
                .iter()
                .skip(1)
                .map(|r| format!("{:?}:{:?}", r.high, r.low))
                .collect();
            row.extend([
                Bool(eq.exists),
                Text(eq.status.tag().into()),
                Num(eq.residual_h),
                Num(eq.residual_l),
                Int(eq.iterations),
                Int(eq.roots.len()),
                Text(others.join(";")),
            ]);
            row
        }
        Err(e) => {
            let mut row = vec![Empty; 13];
            row.extend([
                Bool(false),
                Text(format!("error: {e}")),
                Empty,
                Empty,
                Empty,
                Int(0),
                Text(String::new()),
            ]);
            row
        }
    }
}

fn exogenous_row<T: Scalar>(p: &ModelParams<T>, profile: &Profile<T>) -> Vec<Cell<T>> {
    let mut row = vec![Cell::Num(profile.high), Cell::Num(profile.low)];
    row.extend(rate_cells(profile, p));
    row.push(Cell::Bool(true));
    row
}

/// Shape of a column along the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakVerdict {
    /// First differences change sign exactly once, from + to -.
    SinglePeak,
    MonotoneIncreasing,
    MonotoneDecreasing,
    Constant,
    /// Anything else, including valleys and oscillation.
    Inconclusive,
}

impl PeakVerdict {
    pub fn tag(self) -> &'static str {
        match self {
            PeakVerdict::SinglePeak => "single-peak",
            PeakVerdict::MonotoneIncreasing => "monotone-increasing",
            PeakVerdict::MonotoneDecreasing => "monotone-decreasing",
            PeakVerdict::Constant => "constant",
            PeakVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Differences within this band count as flat.
pub const PLATEAU_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakReport<T> {
    pub verdict: PeakVerdict,
    /// Axis value and column value at the maximum.
    pub argmax: T,
    pub max: T,
    pub sign_changes: usize,
    pub valid_points: usize,
}

/// Classifies a column using first differences over the points where the
/// equilibrium exists.
pub fn detect_peak<T: Scalar>(table: &SweepTable<T>, column: &str) -> Result<PeakReport<T>> {
    let points = table.valid_points(column)?;
    detect_peak_points(&points)
}

/// [`detect_peak`] on raw `(x, value)` pairs in increasing `x`.
pub fn detect_peak_points<T: Scalar>(points: &[(T, T)]) -> Result<PeakReport<T>> {
    if points.len() < 3 {
        return Err(Error::Format(format!(
            "peak detection needs at least 3 valid points, got {}",
            points.len()
        )));
    }
    let tol = lit::<T>(PLATEAU_TOLERANCE);
    let signs: Vec<i8> = points
        .windows(2)
        .map(|w| {
            let diff = w[1].1 - w[0].1;
            if diff > tol {
                1
            } else if diff < -tol {
                -1
            } else {
                0
            }
        })
        .filter(|&s| s != 0)
        .collect();
    let sign_changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let verdict = match (signs.first(), sign_changes) {
        (None, _) => PeakVerdict::Constant,
        (Some(1), 0) => PeakVerdict::MonotoneIncreasing,
        (Some(_), 0) => PeakVerdict::MonotoneDecreasing,
        (Some(1), 1) => PeakVerdict::SinglePeak,
        _ => PeakVerdict::Inconclusive,
    };
    let (argmax, max) = points
        .iter()
        .copied()
        .fold(points[0], |best, p| if p.1 > best.1 { p } else { best });
    Ok(PeakReport {
        verdict,
        argmax,
        max,
        sign_changes,
        valid_points: points.len(),
    })
}

/// Richardson-refined central difference of an equilibrium quantity along
/// `axis`. `solver` returns `None` where no interior equilibrium exists,
/// which inside the stencil is a [`Error::StencilCrossing`].
pub fn numeric_derivative<T, F>(solver: F, params: &ModelParams<T>, axis: Axis, step: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&ModelParams<T>) -> Result<Option<T>>,
{
    numdiff::richardson(
        |v| {
            let mut p = *params;
            axis.set(&mut p, v);
            solver(&p)?.ok_or(Error::StencilCrossing {
                axis: axis.name(),
                value: to_f64(v),
            })
        },
        axis.get(params),
        step,
    )
}

/// One-type equilibrium effort, bisected to the limit of the bracket.
/// Meant as the `solver` of [`numeric_derivative`].
pub fn homogeneous_effort<T: Scalar>(params: &ModelParams<T>) -> Result<Option<T>> {
    let eq = solve_homogeneous(params, T::min_positive_value())?;
    Ok(eq.exists.then_some(eq.s_star))
}

/// Output format of [`emit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Format(format!("unknown format `{s}`; expected csv or json"))),
        }
    }
}

/// Writes the table as CSV with a header row.
pub fn write_csv<T: Scalar, W: Write>(table: &SweepTable<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Format(format!("csv: {e}"));
    w.write_record(&table.columns).map_err(map)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(map)?;
    }
    w.flush().map_err(|e| Error::Format(format!("csv: {e}")))?;
    Ok(())
}

struct Rows<'a, T>(&'a SweepTable<T>);

impl<T: Scalar> Serialize for Rows<'_, T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.rows.len()))?;
        for row in &self.0.rows {
            seq.serialize_element(&Record(&self.0.columns, row))?;
        }
        seq.end()
    }
}

struct Record<'a, T>(&'a [&'static str], &'a [Cell<T>]);

impl<T: Scalar> Serialize for Record<'_, T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
#[serde(bound = "")]
struct JsonTable<'a, T: Scalar> {
    axis: Axis,
    model: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<Profile<f64>>,
    params: ModelParams<f64>,
    columns: &'a [&'static str],
    rows: Rows<'a, T>,
}

/// Writes the table as a JSON document: metadata plus one object per row
/// with keys in column order.
pub fn write_json<T: Scalar, W: Write>(table: &SweepTable<T>, mut out: W) -> Result<()> {
    let doc = JsonTable {
        axis: table.axis,
        model: table.model.name(),
        profile: match table.model {
            Model::Exogenous(p) => Some(Profile::new(to_f64(p.high), to_f64(p.low))),
            _ => None,
        },
        params: table.params.cast(),
        columns: &table.columns,
        rows: Rows(table),
    };
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Format(format!("json: {e}")))?;
    writeln!(out).map_err(|e| Error::Format(format!("json: {e}")))?;
    Ok(())
}

/// Writes the table to `destination` in the given format.
pub fn emit<T: Scalar>(table: &SweepTable<T>, format: Format, destination: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: destination.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(destination).map_err(io)?;
    let mut buf = std::io::BufWriter::new(file);
    match format {
        Format::Csv => write_csv(table, &mut buf)?,
        Format::Json => write_json(table, &mut buf)?,
    }
    buf.flush().map_err(io)
}
