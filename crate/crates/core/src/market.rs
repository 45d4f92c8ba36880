//! Markets as matrices of price relatives.
//!
//! Row `t` (0-based) holds the relatives `f_{t+1} = S_{t+1} / S_t` of the
//! transition `t -> t+1`; prices themselves are never stored; cumulative
//! wealth is derived on demand with `S_0 = 1`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::portfolio::WealthPath;

#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    labels: Vec<String>,
    /// Row-major `steps x assets`.
    relatives: Vec<f64>,
    steps: usize,
}

impl Market {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = labels.len();
        let mut relatives = Vec::with_capacity(rows.len() * k);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::BadCell {
                    row: t + 1,
                    column: row.len().min(k) + 1,
                    message: format!("expected {k} values, found {}", row.len()),
                });
            }
            relatives.extend_from_slice(row);
        }
        Self::from_flat(labels, relatives)
    }

    /// Builds a market from a row-major buffer whose length is a multiple of
    /// `labels.len()`.
    pub fn from_flat(labels: Vec<String>, relatives: Vec<f64>) -> Result<Self> {
        let k = labels.len();
        if k == 0 {
            return Err(Error::invalid("a market needs at least one asset"));
        }
        if relatives.is_empty() || !relatives.len().is_multiple_of(k) {
            return Err(Error::invalid(format!(
                "{} relatives do not form a nonempty matrix with {k} columns",
                relatives.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        for (i, &f) in relatives.iter().enumerate() {
            check_relative(f, i / k + 1, i % k + 1)?;
        }
        Ok(Market {
            steps: relatives.len() / k,
            labels,
            relatives,
        })
    }

    /// Labels the columns `asset1`, `asset2`, ...
    pub fn unlabeled(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        Self::new(default_labels(k), rows)
    }

    /// Number of periods `T`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of assets `K`.
    pub fn assets(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Relatives of the transition `t -> t+1`.
    pub fn row(&self, t: usize) -> &[f64] {
        let k = self.assets();
        &self.relatives[t * k..(t + 1) * k]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.relatives.chunks_exact(self.assets())
    }

    pub fn relative(&self, t: usize, asset: usize) -> f64 {
        self.row(t)[asset]
    }

    pub fn column(&self, asset: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[asset])
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Wealth of one unit held in `asset` from time 0, at times `0..=T`.
    pub fn cumulative_wealth(&self, asset: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps + 1);
        let mut w = 1.0;
        out.push(w);
        for f in self.column(asset) {
            w *= f;
            out.push(w);
        }
        out
    }

    /// Restricts and reorders the columns to `labels`.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Market> {
        let idx = labels
            .iter()
            .map(|l| {
                self.index_of(l.as_ref())
                    .ok_or_else(|| Error::UnknownLabel(l.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut relatives = Vec::with_capacity(self.steps * idx.len());
        for row in self.rows() {
            relatives.extend(idx.iter().map(|&i| row[i]));
        }
        Market::from_flat(idx.iter().map(|&i| self.labels[i].clone()).collect(), relatives)
    }

    /// The market made of the first `n` columns.
    pub fn leading_assets(&self, n: usize) -> Result<Market> {
        if n == 0 || n > self.assets() {
            return Err(Error::invalid(format!(
                "cannot keep {n} of {} assets",
                self.assets()
            )));
        }
        let mut relatives = Vec::with_capacity(self.steps * n);
        for row in self.rows() {
            relatives.extend_from_slice(&row[..n]);
        }
        Ok(Market {
            labels: self.labels[..n].to_vec(),
            relatives,
            steps: self.steps,
        })
    }

    /// The market whose row `t` is row `sigma(t)` of `self`.
    pub fn permute(&self, sigma: &Permutation) -> Result<Market> {
        if sigma.len() != self.steps {
            return Err(Error::DimensionMismatch {
                expected: self.steps,
                actual: sigma.len(),
            });
        }
        let mut relatives = Vec::with_capacity(self.relatives.len());
        for &src in sigma.mapping() {
            relatives.extend_from_slice(self.row(src));
        }
        Ok(Market {
            labels: self.labels.clone(),
            relatives,
            steps: self.steps,
        })
    }

    /// Appends a synthetic asset whose relatives are `path_t / path_{t-1}`.
    pub fn augment(&self, label: &str, path: &WealthPath) -> Result<Market> {
        let values = path.values();
        if values.len() != self.steps + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.steps + 1,
                actual: values.len(),
            });
        }
        if self.index_of(label).is_some() {
            return Err(Error::DuplicateLabel(label.to_string()));
        }
        if let Some((t, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::invalid(format!(
                "wealth path value {v} at time {t} is not positive"
            )));
        }
        let k = self.assets();
        let mut relatives = Vec::with_capacity(self.steps * (k + 1));
        for (row, pair) in self.rows().zip(values.windows(2)) {
            relatives.extend_from_slice(row);
            relatives.push(pair[1] / pair[0]);
        }
        let mut labels = self.labels.clone();
        labels.push(label.to_string());
        Market::from_flat(labels, relatives)
    }

    /// Writes a header line and one line per period, each value in its
    /// shortest round-tripping decimal form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |source| Error::Csv {
            path: "<writer>".into(),
            source,
        };
        w.write_record(&self.labels).map_err(wrap)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|x| format_f64(*x))).map_err(wrap)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<writer>".into(),
            source,
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(file)
    }
}

fn default_labels(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("asset{i}")).collect()
}

fn check_relative(f: f64, row: usize, column: usize) -> Result<()> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(Error::BadCell {
            row,
            column,
            message: format!("price relative {f} is not strictly positive"),
        })
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// `None` detects a header from a non-numeric first row.
    pub has_header: Option<bool>,
    pub select: Option<Vec<String>>,
}

/// Loads a price-relative CSV file.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Market> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, options).map_err(|e| match e {
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<Market> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| Error::Csv {
            path: "<reader>".into(),
            source,
        })?;
        records.push(rec);
    }
    let Some(first) = records.first() else {
        return Err(Error::invalid("CSV input is empty"));
    };
    let has_header = options
        .has_header
        .unwrap_or_else(|| first.iter().any(|c| c.parse::<f64>().is_err()));
    let (labels, body) = if has_header {
        (first.iter().map(str::to_string).collect(), &records[1..])
    } else {
        (default_labels(first.len()), &records[..])
    };
    let k = labels.len();
    let mut relatives = Vec::with_capacity(body.len() * k);
    for (i, rec) in body.iter().enumerate() {
        let row = i + 1;
        for (j, cell) in rec.iter().enumerate() {
            let f: f64 = cell.parse().map_err(|_| Error::BadCell {
                row,
                column: j + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            check_relative(f, row, j + 1)?;
            relatives.push(f);
        }
    }
    let market = Market::from_flat(labels, relatives)?;
    match &options.select {
        Some(sel) => market.select(sel),
        None => Ok(market),
    }
}

/// Two assets: a constant one and one alternating relatives 2, 1/2, 2, ...
pub fn toy_market(steps: usize) -> Result<Market> {
    if steps == 0 {
        return Err(Error::invalid("toy market needs at least one step"));
    }
    let relatives = (0..steps)
        .flat_map(|t| [1.0, if t % 2 == 0 { 2.0 } else { 0.5 }])
        .collect();
    Market::from_flat(vec!["constant".into(), "oscillating".into()], relatives)
}

/// A bijection of the time indices; `mapping[t]` is the source row of row `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    /// `mapping` is 0-based.
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &m in &mapping {
            if m >= n || std::mem::replace(&mut seen[m], true) {
                return Err(Error::invalid(format!(
                    "{mapping:?} is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Permutation { mapping })
    }

    pub fn from_one_based(mapping: &[usize]) -> Result<Self> {
        if mapping.contains(&0) {
            return Err(Error::invalid("1-based permutation contains 0"));
        }
        Self::new(mapping.iter().map(|m| m - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            mapping: (0..n).collect(),
        }
    }

    pub fn reverse(n: usize) -> Self {
        Permutation {
            mapping: (0..n).rev().collect(),
        }
    }

    /// Exchanges the 0-based positions `i` and `j`.
    pub fn swap(n: usize, i: usize, j: usize) -> Result<Self> {
        if i >= n || j >= n {
            return Err(Error::invalid(format!(
                "swap positions {i}, {j} out of range for length {n}"
            )));
        }
        let mut p = Self::identity(n);
        p.mapping.swap(i, j);
        Ok(p)
    }

    /// Parses `reverse`, `swap:i,j` or an explicit list `3,1,2`, all
    /// positions 1-based, for a horizon of `n` steps.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let text = text.trim();
        let parse_list = |s: &str| -> Result<Vec<usize>> {
            s.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::invalid(format!("bad permutation entry `{p}`")))
                })
                .collect()
        };
        let perm = if text == "reverse" {
            Self::reverse(n)
        } else if text == "identity" {
            Self::identity(n)
        } else if let Some(rest) = text.strip_prefix("swap:") {
            let idx = parse_list(rest)?;
            match idx[..] {
                [i, j] if i >= 1 && j >= 1 => Self::swap(n, i - 1, j - 1)?,
                _ => {
                    return Err(Error::invalid(format!(
                        "`{text}`: swap needs two 1-based positions"
                    )))
                }
            }
        } else {
            Self::from_one_based(&parse_list(text)?)?
        };
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: perm.len(),
            });
        }
        Ok(perm)
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (t, &s) in self.mapping.iter().enumerate() {
            inv[s] = t;
        }
        Permutation { mapping: inv }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2() -> Market {
        Market::unlabeled(vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![2.0, 1.0]]).unwrap()
    }

    #[test]
    fn reads_small_file_with_header() {
        let m = read_csv("iroqu,kinar\n1.01,0.98\r\n0.99,1.02\n".as_bytes(), &CsvOptions::default())
            .unwrap();
        assert_eq!(m.assets(), 2);
        assert_eq!(m.steps(), 2);
        assert_eq!(m.labels(), &["iroqu", "kinar"]);
        assert_eq!(m.row(1), &[0.99, 1.02]);
    }

    #[test]
    fn headerless_file_gets_default_labels() {
        let m = read_csv("1.5,2\n1,1\n".as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(m.labels(), &["asset1", "asset2"]);
        assert_eq!(m.steps(), 2);
        let forced = CsvOptions {
            has_header: Some(true),
            select: None,
        };
        let m = read_csv("1.5,2\n1,1\n".as_bytes(), &forced).unwrap();
        assert_eq!(m.labels(), &["1.5", "2"]);
        assert_eq!(m.steps(), 1);
    }

    #[test]
    fn zero_cell_reports_coordinates() {
        let err = read_csv("a,b\n1,1\n1,0.0\n".as_bytes(), &CsvOptions::default()).unwrap_err();
        match err {
            Error::BadCell { row, column, .. } => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_is_rejected() {
        let err = read_csv("a,b\n1,x\n".as_bytes(), &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BadCell { row: 1, column: 2, .. }));
    }

    #[test]
    fn select_orders_and_rejects_unknown() {
        let opts = CsvOptions {
            has_header: None,
            select: Some(vec!["c".into(), "a".into()]),
        };
        let m = read_csv("a,b,c\n1,2,3\n".as_bytes(), &opts).unwrap();
        assert_eq!(m.labels(), &["c", "a"]);
        assert_eq!(m.row(0), &[3.0, 1.0]);
        let bad = CsvOptions {
            has_header: None,
            select: Some(vec!["zz".into()]),
        };
        assert!(matches!(
            read_csv("a,b\n1,2\n".as_bytes(), &bad),
            Err(Error::UnknownLabel(l)) if l == "zz"
        ));
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(matches!(
            Market::new(vec!["a".into(), "a".into()], vec![vec![1.0, 1.0]]),
            Err(Error::DuplicateLabel(_))
        ));
    }

    #[test]
    fn toy_market_shapes() {
        let m = toy_market(2).unwrap();
        assert_eq!(m.row(0), &[1.0, 2.0]);
        assert_eq!(m.row(1), &[1.0, 0.5]);
        assert_eq!(toy_market(1).unwrap().steps(), 1);
        let wealth = toy_market(50).unwrap().cumulative_wealth(1);
        for t in (0..=50).step_by(2) {
            assert_eq!(wealth[t], 1.0);
        }
        assert!(toy_market(0).is_err());
    }

    #[test]
    fn permute_table2_by_swapping_ends() {
        let m = table2();
        let sigma = Permutation::parse("swap:1,3", 3).unwrap();
        let p = m.permute(&sigma).unwrap();
        assert_eq!(p.row(0), &[2.0, 1.0]);
        assert_eq!(p.row(1), &[2.0, 1.0]);
        assert_eq!(p.row(2), &[1.0, 2.0]);
        assert_eq!(m.permute(&Permutation::identity(3)).unwrap(), m);
        assert_eq!(p.permute(&sigma.inverse()).unwrap(), m);
        assert!(m.permute(&Permutation::identity(2)).is_err());
    }

    #[test]
    fn permutation_parsing() {
        assert_eq!(Permutation::parse("reverse", 3).unwrap().mapping(), &[2, 1, 0]);
        assert_eq!(Permutation::parse("2,3,1", 3).unwrap().mapping(), &[1, 2, 0]);
        assert!(Permutation::parse("1,1,2", 3).is_err());
        assert!(Permutation::parse("1,2", 3).is_err());
        assert!(Permutation::parse("swap:0,2", 3).is_err());
        assert!(Permutation::parse("swap:1", 3).is_err());
        assert!(Permutation::parse("shuffle", 3).is_err());
    }

    #[test]
    fn augment_appends_ratio_column() {
        let m = Market::unlabeled(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let path = WealthPath::new(vec![1.0, 1.5, 13.0 / 6.0]).unwrap();
        let a = m.augment("up1", &path).unwrap();
        assert_eq!(a.assets(), 3);
        assert_eq!(a.relative(0, 2), 1.5);
        assert!((a.relative(1, 2) - 13.0 / 9.0).abs() < 1e-15);
        assert_eq!(a.leading_assets(2).unwrap(), m);

        let ones = WealthPath::new(vec![1.0; 3]).unwrap();
        let b = a.augment("flat", &ones).unwrap();
        assert_eq!(b.assets(), 4);
        assert!(b.column(3).all(|f| f == 1.0));
        assert_eq!(b.leading_assets(2).unwrap(), m);

        assert!(matches!(a.augment("up1", &ones), Err(Error::DuplicateLabel(_))));
        let short = WealthPath::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            m.augment("x", &short),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = Market::new(
            vec!["x".into(), "y".into()],
            vec![vec![0.1 + 0.2, 1.0 / 3.0], vec![1e-300, 12345.678901234567]],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &CsvOptions::default()).unwrap();
        assert_eq!(back, m);
    }
}
