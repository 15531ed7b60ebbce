//! Nested periodic matrices (NPMs) and dictionaries (NPDs).
//!
//! An NPD with largest period `P` and `L` rows concatenates, for every
//! `p = 1..=P`, the block `C_p` of `phi(p)` period-`p` atoms, periodically
//! extended to `L` samples. Two families are supported:
//!
//! * [`DictionaryFamily::Rpt`]: circular downshifts of the Ramanujan sum
//!   `c_p(n)`. Integer valued before normalization.
//! * [`DictionaryFamily::Farey`]: complex exponentials `e^{j 2 pi k n / p}`
//!   for `k` coprime to `p`.

use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numtheory::{divisors, gcd, ramanujan_cycle, totient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DictionaryFamily {
    Rpt,
    Farey,
}

impl DictionaryFamily {
    /// Whether every atom of this family is real valued.
    pub fn is_real(self) -> bool {
        matches!(self, DictionaryFamily::Rpt)
    }
}

impl fmt::Display for DictionaryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DictionaryFamily::Rpt => "rpt",
            DictionaryFamily::Farey => "farey",
        })
    }
}

impl FromStr for DictionaryFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rpt" | "ramanujan" => Ok(DictionaryFamily::Rpt),
            "farey" | "dft" => Ok(DictionaryFamily::Farey),
            other => Err(Error::InvalidArgument(format!("unknown dictionary family `{other}`"))),
        }
    }
}

/// The `rows x phi(q)` block of period-`q` atoms, periodically extended to `rows` samples.
///
/// For RPT the columns are the `phi(q)` circular downshifts of one cycle of
/// `c_q`; for Farey they are `e^{j 2 pi k n / q}` over `k` coprime to `q`.
pub fn build_cq(family: DictionaryFamily, q: u64, rows: usize) -> DMatrix<Complex64> {
    assert!(q >= 1 && rows >= 1);
    let q_us = q as usize;
    match family {
        DictionaryFamily::Rpt => {
            let cycle = ramanujan_cycle(q);
            let width = totient(q) as usize;
            DMatrix::from_fn(rows, width, |r, shift| {
                // downshift by `shift`: entry n holds c_q(n - shift)
                let n = r % q_us;
                let v = cycle[(n + q_us - shift % q_us) % q_us];
                Complex64::new(v as f64, 0.0)
            })
        }
        DictionaryFamily::Farey => {
            let ks: Vec<u64> = (1..=q).filter(|&k| gcd(k, q) == 1).collect();
            DMatrix::from_fn(rows, ks.len(), |r, c| {
                let phase = ((ks[c] * (r as u64 % q)) % q) as f64 / q as f64;
                Complex64::from_polar(1.0, TAU * phase)
            })
        }
    }
}

/// The `p x p` nested periodic matrix `[C_{q_1} ... C_{q_k}]` over the divisors of `p`.
pub fn build_npm(family: DictionaryFamily, p: u64) -> DMatrix<Complex64> {
    let rows = p as usize;
    let blocks: Vec<_> = divisors(p).into_iter().map(|q| build_cq(family, q, rows)).collect();
    concat_columns(rows, &blocks)
}

fn concat_columns(rows: usize, blocks: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// An `L x N` nested periodic dictionary, `N = sum_{p <= P} phi(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NpdDictionary {
    family: DictionaryFamily,
    p_max: u64,
    matrix: DMatrix<Complex64>,
    atom_period: Vec<u64>,
    normalized: bool,
}

impl NpdDictionary {
    pub fn build(family: DictionaryFamily, p_max: u64, len: usize, normalize: bool) -> Self {
        assert!(p_max >= 1 && len >= 1);
        let blocks: Vec<_> = (1..=p_max).map(|p| build_cq(family, p, len)).collect();
        let mut matrix = concat_columns(len, &blocks);
        if normalize {
            for mut col in matrix.column_iter_mut() {
                let norm = col.norm();
                col /= Complex64::new(norm, 0.0);
            }
        }
        NpdDictionary { family, p_max, matrix, atom_period: atom_periods(p_max), normalized: normalize }
    }

    pub fn family(&self) -> DictionaryFamily {
        self.family
    }

    pub fn p_max(&self) -> u64 {
        self.p_max
    }

    /// Number of samples `L`.
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// Number of atoms `N`.
    pub fn n_atoms(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_real(&self) -> bool {
        self.family.is_real()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Period of atom `j` (1-based).
    pub fn atom_period(&self, j: usize) -> u64 {
        self.atom_period[j - 1]
    }

    /// Periods of all atoms, in column order.
    pub fn atom_periods(&self) -> &[u64] {
        &self.atom_period
    }

    /// Atom `j` (1-based) as a column view.
    pub fn atom(&self, j: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.matrix.column(j - 1)
    }

    /// The submatrix `K_S` for a 1-based index set.
    pub fn select(&self, support: &[usize]) -> DMatrix<Complex64> {
        let cols: Vec<usize> = support.iter().map(|&j| j - 1).collect();
        self.matrix.select_columns(&cols)
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized)
        }
    }

    /// Write the dictionary in the `npd v1` text format.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "npd v1 family={} L={} pmax={} normalized={}",
            self.family,
            self.len(),
            self.p_max,
            u8::from(self.normalized)
        )?;
        let real = self.family.is_real();
        let mut line = String::new();
        for r in 0..self.len() {
            line.clear();
            for c in 0..self.n_atoms() {
                if c > 0 {
                    line.push(',');
                }
                let z = self.matrix[(r, c)];
                if real {
                    line.push_str(&format_real(z.re));
                } else {
                    line.push_str(&format_complex(z));
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }

    /// Parse the `npd v1` format. `origin` is used in error messages only.
    pub fn read_from(reader: impl BufRead, origin: &Path) -> Result<Self> {
        let malformed = |line: usize, msg: String| Error::MalformedFile { path: origin.to_path_buf(), line, msg };
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(h) => h.map_err(|e| Error::io(origin, e))?,
            None => return Err(malformed(1, "empty file".into())),
        };
        let header = Header::parse(&header).map_err(|m| malformed(1, m))?;
        let n = atom_periods(header.p_max).len();

        let mut matrix = DMatrix::zeros(header.len, n);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            if rows == header.len {
                return Err(malformed(lineno, format!("more than L = {} data rows", header.len)));
            }
            let mut count = 0;
            for (c, field) in line.split(',').enumerate() {
                if c >= n {
                    return Err(malformed(lineno, format!("more than N = {n} entries")));
                }
                matrix[(rows, c)] =
                    parse_complex(field.trim()).ok_or_else(|| malformed(lineno, format!("bad entry `{field}`")))?;
                count += 1;
            }
            if count != n {
                return Err(malformed(lineno, format!("expected {n} entries, found {count}")));
            }
            rows += 1;
        }
        if rows != header.len {
            return Err(malformed(rows + 2, format!("truncated: expected {} data rows, found {rows}", header.len)));
        }
        Ok(NpdDictionary {
            family: header.family,
            p_max: header.p_max,
            matrix,
            atom_period: atom_periods(header.p_max),
            normalized: header.normalized,
        })
    }
}

fn atom_periods(p_max: u64) -> Vec<u64> {
    (1..=p_max).flat_map(|p| std::iter::repeat_n(p, totient(p) as usize)).collect()
}

struct Header {
    family: DictionaryFamily,
    len: usize,
    p_max: u64,
    normalized: bool,
}

impl Header {
    fn parse(line: &str) -> std::result::Result<Self, String> {
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("npd") || tokens.next() != Some("v1") {
            return Err("header must start with `npd v1`".into());
        }
        let (mut family, mut len, mut p_max, mut normalized) = (None, None, None, None);
        for tok in tokens {
            let (key, value) = tok.split_once('=').ok_or_else(|| format!("bad header field `{tok}`"))?;
            let bad = || format!("bad value for `{key}`: `{value}`");
            match key {
                "family" => family = Some(value.parse::<DictionaryFamily>().map_err(|_| bad())?),
                "L" => len = Some(value.parse::<usize>().map_err(|_| bad())?),
                "pmax" => p_max = Some(value.parse::<u64>().map_err(|_| bad())?),
                "normalized" => {
                    normalized = Some(match value {
                        "0" => false,
                        "1" => true,
                        _ => return Err(bad()),
                    })
                }
                _ => return Err(format!("unknown header field `{key}`")),
            }
        }
        let missing = |k: &str| format!("header is missing `{k}`");
        let header = Header {
            family: family.ok_or_else(|| missing("family"))?,
            len: len.ok_or_else(|| missing("L"))?,
            p_max: p_max.ok_or_else(|| missing("pmax"))?,
            normalized: normalized.ok_or_else(|| missing("normalized"))?,
        };
        if header.len == 0 || header.p_max == 0 {
            return Err("L and pmax must be positive".into());
        }
        Ok(header)
    }
}

/// 17 significant digits: enough to round-trip any f64.
fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_complex(z: Complex64) -> String {
    if z.im.is_sign_negative() {
        format!("{:.16e}-{:.16e}i", z.re, -z.im)
    } else {
        format!("{:.16e}+{:.16e}i", z.re, z.im)
    }
}

/// Parse `<re>`, `<re>+<im>i` or `<re>-<im>i`.
pub(crate) fn parse_complex(s: &str) -> Option<Complex64> {
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    // the sign separating the parts is the last +/- not at the start and not an exponent sign
    let split =
        (1..bytes.len()).rev().find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re = body[..split].parse::<f64>().ok()?;
    let im = body[split + 1..].parse::<f64>().ok()?;
    let im = if bytes[split] == b'-' { -im } else { im };
    Some(Complex64::new(re, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::totient_prefix_sum;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn real_matrix(rows: usize, data: &[&[f64]]) -> DMatrix<Complex64> {
        DMatrix::from_fn(rows, data[0].len(), |r, col| c(data[r][col]))
    }

    #[test]
    fn rpt_blocks() {
        let ones = build_cq(DictionaryFamily::Rpt, 1, 4);
        assert_eq!(ones, DMatrix::from_element(4, 1, c(1.0)));

        let c4 = build_cq(DictionaryFamily::Rpt, 4, 4);
        assert_eq!(c4, real_matrix(4, &[&[2., 0.], &[0., 2.], &[-2., 0.], &[0., -2.]]));
    }

    #[test]
    fn farey_period_two_block() {
        let b = build_cq(DictionaryFamily::Farey, 2, 4);
        let expected = [1.0, -1.0, 1.0, -1.0];
        for (r, e) in expected.iter().enumerate() {
            assert!((b[(r, 0)] - c(*e)).norm() < 1e-15);
        }
    }

    #[test]
    fn rpt_npm_of_four() {
        let a4 = build_npm(DictionaryFamily::Rpt, 4);
        let expected =
            real_matrix(4, &[&[1., 1., 2., 0.], &[1., -1., 0., 2.], &[1., 1., -2., 0.], &[1., -1., 0., -2.]]);
        assert_eq!(a4, expected);
        assert_eq!(build_npm(DictionaryFamily::Rpt, 1), DMatrix::from_element(1, 1, c(1.0)));
    }

    #[test]
    fn farey_npm_of_two() {
        let a2 = build_npm(DictionaryFamily::Farey, 2);
        let expected = real_matrix(2, &[&[1., 1.], &[1., -1.]]);
        assert!((a2 - expected).norm() < 1e-15);
    }

    #[test]
    fn small_rpt_layout() {
        let d = NpdDictionary::build(DictionaryFamily::Rpt, 6, 8, false);
        assert_eq!((d.len(), d.n_atoms()), (8, 12));
        // columns 7..=10 are C_5 extended to 8 samples
        let c5 = build_cq(DictionaryFamily::Rpt, 5, 8);
        assert_eq!(d.matrix().columns(6, 4), c5.columns(0, 4));
        assert_eq!(d.atom_periods(), &[1, 2, 3, 3, 4, 4, 5, 5, 5, 5, 6, 6]);
        // first row of C_5: 4 -1 -1 -1 ; second row: -1 4 -1 -1
        let row0: Vec<f64> = (6..10).map(|j| d.matrix()[(0, j)].re).collect();
        assert_eq!(row0, vec![4., -1., -1., -1.]);
        let row1: Vec<f64> = (6..10).map(|j| d.matrix()[(1, j)].re).collect();
        assert_eq!(row1, vec![-1., 4., -1., -1.]);
        assert!(d.matrix().iter().all(|z| z.im == 0.0 && z.re.fract() == 0.0));
    }

    #[test]
    fn normalized_ones_column() {
        let d = NpdDictionary::build(DictionaryFamily::Rpt, 1, 5, true);
        assert_eq!(d.n_atoms(), 1);
        for z in d.matrix().iter() {
            assert!((z.re - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn farey_large_shape_and_norms() {
        let d = NpdDictionary::build(DictionaryFamily::Farey, 20, 100, true);
        assert_eq!(totient_prefix_sum(20), 128);
        assert_eq!((d.len(), d.n_atoms()), (100, 128));
        for col in d.matrix().column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn columns_are_periodic() {
        for family in [DictionaryFamily::Rpt, DictionaryFamily::Farey] {
            let d = NpdDictionary::build(family, 12, 37, true);
            for j in 1..=d.n_atoms() {
                let q = d.atom_period(j) as usize;
                let col = d.atom(j);
                for r in 0..d.len() - q {
                    assert!((col[r + q] - col[r]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn npm_blocks_are_orthogonal_and_full_rank() {
        for family in [DictionaryFamily::Rpt, DictionaryFamily::Farey] {
            for p in 1..=30u64 {
                let rows = p as usize;
                let blocks: Vec<_> = divisors(p).into_iter().map(|q| build_cq(family, q, rows)).collect();
                for i in 0..blocks.len() {
                    for j in (i + 1)..blocks.len() {
                        let cross = blocks[i].adjoint() * &blocks[j];
                        let max = cross.iter().map(|z| z.norm()).fold(0.0, f64::max);
                        assert!(max <= 1e-8, "{family} p={p}: {max}");
                    }
                }
                let a = build_npm(family, p);
                let sv = a.singular_values();
                let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(smin > 1e-8, "{family} A_{p} rank deficient");
            }
        }
    }

    #[test]
    fn npd_at_full_period_matches_npm_up_to_ordering() {
        for family in [DictionaryFamily::Rpt, DictionaryFamily::Farey] {
            for p in [4u64, 6, 12] {
                let d = NpdDictionary::build(family, p, p as usize, false);
                let cols: Vec<usize> = (1..=d.n_atoms()).filter(|&j| p % d.atom_period(j) == 0).collect();
                let npd_block = d.select(&cols);
                // blocks appear in the same ascending-divisor order in both
                let npm = build_npm(family, p);
                assert!((npd_block - npm).norm() < 1e-12, "{family} p={p}");
            }
        }
    }

    #[test]
    fn complex_parse_forms() {
        assert_eq!(parse_complex("1.5"), Some(c(1.5)));
        assert_eq!(parse_complex("1e-3+2e+1i"), Some(Complex64::new(1e-3, 20.0)));
        assert_eq!(parse_complex("-1.0e0-2.5e-2i"), Some(Complex64::new(-1.0, -0.025)));
        assert_eq!(parse_complex("abc"), None);
        assert_eq!(parse_complex("1+i"), None);
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for (family, norm) in [(DictionaryFamily::Rpt, false), (DictionaryFamily::Farey, true)] {
            let d = NpdDictionary::build(family, 6, 8, norm);
            let path = dir.path().join(format!("{family}.npd"));
            d.export(&path).unwrap();
            let back = NpdDictionary::import(&path).unwrap();
            assert_eq!(back, d);
            let path2 = dir.path().join(format!("{family}-again.npd"));
            back.export(&path2).unwrap();
            assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
        }
    }

    #[test]
    fn farey_export_writes_complex_text() {
        let d = NpdDictionary::build(DictionaryFamily::Farey, 3, 4, true);
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "npd v1 family=farey L=4 pmax=3 normalized=1");
        let row1 = lines.nth(1).unwrap();
        assert!(row1.split(',').all(|f| f.ends_with('i')));
        assert!(row1.contains("-4.330127018922"));
    }

    #[test]
    fn truncated_file_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.npd");
        NpdDictionary::build(DictionaryFamily::Rpt, 6, 8, false).export(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().take(5).collect();
        fs::write(&path, cut.join("\n")).unwrap();
        match NpdDictionary::import(&path) {
            Err(Error::MalformedFile { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected malformed-file error, got {other:?}"),
        }

        fs::write(&path, "npd v1 family=rpt L=2 pmax=2 normalized=0\n1,1\n1,x\n").unwrap();
        match NpdDictionary::import(&path) {
            Err(Error::MalformedFile { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed-file error, got {other:?}"),
        }
    }
}
