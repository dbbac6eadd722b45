use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::basis::TwoPhotonGrid;
use crate::error::{Error, Result};
use crate::model::ParamMap;
use crate::observables::ObservableSeries;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// `# key = value` lines written above the data.
#[derive(Debug, Clone, Default)]
pub struct Header {
    pub title: String,
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(title: impl Into<String>) -> Self {
        Header {
            title: title.into(),
            entries: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// Lattice parameters, realised and requested.
    pub fn with_params(self, p: &ParamMap) -> Self {
        self.with("gamma_tau", format_float(p.gamma_tau))
            .with("gamma_tau_target", format_float(p.gamma_tau_target))
            .with("gamma_over_4J", format_float(p.gamma_over_4j))
            .with("d", p.d)
            .with("g", format_float(p.g))
            .with("gamma", format_float(p.gamma))
            .with("units", "J = 1, times in 1/Γ")
    }

    fn render(&self, columns: &[&str]) -> String {
        let mut s = format!("# {}\n", self.title);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "# columns: {}", columns.join(" "));
        s
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Columnar text file; every row must have one value per column.
pub fn write_curve(path: &Path, header: &Header, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = header.render(columns);
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::Consistency(format!(
                "row of {} values for {} columns",
                row.len(),
                columns.len()
            )));
        }
        let line: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn write_series(path: &Path, header: &Header, series: &ObservableSeries) -> Result<()> {
    let mut columns = vec!["t[1/Γ]", "P_e", "P_ph", "P_tr", "norm", "n_inner"];
    if series.concurrence.is_some() {
        columns.push("C");
    }
    if series.p_bb.is_some() {
        columns.push("P_bb");
    }
    let rows: Vec<Vec<f64>> = (0..series.len())
        .map(|i| {
            let mut r = vec![
                series.t[i],
                series.p_e[i],
                series.p_ph[i],
                series.p_tr[i],
                series.norm[i],
                series.n_inner[i],
            ];
            if let Some(c) = &series.concurrence {
                r.push(c[i]);
            }
            if let Some(b) = &series.p_bb {
                r.push(b[i]);
            }
            r
        })
        .collect();
    write_curve(path, header, &columns, &rows)
}

/// Site-resolved profile such as the photon intensity.
pub fn write_profile(path: &Path, header: &Header, name: &str, values: &[f64]) -> Result<()> {
    let rows: Vec<Vec<f64>> = values.iter().enumerate().map(|(i, v)| vec![(i + 1) as f64, *v]).collect();
    write_curve(path, header, &["x", name], &rows)
}

/// Two-photon density `|χ(x, y)|²` for `x, y ≤ max_site`.
pub fn write_density(path: &Path, header: &Header, grid: &TwoPhotonGrid, max_site: usize) -> Result<()> {
    let n = max_site.min(grid.n_sites);
    let mut rows = Vec::with_capacity(n * n);
    for x in 1..=n {
        for y in 1..=n {
            rows.push(vec![x as f64, y as f64, grid.get(x, y).norm_sqr()]);
        }
    }
    write_curve(path, header, &["x", "y", "density"], &rows)
}

/// Wavepacket amplitudes stored as text: a single-photon mode or a
/// symmetric two-photon amplitude.
#[derive(Debug, Clone, PartialEq)]
pub enum CustomGrid {
    One(Vec<Complex64>),
    Two(TwoPhotonGrid),
}

impl CustomGrid {
    pub fn sector(&self) -> usize {
        match self {
            CustomGrid::One(_) => 1,
            CustomGrid::Two(_) => 2,
        }
    }

    pub fn n_sites(&self) -> usize {
        match self {
            CustomGrid::One(v) => v.len(),
            CustomGrid::Two(g) => g.n_sites,
        }
    }
}

/// Only non-zero entries are written; for two photons only `x ≤ y`.
pub fn write_custom_grid(path: &Path, grid: &CustomGrid) -> Result<()> {
    let header = Header::new("wavepacket amplitude")
        .with("n_sites", grid.n_sites())
        .with("sector", grid.sector());
    let mut s;
    match grid {
        CustomGrid::One(v) => {
            s = header.render(&["x", "re", "im"]);
            for (i, a) in v.iter().enumerate() {
                if a.norm_sqr() > 0.0 {
                    let _ = writeln!(s, "{} {} {}", i + 1, format_float(a.re), format_float(a.im));
                }
            }
        }
        CustomGrid::Two(g) => {
            s = header.render(&["x", "y", "re", "im"]);
            for x in 1..=g.n_sites {
                for y in x..=g.n_sites {
                    let a = g.get(x, y);
                    if a.norm_sqr() > 0.0 {
                        let _ = writeln!(s, "{x} {y} {} {}", format_float(a.re), format_float(a.im));
                    }
                }
            }
        }
    }
    write_text(path, &s)
}

pub fn read_custom_grid(path: &Path) -> Result<CustomGrid> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, detail: String| Error::Parse {
        path: path.to_path_buf(),
        detail: format!("line {line}: {detail}"),
    };
    let mut n_sites = None;
    let mut sector = None;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(h) = line.strip_prefix('#') {
            if let Some((k, v)) = h.split_once('=') {
                let parsed = v.trim().parse::<usize>();
                match k.trim() {
                    "n_sites" => n_sites = Some(parsed.map_err(|e| perr(i + 1, e.to_string()))?),
                    "sector" => sector = Some(parsed.map_err(|e| perr(i + 1, e.to_string()))?),
                    _ => {}
                }
            }
            continue;
        }
        if !line.is_empty() {
            data.push((i + 1, line));
        }
    }
    let n = n_sites.ok_or_else(|| perr(0, "missing n_sites header".into()))?;
    let sector = sector.ok_or_else(|| perr(0, "missing sector header".into()))?;
    let site = |ln: usize, s: &str| -> Result<usize> {
        let x = s.parse::<usize>().map_err(|e| perr(ln, e.to_string()))?;
        if x == 0 || x > n {
            return Err(perr(ln, format!("site {x} outside 1..={n}")));
        }
        Ok(x)
    };
    let num = |ln: usize, s: &str| s.parse::<f64>().map_err(|e| perr(ln, e.to_string()));
    match sector {
        1 => {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            for (ln, line) in data {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(perr(ln, format!("expected 3 fields, got {}", f.len())));
                }
                v[site(ln, f[0])? - 1] = Complex64::new(num(ln, f[1])?, num(ln, f[2])?);
            }
            Ok(CustomGrid::One(v))
        }
        2 => {
            let mut g = TwoPhotonGrid::zeros(n);
            for (ln, line) in data {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 4 {
                    return Err(perr(ln, format!("expected 4 fields, got {}", f.len())));
                }
                let (x, y) = (site(ln, f[0])?, site(ln, f[1])?);
                g.set_symmetric(x, y, Complex64::new(num(ln, f[2])?, num(ln, f[3])?));
            }
            Ok(CustomGrid::Two(g))
        }
        s => Err(perr(0, format!("unsupported sector {s}"))),
    }
}

pub fn read_two_photon_grid(path: &Path) -> Result<TwoPhotonGrid> {
    match read_custom_grid(path)? {
        CustomGrid::Two(g) => Ok(g),
        CustomGrid::One(_) => Err(Error::Parse {
            path: path.to_path_buf(),
            detail: "expected a two-photon amplitude (sector = 2)".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, 5e-324, 0.0, -0.0, std::f64::consts::PI] {
            let y: f64 = format_float(x).parse().unwrap();
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn series_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ObservableSeries::new(false, false);
        for i in 0..3 {
            s.t.push(i as f64);
            s.p_e.push(0.5);
            s.p_ph.push(0.1);
            s.p_tr.push(0.6);
            s.norm.push(1.0);
            s.n_inner.push(0.7);
        }
        let p = dir.path().join("s.txt");
        write_series(&p, &Header::new("series").with("d", 10), &s).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
        assert!(text.contains("# columns: t[1/Γ] P_e P_ph P_tr norm n_inner"));
    }

    #[test]
    fn custom_grid_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut g = TwoPhotonGrid::zeros(7);
        for x in 1..=7 {
            for y in x..=7 {
                g.set_symmetric(x, y, Complex64::new((x as f64).sin() / 3.0, -(y as f64 * 0.7).cos() / 7.0));
            }
        }
        let p = dir.path().join("g.txt");
        write_custom_grid(&p, &CustomGrid::Two(g.clone())).unwrap();
        let back = read_two_photon_grid(&p).unwrap();
        for x in 1..=7 {
            for y in 1..=7 {
                assert_eq!(back.get(x, y).re.to_bits(), g.get(x, y).re.to_bits());
                assert_eq!(back.get(x, y).im.to_bits(), g.get(x, y).im.to_bits());
            }
        }
        let one = CustomGrid::One(vec![Complex64::new(0.1, 0.2), Complex64::new(0.0, 0.0), Complex64::new(-1e-17, 3.0)]);
        write_custom_grid(&p, &one).unwrap();
        assert_eq!(read_custom_grid(&p).unwrap(), one);
        assert!(matches!(read_two_photon_grid(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn malformed_grid_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        fs::write(&p, "# n_sites = 3\n# sector = 2\n1 4 0.1 0.0\n").unwrap();
        match read_custom_grid(&p) {
            Err(Error::Parse { detail, .. }) => assert!(detail.contains("line 3")),
            other => panic!("{other:?}"),
        }
    }
}
