//! `render`: line plots with error bars and heat maps from CSV output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use crate::error::{io_error, CliError};
use crate::svg::{colormap, label, ticks, Frame, Scale, Svg, HEIGHT, PALETTE, WIDTH};

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// CSV written by mc, exact, meanfield, phase-scan, domainwall or analyze.
    pub input: PathBuf,
    /// Horizontal-axis column.
    #[arg(long, default_value = "T")]
    pub x: String,
    /// Vertical-axis column.
    #[arg(long)]
    pub y: String,
    /// Error-bar column; defaults to `<y>_err` when present.
    #[arg(long)]
    pub err: Option<String>,
    /// One curve per distinct value of this column (e.g. L).
    #[arg(long)]
    pub group: Option<String>,
    /// Heat map coloured by this column over the (x, y) grid.
    #[arg(long)]
    pub z: Option<String>,
    /// Gridlines at the winding plateaus 0, ±2, ±4.
    #[arg(long)]
    pub winding: bool,
    #[arg(long)]
    pub title: Option<String>,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, CliError> {
        let mut rd = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
        let header = rd.headers().map_err(|e| io_error(path, e))?.iter().map(String::from).collect();
        let rows = rd
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(|e| io_error(path, e)))
            .collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("no column `{name}`; columns are {}", self.header.join(", "))))
    }

    fn num(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col].parse().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, Default)]
struct Series {
    name: String,
    pts: Vec<(f64, f64, f64)>,
}

fn group_key(s: &str) -> (u8, f64, String) {
    match s.parse::<f64>() {
        Ok(x) => (0, x, s.to_string()),
        Err(_) => (1, 0.0, s.to_string()),
    }
}

fn series(t: &Table, a: &PlotArgs) -> Result<Vec<Series>, CliError> {
    let (xi, yi) = (t.col(&a.x)?, t.col(&a.y)?);
    let ei = match &a.err {
        Some(e) => Some(t.col(e)?),
        None => t.col(&format!("{}_err", a.y)).ok(),
    };
    let gi = a.group.as_ref().map(|g| t.col(g)).transpose()?;
    let mut groups: BTreeMap<String, Series> = BTreeMap::new();
    for r in 0..t.rows.len() {
        let key = gi.map(|g| t.rows[r][g].clone()).unwrap_or_default();
        let (x, y) = (t.num(r, xi), t.num(r, yi));
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let e = ei.map(|e| t.num(r, e)).filter(|e| e.is_finite()).unwrap_or(0.0);
        let s = groups.entry(key.clone()).or_default();
        s.name = key;
        s.pts.push((x, y, e));
    }
    let mut out: Vec<Series> = groups.into_values().collect();
    out.sort_by(|a, b| {
        let (ka, kb) = (group_key(&a.name), group_key(&b.name));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.cmp(&kb.2))
    });
    for s in &mut out {
        s.pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(out)
}

fn extent(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    vals.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    let d = if hi > lo { 0.05 * (hi - lo) } else { 0.5_f64.max(0.05 * lo.abs()) };
    (lo - d, hi + d)
}

fn axes(svg: &mut Svg, fr: &Frame, sx: &Scale, sy: &Scale, xl: &str, yl: &str, title: &str) {
    svg.rect(fr.left, fr.top, fr.width(), fr.height(), "none", Some("#000000"));
    for x in ticks(sx.lo, sx.hi, 6) {
        let px = sx.map(x);
        svg.line(px, fr.bottom, px, fr.bottom + 5.0, "#000000", 1.0, None);
        svg.text(px, fr.bottom + 18.0, &label(x), "middle", 11.0);
    }
    for y in ticks(sy.lo, sy.hi, 6) {
        let py = sy.map(y);
        svg.line(fr.left - 5.0, py, fr.left, py, "#000000", 1.0, None);
        svg.text(fr.left - 8.0, py + 4.0, &label(y), "end", 11.0);
    }
    svg.text((fr.left + fr.right) / 2.0, HEIGHT - 20.0, xl, "middle", 13.0);
    svg.vtext(22.0, (fr.top + fr.bottom) / 2.0, yl);
    svg.text(WIDTH / 2.0, 28.0, title, "middle", 15.0);
}

fn no_data(svg: &mut Svg, fr: &Frame) {
    svg.rect(fr.left, fr.top, fr.width(), fr.height(), "none", Some("#000000"));
    svg.text((fr.left + fr.right) / 2.0, (fr.top + fr.bottom) / 2.0, "no data", "middle", 16.0);
}

fn line_plot(t: &Table, a: &PlotArgs, title: &str) -> Result<String, CliError> {
    let ss = series(t, a)?;
    let mut svg = Svg::new();
    let fr = Frame::standard();
    let xr = extent(ss.iter().flat_map(|s| s.pts.iter().map(|p| p.0)));
    let yr = extent(ss.iter().flat_map(|s| s.pts.iter().flat_map(|p| [p.1 - p.2, p.1 + p.2])));
    let (Some(xr), Some(yr)) = (xr, yr) else {
        svg.text(WIDTH / 2.0, 28.0, title, "middle", 15.0);
        no_data(&mut svg, &fr);
        return Ok(svg.finish());
    };
    let yr = if a.winding { (yr.0.min(-0.5), yr.1.max(0.5)) } else { yr };
    let ((x0, x1), (y0, y1)) = (pad(xr), pad(yr));
    let sx = Scale::new(x0, x1, fr.left, fr.right);
    let sy = Scale::new(y0, y1, fr.bottom, fr.top);
    if a.winding {
        for w in [-4.0, -2.0, 0.0, 2.0, 4.0] {
            if w >= sy.lo && w <= sy.hi {
                let py = sy.map(w);
                svg.line(fr.left, py, fr.right, py, "#999999", 1.0, Some("4 3"));
            }
        }
    }
    axes(&mut svg, &fr, &sx, &sy, &a.x, &a.y, title);
    for (k, s) in ss.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s.pts.iter().map(|p| (sx.map(p.0), sy.map(p.1))).collect();
        svg.polyline(&pts, c);
        for (p, &(px, py)) in s.pts.iter().zip(&pts) {
            if p.2 > 0.0 {
                let (lo, hi) = (sy.map(p.1 - p.2), sy.map(p.1 + p.2));
                svg.line(px, lo, px, hi, c, 1.0, None);
                svg.line(px - 3.0, lo, px + 3.0, lo, c, 1.0, None);
                svg.line(px - 3.0, hi, px + 3.0, hi, c, 1.0, None);
            }
            svg.circle(px, py, 2.5, c);
        }
        if let Some(g) = &a.group {
            let ly = fr.top + 10.0 + 18.0 * k as f64;
            svg.line(fr.right + 15.0, ly, fr.right + 35.0, ly, c, 2.0, None);
            svg.text(fr.right + 40.0, ly + 4.0, &format!("{g} = {}", s.name), "start", 12.0);
        }
    }
    Ok(svg.finish())
}

fn heat_map(t: &Table, a: &PlotArgs, z: &str, title: &str) -> Result<String, CliError> {
    let (xi, yi, zi) = (t.col(&a.x)?, t.col(&a.y)?, t.col(z)?);
    let mut cells: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in 0..t.rows.len() {
        let (x, y) = (t.num(r, xi), t.num(r, yi));
        if x.is_finite() && y.is_finite() {
            xs.push(x);
            ys.push(y);
            cells.insert((x.to_bits(), y.to_bits()), t.num(r, zi));
        }
    }
    let dedup = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
    };
    dedup(&mut xs);
    dedup(&mut ys);
    let mut svg = Svg::new();
    let fr = Frame::standard();
    let Some((z0, z1)) = extent(cells.values().copied()) else {
        svg.text(WIDTH / 2.0, 28.0, title, "middle", 15.0);
        no_data(&mut svg, &fr);
        return Ok(svg.finish());
    };
    // Cell edges halfway between neighbouring grid values.
    let edges = |v: &[f64]| -> Vec<f64> {
        if v.len() == 1 {
            return vec![v[0] - 0.5, v[0] + 0.5];
        }
        let mut e = vec![v[0] - (v[1] - v[0]) / 2.0];
        e.extend(v.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        e.push(v[v.len() - 1] + (v[v.len() - 1] - v[v.len() - 2]) / 2.0);
        e
    };
    let (ex, ey) = (edges(&xs), edges(&ys));
    let sx = Scale::new(ex[0], ex[ex.len() - 1], fr.left, fr.right);
    let sy = Scale::new(ey[0], ey[ey.len() - 1], fr.bottom, fr.top);
    let norm = |v: f64| if z1 > z0 { (v - z0) / (z1 - z0) } else { 0.5 };
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            let fill = match cells.get(&(x.to_bits(), y.to_bits())) {
                Some(v) if v.is_finite() => colormap(norm(*v)),
                _ => "#cccccc".to_string(),
            };
            let (px0, px1) = (sx.map(ex[i]), sx.map(ex[i + 1]));
            let (py0, py1) = (sy.map(ey[j + 1]), sy.map(ey[j]));
            svg.rect(px0, py0, px1 - px0, py1 - py0, &fill, None);
        }
    }
    axes(&mut svg, &fr, &sx, &sy, &a.x, &a.y, title);
    let (bx, bw, steps) = (fr.right + 30.0, 18.0, 50);
    let h = fr.height() / steps as f64;
    for k in 0..steps {
        let v = (k as f64 + 0.5) / steps as f64;
        svg.rect(bx, fr.bottom - (k + 1) as f64 * h, bw, h + 0.5, &colormap(v), None);
    }
    svg.rect(bx, fr.top, bw, fr.height(), "none", Some("#000000"));
    svg.text(bx + bw + 5.0, fr.bottom + 4.0, &label(z0), "start", 11.0);
    svg.text(bx + bw + 5.0, fr.top + 4.0, &label(z1), "start", 11.0);
    svg.text(bx + bw / 2.0, fr.top - 10.0, z, "middle", 12.0);
    Ok(svg.finish())
}

pub fn render(a: PlotArgs, out: Option<&Path>, dry_run: bool) -> Result<(), CliError> {
    let target = out.map(Path::to_path_buf).unwrap_or_else(|| a.input.with_extension("svg"));
    let t = Table::read(&a.input)?;
    let title = a.title.clone().unwrap_or_else(|| match &a.z {
        Some(z) => format!("{z} over {} × {}", a.x, a.y),
        None => format!("{} vs {}", a.y, a.x),
    });
    let svg = match &a.z {
        Some(z) => heat_map(&t, &a, z, &title)?,
        None => line_plot(&t, &a, &title)?,
    };
    if dry_run {
        let plan = json!({
            "command": "render",
            "input": a.input,
            "output": target,
            "kind": if a.z.is_some() { "heatmap" } else { "line" },
            "rows": t.rows.len(),
        });
        println!("{}", serde_json::to_string_pretty(&plan).expect("plan serializes"));
        return Ok(());
    }
    if let Some(dir) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(&target, svg).map_err(|e| io_error(&target, e))
}
