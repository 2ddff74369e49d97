//! File artifacts: sampled grids (binary or CSV with a JSON sidecar) and
//! OBJ/PLY meshes of leaves and curvature lines projected to `R³`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{config_hash, ExportItem, GridFormat, MeshFormat, Projection, RunConfig};
use crate::cyclic::{curvature_line_trace, Distinguished};
use crate::error::{Error, Result};
use crate::hypersurface::{local_geometry, Box3, Hypersurface};
use crate::pipeline::{cyclic_samples, Build};

/// One grid sample: parameters, position, normal, principal curvatures
/// (descending) and the smallest singular value of the differential.
#[derive(Clone, Debug)]
pub struct GridSample {
    pub p: [f64; 3],
    pub f: Vec<f64>,
    pub eta: Vec<f64>,
    pub lambda: [f64; 3],
    pub sigma_min: f64,
}

pub fn grid_field_names(ambient: usize) -> Vec<String> {
    let mut names: Vec<String> = ["x1", "x2", "s"].map(String::from).to_vec();
    names.extend((1..=ambient).map(|k| format!("f{k}")));
    names.extend((1..=ambient).map(|k| format!("eta{k}")));
    names.extend(["lambda1", "lambda2", "lambda3", "sigma_min"].map(String::from));
    names
}

impl GridSample {
    fn row(&self) -> Vec<f64> {
        let mut r = self.p.to_vec();
        r.extend(&self.f);
        r.extend(&self.eta);
        r.extend(self.lambda);
        r.push(self.sigma_min);
        r
    }
}

pub fn sample_grid(build: &Build) -> Result<Vec<GridSample>> {
    let patch = &build.patch;
    build
        .grid_points()
        .par_iter()
        .map(|&p| {
            let geo = local_geometry(patch, p, 2)?;
            let pr = geo.principal()?;
            let ev = geo.metric().symmetric_eigenvalues();
            Ok(GridSample {
                p,
                f: geo.position.clone(),
                eta: geo.normal.clone(),
                lambda: [pr[0].lambda, pr[1].lambda, pr[2].lambda],
                sigma_min: ev.min().max(0.0).sqrt(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSidecar {
    pub format: &'static str,
    pub dtype: &'static str,
    /// `(n1, n2, ns)`; records are row-major with `s` fastest.
    pub shape: [usize; 3],
    pub fields: Vec<String>,
    pub record_bytes: usize,
    pub config_hash: String,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

/// Writes the grid as `grid.bin` + `grid.json`, or as `grid.csv`.
pub fn write_grid(samples: &[GridSample], build: &Build, format: GridFormat, config_text: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    let ambient = build.eps.product_dim();
    let fields = grid_field_names(ambient);
    match format {
        GridFormat::Binary => {
            let bin = dir.join("grid.bin");
            let mut w = create(&bin)?;
            for s in samples {
                for x in s.row() {
                    w.write_all(&x.to_le_bytes()).map_err(io(&bin))?;
                }
            }
            w.flush().map_err(io(&bin))?;
            let side = dir.join("grid.json");
            let meta = GridSidecar {
                format: "binary",
                dtype: "f64-le",
                shape: build.grid,
                record_bytes: 8 * fields.len(),
                fields,
                config_hash: config_hash(config_text),
            };
            std::fs::write(&side, serde_json::to_string_pretty(&meta)?).map_err(io(&side))?;
            Ok(vec![bin, side])
        }
        GridFormat::Csv => {
            let path = dir.join("grid.csv");
            let mut w = csv::Writer::from_writer(create(&path)?);
            let csv_err = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
            w.write_record(&fields).map_err(csv_err)?;
            for s in samples {
                w.write_record(s.row().iter().map(f64::to_string)).map_err(csv_err)?;
            }
            w.flush().map_err(io(&path))?;
            Ok(vec![path])
        }
    }
}

/// Reads a binary grid back as rows of `fields` values.
pub fn read_grid_binary(bytes: &[u8], fields: usize) -> Result<Vec<Vec<f64>>> {
    if fields == 0 || bytes.len() % (8 * fields) != 0 {
        return Err(Error::Io(format!("grid length {} is not a multiple of {} records", bytes.len(), 8 * fields)));
    }
    Ok(bytes
        .chunks_exact(8 * fields)
        .map(|rec| rec.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect())
        .collect())
}

/// A quad mesh; vertex `(i, j)` has index `i * m2 + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub name: String,
    pub vertices: Vec<[f64; 3]>,
    pub quads: Vec<[usize; 4]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub name: String,
    pub vertices: Vec<[f64; 3]>,
}

fn lerp(a: f64, b: f64, i: usize, n: usize) -> f64 {
    a + (b - a) * i as f64 / (n - 1) as f64
}

/// The leaf `s = const` over the `(x1, x2)` range of `region`, projected.
pub fn slice_mesh(hs: &dyn Hypersurface, region: &Box3, s: f64, dims: [usize; 2], proj: &[[f64; 4]; 3]) -> Result<Mesh> {
    let [m1, m2] = dims;
    if m1 < 2 || m2 < 2 {
        return Err(Error::InvalidParams(format!("mesh needs at least 2x2 vertices, got {m1}x{m2}")));
    }
    let mut vertices = Vec::with_capacity(m1 * m2);
    for i in 0..m1 {
        for j in 0..m2 {
            let x1 = lerp(region.lo[0], region.hi[0], i, m1);
            let x2 = lerp(region.lo[1], region.hi[1], j, m2);
            vertices.push(Projection::apply(proj, &hs.position([x1, x2, s])?));
        }
    }
    let mut quads = Vec::with_capacity((m1 - 1) * (m2 - 1));
    for i in 0..m1 - 1 {
        for j in 0..m2 - 1 {
            let v = i * m2 + j;
            quads.push([v, v + m2, v + m2 + 1, v + 1]);
        }
    }
    Ok(Mesh { name: format!("slice_s={s}"), vertices, quads })
}

fn header_lines(proj: &[[f64; 4]; 3], hash: &str) -> Vec<String> {
    let mut h = vec!["projection R^4 -> R^3, rows:".to_string()];
    for row in proj {
        h.push(format!("  {} {} {} {}", row[0], row[1], row[2], row[3]));
    }
    h.push(format!("config_hash {hash}"));
    h
}

pub fn write_obj<W: Write>(mut w: W, header: &[String], meshes: &[Mesh], lines: &[Polyline]) -> std::io::Result<()> {
    for h in header {
        writeln!(w, "# {h}")?;
    }
    let mut base = 1usize;
    for m in meshes {
        writeln!(w, "o {}", m.name)?;
        for v in &m.vertices {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for q in &m.quads {
            writeln!(w, "f {} {} {} {}", q[0] + base, q[1] + base, q[2] + base, q[3] + base)?;
        }
        base += m.vertices.len();
    }
    for l in lines {
        writeln!(w, "o {}", l.name)?;
        for v in &l.vertices {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        let idx: Vec<String> = (0..l.vertices.len()).map(|k| (k + base).to_string()).collect();
        writeln!(w, "l {}", idx.join(" "))?;
        base += l.vertices.len();
    }
    w.flush()
}

/// ASCII PLY with quads as faces and line segments as edges.
pub fn write_ply<W: Write>(mut w: W, header: &[String], meshes: &[Mesh], lines: &[Polyline]) -> std::io::Result<()> {
    let nv: usize = meshes.iter().map(|m| m.vertices.len()).sum::<usize>()
        + lines.iter().map(|l| l.vertices.len()).sum::<usize>();
    let nf: usize = meshes.iter().map(|m| m.quads.len()).sum();
    let ne: usize = lines.iter().map(|l| l.vertices.len().saturating_sub(1)).sum();
    writeln!(w, "ply\nformat ascii 1.0")?;
    for h in header {
        writeln!(w, "comment {h}")?;
    }
    writeln!(w, "element vertex {nv}\nproperty double x\nproperty double y\nproperty double z")?;
    writeln!(w, "element face {nf}\nproperty list uchar int vertex_indices")?;
    writeln!(w, "element edge {ne}\nproperty int vertex1\nproperty int vertex2\nend_header")?;
    for v in meshes.iter().flat_map(|m| &m.vertices).chain(lines.iter().flat_map(|l| &l.vertices)) {
        writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
    }
    let mut base = 0usize;
    for m in meshes {
        for q in &m.quads {
            writeln!(w, "4 {} {} {} {}", q[0] + base, q[1] + base, q[2] + base, q[3] + base)?;
        }
        base += m.vertices.len();
    }
    for l in lines {
        for k in 1..l.vertices.len() {
            writeln!(w, "{} {}", base + k - 1, base + k)?;
        }
        base += l.vertices.len();
    }
    w.flush()
}

/// Vertices of each `o` group of an OBJ file, in order.
pub fn read_obj_groups(text: &str) -> Result<Vec<(String, Vec<[f64; 3]>)>> {
    let mut out: Vec<(String, Vec<[f64; 3]>)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("o") => out.push((it.collect::<Vec<_>>().join(" "), Vec::new())),
            Some("v") => {
                let xs: Vec<f64> = it
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Io(format!("line {}: {e}", n + 1)))?;
                if xs.len() != 3 {
                    return Err(Error::Io(format!("line {}: vertex needs 3 coordinates", n + 1)));
                }
                if out.is_empty() {
                    out.push((String::new(), Vec::new()));
                }
                out.last_mut().expect("group").1.push([xs[0], xs[1], xs[2]]);
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Projected `e₁`-lines of the mapped build, started like the cyclic suite.
pub fn line_polylines(build: &Build, cfg: &RunConfig, proj: &[[f64; 4]; 3]) -> Result<Vec<Polyline>> {
    let mapped = build.mapped(cfg)?;
    let samples = cyclic_samples(build, cfg);
    let (s_lo, s_hi) = (samples.interior.lo[2], samples.interior.hi[2]);
    samples
        .starts
        .par_iter()
        .enumerate()
        .map(|(k, &[x1, x2])| {
            let len = crate::cyclic::s_line_length(&mapped, x1, x2, s_lo, s_hi)?;
            let tr = curvature_line_trace(
                &mapped,
                [x1, x2, s_lo],
                0,
                Distinguished::AlongS,
                0.98 * len,
                cfg.cyclic.steps,
                cfg.tolerances.frame_gap,
            )?;
            Ok(Polyline {
                name: format!("line_{k}"),
                vertices: tr.points.iter().map(|x| Projection::apply(proj, x)).collect(),
            })
        })
        .collect()
}

/// Writes the configured export items into `dir`; returns the files written.
pub fn export(build: &Build, cfg: &RunConfig, config_text: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    let proj = cfg.export.projection.matrix()?;
    let header = header_lines(&proj, &config_hash(config_text));
    let mapped = build.mapped(cfg)?;
    let samples = cyclic_samples(build, cfg);
    let ext = match cfg.export.format {
        MeshFormat::Obj => "obj",
        MeshFormat::Ply => "ply",
    };
    let mut written = Vec::new();
    for item in &cfg.export.what {
        let (meshes, lines, stem) = match item {
            ExportItem::Slices => {
                let meshes = samples
                    .slice_s
                    .iter()
                    .map(|&s| slice_mesh(&mapped, &samples.interior, s, cfg.export.mesh, &proj))
                    .collect::<Result<Vec<_>>>()?;
                (meshes, Vec::new(), "slices")
            }
            ExportItem::Lines => (Vec::new(), line_polylines(build, cfg, &proj)?, "lines"),
        };
        let path = dir.join(format!("{stem}.{ext}"));
        let w = create(&path)?;
        match cfg.export.format {
            MeshFormat::Obj => write_obj(w, &header, &meshes, &lines),
            MeshFormat::Ply => write_ply(w, &header, &meshes, &lines),
        }
        .map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
