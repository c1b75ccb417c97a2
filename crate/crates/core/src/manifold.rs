//! Linear shape manifold: a mean mesh plus K vertex-displacement bases.
//!
//! Deformed vertices are `mean + sum_k z_k * basis_k` in a canonical,
//! object-attached frame: origin at the ground-contact center of the mean
//! mesh, +x right, +y down, +z forward (vehicle length along z at yaw 0).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Shape coefficients `z` (dimensionless, length K).
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCoeffs(pub Vec<f64>);

impl ShapeCoeffs {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Clamp every coefficient into `[-z_max, z_max]`.
    pub fn clamped(&self, z_max: f64) -> Self {
        Self(self.0.iter().map(|z| z.clamp(-z_max, z_max)).collect())
    }
}

/// Mean mesh plus K linear displacement bases sharing one face list.
#[derive(Debug, Clone)]
pub struct ShapeManifold {
    pub mean: Vec<Vector3<f64>>,
    pub bases: Vec<Vec<Vector3<f64>>>,
    pub faces: Vec<[u32; 3]>,
    /// Set by the load-time edge check; a non-watertight mesh is usable
    /// but flagged.
    pub watertight: bool,
}

impl ShapeManifold {
    pub fn new(
        mean: Vec<Vector3<f64>>,
        bases: Vec<Vec<Vector3<f64>>>,
        faces: Vec<[u32; 3]>,
    ) -> Result<Self> {
        for (k, b) in bases.iter().enumerate() {
            if b.len() != mean.len() {
                return Err(Error::InvalidMesh(format!(
                    "basis {k} has {} vertices, mean has {}",
                    b.len(),
                    mean.len()
                )));
            }
        }
        let probe = TriMesh::new(mean.clone(), faces.clone())?;
        let watertight = probe.is_watertight();
        Ok(Self { mean, bases, faces, watertight })
    }

    pub fn n_vertices(&self) -> usize {
        self.mean.len()
    }

    pub fn n_bases(&self) -> usize {
        self.bases.len()
    }

    /// Deformed mesh `mean + sum_k z_k * basis_k`.
    pub fn deform(&self, z: &ShapeCoeffs) -> Result<TriMesh> {
        if z.len() != self.bases.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} shape coefficients", self.bases.len()),
                got: format!("{}", z.len()),
            });
        }
        let mut vertices = self.mean.clone();
        for (zk, basis) in z.0.iter().zip(&self.bases) {
            for (v, b) in vertices.iter_mut().zip(basis) {
                *v += *zk * b;
            }
        }
        Ok(TriMesh { vertices, faces: self.faces.clone() })
    }

    /// Serialize to the plain-text manifold format:
    /// a header line `N K F`, then N mean vertices, K blocks of N
    /// displacement rows, then F face triples, all whitespace-separated.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {}",
            self.mean.len(),
            self.bases.len(),
            self.faces.len()
        );
        let row = |v: &Vector3<f64>, out: &mut String| {
            let _ = writeln!(out, "{} {} {}", v.x, v.y, v.z);
        };
        for v in &self.mean {
            row(v, &mut s);
        }
        for basis in &self.bases {
            for v in basis {
                row(v, &mut s);
            }
        }
        for f in &self.faces {
            let _ = writeln!(s, "{} {} {}", f[0], f[1], f[2]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = Tokens::new(text);
        let n: usize = tokens.next_parsed("vertex count")?;
        let k: usize = tokens.next_parsed("basis count")?;
        let f: usize = tokens.next_parsed("face count")?;
        let read_block = |tokens: &mut Tokens| -> Result<Vec<Vector3<f64>>> {
            (0..n)
                .map(|_| {
                    Ok(Vector3::new(
                        tokens.next_parsed("vertex x")?,
                        tokens.next_parsed("vertex y")?,
                        tokens.next_parsed("vertex z")?,
                    ))
                })
                .collect()
        };
        let mean = read_block(&mut tokens)?;
        let bases = (0..k)
            .map(|_| read_block(&mut tokens))
            .collect::<Result<Vec<_>>>()?;
        let faces = (0..f)
            .map(|_| {
                Ok([
                    tokens.next_parsed("face index")?,
                    tokens.next_parsed("face index")?,
                    tokens.next_parsed("face index")?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(line) = tokens.peek_line() {
            return Err(Error::Parse { line, msg: "trailing data".into() });
        }
        Self::new(mean, bases, faces)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

struct Tokens<'a> {
    iter: std::iter::Peekable<std::vec::IntoIter<(usize, &'a str)>>,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let toks: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
            .collect();
        Self { iter: toks.into_iter().peekable() }
    }

    fn next_parsed<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        match self.iter.next() {
            Some((line, tok)) => tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad {what}: {tok:?}"),
            }),
            None => Err(Error::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    fn peek_line(&mut self) -> Option<usize> {
        self.iter.peek().map(|(l, _)| *l)
    }
}

/// Nominal dimensions of the built-in mean car: (length, height, width).
pub const BUILTIN_CAR_DIMS: (f64, f64, f64) = (4.2, 1.55, 1.8);

/// Procedurally generated low-poly car-like manifold with three
/// displacement bases: length, height, and width modes.
///
/// The mesh is a closed tube of 8-point cross-sections along z plus end
/// caps, watertight by construction.
pub fn builtin_car_manifold() -> ShapeManifold {
    let (length, _, width) = BUILTIN_CAR_DIMS;
    let half_l = length / 2.0;
    let n_rings = 23usize;
    let ring_pts = 8usize;

    // Height-above-ground of the top outline along z (rear to front).
    let profile: &[(f64, f64)] = &[
        (-2.10, 0.92),
        (-1.40, 0.98),
        (-1.05, 1.42),
        (-0.55, 1.55),
        (0.25, 1.55),
        (0.95, 1.06),
        (1.40, 0.92),
        (2.10, 0.84),
    ];
    let lerp_profile = |z: f64| -> f64 {
        let mut h = profile[0].1;
        for w in profile.windows(2) {
            let ((z0, h0), (z1, h1)) = (w[0], w[1]);
            if z >= z0 && z <= z1 {
                let t = (z - z0) / (z1 - z0);
                h = h0 + t * (h1 - h0);
            }
        }
        if z >= profile.last().unwrap().0 {
            h = profile.last().unwrap().1;
        }
        h
    };

    let mut mean: Vec<Vector3<f64>> = Vec::new();
    for r in 0..n_rings {
        let z = -half_l + length * r as f64 / (n_rings - 1) as f64;
        let zn = z / half_l;
        let w = width * (1.0 - 0.25 * zn.powi(4));
        let h = lerp_profile(z);
        let shoulder = h.min(0.88);
        let taper = 0.92 - 0.30 * ((h - 1.0) / 0.5).clamp(0.0, 1.0);
        let (hw, hwt) = (w / 2.0, w * taper / 2.0);
        // Ring outline, counter-clockwise seen from +z: ground right,
        // shoulder right, roof right, roof left, shoulder left, ground
        // left, then two ground midpoints.
        mean.push(Vector3::new(hw, 0.0, z));
        mean.push(Vector3::new(hw, -shoulder, z));
        mean.push(Vector3::new(hwt, -h, z));
        mean.push(Vector3::new(-hwt, -h, z));
        mean.push(Vector3::new(-hw, -shoulder, z));
        mean.push(Vector3::new(-hw, 0.0, z));
        mean.push(Vector3::new(-hw / 3.0, 0.0, z));
        mean.push(Vector3::new(hw / 3.0, 0.0, z));
    }
    let rear_center = mean.len() as u32;
    mean.push(Vector3::new(0.0, -lerp_profile(-half_l) / 2.0, -half_l));
    let front_center = mean.len() as u32;
    mean.push(Vector3::new(0.0, -lerp_profile(half_l) / 2.0, half_l));

    let mut faces: Vec<[u32; 3]> = Vec::new();
    for r in 0..(n_rings - 1) {
        for p in 0..ring_pts {
            let a = (r * ring_pts + p) as u32;
            let b = (r * ring_pts + (p + 1) % ring_pts) as u32;
            let c = a + ring_pts as u32;
            let d = b + ring_pts as u32;
            faces.push([a, b, c]);
            faces.push([b, d, c]);
        }
    }
    for p in 0..ring_pts {
        let a = p as u32;
        let b = ((p + 1) % ring_pts) as u32;
        faces.push([b, a, rear_center]);
        let base = ((n_rings - 1) * ring_pts) as u32;
        faces.push([base + a, base + b, front_center]);
    }

    let n = mean.len();
    let mut longer = Vec::with_capacity(n);
    let mut taller = Vec::with_capacity(n);
    let mut wider = Vec::with_capacity(n);
    for v in &mean {
        longer.push(Vector3::new(0.0, 0.0, 0.25 * v.z / half_l));
        taller.push(Vector3::new(0.0, 0.10 * v.y, 0.0));
        wider.push(Vector3::new(0.10 * v.x, 0.0, 0.0));
    }

    ShapeManifold::new(mean, vec![longer, taller, wider], faces)
        .expect("builtin manifold is well-formed")
}
