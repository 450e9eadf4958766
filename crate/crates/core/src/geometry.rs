//! Structured cell-centered grids over axis-aligned boxes, optionally masked
//! to a disk (2D) or ball (3D).
//!
//! A cell is active when its center satisfies the domain predicate. Only
//! faces joining two active cells are stored, so any flux assembled over the
//! face list is automatically zero across the domain boundary (homogeneous
//! Neumann condition).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lattice index marker for cells outside the domain.
const INACTIVE: usize = usize::MAX;

/// Smallest accepted number of cells along an axis.
pub const MIN_CELLS_PER_AXIS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unsupported dimension {0}: only 2 and 3 are supported")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("extents along axis {axis} are not strictly ordered ({lower} >= {upper})")]
    InvalidExtents { axis: usize, lower: f64, upper: f64 },
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("{kind} domain requires a {what}")]
    MissingField { kind: &'static str, what: &'static str },
    #[error("axis {axis} has {cells} cells, at least {MIN_CELLS_PER_AXIS} are required")]
    TooFewCells { axis: usize, cells: usize },
    #[error("no cell center lies inside the domain")]
    EmptyDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Box,
    Disk,
    Ball,
}

/// Domain description: a bounding box plus an optional disk/ball predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl DomainSpec {
    pub fn boxed(lower: &[f64], upper: &[f64]) -> Self {
        Self {
            kind: DomainKind::Box,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            center: None,
            radius: None,
        }
    }

    /// Disk whose bounding box is exactly `[c - r, c + r]²`.
    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        Self::round(DomainKind::Disk, &center, radius)
    }

    /// Ball whose bounding box is exactly `[c - r, c + r]³`.
    pub fn ball(center: [f64; 3], radius: f64) -> Self {
        Self::round(DomainKind::Ball, &center, radius)
    }

    fn round(kind: DomainKind, center: &[f64], radius: f64) -> Self {
        Self {
            kind,
            lower: center.iter().map(|c| c - radius).collect(),
            upper: center.iter().map(|c| c + radius).collect(),
            center: Some(center.to_vec()),
            radius: Some(radius),
        }
    }

    /// Checks the invariants and returns the spatial dimension.
    pub fn validate(&self) -> Result<usize, GeometryError> {
        let dim = self.lower.len();
        if self.upper.len() != dim {
            return Err(GeometryError::DimensionMismatch(format!(
                "lower has {} entries, upper has {}",
                dim,
                self.upper.len()
            )));
        }
        if !(2..=3).contains(&dim) {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        for axis in 0..dim {
            let (lower, upper) = (self.lower[axis], self.upper[axis]);
            if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                return Err(GeometryError::InvalidExtents { axis, lower, upper });
            }
        }
        let (name, required) = match self.kind {
            DomainKind::Box => return Ok(dim),
            DomainKind::Disk => ("disk", 2),
            DomainKind::Ball => ("ball", 3),
        };
        if dim != required {
            return Err(GeometryError::DimensionMismatch(format!(
                "{name} requires dimension {required}, extents have dimension {dim}"
            )));
        }
        let center = self.center.as_ref().ok_or(GeometryError::MissingField {
            kind: name,
            what: "center",
        })?;
        if center.len() != dim {
            return Err(GeometryError::DimensionMismatch(format!(
                "{name} center has {} coordinates, expected {dim}",
                center.len()
            )));
        }
        let radius = self.radius.ok_or(GeometryError::MissingField {
            kind: name,
            what: "radius",
        })?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        Ok(dim)
    }

    /// Domain predicate evaluated at a point (only the first `dim` coordinates
    /// are read).
    pub fn contains(&self, x: &[f64; 3]) -> bool {
        match self.kind {
            DomainKind::Box => true,
            DomainKind::Disk | DomainKind::Ball => {
                let c = self.center.as_deref().unwrap_or(&[]);
                let r = self.radius.unwrap_or(0.0);
                let d2: f64 = c.iter().zip(x).map(|(c, x)| (x - c) * (x - c)).sum();
                d2 < r * r
            }
        }
    }

    /// Analytic measure of the domain (area in 2D, volume in 3D).
    pub fn measure(&self) -> f64 {
        let r = self.radius.unwrap_or(0.0);
        match self.kind {
            DomainKind::Box => self
                .lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| u - l)
                .product(),
            DomainKind::Disk => std::f64::consts::PI * r * r,
            DomainKind::Ball => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        }
    }
}

/// Interior face between two active cells; `first < second` as active indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub first: usize,
    pub second: usize,
    pub axis: usize,
}

/// One entry of a cell's neighbor list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub neighbor: usize,
    pub face: usize,
    /// `+1` when the owning cell is the face's `first` cell, `-1` otherwise.
    pub orientation: f64,
}

/// Immutable structured grid with an active-cell mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    cells: [usize; 3],
    lower: [f64; 3],
    spacing: [f64; 3],
    cell_volume: f64,
    face_area: [f64; 3],
    lattice_to_active: Vec<usize>,
    active_to_lattice: Vec<usize>,
    faces: Vec<Face>,
    link_offsets: Vec<usize>,
    links: Vec<Link>,
}

/// Builds the grid for `spec` with `cells_per_axis` uniform cells per axis.
pub fn build_grid(spec: &DomainSpec, cells_per_axis: &[usize]) -> Result<Grid, GeometryError> {
    let dim = spec.validate()?;
    if cells_per_axis.len() != dim {
        return Err(GeometryError::DimensionMismatch(format!(
            "domain has dimension {dim}, {} cell counts given",
            cells_per_axis.len()
        )));
    }
    Grid::from_predicate(&spec.lower, &spec.upper, cells_per_axis, |x| spec.contains(x))
}

/// Sum of the volumes of all active cells.
pub fn active_volume(grid: &Grid) -> f64 {
    grid.num_active() as f64 * grid.cell_volume()
}

impl Grid {
    /// Builds a grid over the box `[lower, upper]` whose active cells are the
    /// ones with `inside(center)`.
    pub fn from_predicate<P>(
        lower: &[f64],
        upper: &[f64],
        cells_per_axis: &[usize],
        inside: P,
    ) -> Result<Grid, GeometryError>
    where
        P: Fn(&[f64; 3]) -> bool,
    {
        let dim = lower.len();
        if !(2..=3).contains(&dim) {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        if upper.len() != dim || cells_per_axis.len() != dim {
            return Err(GeometryError::DimensionMismatch(format!(
                "lower/upper/cells_per_axis lengths {}/{}/{}",
                dim,
                upper.len(),
                cells_per_axis.len()
            )));
        }
        let mut cells = [1usize; 3];
        let mut lo = [0.0; 3];
        let mut spacing = [1.0; 3];
        for axis in 0..dim {
            if cells_per_axis[axis] < MIN_CELLS_PER_AXIS {
                return Err(GeometryError::TooFewCells {
                    axis,
                    cells: cells_per_axis[axis],
                });
            }
            if !(lower[axis].is_finite() && upper[axis].is_finite() && lower[axis] < upper[axis]) {
                return Err(GeometryError::InvalidExtents {
                    axis,
                    lower: lower[axis],
                    upper: upper[axis],
                });
            }
            cells[axis] = cells_per_axis[axis];
            lo[axis] = lower[axis];
            spacing[axis] = (upper[axis] - lower[axis]) / cells[axis] as f64;
        }

        let cell_volume: f64 = spacing[..dim].iter().product();
        let mut face_area = [0.0; 3];
        for (axis, area) in face_area.iter_mut().enumerate().take(dim) {
            *area = cell_volume / spacing[axis];
        }

        let total = cells[0] * cells[1] * cells[2];
        let mut lattice_to_active = vec![INACTIVE; total];
        let mut active_to_lattice = Vec::new();
        for (lin, slot) in lattice_to_active.iter_mut().enumerate() {
            let ijk = unravel(lin, &cells);
            let center = lattice_center(&ijk, &lo, &spacing, dim);
            if inside(&center) {
                *slot = active_to_lattice.len();
                active_to_lattice.push(lin);
            }
        }
        if active_to_lattice.is_empty() {
            return Err(GeometryError::EmptyDomain);
        }

        let strides = [1, cells[0], cells[0] * cells[1]];
        let mut faces = Vec::new();
        for (a, &lin) in active_to_lattice.iter().enumerate() {
            let ijk = unravel(lin, &cells);
            for axis in 0..dim {
                if ijk[axis] + 1 < cells[axis] {
                    let b = lattice_to_active[lin + strides[axis]];
                    if b != INACTIVE {
                        faces.push(Face {
                            first: a,
                            second: b,
                            axis,
                        });
                    }
                }
            }
        }

        let n = active_to_lattice.len();
        let mut degree = vec![0usize; n];
        for f in &faces {
            degree[f.first] += 1;
            degree[f.second] += 1;
        }
        let mut link_offsets = Vec::with_capacity(n + 1);
        link_offsets.push(0);
        for d in &degree {
            link_offsets.push(link_offsets.last().unwrap() + d);
        }
        let mut cursor = link_offsets[..n].to_vec();
        let mut links = vec![
            Link {
                neighbor: 0,
                face: 0,
                orientation: 0.0
            };
            faces.len() * 2
        ];
        for (fi, f) in faces.iter().enumerate() {
            links[cursor[f.first]] = Link {
                neighbor: f.second,
                face: fi,
                orientation: 1.0,
            };
            cursor[f.first] += 1;
            links[cursor[f.second]] = Link {
                neighbor: f.first,
                face: fi,
                orientation: -1.0,
            };
            cursor[f.second] += 1;
        }

        Ok(Grid {
            dim,
            cells,
            lower: lo,
            spacing,
            cell_volume,
            face_area,
            lattice_to_active,
            active_to_lattice,
            faces,
            link_offsets,
            links,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis; only the first `dim()` entries are meaningful.
    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn face_area(&self, axis: usize) -> f64 {
        self.face_area[axis]
    }

    /// `A_f / (h_axis * V)`: the weight of one face in the Laplacian.
    pub fn coupling(&self, axis: usize) -> f64 {
        self.face_area[axis] / (self.spacing[axis] * self.cell_volume)
    }

    pub fn num_active(&self) -> usize {
        self.active_to_lattice.len()
    }

    pub fn num_lattice_cells(&self) -> usize {
        self.lattice_to_active.len()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Neighbors of active cell `c` through interior faces.
    pub fn links(&self, c: usize) -> &[Link] {
        &self.links[self.link_offsets[c]..self.link_offsets[c + 1]]
    }

    /// Whether the lattice cell at `ijk` (unused axes 0) is active.
    pub fn active_index(&self, ijk: [usize; 3]) -> Option<usize> {
        if (0..3).any(|a| ijk[a] >= self.cells[a]) {
            return None;
        }
        let lin = ijk[0] + self.cells[0] * (ijk[1] + self.cells[1] * ijk[2]);
        match self.lattice_to_active[lin] {
            INACTIVE => None,
            a => Some(a),
        }
    }

    /// Active index of the lattice cell with linear index `lin`.
    pub fn active_of_lattice(&self, lin: usize) -> Option<usize> {
        match self.lattice_to_active[lin] {
            INACTIVE => None,
            a => Some(a),
        }
    }

    pub fn lattice_coords(&self, c: usize) -> [usize; 3] {
        unravel(self.active_to_lattice[c], &self.cells)
    }

    /// Cell center of active cell `c`; unused coordinates are 0.
    pub fn center(&self, c: usize) -> [f64; 3] {
        lattice_center(&self.lattice_coords(c), &self.lower, &self.spacing, self.dim)
    }
}

fn unravel(lin: usize, cells: &[usize; 3]) -> [usize; 3] {
    let i = lin % cells[0];
    let rest = lin / cells[0];
    [i, rest % cells[1], rest / cells[1]]
}

fn lattice_center(ijk: &[usize; 3], lower: &[f64; 3], spacing: &[f64; 3], dim: usize) -> [f64; 3] {
    let mut x = [0.0; 3];
    for axis in 0..dim {
        x[axis] = lower[axis] + (ijk[axis] as f64 + 0.5) * spacing[axis];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn unit_box(n: usize) -> Grid {
        build_grid(&DomainSpec::boxed(&[0.0, 0.0], &[1.0, 1.0]), &[n, n]).unwrap()
    }

    /// Brute-force adjacency: all active pairs whose lattice coordinates
    /// differ by one along exactly one axis.
    fn brute_force_pairs(grid: &Grid) -> HashSet<(usize, usize)> {
        let n = grid.num_active();
        let mut pairs = HashSet::new();
        for a in 0..n {
            for b in a + 1..n {
                let (pa, pb) = (grid.lattice_coords(a), grid.lattice_coords(b));
                let dist: usize = (0..3).map(|k| pa[k].abs_diff(pb[k])).sum();
                if dist == 1 {
                    pairs.insert((a, b));
                }
            }
        }
        pairs
    }

    #[test]
    fn unit_box_counts() {
        let g = unit_box(10);
        assert_eq!(g.num_active(), 100);
        assert_eq!(brute_force_pairs(&g).len(), 180);
        assert_eq!(g.faces().len(), 180);
        assert!((g.cell_volume() - 0.01).abs() < 1e-15);
        assert!((active_volume(&g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_disk_keeps_all_centers() {
        let g = build_grid(&DomainSpec::disk([0.0, 0.0], 1.0), &[2, 2]).unwrap();
        assert_eq!(g.num_active(), 4);
        for c in 0..4 {
            let x = g.center(c);
            assert_eq!((x[0].abs(), x[1].abs()), (0.5, 0.5));
        }
    }

    #[test]
    fn rejects_bad_configurations() {
        let one_d = DomainSpec::boxed(&[0.0], &[1.0]);
        assert_eq!(build_grid(&one_d, &[10]), Err(GeometryError::UnsupportedDimension(1)));
        let disk_3d = DomainSpec {
            kind: DomainKind::Disk,
            ..DomainSpec::ball([0.0; 3], 1.0)
        };
        assert!(matches!(
            build_grid(&disk_3d, &[4, 4, 4]),
            Err(GeometryError::DimensionMismatch(_))
        ));
        let ball_2d = DomainSpec {
            kind: DomainKind::Ball,
            ..DomainSpec::disk([0.0; 2], 1.0)
        };
        assert!(matches!(build_grid(&ball_2d, &[4, 4]), Err(GeometryError::DimensionMismatch(_))));
        let flipped = DomainSpec::boxed(&[0.0, 1.0], &[1.0, 0.0]);
        assert!(matches!(build_grid(&flipped, &[4, 4]), Err(GeometryError::InvalidExtents { axis: 1, .. })));
        let mut no_radius = DomainSpec::disk([0.0; 2], 1.0);
        no_radius.radius = Some(-1.0);
        assert_eq!(build_grid(&no_radius, &[4, 4]), Err(GeometryError::InvalidRadius(-1.0)));
        assert!(matches!(
            build_grid(&DomainSpec::boxed(&[0.0, 0.0], &[1.0, 1.0]), &[4]),
            Err(GeometryError::DimensionMismatch(_))
        ));
        assert!(matches!(
            build_grid(&DomainSpec::boxed(&[0.0, 0.0], &[1.0, 1.0]), &[1, 4]),
            Err(GeometryError::TooFewCells { axis: 0, cells: 1 })
        ));
    }

    #[test]
    fn empty_mask_is_rejected() {
        // Radius smaller than the distance from the center to any cell center.
        let mut spec = DomainSpec::disk([0.0, 0.0], 1.0);
        spec.radius = Some(0.1);
        assert_eq!(build_grid(&spec, &[2, 2]), Err(GeometryError::EmptyDomain));
    }

    #[test]
    fn face_mask_consistency_exhaustive() {
        let specs = [
            (DomainSpec::disk([0.0, 0.0], 1.0), vec![17, 17]),
            (DomainSpec::disk([0.2, -0.1], 0.7), vec![12, 9]),
            (DomainSpec::ball([0.0; 3], 1.0), vec![12, 12, 12]),
            (DomainSpec::ball([0.1, 0.0, -0.2], 0.8), vec![9, 11, 7]),
            (DomainSpec::boxed(&[0.0; 3], &[1.0, 2.0, 3.0]), vec![5, 6, 7]),
        ];
        for (spec, cells) in specs {
            let g = build_grid(&spec, &cells).unwrap();
            let listed: HashSet<(usize, usize)> =
                g.faces().iter().map(|f| (f.first, f.second)).collect();
            assert_eq!(listed.len(), g.faces().len(), "duplicate faces");
            assert_eq!(listed, brute_force_pairs(&g));
            for c in 0..g.num_active() {
                assert!(spec.contains(&g.center(c)));
                for l in g.links(c) {
                    let f = g.faces()[l.face];
                    let (own, other) = if l.orientation > 0.0 { (f.first, f.second) } else { (f.second, f.first) };
                    assert_eq!((own, other), (c, l.neighbor));
                }
            }
            let active: usize = (0..g.num_lattice_cells())
                .filter(|&lin| g.active_of_lattice(lin).is_some())
                .count();
            assert_eq!(active, g.num_active());
        }
    }

    #[test]
    fn disk_area_converges() {
        let errs: Vec<f64> = [50usize, 100, 200, 400]
            .iter()
            .map(|&n| {
                let g = build_grid(&DomainSpec::disk([0.0, 0.0], 1.0), &[n, n]).unwrap();
                (active_volume(&g) - std::f64::consts::PI).abs()
            })
            .collect();
        assert!(errs[3] / std::f64::consts::PI < 0.02);
        // Staircase error is O(h) with oscillation; compare across a factor 8.
        let order = (errs[0] / errs[3]).log2() / 3.0;
        assert!(order >= 1.0, "observed order {order}, errors {errs:?}");
    }

    #[test]
    fn ball_volume_close_to_analytic() {
        let spec = DomainSpec::ball([0.0; 3], 1.0);
        let g = build_grid(&spec, &[64, 64, 64]).unwrap();
        let rel = (active_volume(&g) - spec.measure()).abs() / spec.measure();
        assert!(rel < 0.02, "relative error {rel}");
    }

    #[test]
    fn construction_is_deterministic() {
        let spec = DomainSpec::ball([0.0; 3], 1.0);
        assert_eq!(build_grid(&spec, &[10, 10, 10]).unwrap(), build_grid(&spec, &[10, 10, 10]).unwrap());
    }

    #[test]
    fn domain_spec_json_rejects_unknown_keys() {
        let ok = r#"{"kind":"disk","lower":[-1,-1],"upper":[1,1],"center":[0,0],"radius":1}"#;
        let spec: DomainSpec = serde_json::from_str(ok).unwrap();
        assert_eq!(spec, DomainSpec::disk([0.0, 0.0], 1.0));
        let bad = r#"{"kind":"disk","lower":[-1,-1],"upper":[1,1],"radius":1,"color":3}"#;
        assert!(serde_json::from_str::<DomainSpec>(bad).is_err());
    }
}
