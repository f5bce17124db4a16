//! Grids, nodal fields, discrete gradients, and p-norm quadrature.
//!
//! Fields live at grid nodes and vanish on the boundary; gradients and all
//! quadrature live at cell midpoints (1D) / cell centers (2D), with midpoint
//! values obtained by averaging the corner node values. Everything is
//! immutable after construction and safe to share across threads.

use serde::{Deserialize, Serialize};

use crate::error::{require_p, Error, Result};

/// One axis of a tensor-product grid: `nodes` equispaced points on `[start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub nodes: usize,
}

impl Axis {
    /// Node spacing `h = (end - start) / (nodes - 1)`.
    pub fn spacing(&self) -> f64 {
        (self.end - self.start) / (self.nodes - 1) as f64
    }
}

/// A uniform grid on an interval (dim 1) or axis-aligned rectangle (dim 2)
/// with Dirichlet zero boundary.
///
/// Node indices are row-major with axis 0 outermost: in 2D, node
/// `(ix, iy)` has linear index `ix * ny + iy`. Cells are indexed the same
/// way with one fewer node per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    axes: Vec<Axis>,
}

/// Serialized form: `{dim, endpoints, node_counts}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridRepr {
    dim: usize,
    endpoints: Vec<[f64; 2]>,
    node_counts: Vec<usize>,
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        GridRepr {
            dim: g.axes.len(),
            endpoints: g.axes.iter().map(|a| [a.start, a.end]).collect(),
            node_counts: g.axes.iter().map(|a| a.nodes).collect(),
        }
    }
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        if r.endpoints.len() != r.dim || r.node_counts.len() != r.dim {
            return Err(Error::InvalidGrid(
                "endpoints/node_counts length does not match dim".into(),
            ));
        }
        let axes: Vec<(f64, f64, usize)> = r
            .endpoints
            .iter()
            .zip(&r.node_counts)
            .map(|(e, &n)| (e[0], e[1], n))
            .collect();
        Grid::new(&axes)
    }
}

impl Grid {
    /// Build a grid from per-axis `(start, end, nodes)` triples; 1 or 2 axes.
    pub fn new(axes: &[(f64, f64, usize)]) -> Result<Grid> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for &(a, b, n) in axes {
            if n < 3 {
                return Err(Error::InvalidGrid(format!(
                    "need at least 3 nodes per axis, got {n}"
                )));
            }
            if !(b > a) || !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "degenerate interval [{a}, {b}]"
                )));
            }
        }
        Ok(Grid {
            axes: axes
                .iter()
                .map(|&(start, end, nodes)| Axis { start, end, nodes })
                .collect(),
        })
    }

    /// 1D grid on `[a, b]` with `nodes` nodes.
    pub fn line(a: f64, b: f64, nodes: usize) -> Result<Grid> {
        Grid::new(&[(a, b, nodes)])
    }

    /// 2D grid on `[ax, bx] x [ay, by]`.
    pub fn rectangle(x: (f64, f64, usize), y: (f64, f64, usize)) -> Result<Grid> {
        Grid::new(&[x, y])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    /// Total number of nodes.
    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    /// Total number of cells.
    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.nodes - 1).product()
    }

    /// Volume (length/area) of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    /// Largest node spacing over the axes.
    pub fn max_spacing(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| a.spacing())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn ny(&self) -> usize {
        if self.dim() == 2 {
            self.axes[1].nodes
        } else {
            1
        }
    }

    /// Multi-index of a node; `(ix, 0)` in 1D.
    pub fn node_multi(&self, node: usize) -> (usize, usize) {
        let ny = self.ny();
        (node / ny, node % ny)
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny() + iy
    }

    /// Multi-index of a cell; `(cx, 0)` in 1D.
    pub fn cell_multi(&self, cell: usize) -> (usize, usize) {
        let cy = if self.dim() == 2 {
            self.axes[1].nodes - 1
        } else {
            1
        };
        (cell / cy, cell % cy)
    }

    pub fn cell_index(&self, cx: usize, cy: usize) -> usize {
        let ncy = if self.dim() == 2 {
            self.axes[1].nodes - 1
        } else {
            1
        };
        cx * ncy + cy
    }

    /// Corner node indices of a cell: 2 corners in 1D, 4 in 2D.
    pub fn cell_corners(&self, cell: usize) -> CellCorners {
        let (cx, cy) = self.cell_multi(cell);
        if self.dim() == 1 {
            CellCorners::Line([cx, cx + 1])
        } else {
            CellCorners::Rect([
                self.node_index(cx, cy),
                self.node_index(cx + 1, cy),
                self.node_index(cx, cy + 1),
                self.node_index(cx + 1, cy + 1),
            ])
        }
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let (ix, iy) = self.node_multi(node);
        if ix == 0 || ix == self.axes[0].nodes - 1 {
            return true;
        }
        if self.dim() == 2 && (iy == 0 || iy == self.axes[1].nodes - 1) {
            return true;
        }
        false
    }

    /// Node indices on the boundary.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&i| self.is_boundary(i))
            .collect()
    }

    /// Physical coordinates of a node; the second entry is 0 in 1D.
    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let (ix, iy) = self.node_multi(node);
        let x = self.axes[0].start + ix as f64 * self.axes[0].spacing();
        let y = if self.dim() == 2 {
            self.axes[1].start + iy as f64 * self.axes[1].spacing()
        } else {
            0.0
        };
        (x, y)
    }
}

/// Corner node indices of one cell.
pub enum CellCorners {
    Line([usize; 2]),
    Rect([usize; 4]),
}

impl CellCorners {
    pub fn as_slice(&self) -> &[usize] {
        match self {
            CellCorners::Line(c) => c,
            CellCorners::Rect(c) => c,
        }
    }
}

/// A scalar function sampled at grid nodes, zero on the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<ScalarField> {
        check_boundary(&grid, 1, &values)?;
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Grid) -> ScalarField {
        let n = grid.node_count();
        ScalarField {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Sample `f` at interior nodes; boundary values are forced to zero.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut values = vec![0.0; grid.node_count()];
        for (i, v) in values.iter_mut().enumerate() {
            if !grid.is_boundary(i) {
                let (x, y) = grid.node_coords(i);
                *v = f(x, y);
            }
        }
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// View as a one-component vector field.
    pub fn to_vector(&self) -> VectorField {
        VectorField {
            grid: self.grid.clone(),
            n_comp: 1,
            values: self.values.clone(),
        }
    }
}

/// An N-component field sampled at grid nodes, all components zero on the
/// boundary. Values are stored node-major: `values[node * n_comp + k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    grid: Grid,
    #[serde(rename = "N")]
    n_comp: usize,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, n_comp: usize, values: Vec<f64>) -> Result<VectorField> {
        if n_comp == 0 {
            return Err(Error::InvalidParameter {
                name: "N",
                reason: "need at least one component".into(),
            });
        }
        check_boundary(&grid, n_comp, &values)?;
        Ok(VectorField {
            grid,
            n_comp,
            values,
        })
    }

    pub fn zeros(grid: Grid, n_comp: usize) -> VectorField {
        let n = grid.node_count() * n_comp;
        VectorField {
            grid,
            n_comp,
            values: vec![0.0; n],
        }
    }

    /// Sample `f(x, y, component)` at interior nodes; boundary forced to zero.
    pub fn from_fn(grid: Grid, n_comp: usize, f: impl Fn(f64, f64, usize) -> f64) -> VectorField {
        let mut field = VectorField::zeros(grid, n_comp);
        for node in 0..field.grid.node_count() {
            if field.grid.is_boundary(node) {
                continue;
            }
            let (x, y) = field.grid.node_coords(node);
            for k in 0..n_comp {
                field.values[node * n_comp + k] = f(x, y, k);
            }
        }
        field
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The N values at one node.
    pub fn node(&self, node: usize) -> &[f64] {
        &self.values[node * self.n_comp..(node + 1) * self.n_comp]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// In-place `self += alpha * other`, re-zeroing the boundary.
    pub fn axpy(&mut self, alpha: f64, other: &VectorField) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        self.zero_boundary();
    }

    /// In-place scaling of every nodal value.
    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    pub(crate) fn zero_boundary(&mut self) {
        for node in 0..self.grid.node_count() {
            if self.grid.is_boundary(node) {
                for k in 0..self.n_comp {
                    self.values[node * self.n_comp + k] = 0.0;
                }
            }
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Writes one node per row: coordinates, then the N component values.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        if self.grid.dim() == 1 {
            write!(w, "# x")?;
        } else {
            write!(w, "# x, y")?;
        }
        for k in 0..self.n_comp {
            write!(w, ", u{}", k + 1)?;
        }
        writeln!(w)?;
        for node in 0..self.grid.node_count() {
            let (x, y) = self.grid.node_coords(node);
            if self.grid.dim() == 1 {
                write!(w, "{x:.17e}")?;
            } else {
                write!(w, "{x:.17e}, {y:.17e}")?;
            }
            for k in 0..self.n_comp {
                write!(w, ", {:.17e}", self.values[node * self.n_comp + k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_boundary(grid: &Grid, n_comp: usize, values: &[f64]) -> Result<()> {
    let expected = grid.node_count() * n_comp;
    if values.len() != expected {
        return Err(Error::FieldSize {
            expected,
            got: values.len(),
        });
    }
    for node in 0..grid.node_count() {
        if grid.is_boundary(node) {
            for k in 0..n_comp {
                let v = values[node * n_comp + k];
                if v != 0.0 {
                    return Err(Error::BoundaryNotZero { node, value: v });
                }
            }
        }
    }
    Ok(())
}

/// Per-cell gradient samples of an N-component field: one `N x dim` block
/// per cell, stored as `data[cell * n_comp * dim + k * dim + axis]`.
#[derive(Debug, Clone)]
pub struct GradientSample {
    dim: usize,
    n_comp: usize,
    cells: usize,
    data: Vec<f64>,
}

impl GradientSample {
    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Gradient of component `k` on `cell` (slice of length `dim`).
    pub fn gradient(&self, cell: usize, k: usize) -> &[f64] {
        let base = cell * self.n_comp * self.dim + k * self.dim;
        &self.data[base..base + self.dim]
    }

    /// Squared Frobenius norm of the full gradient matrix on one cell.
    pub fn frobenius_sq(&self, cell: usize) -> f64 {
        let base = cell * self.n_comp * self.dim;
        self.data[base..base + self.n_comp * self.dim]
            .iter()
            .map(|g| g * g)
            .sum()
    }
}

/// Per-cell gradients: forward differences in 1D, averaged edge differences
/// along each axis in 2D. Exact for fields affine on each cell.
pub fn discrete_gradient(u: &VectorField) -> GradientSample {
    let grid = u.grid();
    let n = u.n_comp();
    let dim = grid.dim();
    let cells = grid.cell_count();
    let mut data = vec![0.0; cells * n * dim];

    if dim == 1 {
        let h = grid.axis(0).spacing();
        for cell in 0..cells {
            let a = u.node(cell);
            let b = u.node(cell + 1);
            for k in 0..n {
                data[cell * n + k] = (b[k] - a[k]) / h;
            }
        }
    } else {
        let hx = grid.axis(0).spacing();
        let hy = grid.axis(1).spacing();
        for cell in 0..cells {
            let c = grid.cell_corners(cell);
            let [n00, n10, n01, n11] = match c {
                CellCorners::Rect(r) => r,
                CellCorners::Line(_) => unreachable!(),
            };
            let (u00, u10, u01, u11) = (u.node(n00), u.node(n10), u.node(n01), u.node(n11));
            for k in 0..n {
                let gx = ((u10[k] - u00[k]) + (u11[k] - u01[k])) / (2.0 * hx);
                let gy = ((u01[k] - u00[k]) + (u11[k] - u10[k])) / (2.0 * hy);
                let base = cell * n * 2 + k * 2;
                data[base] = gx;
                data[base + 1] = gy;
            }
        }
    }
    GradientSample {
        dim,
        n_comp: n,
        cells,
        data,
    }
}

/// Per-cell midpoint values of all components (average of corner node
/// values), stored `out[cell * n_comp + k]`.
pub fn cell_midpoint_values(u: &VectorField) -> Vec<f64> {
    let grid = u.grid();
    let n = u.n_comp();
    let cells = grid.cell_count();
    let mut out = vec![0.0; cells * n];
    for cell in 0..cells {
        let corners = grid.cell_corners(cell);
        let cs = corners.as_slice();
        let inv = 1.0 / cs.len() as f64;
        for k in 0..n {
            let mut acc = 0.0;
            for &c in cs {
                acc += u.node(c)[k];
            }
            out[cell * n + k] = acc * inv;
        }
    }
    out
}

/// Per-cell Euclidean modulus of the midpoint-interpolated field.
pub fn cell_midpoint_modulus(u: &VectorField) -> Vec<f64> {
    let n = u.n_comp();
    let mids = cell_midpoint_values(u);
    let cells = mids.len() / n;
    (0..cells)
        .map(|c| mids[c * n..(c + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// Midpoint-rule p-integral: `sum_cells |value|^p * cell_volume`.
///
/// Rejects `p <= 1`. Nonnegative, zero iff all values are zero.
pub fn p_integral(values_per_cell: &[f64], p: f64, grid: &Grid) -> Result<f64> {
    require_p(p)?;
    if values_per_cell.len() != grid.cell_count() {
        return Err(Error::FieldSize {
            expected: grid.cell_count(),
            got: values_per_cell.len(),
        });
    }
    let vol = grid.cell_volume();
    Ok(values_per_cell
        .iter()
        .map(|&v| pow_abs(v, p))
        .sum::<f64>()
        * vol)
}

/// `|x|^p`, with the common exponents special-cased.
#[inline]
pub fn pow_abs(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn line_grid_basics() {
        let g = Grid::line(0.0, 1.0, 5).unwrap();
        assert_eq!(g.dim(), 1);
        assert!((g.axis(0).spacing() - 0.25).abs() < 1e-15);
        assert_eq!(g.boundary_nodes(), vec![0, 4]);
        assert_eq!(g.cell_count(), 4);
    }

    #[test]
    fn rect_grid_counts() {
        let g = Grid::rectangle((0.0, 1.0, 4), (0.0, 1.0, 4)).unwrap();
        assert_eq!(g.node_count(), 16);
        assert_eq!(g.boundary_nodes().len(), 12);
        assert_eq!(g.cell_count(), 9);
    }

    #[test]
    fn grid_rejects_degenerate() {
        assert!(Grid::line(0.0, 1.0, 2).is_err());
        assert!(Grid::line(1.0, 1.0, 5).is_err());
        assert!(Grid::line(1.0, 0.0, 5).is_err());
    }

    #[test]
    fn boundary_enforced_on_construction() {
        let g = Grid::line(0.0, 1.0, 5).unwrap();
        let bad = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            ScalarField::new(g, bad),
            Err(Error::BoundaryNotZero { node: 0, .. })
        ));
    }

    #[test]
    fn gradient_exact_for_affine_1d() {
        let g = Grid::line(0.0, 1.0, 101).unwrap();
        let u = VectorField::from_fn(g, 1, |x, _, _| x);
        let grad = discrete_gradient(&u);
        // interior cells see slope 1 exactly; the two boundary cells see the
        // clipped interpolant
        for cell in 1..grad.cells() - 1 {
            assert!((grad.gradient(cell, 0)[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_zero_field() {
        let g = Grid::rectangle((0.0, 1.0, 6), (0.0, 2.0, 5)).unwrap();
        let u = VectorField::zeros(g, 3);
        let grad = discrete_gradient(&u);
        for cell in 0..grad.cells() {
            assert_eq!(grad.frobenius_sq(cell), 0.0);
        }
    }

    #[test]
    fn gradient_componentwise_scaling() {
        let g = Grid::line(0.0, 1.0, 17).unwrap();
        let u = VectorField::from_fn(g, 2, |x, _, k| {
            let f = (std::f64::consts::PI * x).sin();
            if k == 0 {
                f
            } else {
                2.0 * f
            }
        });
        let grad = discrete_gradient(&u);
        for cell in 0..grad.cells() {
            let g1 = grad.gradient(cell, 0)[0];
            let g2 = grad.gradient(cell, 1)[0];
            assert!((g2 - 2.0 * g1).abs() < 1e-12 * (1.0 + g1.abs()));
        }
    }

    #[test]
    fn p_integral_constant_one() {
        let g = Grid::line(0.0, 1.0, 11).unwrap();
        let vals = vec![1.0; g.cell_count()];
        for p in [1.5, 2.0, 3.0, 4.0] {
            assert!((p_integral(&vals, p, &g).unwrap() - 1.0).abs() < 1e-14);
        }
        let zeros = vec![0.0; g.cell_count()];
        assert_eq!(p_integral(&zeros, 2.0, &g).unwrap(), 0.0);
    }

    #[test]
    fn p_integral_rejects_small_p() {
        let g = Grid::line(0.0, 1.0, 11).unwrap();
        let vals = vec![1.0; g.cell_count()];
        assert!(p_integral(&vals, 1.0, &g).is_err());
        assert!(p_integral(&vals, 0.5, &g).is_err());
    }

    #[test]
    fn p_integral_sin_squared() {
        // analytic: int_0^1 sin^2(pi x) dx = 1/2
        let g = Grid::line(0.0, 1.0, 10_001).unwrap();
        let h = g.axis(0).spacing();
        let vals: Vec<f64> = (0..g.cell_count())
            .map(|c| (std::f64::consts::PI * (c as f64 + 0.5) * h).sin())
            .collect();
        let i = p_integral(&vals, 2.0, &g).unwrap();
        assert!((i - 0.5).abs() < 1e-4, "got {i}");
    }

    #[test]
    fn p_integral_refinement_rate() {
        // midpoint rule on sin(pi x), p = 2: error must drop at >= O(h^2).
        // Taken over [0, 3/4] so the periodic superconvergence of the
        // full-period case does not mask the rate.
        let exact = 0.375 + 1.0 / (4.0 * std::f64::consts::PI);
        let errs: Vec<f64> = [101usize, 201, 401]
            .iter()
            .map(|&m| {
                let g = Grid::line(0.0, 0.75, m).unwrap();
                let h = g.axis(0).spacing();
                let vals: Vec<f64> = (0..g.cell_count())
                    .map(|c| (std::f64::consts::PI * ((c as f64 + 0.5) * h)).sin())
                    .collect();
                (p_integral(&vals, 2.0, &g).unwrap() - exact).abs()
            })
            .collect();
        assert!(errs[1] < errs[0] / 3.5, "{errs:?}");
        assert!(errs[2] < errs[1] / 3.5, "{errs:?}");
    }

    #[test]
    fn json_round_trip() {
        let g = Grid::rectangle((0.0, 1.0, 4), (0.0, 2.0, 5)).unwrap();
        let u = VectorField::from_fn(g, 2, |x, y, k| x * y + k as f64);
        let s = serde_json::to_string(&u).unwrap();
        assert!(s.contains("\"N\":2"));
        assert!(s.contains("node_counts"));
        let back: VectorField = serde_json::from_str(&s).unwrap();
        assert_eq!(u, back);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = Grid::line(0.0, 1.0, 5).unwrap();
        let u = VectorField::from_fn(g, 2, |x, _, k| x + k as f64);
        let mut buf = Vec::new();
        u.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("# x"));
    }

    proptest! {
        #[test]
        fn p_integral_homogeneous(t in -10.0f64..10.0, pexp in 1.1f64..4.0) {
            let g = Grid::line(0.0, 1.0, 33).unwrap();
            let vals: Vec<f64> = (0..g.cell_count()).map(|c| ((c * 7 + 3) % 11) as f64 - 5.0).collect();
            let scaled: Vec<f64> = vals.iter().map(|v| t * v).collect();
            let a = p_integral(&scaled, pexp, &g).unwrap();
            let b = t.abs().powf(pexp) * p_integral(&vals, pexp, &g).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }

        #[test]
        fn gradient_is_linear(alpha in -5.0f64..5.0, beta in -5.0f64..5.0) {
            let g = Grid::line(0.0, 1.0, 21).unwrap();
            let u = VectorField::from_fn(g.clone(), 2, |x, _, k| (x * (k as f64 + 1.0)).sin());
            let z = VectorField::from_fn(g.clone(), 2, |x, _, k| (3.0 * x + k as f64).cos() * x * (1.0 - x));
            let mut comb = VectorField::zeros(g, 2);
            comb.axpy(alpha, &u);
            comb.axpy(beta, &z);
            let gc = discrete_gradient(&comb);
            let gu = discrete_gradient(&u);
            let gz = discrete_gradient(&z);
            for cell in 0..gc.cells() {
                for k in 0..2 {
                    let lhs = gc.gradient(cell, k)[0];
                    let rhs = alpha * gu.gradient(cell, k)[0] + beta * gz.gradient(cell, k)[0];
                    prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
                }
            }
        }
    }
}
