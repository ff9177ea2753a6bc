//! One-dimensional space-time lattice, sampled fields, discrete calculus and
//! smooth compactly supported test functions.

use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::solver::BoundarySpec;

/// Uniform lattice on `[x_lo, x_hi] × [0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_lo: f64,
    x_hi: f64,
    n_cells: usize,
    t_end: f64,
    n_steps: usize,
}

impl Grid1D {
    pub fn new(x_lo: f64, x_hi: f64, n_cells: usize, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite() && x_hi > x_lo) {
            return Err(invalid(
                "x_hi",
                format!("need x_lo < x_hi, got [{x_lo}, {x_hi}]"),
            ));
        }
        if n_cells < 8 {
            return Err(invalid(
                "n_cells",
                format!("{n_cells} violates n_cells >= 8"),
            ));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(invalid("t_end", format!("{t_end} must be positive")));
        }
        if n_steps < 1 {
            return Err(invalid("n_steps", "n_steps must be >= 1"));
        }
        Ok(Self {
            x_lo,
            x_hi,
            n_cells,
            t_end,
            n_steps,
        })
    }

    /// `[-1, 1] × [0, 1]`, the default unit cylinder.
    pub fn unit(n_cells: usize, n_steps: usize) -> Result<Self> {
        Self::new(-1.0, 1.0, n_cells, 1.0, n_steps)
    }

    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }
    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn t_end(&self) -> f64 {
        self.t_end
    }
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }
    pub fn n_levels(&self) -> usize {
        self.n_steps + 1
    }
    pub fn h(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.n_cells as f64
    }
    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.h()
    }
    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }
    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.x(i)).collect()
    }

    /// Nearest time level to `t`, or an error if `t` is outside `[0, t_end]`.
    pub fn level_of(&self, t: f64) -> Result<usize> {
        let slack = 1e-9 * self.dt();
        if !(t >= -slack && t <= self.t_end + slack) {
            return Err(Error::TimeOutOfRange {
                t,
                t_end: self.t_end,
            });
        }
        Ok(((t / self.dt()).round() as usize).min(self.n_steps))
    }

    /// Node indices whose coordinate lies in `[lo, hi]`.
    pub fn nodes_in(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let h = self.h();
        let tol = 1e-9 * h;
        let a = ((lo - self.x_lo - tol) / h).ceil().max(0.0) as usize;
        let b = (((hi - self.x_lo + tol) / h).floor() as usize).min(self.n_cells);
        a..=b
    }

    /// Time levels in `[lo, hi]`.
    pub fn levels_in(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let dt = self.dt();
        let tol = 1e-9 * dt;
        let a = ((lo - tol) / dt).ceil().max(0.0) as usize;
        let b = (((hi + tol) / dt).floor() as usize).min(self.n_steps);
        a..=b
    }
}

/// Compact space-time sub-rectangle on which interior diagnostics are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Window {
    pub fn new(x_lo: f64, x_hi: f64, t_lo: f64, t_hi: f64) -> Self {
        Self {
            x_lo,
            x_hi,
            t_lo,
            t_hi,
        }
    }

    /// `[-0.75, 0.75] × [0.1, 0.9]`
    pub fn default_interior() -> Self {
        Self::new(-0.75, 0.75, 0.1, 0.9)
    }

    pub fn is_strictly_inside(&self, grid: &Grid1D) -> bool {
        self.x_lo > grid.x_lo()
            && self.x_hi < grid.x_hi()
            && self.t_lo > 0.0
            && self.t_hi < grid.t_end()
            && self.x_lo < self.x_hi
            && self.t_lo < self.t_hi
    }
}

/// Nodal values at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::ShapeMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { node, level: 0 });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.xs().into_iter().map(f).collect())
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_nodes()],
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            grid: self.grid,
            values,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid L² norm in space.
    pub fn l2_norm(&self) -> f64 {
        trapezoid(
            &self.values.iter().map(|v| v * v).collect::<Vec<_>>(),
            self.grid.h(),
        )
        .sqrt()
    }
}

/// Trapezoid rule for uniformly spaced samples.
pub fn trapezoid(samples: &[f64], spacing: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = samples[1..n - 1].iter().sum();
            spacing * (inner + 0.5 * (samples[0] + samples[n - 1]))
        }
    }
}

/// Nodal values on every time level, stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_nodes() * grid.n_levels()],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for n in 0..grid.n_levels() {
            let t = grid.t(n);
            for (i, slot) in out.row_mut(n).iter_mut().enumerate() {
                *slot = f(grid.x(i), t);
            }
        }
        out
    }

    pub fn from_rows(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n_nodes() * grid.n_levels();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    #[inline]
    pub fn at(&self, node: usize, level: usize) -> f64 {
        self.values[level * self.grid.n_nodes() + node]
    }

    #[inline]
    pub fn row(&self, level: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.values[level * n..(level + 1) * n]
    }

    #[inline]
    pub fn row_mut(&mut self, level: usize) -> &mut [f64] {
        let n = self.grid.n_nodes();
        &mut self.values[level * n..(level + 1) * n]
    }

    pub fn level(&self, level: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.row(level).to_vec(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Incompatible("fields live on different grids".into()));
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_finite(&self) -> Result<()> {
        let n = self.grid.n_nodes();
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::NonFiniteState {
                node: k % n,
                level: k / n,
            }),
            None => Ok(()),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm restricted to the nodes and levels inside `window`.
    pub fn sup_norm_in(&self, window: &Window) -> f64 {
        let mut m = 0.0f64;
        for n in self.grid.levels_in(window.t_lo, window.t_hi) {
            let row = self.row(n);
            for i in self.grid.nodes_in(window.x_lo, window.x_hi) {
                m = m.max(row[i].abs());
            }
        }
        m
    }

    /// Writes the field as CSV: a header `t,x_0,…,x_N`, then one row per
    /// time level with the time in the first column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "t")?;
        for x in self.grid.xs() {
            write!(out, ",{x}")?;
        }
        writeln!(out)?;
        for n in 0..self.grid.n_levels() {
            write!(out, "{}", self.grid.t(n))?;
            for v in self.row(n) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`SpaceTimeField::write_csv`]. Coordinates must
    /// match `grid` to within `1e-9 h`. Fewer rows than levels is an error;
    /// passing a grid with `n_steps` matching the row count is the caller's job.
    pub fn read_csv<R: BufRead>(grid: Grid1D, input: R) -> Result<Self> {
        let rows = read_rows(input)?;
        let (header, body) = rows
            .split_first()
            .ok_or_else(|| Error::Csv("empty file".into()))?;
        check_header(&grid, header)?;
        if body.len() != grid.n_levels() {
            return Err(Error::Csv(format!(
                "expected {} time rows, found {}",
                grid.n_levels(),
                body.len()
            )));
        }
        let mut values = Vec::with_capacity(grid.n_nodes() * grid.n_levels());
        for (n, row) in body.iter().enumerate() {
            let t = parse_cell(&row[0])?;
            if (t - grid.t(n)).abs() > 1e-9 * grid.dt() + 1e-12 {
                return Err(Error::Csv(format!("row {n}: time {t} != {}", grid.t(n))));
            }
            if row.len() != grid.n_nodes() + 1 {
                return Err(Error::Csv(format!("row {n}: wrong number of columns")));
            }
            for cell in &row[1..] {
                values.push(parse_cell(cell)?);
            }
        }
        let field = Self::from_rows(grid, values)?;
        field.check_finite()?;
        Ok(field)
    }
}

/// Reads the first data row of a field CSV as a [`ScalarField`] on `grid`.
pub fn read_initial_row<R: BufRead>(grid: Grid1D, input: R) -> Result<ScalarField> {
    let rows = read_rows(input)?;
    if rows.len() < 2 {
        return Err(Error::Csv("need a header and at least one data row".into()));
    }
    check_header(&grid, &rows[0])?;
    let row = &rows[1];
    if row.len() != grid.n_nodes() + 1 {
        return Err(Error::Csv("wrong number of columns".into()));
    }
    let values = row[1..]
        .iter()
        .map(|c| parse_cell(c))
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(grid, values)
}

fn read_rows<R: BufRead>(input: R) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::Csv(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(line.split(',').map(|s| s.trim().to_string()).collect());
    }
    Ok(rows)
}

fn check_header(grid: &Grid1D, header: &[String]) -> Result<()> {
    if header.len() != grid.n_nodes() + 1 {
        return Err(Error::Csv(format!(
            "header has {} coordinates, grid has {} nodes",
            header.len().saturating_sub(1),
            grid.n_nodes()
        )));
    }
    for (i, cell) in header[1..].iter().enumerate() {
        let x = parse_cell(cell)?;
        if (x - grid.x(i)).abs() > 1e-9 * grid.h() {
            return Err(Error::Csv(format!("column {i}: x = {x} != {}", grid.x(i))));
        }
    }
    Ok(())
}

fn parse_cell(cell: &str) -> Result<f64> {
    cell.parse::<f64>()
        .map_err(|_| Error::Csv(format!("cannot parse `{cell}` as a number")))
}

/// Second difference with the ghost value supplied by the boundary spec:
/// Dirichlet uses the prescribed value at time `t`, Neumann reflects.
pub fn laplacian(field: &ScalarField, bc: &BoundarySpec, t: f64) -> Result<ScalarField> {
    let grid = field.grid;
    if !(t >= 0.0 && t <= grid.t_end() * (1.0 + 1e-12)) {
        return Err(Error::TimeOutOfRange {
            t,
            t_end: grid.t_end(),
        });
    }
    let f = &field.values;
    let n = f.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) * inv_h2;
    }
    let left_ghost = bc.left.ghost(t, f[1]);
    let right_ghost = bc.right.ghost(t, f[n - 2]);
    out[0] = (left_ghost - 2.0 * f[0] + f[1]) * inv_h2;
    out[n - 1] = (f[n - 2] - 2.0 * f[n - 1] + right_ghost) * inv_h2;
    Ok(ScalarField { grid, values: out })
}

/// Trapezoid integral along the time axis at `node`, between the levels
/// nearest to `s` and `t`.
pub fn integrate_time(field: &SpaceTimeField, node: usize, s: f64, t: f64) -> Result<f64> {
    let grid = field.grid;
    if node >= grid.n_nodes() {
        return Err(invalid("node", format!("{node} out of range")));
    }
    let a = grid.level_of(s)?;
    let b = grid.level_of(t)?;
    if a > b {
        return Err(invalid("s", format!("s = {s} exceeds t = {t}")));
    }
    let samples: Vec<f64> = (a..=b).map(|n| field.at(node, n)).collect();
    Ok(trapezoid(&samples, grid.dt()))
}

/// `b(s) = exp(-1/(1-s²))` on `|s| < 1` with its first two derivatives.
#[inline]
fn bump(s: f64) -> (f64, f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let b = (-1.0 / q).exp();
    let d1 = -2.0 * s / (q * q) * b;
    let d2 = b * (4.0 * s * s / q.powi(4) - 2.0 / (q * q) - 8.0 * s * s / q.powi(3));
    (b, d1, d2)
}

/// Which closed-form derivative of a test function to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    Dt,
    Dx,
    Dxx,
}

/// Product bump `η(x,t) = A b((x-x_c)/r_x) b((t-t_c)/r_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub x_c: f64,
    pub t_c: f64,
    pub r_x: f64,
    pub r_t: f64,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn new(x_c: f64, t_c: f64, r_x: f64, r_t: f64) -> Self {
        Self {
            x_c,
            t_c,
            r_x,
            r_t,
            amplitude: 1.0,
        }
    }

    pub fn support(&self) -> [f64; 4] {
        [
            self.x_c - self.r_x,
            self.x_c + self.r_x,
            self.t_c - self.r_t,
            self.t_c + self.r_t,
        ]
    }

    pub fn check_support(&self, grid: &Grid1D) -> Result<()> {
        let [a, b, c, d] = self.support();
        if a > grid.x_lo() && b < grid.x_hi() && c > 0.0 && d < grid.t_end() {
            Ok(())
        } else {
            Err(Error::SupportViolation {
                support: self.support(),
                domain: [grid.x_lo(), grid.x_hi(), 0.0, grid.t_end()],
            })
        }
    }

    pub fn is_inside(&self, window: &Window) -> bool {
        let [a, b, c, d] = self.support();
        a >= window.x_lo && b <= window.x_hi && c >= window.t_lo && d <= window.t_hi
    }

    pub fn eval(&self, which: Derivative, x: f64, t: f64) -> f64 {
        let (bx, dbx, ddbx) = bump((x - self.x_c) / self.r_x);
        let (bt, dbt, _) = bump((t - self.t_c) / self.r_t);
        let a = self.amplitude;
        match which {
            Derivative::Value => a * bx * bt,
            Derivative::Dt => a * bx * dbt / self.r_t,
            Derivative::Dx => a * dbx / self.r_x * bt,
            Derivative::Dxx => a * ddbx / (self.r_x * self.r_x) * bt,
        }
    }

    /// Spatial factor at time-slice `t` frozen to 1: the bump in `x` only.
    pub fn spatial(&self) -> SpatialBump {
        SpatialBump {
            x_c: self.x_c,
            r_x: self.r_x,
        }
    }
}

/// Bump in space only, used for fixed-time energy identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialBump {
    pub x_c: f64,
    pub r_x: f64,
}

impl SpatialBump {
    pub fn value(&self, x: f64) -> f64 {
        bump((x - self.x_c) / self.r_x).0
    }
    pub fn dx(&self, x: f64) -> f64 {
        bump((x - self.x_c) / self.r_x).1 / self.r_x
    }
    pub fn check_support(&self, grid: &Grid1D) -> Result<()> {
        if self.x_c - self.r_x > grid.x_lo() && self.x_c + self.r_x < grid.x_hi() {
            Ok(())
        } else {
            Err(Error::SupportViolation {
                support: [self.x_c - self.r_x, self.x_c + self.r_x, 0.0, grid.t_end()],
                domain: [grid.x_lo(), grid.x_hi(), 0.0, grid.t_end()],
            })
        }
    }
}

/// Space-time trapezoid quadrature of `field × ∂η`.
pub fn pair_space_time(
    field: &SpaceTimeField,
    eta: &TestFunction,
    which: Derivative,
) -> Result<f64> {
    pair_with(field.grid(), eta, which, |i, n| field.at(i, n))
}

/// Same as [`pair_space_time`] for a field given as a closure of
/// `(node, level)`; the sum only visits the support of `η`.
pub fn pair_with(
    grid: &Grid1D,
    eta: &TestFunction,
    which: Derivative,
    field: impl Fn(usize, usize) -> f64,
) -> Result<f64> {
    eta.check_support(grid)?;
    let [a, b, c, d] = eta.support();
    let mut total = 0.0;
    // η vanishes on the boundary of its support, so interior trapezoid
    // weights are all equal.
    for n in grid.levels_in(c, d) {
        let t = grid.t(n);
        let mut row = 0.0;
        for i in grid.nodes_in(a, b) {
            let e = eta.eval(which, grid.x(i), t);
            if e != 0.0 {
                row += field(i, n) * e;
            }
        }
        total += row;
    }
    Ok(total * grid.h() * grid.dt())
}

/// The 18-function dictionary: a 3×3 lattice of centers in `window` with two
/// radii per center.
/// Default dictionary: [`dictionary_lattice`] with 3 centers per axis and
/// radii `0.24` and `0.12` of the window extent, 18 functions in all.
pub fn dictionary(window: &Window) -> Vec<TestFunction> {
    dictionary_lattice(window, 3, &[0.24, 0.12]).expect("default lattice fits its window")
}

/// Bumps centered on a `per_axis × per_axis` lattice at fractions
/// `k / (per_axis + 1)` of the window, one per center and radius. Radii are
/// fractions of the window extent; every support must stay inside the window.
/// Ordering: x center, then t center, then radius.
pub fn dictionary_lattice(
    window: &Window,
    per_axis: usize,
    radii: &[f64],
) -> Result<Vec<TestFunction>> {
    if per_axis == 0 {
        return Err(invalid("dictionary.per_axis", "must be >= 1"));
    }
    if radii.is_empty() {
        return Err(invalid("dictionary.radii", "needs at least one radius"));
    }
    let limit = 1.0 / (per_axis as f64 + 1.0);
    for &r in radii {
        if !(r > 0.0 && r < limit) {
            return Err(invalid(
                "dictionary.radii",
                format!("{r} must lie in (0, {limit}) for {per_axis} centers per axis"),
            ));
        }
    }
    let wx = window.x_hi - window.x_lo;
    let wt = window.t_hi - window.t_lo;
    let fracs: Vec<f64> = (1..=per_axis).map(|k| k as f64 * limit).collect();
    let mut out = Vec::with_capacity(per_axis * per_axis * radii.len());
    for &fx in &fracs {
        for &ft in &fracs {
            for &scale in radii {
                out.push(TestFunction::new(
                    window.x_lo + fx * wx,
                    window.t_lo + ft * wt,
                    scale * wx,
                    scale * wt,
                ));
            }
        }
    }
    Ok(out)
}
