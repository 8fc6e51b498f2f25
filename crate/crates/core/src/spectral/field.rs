//! Complex lattice fields tagged with the space they live in.

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};
use crate::spectral::Grid;

/// Which representation a field currently holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceTag {
    /// Point values on the physical lattice.
    Physical,
    /// Unitary DFT coefficients on the frequency lattice.
    Frequency,
}

impl SpaceTag {
    pub fn name(self) -> &'static str {
        match self {
            SpaceTag::Physical => "physical",
            SpaceTag::Frequency => "frequency",
        }
    }
}

/// Complex field over a [`Grid`], flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T> {
    grid: Grid<T>,
    tag: SpaceTag,
    values: Vec<Cplx<T>>,
}

/// Neumaier-compensated accumulator; keeps lattice sums accurate to a few
/// ulps so conservation checks measure the dynamics, not the summation.
#[derive(Clone, Copy)]
pub(crate) struct Compensated<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Compensated<T> {
    pub(crate) fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub(crate) fn value(self) -> T {
        self.sum + self.comp
    }
}

impl<T: Real> SpectralField<T> {
    /// Zero field with the given tag.
    pub fn zeros(grid: Grid<T>, tag: SpaceTag) -> Self {
        Self {
            grid,
            tag,
            values: vec![Cplx::new(T::zero(), T::zero()); grid.total_points()],
        }
    }

    /// Wrap an existing value vector; its length must match the grid.
    pub fn from_values(grid: Grid<T>, tag: SpaceTag, values: Vec<Cplx<T>>) -> Result<Self> {
        if values.len() != grid.total_points() {
            return Err(Error::SnapshotFormat(format!(
                "value count {} does not match grid with {} points",
                values.len(),
                grid.total_points()
            )));
        }
        Ok(Self { grid, tag, values })
    }

    /// Sample a physical-space field from a coordinate closure.
    ///
    /// The closure receives the coordinate slice of length `grid.dim()`.
    pub fn from_fn_physical(grid: Grid<T>, mut f: impl FnMut(&[T]) -> Cplx<T>) -> Self {
        let mut values = Vec::with_capacity(grid.total_points());
        for flat in 0..grid.total_points() {
            let x = grid.coords(flat);
            values.push(f(&x[..grid.dim()]));
        }
        Self {
            grid,
            tag: SpaceTag::Physical,
            values,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn values(&self) -> &[Cplx<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.values
    }

    /// Consume the field, returning its raw values.
    pub fn into_values(self) -> Vec<Cplx<T>> {
        self.values
    }

    /// Internal constructor for transform code: same grid, new tag/values.
    pub(crate) fn with_values(&self, tag: SpaceTag, values: Vec<Cplx<T>>) -> Self {
        debug_assert_eq!(values.len(), self.grid.total_points());
        Self {
            grid: self.grid,
            tag,
            values,
        }
    }

    fn require_same_layout(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.tag != other.tag {
            return Err(Error::SpaceMismatch {
                expected: self.tag.name(),
                found: other.tag.name(),
            });
        }
        Ok(())
    }

    fn require_physical(&self) -> Result<()> {
        if self.tag != SpaceTag::Physical {
            return Err(Error::SpaceMismatch {
                expected: SpaceTag::Physical.name(),
                found: self.tag.name(),
            });
        }
        Ok(())
    }

    /// Squared `L^2` norm with cell-volume weights.
    ///
    /// Valid in either space: the transforms are unitary, so the weighted
    /// sums agree (discrete Parseval identity).
    pub fn l2_norm_sq(&self) -> T {
        let mut acc = Compensated::new();
        for v in &self.values {
            acc.add(v.re * v.re + v.im * v.im);
        }
        acc.value() * self.grid.cell_volume()
    }

    /// `L^2` norm with cell-volume weights.
    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().sqrt()
    }

    /// `L^p` norm (finite `p >= 1`) over the physical lattice.
    pub fn lp_norm(&self, p: T) -> Result<T> {
        self.require_physical()?;
        if !(p.is_finite() && p >= T::one()) {
            return Err(Error::BadLpExponent(p.as_f64()));
        }
        if p == T::from_f64_lit(2.0) {
            return Ok(self.l2_norm());
        }
        let half_p = p / T::from_f64_lit(2.0);
        let mut acc = Compensated::new();
        for v in &self.values {
            let m2 = v.re * v.re + v.im * v.im;
            if m2 > T::zero() {
                acc.add(m2.powf(half_p));
            }
        }
        Ok((acc.value() * self.grid.cell_volume()).powf(T::one() / p))
    }

    /// Sup norm over the physical lattice.
    pub fn linf_norm(&self) -> Result<T> {
        self.require_physical()?;
        let mut m2max = T::zero();
        for v in &self.values {
            let m2 = v.re * v.re + v.im * v.im;
            if m2 > m2max {
                m2max = m2;
            }
        }
        Ok(m2max.sqrt())
    }

    /// Complex inner product `(u, v) = sum u * conj(v) * cell_volume`.
    ///
    /// The second argument is conjugated.  Both fields must share grid and
    /// space tag.
    pub fn inner(&self, other: &Self) -> Result<Cplx<T>> {
        self.require_same_layout(other)?;
        let mut re = Compensated::new();
        let mut im = Compensated::new();
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            re.add(a.re * b.re + a.im * b.im);
            im.add(a.im * b.re - a.re * b.im);
        }
        let w = self.grid.cell_volume();
        Ok(Cplx::new(re.value() * w, im.value() * w))
    }

    /// Imaginary part of the inner product `(u, v)`.
    pub fn im_inner(&self, other: &Self) -> Result<T> {
        Ok(self.inner(other)?.im)
    }

    /// Weighted lattice integral of a pointwise function of the value.
    pub fn integrate(&self, mut f: impl FnMut(Cplx<T>) -> T) -> Result<T> {
        self.require_physical()?;
        let mut acc = Compensated::new();
        for &v in &self.values {
            acc.add(f(v));
        }
        Ok(acc.value() * self.grid.cell_volume())
    }

    /// Multiply every value by a complex scalar.
    pub fn scale(&mut self, c: Cplx<T>) {
        for v in &mut self.values {
            *v = *v * c;
        }
    }
}

/// Sum a slice with Neumaier compensation.
pub(crate) fn compensated_sum<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let mut acc = Compensated::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}
