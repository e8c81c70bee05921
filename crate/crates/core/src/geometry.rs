//! Points, squared Euclidean distance and the (truncated) k-means cost.
//!
//! Points are stored row-major in one flat buffer per [`Dataset`]; a point is
//! borrowed as a `&[f64]` of length `dim`. Index `i` of a dataset always refers
//! to the same point.

use alloc::vec::Vec;
use core::ops::Deref;
use core::slice::ChunksExact;

use crate::error::{Error, Result};

/// An owned point with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::ZeroDimension);
        }
        check_finite(&coords)?;
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_finite(coords: &[f64]) -> Result<()> {
    match coords.iter().position(|c| !c.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// An indexed multiset of points sharing one dimension. Duplicates are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_capacity(dim, 0)
    }

    pub fn with_capacity(dim: usize, points: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            dim,
            coords: Vec::with_capacity(dim * points),
        })
    }

    /// Builds a dataset from a row-major coordinate buffer.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        check_finite(&coords)?;
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let mut out = Self::with_capacity(first.as_ref().len(), rows.len())?;
        for row in rows {
            out.push(row.as_ref())?;
        }
        Ok(out)
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        self.check_dim(point.len())?;
        check_finite(point)?;
        self.coords.extend_from_slice(point);
        Ok(())
    }

    /// Appends a point already known to belong to a dataset of the same dimension.
    pub(crate) fn push_trusted(&mut self, point: &[f64]) {
        debug_assert_eq!(point.len(), self.dim);
        self.coords.extend_from_slice(point);
    }

    pub fn extend_from(&mut self, other: &Dataset) -> Result<()> {
        self.check_dim(other.dim)?;
        self.coords.extend_from_slice(&other.coords);
        Ok(())
    }

    /// Copies the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut out = Dataset {
            dim: self.dim,
            coords: Vec::with_capacity(indices.len() * self.dim),
        };
        for &i in indices {
            out.push_trusted(self.point(i));
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a [f64];
    type IntoIter = ChunksExact<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

/// Cluster centers. Unlike [`Dataset`] this carries no notion of multiplicity,
/// but duplicates are not rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterSet(Dataset);

impl CenterSet {
    pub fn new(dim: usize) -> Result<Self> {
        Dataset::new(dim).map(Self)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Dataset::from_rows(rows).map(Self)
    }

    pub fn push(&mut self, center: &[f64]) -> Result<()> {
        self.0.push(center)
    }

    pub fn extend_from(&mut self, other: &CenterSet) -> Result<()> {
        self.0.extend_from(&other.0)
    }

    pub fn into_dataset(self) -> Dataset {
        self.0
    }

    pub(crate) fn point_mut(&mut self, i: usize) -> &mut [f64] {
        self.0.point_mut(i)
    }

    pub(crate) fn push_trusted(&mut self, center: &[f64]) {
        self.0.push_trusted(center)
    }
}

impl From<Dataset> for CenterSet {
    fn from(points: Dataset) -> Self {
        Self(points)
    }
}

impl Deref for CenterSet {
    type Target = Dataset;

    fn deref(&self) -> &Dataset {
        &self.0
    }
}

/// Neumaier's compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl core::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

#[inline]
pub(crate) fn sq_dist_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center and its squared distance; ties go to the lower index.
#[inline]
pub(crate) fn nearest_raw(x: &[f64], centers: &Dataset) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist_raw(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn check_centers(dim: usize, centers: &CenterSet) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    if centers.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: centers.dim(),
        });
    }
    Ok(())
}

/// Squared Euclidean distance.
pub fn sq_dist(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(sq_dist_raw(a, b))
}

/// Squared distance from `x` to its nearest center.
pub fn dist_sq_to_set(x: &[f64], centers: &CenterSet) -> Result<f64> {
    check_centers(x.len(), centers)?;
    Ok(nearest_raw(x, centers).1)
}

/// Squared distance of every point to its nearest center.
pub fn distances_to_set(points: &Dataset, centers: &CenterSet) -> Result<Vec<f64>> {
    check_centers(points.dim(), centers)?;
    Ok(points.iter().map(|x| nearest_raw(x, centers).1).collect())
}

/// Sum over all points (with multiplicity) of the squared distance to the nearest center.
pub fn cost(points: &Dataset, centers: &CenterSet) -> Result<f64> {
    check_centers(points.dim(), centers)?;
    Ok(compensated_sum(points.iter().map(|x| nearest_raw(x, centers).1)))
}

/// The cost after discarding the `drop` points that are farthest from `centers`.
pub fn truncated_cost(points: &Dataset, centers: &CenterSet, drop: usize) -> Result<f64> {
    let mut d = distances_to_set(points, centers)?;
    Ok(truncated_sum(&mut d, drop))
}

/// Sum of `values` after removing the `drop` largest. Reorders `values`.
pub(crate) fn truncated_sum(values: &mut [f64], drop: usize) -> f64 {
    if drop >= values.len() {
        return 0.0;
    }
    let keep = values.len() - drop;
    if drop > 0 {
        values.select_nth_unstable_by(keep, f64::total_cmp);
    }
    compensated_sum(values[..keep].iter().copied())
}

/// Index of the nearest center for every point; ties go to the lowest center index.
pub fn assign(points: &Dataset, centers: &CenterSet) -> Result<Vec<usize>> {
    check_centers(points.dim(), centers)?;
    Ok(points.iter().map(|x| nearest_raw(x, centers).0).collect())
}
