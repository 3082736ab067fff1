//! Observation locations, maxmin ordering and nearest-neighbor conditioning
//! sets.

use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Responses, coordinates and covariates for one dataset.
///
/// Coordinates are stored row-major so a single location is a contiguous
/// slice. Duplicate locations are allowed; the nugget keeps the covariance
/// of repeated sites positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    coords: Vec<f64>,
    dim: usize,
    y: DVector<f64>,
    design: DMatrix<f64>,
}

impl ObservationSet {
    /// `coords` is n×d, `design` is n×p. A design with zero columns means the
    /// mean is known to be zero.
    pub fn new(coords: DMatrix<f64>, y: DVector<f64>, design: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Input("dataset has no observations".into()));
        }
        if coords.nrows() != n || design.nrows() != n {
            return Err(Error::Input(format!(
                "row mismatch: {} responses, {} coordinate rows, {} design rows",
                n,
                coords.nrows(),
                design.nrows()
            )));
        }
        if coords.ncols() == 0 {
            return Err(Error::Input("coordinates need at least one column".into()));
        }
        if coords
            .iter()
            .chain(y.iter())
            .chain(design.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Input("non-finite value in dataset".into()));
        }
        let dim = coords.ncols();
        let mut rows = Vec::with_capacity(n * dim);
        for i in 0..n {
            rows.extend(coords.row(i).iter());
        }
        Ok(Self {
            coords: rows,
            dim,
            y,
            design,
        })
    }

    /// Dataset with a constant mean column.
    pub fn with_intercept(coords: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(coords, y, DMatrix::from_element(n, 1, 1.0))
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_covariates(&self) -> usize {
        self.design.ncols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major coordinate buffer.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.coords)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// Same locations and covariates with a new response vector.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.len() {
            return Err(Error::Input("response length mismatch".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite response".into()));
        }
        Ok(Self { y, ..self.clone() })
    }

    /// Length of the bounding-box diagonal over the first `cols` coordinate
    /// columns.
    pub fn bbox_diameter(&self, cols: std::ops::Range<usize>) -> f64 {
        let mut acc = 0.0;
        for c in cols {
            let (lo, hi) = (0..self.len())
                .map(|i| self.point(i)[c])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            acc += (hi - lo) * (hi - lo);
        }
        acc.sqrt()
    }
}

/// Vecchia factorization: an ordering of the observations and, for each
/// ordered position, the earlier positions it conditions on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditioningPlan {
    /// `order[i]` is the original observation index placed at position `i`.
    pub order: Vec<usize>,
    /// `neighbors[i]` holds ordered positions, all `< i`, ascending.
    pub neighbors: Vec<Vec<usize>>,
    pub max_neighbors: usize,
}

impl ConditioningPlan {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Checks the structural invariants against a dataset size.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.order.len() != n || self.neighbors.len() != n {
            return Err(Error::Input(format!(
                "plan covers {} points, dataset has {n}",
                self.order.len()
            )));
        }
        let mut seen = vec![false; n];
        for &o in &self.order {
            if o >= n || std::mem::replace(&mut seen[o], true) {
                return Err(Error::Input("plan order is not a permutation".into()));
            }
        }
        for (i, nb) in self.neighbors.iter().enumerate() {
            if nb.iter().any(|&j| j >= i) || nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Input(format!(
                    "neighbor set at position {i} must be ascending earlier positions"
                )));
            }
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_coords(coords: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 || !coords.len().is_multiple_of(dim) {
        return Err(Error::Input("coordinate buffer is not n×d".into()));
    }
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite coordinate".into()));
    }
    let n = coords.len() / dim;
    if n == 0 {
        return Err(Error::Input("no coordinates".into()));
    }
    Ok(n)
}

/// Maxmin ordering of row-major `coords` with `dim` columns.
///
/// Starts at the point nearest the centroid, then repeatedly places the
/// point whose distance to the already placed set is largest. Ties go to the
/// lowest original index.
pub fn order_maxmin(coords: &[f64], dim: usize) -> Result<Vec<usize>> {
    let n = check_coords(coords, dim)?;
    let pt = |i: usize| &coords[i * dim..(i + 1) * dim];

    let mut centroid = vec![0.0; dim];
    for i in 0..n {
        for (c, v) in centroid.iter_mut().zip(pt(i)) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);

    let mut first = 0;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let d = sq_dist(pt(i), &centroid);
        if d < best {
            best = d;
            first = i;
        }
    }

    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    let mut min_dist = vec![f64::INFINITY; n];
    let mut next = first;
    for _ in 0..n {
        order.push(next);
        placed[next] = true;
        let p = pt(next);
        let mut cand = usize::MAX;
        let mut cand_d = f64::NEG_INFINITY;
        for j in 0..n {
            if placed[j] {
                continue;
            }
            let d = sq_dist(pt(j), p);
            if d < min_dist[j] {
                min_dist[j] = d;
            }
            if min_dist[j] > cand_d {
                cand_d = min_dist[j];
                cand = j;
            }
        }
        next = cand;
    }
    Ok(order)
}

/// Exact nearest-neighbor conditioning sets for an ordering.
///
/// Position `i` conditions on the `min(i, m)` closest earlier positions;
/// equal distances prefer the earlier position.
pub fn build_neighbors(
    coords: &[f64],
    dim: usize,
    order: &[usize],
    m: usize,
) -> Result<ConditioningPlan> {
    let n = check_coords(coords, dim)?;
    if m == 0 {
        return Err(Error::Input("neighbor count must be at least 1".into()));
    }
    if order.len() != n {
        return Err(Error::Input(
            "ordering length differs from point count".into(),
        ));
    }
    let mut ordered = Vec::with_capacity(n * dim);
    for &o in order {
        if o >= n {
            return Err(Error::Input("ordering index out of range".into()));
        }
        ordered.extend_from_slice(&coords[o * dim..(o + 1) * dim]);
    }
    let pt = |i: usize| &ordered[i * dim..(i + 1) * dim];

    struct Cand(f64, usize);
    impl PartialEq for Cand {
        fn eq(&self, other: &Self) -> bool {
            self.cmp(other).is_eq()
        }
    }
    impl Eq for Cand {}
    impl PartialOrd for Cand {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Cand {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
        }
    }

    let mut neighbors = Vec::with_capacity(n);
    let mut heap = BinaryHeap::with_capacity(m + 1);
    for i in 0..n {
        let k = i.min(m);
        let mut nb: Vec<usize> = if k == i {
            (0..i).collect()
        } else {
            heap.clear();
            let p = pt(i);
            for j in 0..i {
                let c = Cand(sq_dist(pt(j), p), j);
                if heap.len() < k {
                    heap.push(c);
                } else if c < *heap.peek().expect("heap holds k > 0 entries") {
                    heap.pop();
                    heap.push(c);
                }
            }
            heap.drain().map(|c| c.1).collect()
        };
        nb.sort_unstable();
        neighbors.push(nb);
    }
    Ok(ConditioningPlan {
        order: order.to_vec(),
        neighbors,
        max_neighbors: m,
    })
}

/// Maxmin ordering plus neighbor sets for a dataset.
pub fn plan_for(data: &ObservationSet, m: usize) -> Result<ConditioningPlan> {
    let order = order_maxmin(data.coords(), data.dim())?;
    build_neighbors(data.coords(), data.dim(), &order, m)
}

/// Range parameters for [`scaled_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ranges {
    /// `‖s1 − s2‖ / range` over every coordinate.
    Spatial(f64),
    /// The last coordinate is time; space and time get separate ranges.
    SpaceTime { space: f64, time: f64 },
}

pub fn scaled_distance(s1: &[f64], s2: &[f64], ranges: Ranges) -> Result<f64> {
    if s1.len() != s2.len() || s1.is_empty() {
        return Err(Error::Input(
            "points must have equal, nonzero dimension".into(),
        ));
    }
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Parameter {
                name: name.into(),
                value: v,
                reason: "range must be positive",
            })
        }
    };
    match ranges {
        Ranges::Spatial(a) => Ok(sq_dist(s1, s2).sqrt() / positive("range", a)?),
        Ranges::SpaceTime { space, time } => {
            let space = positive("space range", space)?;
            let time = positive("time range", time)?;
            let d = s1.len() - 1;
            if d == 0 {
                return Err(Error::Input("space-time points need a spatial part".into()));
            }
            let ds = sq_dist(&s1[..d], &s2[..d]);
            let dt = s1[d] - s2[d];
            Ok((ds / (space * space) + dt * dt / (time * time)).sqrt())
        }
    }
}

/// Unit-sphere embedding of a longitude/latitude pair given in degrees.
pub fn lonlat_to_sphere(lon_deg: f64, lat_deg: f64) -> [f64; 3] {
    let (lon, lat) = (lon_deg.to_radians(), lat_deg.to_radians());
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_of_three_starts_in_the_middle() {
        assert_eq!(order_maxmin(&[0.0, 1.0, 2.0], 1).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn singleton_order() {
        assert_eq!(order_maxmin(&[0.3, 0.4], 2).unwrap(), vec![0]);
    }

    #[test]
    fn non_finite_coordinates_rejected() {
        assert!(order_maxmin(&[0.0, f64::NAN], 1).is_err());
    }

    #[test]
    fn first_position_has_no_neighbors() {
        let coords = [0.0, 0.5, 0.9, 0.1];
        let order = order_maxmin(&coords, 1).unwrap();
        let plan = build_neighbors(&coords, 1, &order, 2).unwrap();
        assert!(plan.neighbors[0].is_empty());
        assert_eq!(plan.neighbors[1], vec![0]);
        plan.validate(4).unwrap();
    }

    #[test]
    fn saturated_neighbor_sets_are_full_history() {
        let coords: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let order = order_maxmin(&coords, 2).unwrap();
        let plan = build_neighbors(&coords, 2, &order, 5).unwrap();
        for (i, nb) in plan.neighbors.iter().enumerate() {
            assert_eq!(*nb, (0..i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn zero_neighbors_rejected() {
        assert!(build_neighbors(&[0.0, 1.0], 1, &[0, 1], 0).is_err());
    }

    #[test]
    fn distance_examples() {
        let s = [0.2, 0.7];
        assert_eq!(scaled_distance(&s, &s, Ranges::Spatial(0.5)).unwrap(), 0.0);
        let d = scaled_distance(&[0.0, 0.0], &[0.3, 0.0], Ranges::Spatial(0.3)).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let st = Ranges::SpaceTime {
            space: 1.0,
            time: 1.0,
        };
        let d = scaled_distance(&[0.0, 0.0, 0.0], &[3.0, 0.0, 4.0], st).unwrap();
        assert!((d - 5.0).abs() < 1e-15);
        assert!(scaled_distance(&s, &s, Ranges::Spatial(0.0)).is_err());
        assert!(scaled_distance(&s, &s, Ranges::Spatial(-1.0)).is_err());
    }

    #[test]
    fn sphere_embedding_is_unit_length() {
        for (lon, lat) in [(0.0, 0.0), (120.0, -33.0), (-75.5, 89.0)] {
            let p = lonlat_to_sphere(lon, lat);
            let r: f64 = p.iter().map(|v| v * v).sum();
            assert!((r - 1.0).abs() < 1e-14);
        }
        assert_eq!(lonlat_to_sphere(0.0, 0.0), [1.0, 0.0, 0.0]);
    }
}
