//! Discrete measure spaces: quadrature grids, region masks and sampled fields.
//!
//! A [`QuadratureGrid`] is a finite set of nodes in `R^n` with nonnegative
//! weights; every integral becomes a weighted sum over the nodes. Fields hold
//! raw samples at the nodes and never interpolate.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` along one axis. Serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct AxisBounds {
    pub lo: f64,
    pub hi: f64,
}

impl AxisBounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

impl From<[f64; 2]> for AxisBounds {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<AxisBounds> for [f64; 2] {
    fn from(b: AxisBounds) -> Self {
        [b.lo, b.hi]
    }
}

/// Nodes and weights standing in for `(R^n, mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    dimension: usize,
    /// Row-major, `dimension` coordinates per node.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    domain_box: Vec<AxisBounds>,
    /// Number of distinct node coordinates along each axis.
    axis_resolution: Vec<usize>,
    /// Cell width along each axis, known only for tensor-product grids.
    spacing: Option<Vec<f64>>,
}

/// Tensor-product midpoint grid on `domain_box` with `resolution[d]` cells along axis `d`.
///
/// Every weight is the cell volume, so the weights sum to the box volume.
pub fn build_uniform_grid(
    domain_box: &[AxisBounds],
    resolution: &[usize],
) -> Result<Arc<QuadratureGrid>> {
    if domain_box.is_empty() {
        return Err(Error::invalid("grid needs at least one axis"));
    }
    if domain_box.len() != resolution.len() {
        return Err(Error::invalid(format!(
            "box has {} axes but resolution has {} entries",
            domain_box.len(),
            resolution.len()
        )));
    }
    for (axis, (b, &r)) in domain_box.iter().zip(resolution).enumerate() {
        if !b.lo.is_finite() || !b.hi.is_finite() {
            return Err(Error::invalid(format!("axis {axis}: bounds must be finite")));
        }
        if b.lo >= b.hi {
            return Err(Error::invalid(format!("axis {axis}: need lo < hi, got [{}, {}]", b.lo, b.hi)));
        }
        if r == 0 {
            return Err(Error::invalid(format!("axis {axis}: resolution must be at least 1")));
        }
    }

    let dimension = domain_box.len();
    let spacing: Vec<f64> = domain_box
        .iter()
        .zip(resolution)
        .map(|(b, &r)| b.length() / r as f64)
        .collect();
    let count: usize = resolution
        .iter()
        .try_fold(1usize, |acc, &r| acc.checked_mul(r))
        .ok_or_else(|| Error::invalid("grid node count overflows"))?;
    let cell_volume: f64 = spacing.iter().product();

    let mut nodes = Vec::with_capacity(count * dimension);
    let mut counter = vec![0usize; dimension];
    for _ in 0..count {
        for d in 0..dimension {
            let b = domain_box[d];
            let h = spacing[d];
            nodes.push(b.lo + (counter[d] as f64 + 0.5) * h);
        }
        // Last axis varies fastest.
        for d in (0..dimension).rev() {
            counter[d] += 1;
            if counter[d] < resolution[d] {
                break;
            }
            counter[d] = 0;
        }
    }

    Ok(Arc::new(QuadratureGrid {
        dimension,
        nodes,
        weights: vec![cell_volume; count],
        domain_box: domain_box.to_vec(),
        axis_resolution: resolution.to_vec(),
        spacing: Some(spacing),
    }))
}

impl QuadratureGrid {
    /// Arbitrary node/weight set. Nodes must be pairwise distinct and lie in `domain_box`.
    pub fn from_nodes(
        dimension: usize,
        nodes: Vec<Vec<f64>>,
        weights: Vec<f64>,
        domain_box: Vec<AxisBounds>,
    ) -> Result<Arc<Self>> {
        if dimension == 0 || domain_box.len() != dimension {
            return Err(Error::invalid("dimension must be positive and match the box"));
        }
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::invalid(format!(
                "need as many weights as nodes (at least one), got {} nodes and {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(format!("weight {i} is negative or not finite")));
        }
        for (i, x) in nodes.iter().enumerate() {
            if x.len() != dimension {
                return Err(Error::invalid(format!("node {i} has {} coordinates", x.len())));
            }
            if x.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("node {i} has a non-finite coordinate")));
            }
        }
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&a, &b| {
            nodes[a]
                .iter()
                .zip(&nodes[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(w) = order.windows(2).find(|w| nodes[w[0]] == nodes[w[1]]) {
            return Err(Error::invalid(format!("nodes {} and {} coincide", w[0], w[1])));
        }

        let axis_resolution = (0..dimension)
            .map(|d| {
                let mut c: Vec<f64> = nodes.iter().map(|x| x[d]).collect();
                c.sort_by(f64::total_cmp);
                c.dedup();
                c.len()
            })
            .collect();
        Ok(Arc::new(Self {
            dimension,
            nodes: nodes.into_iter().flatten().collect(),
            weights,
            domain_box,
            axis_resolution,
            spacing: None,
        }))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dimension)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain_box(&self) -> &[AxisBounds] {
        &self.domain_box
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn spacing(&self) -> Option<&[f64]> {
        self.spacing.as_deref()
    }

    /// Nodes per unit length along `axis`; bounds the finest resolvable oscillation.
    pub fn nodes_per_unit_length(&self, axis: usize) -> f64 {
        self.axis_resolution[axis] as f64 / self.domain_box[axis].length()
    }

    /// Radius of the smallest origin-centred ball containing the box.
    pub fn circumradius(&self) -> f64 {
        self.domain_box
            .iter()
            .map(|b| {
                let m = b.lo.abs().max(b.hi.abs());
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn same_grid(a: &Arc<QuadratureGrid>, b: &Arc<QuadratureGrid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn ensure_same_grid(a: &Arc<QuadratureGrid>, b: &Arc<QuadratureGrid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::invalid("operands live on different grids"))
    }
}

/// Boolean selection of grid nodes realizing a measurable set.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    grid: Arc<QuadratureGrid>,
    included: Vec<bool>,
}

impl RegionMask {
    pub fn full(grid: &Arc<QuadratureGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            included: vec![true; grid.len()],
        }
    }

    pub fn empty(grid: &Arc<QuadratureGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            included: vec![false; grid.len()],
        }
    }

    pub fn from_flags(grid: &Arc<QuadratureGrid>, included: Vec<bool>) -> Result<Self> {
        if included.len() != grid.len() {
            return Err(Error::invalid(format!(
                "mask has {} flags for {} nodes",
                included.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            included,
        })
    }

    pub fn from_predicate(grid: &Arc<QuadratureGrid>, pred: impl Fn(&[f64]) -> bool) -> Self {
        Self {
            grid: Arc::clone(grid),
            included: grid.nodes().map(pred).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn contains(&self, node: usize) -> bool {
        self.included[node]
    }

    pub fn flags(&self) -> &[bool] {
        &self.included
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.included
            .iter()
            .enumerate()
            .filter_map(|(i, &inc)| inc.then_some(i))
    }

    pub fn count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    /// `mu` of the region.
    pub fn measure(&self) -> f64 {
        self.indices().map(|i| self.grid.weights[i]).sum()
    }

    pub fn union(&self, other: &RegionMask) -> Result<RegionMask> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &RegionMask) -> Result<RegionMask> {
        self.combine(other, |a, b| a && b)
    }

    pub fn is_disjoint(&self, other: &RegionMask) -> Result<bool> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(!self.included.iter().zip(&other.included).any(|(a, b)| *a && *b))
    }

    /// `true` when every node of `self` is also in `other`.
    pub fn is_subset_of(&self, other: &RegionMask) -> Result<bool> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(self.included.iter().zip(&other.included).all(|(a, b)| !*a || *b))
    }

    fn combine(&self, other: &RegionMask, op: impl Fn(bool, bool) -> bool) -> Result<RegionMask> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(RegionMask {
            grid: Arc::clone(&self.grid),
            included: self
                .included
                .iter()
                .zip(&other.included)
                .map(|(a, b)| op(*a, *b))
                .collect(),
        })
    }
}

/// `Omega_R = Omega ∩ {|x| < R}`.
pub fn truncate_region(region: &RegionMask, radius: f64) -> Result<RegionMask> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("truncation radius must be positive, got {radius}")));
    }
    let r2 = radius * radius;
    let grid = &region.grid;
    let included = region
        .included
        .iter()
        .enumerate()
        .map(|(i, &inc)| inc && grid.node(i).iter().map(|c| c * c).sum::<f64>() < r2)
        .collect();
    Ok(RegionMask {
        grid: Arc::clone(grid),
        included,
    })
}

/// Real samples at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<QuadratureGrid>,
    samples: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Arc<QuadratureGrid>, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} samples for {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            samples,
        })
    }

    pub fn from_fn(grid: &Arc<QuadratureGrid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: &Arc<QuadratureGrid>, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn zeros(grid: &Arc<QuadratureGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            samples: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Nodewise map. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(&self.grid, self.samples.iter().map(|&s| f(s)).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.map(|s| c * s)
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Self::new(
            &self.grid,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.linear_combination(1.0, other, -1.0)
    }

    pub(crate) fn add_assign_unchecked(&mut self, other: &ScalarField) {
        for (s, o) in self.samples.iter_mut().zip(&other.samples) {
            *s += o;
        }
    }
}

/// `u = (u^(1), ..., u^(m))` with all components on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("vector field needs at least one component"))?;
        for (j, c) in components.iter().enumerate().skip(1) {
            if !same_grid(first.grid(), c.grid()) {
                return Err(Error::invalid(format!("component {j} lives on a different grid")));
            }
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: &Arc<QuadratureGrid>, m: usize) -> Result<Self> {
        Self::new((0..m).map(|_| ScalarField::zeros(grid)).collect())
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &ScalarField {
        &self.components[j]
    }

    /// Writes the `m` component values at `node` into `out`.
    pub fn value_at(&self, node: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.samples[node];
        }
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        self.components.iter().map(|c| c.samples[node]).collect()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Ok(Self {
            components: self
                .components
                .iter()
                .map(|f| f.scaled(c))
                .collect::<Result<_>>()?,
        })
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.zip_with(other, ScalarField::sub)
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        self.zip_with(other, ScalarField::add)
    }

    fn zip_with(
        &self,
        other: &VectorField,
        op: impl Fn(&ScalarField, &ScalarField) -> Result<ScalarField>,
    ) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::invalid(format!(
                "component count mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| op(a, b))
                .collect::<Result<_>>()?,
        })
    }

    pub(crate) fn add_assign_unchecked(&mut self, other: &VectorField) {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            a.add_assign_unchecked(b);
        }
    }
}

/// `∫_region f dmu` as the weighted sum over included nodes.
pub fn integrate(f: &ScalarField, region: &RegionMask) -> Result<f64> {
    ensure_same_grid(f.grid(), region.grid())?;
    Ok(weighted_sum(f.grid(), region, |i| f.samples[i]))
}

/// `Σ_{i ∈ region} w_i g(i)`.
pub(crate) fn weighted_sum(
    grid: &QuadratureGrid,
    region: &RegionMask,
    g: impl Fn(usize) -> f64,
) -> f64 {
    grid.weights
        .iter()
        .zip(&region.included)
        .enumerate()
        .filter(|(_, (_, &inc))| inc)
        .map(|(i, (w, _))| w * g(i))
        .sum()
}
