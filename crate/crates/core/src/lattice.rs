//! Lattice geometries, bond enumeration, subsystem selection and deformation
//! profiles.
//!
//! Sites are 1-indexed throughout this module so that bond weights can be
//! written exactly as in the coupling formulas (bond `j` joins sites `j` and
//! `j+1`). Matrix-facing code converts to 0-based row/column indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open chain of `n` sites with bonds `(j, j+1)`, `j = 1..n-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain1D {
    n_sites: usize,
}

impl Chain1D {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidLattice(format!(
                "chain needs at least 2 sites, got {n_sites}"
            )));
        }
        Ok(Self { n_sites })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_bonds(&self) -> usize {
        self.n_sites - 1
    }

    /// Bonds as 1-indexed site pairs `(j, j+1)`.
    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.n_sites).map(|j| (j, j + 1))
    }
}

/// `n x n` square lattice with open boundaries. Site `(x, y)`,
/// `1 <= x, y <= n`, maps to the flattened index `(y-1)*n + (x-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareLattice2D {
    n: usize,
}

/// A bond of the square lattice together with the midpoint coordinate used
/// by 2D deformations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond2D {
    pub from: (usize, usize),
    pub to: (usize, usize),
    /// Geometric midpoint `(u, v)` of the bond, in lattice units.
    pub midpoint: (f64, f64),
}

impl SquareLattice2D {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidLattice(format!(
                "square lattice needs linear size >= 2, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn linear_size(&self) -> usize {
        self.n
    }

    pub fn n_sites(&self) -> usize {
        self.n * self.n
    }

    pub fn n_bonds(&self) -> usize {
        2 * self.n * (self.n - 1)
    }

    /// Flattened 0-based index of site `(x, y)`.
    pub fn site_index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x >= 1 && x <= self.n && y >= 1 && y <= self.n);
        (y - 1) * self.n + (x - 1)
    }

    /// Horizontal bonds `(x,y)-(x+1,y)` in row-major order, then vertical
    /// bonds `(x,y)-(x,y+1)`.
    pub fn bonds(&self) -> Vec<Bond2D> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.n_bonds());
        for y in 1..=n {
            for x in 1..n {
                out.push(Bond2D {
                    from: (x, y),
                    to: (x + 1, y),
                    midpoint: (x as f64 + 0.5, y as f64),
                });
            }
        }
        for y in 1..n {
            for x in 1..=n {
                out.push(Bond2D {
                    from: (x, y),
                    to: (x, y + 1),
                    midpoint: (x as f64, y as f64 + 0.5),
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Flat,
    Parabolic,
    SineSquare,
    ProductParabola2d,
    RadialParabola2d,
}

/// Bond-indexed coupling weights for a deformed Hamiltonian.
///
/// Weights are stored per bond, never per site, so deformed Hamiltonians are
/// assembled by a single bond scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DeformationProfile {
    OneD {
        kind: ProfileKind,
        n_sites: usize,
        /// `weights[j-1]` is the weight of bond `(j, j+1)`.
        weights: Vec<f64>,
    },
    TwoD {
        kind: ProfileKind,
        n: usize,
        /// Same order as [`SquareLattice2D::bonds`].
        weights: Vec<f64>,
    },
}

impl DeformationProfile {
    pub fn kind(&self) -> ProfileKind {
        match self {
            Self::OneD { kind, .. } | Self::TwoD { kind, .. } => *kind,
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Self::OneD { weights, .. } | Self::TwoD { weights, .. } => weights,
        }
    }

    /// Weight of 1D bond `(j, j+1)`, `j` 1-indexed.
    pub fn weight_1d(&self, j: usize) -> f64 {
        match self {
            Self::OneD { weights, .. } => weights[j - 1],
            Self::TwoD { .. } => panic!("weight_1d on a 2D profile"),
        }
    }

    pub fn n_sites(&self) -> usize {
        match self {
            Self::OneD { n_sites, .. } => *n_sites,
            Self::TwoD { n, .. } => n * n,
        }
    }

    /// JSON per the 1D wire schema `{"kind", "N", "weights"}` or bond-keyed
    /// records for 2D.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Self::OneD {
                kind,
                n_sites,
                weights,
            } => serde_json::json!({ "kind": kind, "N": n_sites, "weights": weights }),
            Self::TwoD { kind, n, weights } => {
                let lat = SquareLattice2D { n: *n };
                let bonds: Vec<_> = lat
                    .bonds()
                    .iter()
                    .zip(weights)
                    .map(|(b, w)| {
                        serde_json::json!({ "from": [b.from.0, b.from.1], "to": [b.to.0, b.to.1], "weight": w })
                    })
                    .collect();
                serde_json::json!({ "kind": kind, "N": n, "bonds": bonds })
            }
        }
    }
}

/// `g_j = (N-j) j / (N/2)^2` on bonds `j = 1..N-1`.
pub fn parabolic_weights(n_sites: usize) -> Result<DeformationProfile> {
    let chain = Chain1D::new(n_sites)?;
    let half_sq = (n_sites as f64 / 2.0).powi(2);
    let weights = (1..chain.n_sites)
        .map(|j| ((n_sites - j) * j) as f64 / half_sq)
        .collect();
    Ok(DeformationProfile::OneD {
        kind: ProfileKind::Parabolic,
        n_sites,
        weights,
    })
}

/// Sine-square deformation `cos^2(pi x / L)` with the bond at centered
/// coordinate `x_j = j - N/2` and `L = N`.
pub fn sine_square_weights(n_sites: usize) -> Result<DeformationProfile> {
    let chain = Chain1D::new(n_sites)?;
    let l = n_sites as f64;
    let weights = (1..chain.n_sites)
        .map(|j| {
            let x = j as f64 - l / 2.0;
            (std::f64::consts::PI * x / l).cos().powi(2)
        })
        .collect();
    Ok(DeformationProfile::OneD {
        kind: ProfileKind::SineSquare,
        n_sites,
        weights,
    })
}

/// Uniform unit weights.
pub fn flat_weights(n_sites: usize) -> Result<DeformationProfile> {
    let chain = Chain1D::new(n_sites)?;
    Ok(DeformationProfile::OneD {
        kind: ProfileKind::Flat,
        n_sites,
        weights: vec![1.0; chain.n_bonds()],
    })
}

fn parabola_1d(n: usize, u: f64) -> f64 {
    let half_sq = (n as f64 / 2.0).powi(2);
    (n as f64 - u) * u / half_sq
}

/// Product of two parabolas evaluated at bond midpoints: the horizontal bond
/// `(x,y)-(x+1,y)` uses `f(x+1/2, y)`, the vertical one `f(x, y+1/2)`. The
/// symmetric midpoint placement keeps the profile invariant under the square
/// lattice point group.
pub fn product_parabola_2d(n: usize) -> Result<DeformationProfile> {
    let lat = SquareLattice2D::new(n)?;
    let weights = lat
        .bonds()
        .iter()
        .map(|b| parabola_1d(n, b.midpoint.0) * parabola_1d(n, b.midpoint.1))
        .collect();
    Ok(DeformationProfile::TwoD {
        kind: ProfileKind::ProductParabola2d,
        n,
        weights,
    })
}

/// Radial variant `f(r) = (R - r)^2 / R^2` with `R = N/2` and `r` the bond
/// midpoint distance from the lattice center, clamped to zero for `r >= R`.
pub fn radial_parabola_2d(n: usize) -> Result<DeformationProfile> {
    let lat = SquareLattice2D::new(n)?;
    let r_max = n as f64 / 2.0;
    let c = (n as f64 + 1.0) / 2.0;
    let weights = lat
        .bonds()
        .iter()
        .map(|b| {
            let r = ((b.midpoint.0 - c).powi(2) + (b.midpoint.1 - c).powi(2)).sqrt();
            let d = (r_max - r).max(0.0);
            d * d / (r_max * r_max)
        })
        .collect();
    Ok(DeformationProfile::TwoD {
        kind: ProfileKind::RadialParabola2d,
        n,
        weights,
    })
}

/// Flat weights on the square lattice.
pub fn flat_weights_2d(n: usize) -> Result<DeformationProfile> {
    let lat = SquareLattice2D::new(n)?;
    Ok(DeformationProfile::TwoD {
        kind: ProfileKind::Flat,
        n,
        weights: vec![1.0; lat.n_bonds()],
    })
}

/// A contiguous subsystem given by 0-based indices into the parent system's
/// mode ordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    indices: Vec<usize>,
    parent_dim: usize,
}

impl Subsystem {
    /// Arbitrary index set; indices must be strictly increasing and in range.
    pub fn new(indices: Vec<usize>, parent_dim: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::IndexOutOfRange(
                "subsystem indices must be strictly increasing".into(),
            ));
        }
        if indices.last().is_some_and(|&m| m >= parent_dim) {
            return Err(Error::IndexOutOfRange(format!(
                "index {} outside parent of dimension {}",
                indices.last().unwrap(),
                parent_dim
            )));
        }
        Ok(Self {
            indices,
            parent_dim,
        })
    }

    /// Centered interval of `n` sites in a chain of `n_sites`.
    pub fn centered_interval(n_sites: usize, n: usize) -> Result<Self> {
        if n > n_sites {
            return Err(Error::IndexOutOfRange(format!(
                "subsystem of {n} sites does not fit in {n_sites}"
            )));
        }
        let lo = (n_sites - n) / 2;
        Self::new((lo..lo + n).collect(), n_sites)
    }

    /// Centered interval whose first site sits on an odd 1-indexed site, so
    /// that two-site unit cells are not cut. Shifts left by one site when the
    /// plain centered interval would start mid-cell.
    pub fn centered_cell_aligned(n_sites: usize, n: usize) -> Result<Self> {
        if n > n_sites {
            return Err(Error::IndexOutOfRange(format!(
                "subsystem of {n} sites does not fit in {n_sites}"
            )));
        }
        let mut lo = (n_sites - n) / 2;
        if lo % 2 == 1 {
            lo -= 1;
        }
        Self::new((lo..lo + n).collect(), n_sites)
    }

    /// First `m` sites of a chain.
    pub fn left_edge(n_sites: usize, m: usize) -> Result<Self> {
        if m > n_sites {
            return Err(Error::IndexOutOfRange(format!("{m} > {n_sites}")));
        }
        Self::new((0..m).collect(), n_sites)
    }

    /// Last `m` sites of a chain.
    pub fn right_edge(n_sites: usize, m: usize) -> Result<Self> {
        if m > n_sites {
            return Err(Error::IndexOutOfRange(format!("{m} > {n_sites}")));
        }
        Self::new((n_sites - m..n_sites).collect(), n_sites)
    }

    /// `m` sites on each end of a chain.
    pub fn both_edges(n_sites: usize, m: usize) -> Result<Self> {
        if 2 * m > n_sites {
            return Err(Error::IndexOutOfRange(format!("2*{m} > {n_sites}")));
        }
        let mut idx: Vec<usize> = (0..m).collect();
        idx.extend(n_sites - m..n_sites);
        Self::new(idx, n_sites)
    }

    /// Centered `n x n` square of a 2D lattice.
    pub fn centered_square(lat: &SquareLattice2D, n: usize) -> Result<Self> {
        let big = lat.linear_size();
        if n > big {
            return Err(Error::IndexOutOfRange(format!("{n} > {big}")));
        }
        let lo = (big - n) / 2 + 1;
        let mut idx = Vec::with_capacity(n * n);
        for y in lo..lo + n {
            for x in lo..lo + n {
                idx.push(lat.site_index(x, y));
            }
        }
        idx.sort_unstable();
        Self::new(idx, lat.n_sites())
    }

    /// `k x k` square anchored at the lattice corner `(1, 1)`.
    pub fn corner_square(lat: &SquareLattice2D, k: usize) -> Result<Self> {
        if k > lat.linear_size() {
            return Err(Error::IndexOutOfRange(format!("{k} > {}", lat.linear_size())));
        }
        let mut idx = Vec::with_capacity(k * k);
        for y in 1..=k {
            for x in 1..=k {
                idx.push(lat.site_index(x, y));
            }
        }
        idx.sort_unstable();
        Self::new(idx, lat.n_sites())
    }

    pub fn full(parent_dim: usize) -> Self {
        Self {
            indices: (0..parent_dim).collect(),
            parent_dim,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn parent_dim(&self) -> usize {
        self.parent_dim
    }

    /// Complement within the parent system.
    pub fn complement(&self) -> Self {
        let mut mask = vec![true; self.parent_dim];
        for &i in &self.indices {
            mask[i] = false;
        }
        Self {
            indices: (0..self.parent_dim).filter(|&i| mask[i]).collect(),
            parent_dim: self.parent_dim,
        }
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.indices.iter().all(|i| other.indices.binary_search(i).is_err())
    }

    /// True when the indices form one contiguous block.
    pub fn is_contiguous(&self) -> bool {
        self.indices
            .windows(2)
            .all(|w| w[1] == w[0] + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parabolic_examples() {
        let p = parabolic_weights(36).unwrap();
        assert_relative_eq!(p.weight_1d(18), 1.0, epsilon = 0.0);
        assert_relative_eq!(p.weight_1d(1), 35.0 / 324.0, epsilon = 0.0);
        let p4 = parabolic_weights(4).unwrap();
        assert_relative_eq!(p4.weight_1d(3), 0.75, epsilon = 0.0);
        assert_eq!(p4.weight_1d(3), p4.weight_1d(1));
    }

    #[test]
    fn parabolic_symmetry_bit_identical() {
        for n in [8usize, 36, 61] {
            let p = parabolic_weights(n).unwrap();
            for j in 1..n {
                assert_eq!(p.weight_1d(j).to_bits(), p.weight_1d(n - j).to_bits());
            }
        }
    }

    #[test]
    fn parabolic_rejects_tiny_chain() {
        assert!(matches!(parabolic_weights(1), Err(Error::InvalidLattice(_))));
    }

    #[test]
    fn sine_square_examples() {
        let p = sine_square_weights(36).unwrap();
        assert_relative_eq!(p.weight_1d(18), 1.0, epsilon = 1e-15);
        // cos^2(17 pi / 36), frozen from direct evaluation
        assert_relative_eq!(p.weight_1d(1), 0.007596123493895964, epsilon = 1e-15);
        for j in 1..36 {
            assert_relative_eq!(p.weight_1d(j), p.weight_1d(36 - j), epsilon = 1e-15);
        }
    }

    #[test]
    fn profiles_nonnegative_max_one_at_center() {
        for p in [
            parabolic_weights(24).unwrap(),
            sine_square_weights(24).unwrap(),
            flat_weights(24).unwrap(),
        ] {
            assert!(p.weights().iter().all(|&w| w >= 0.0));
            let max = p.weights().iter().cloned().fold(f64::MIN, f64::max);
            assert_relative_eq!(max, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn product_parabola_examples() {
        // f(5, 5) = 1 and f(5, 0.5) = 0.19 for N = 10
        let f = |u: f64, v: f64| parabola_1d(10, u) * parabola_1d(10, v);
        assert_relative_eq!(f(5.0, 5.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(f(5.0, 0.5), 0.19, epsilon = 1e-15);

        let p = product_parabola_2d(10).unwrap();
        assert_eq!(p.weights().len(), 180);
        assert!(p.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn product_parabola_point_group_invariant() {
        // The weight multiset must be invariant under x <-> y: horizontal and
        // vertical bond blocks are each other's transposes.
        let n = 8;
        let p = product_parabola_2d(n).unwrap();
        let w = p.weights();
        let horiz = &w[..n * (n - 1)];
        let vert = &w[n * (n - 1)..];
        let mut a: Vec<u64> = horiz.iter().map(|x| x.to_bits()).collect();
        let mut b: Vec<u64> = vert.iter().map(|x| x.to_bits()).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn radial_and_product_agree_at_center() {
        // Both variants evaluate to 1 at the lattice center; on the innermost
        // bonds they differ by at most the radial form's linear cusp term.
        let n = 40;
        let prod = product_parabola_2d(n).unwrap();
        let rad = radial_parabola_2d(n).unwrap();
        let lat = SquareLattice2D::new(n).unwrap();
        let c = (n as f64 + 1.0) / 2.0;
        for (b, (wp, wr)) in lat
            .bonds()
            .iter()
            .zip(prod.weights().iter().zip(rad.weights()))
        {
            let r = ((b.midpoint.0 - c).powi(2) + (b.midpoint.1 - c).powi(2)).sqrt();
            if r < 1.0 {
                assert!((wp - wr).abs() <= 2.0 * r / (n as f64 / 2.0) + 1e-12);
            }
        }
    }

    #[test]
    fn profile_json_shape() {
        let p = parabolic_weights(4).unwrap();
        let v = p.to_json();
        assert_eq!(v["kind"], "parabolic");
        assert_eq!(v["N"], 4);
        assert_eq!(v["weights"].as_array().unwrap().len(), 3);
        let q = product_parabola_2d(3).unwrap().to_json();
        assert_eq!(q["bonds"].as_array().unwrap().len(), 12);
    }

    #[test]
    fn subsystem_constructors() {
        let a = Subsystem::centered_interval(36, 30).unwrap();
        assert_eq!(a.indices()[0], 3);
        assert_eq!(*a.indices().last().unwrap(), 32);
        assert!(a.is_contiguous());

        let aligned = Subsystem::centered_cell_aligned(14, 8).unwrap();
        assert_eq!(aligned.indices()[0], 2);
        let aligned12 = Subsystem::centered_cell_aligned(12, 8).unwrap();
        assert_eq!(aligned12.indices()[0], 2);

        let e = Subsystem::left_edge(36, 2).unwrap();
        let b = Subsystem::centered_interval(36, 30).unwrap();
        assert!(e.is_disjoint(&b));
        assert_eq!(e.complement().len(), 34);

        let lat = SquareLattice2D::new(10).unwrap();
        let sq = Subsystem::centered_square(&lat, 6).unwrap();
        assert_eq!(sq.len(), 36);
        assert_eq!(sq.indices()[0], lat.site_index(3, 3));
        let corner = Subsystem::corner_square(&lat, 4).unwrap();
        assert_eq!(corner.indices()[0], 0);
        assert!(corner.is_disjoint(&sq));
    }

    #[test]
    fn subsystem_rejects_out_of_range() {
        assert!(Subsystem::new(vec![0, 5], 4).is_err());
        assert!(Subsystem::new(vec![3, 2], 6).is_err());
        assert!(Subsystem::centered_interval(10, 11).is_err());
    }
}
