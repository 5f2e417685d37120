//! Lattices Γ, scaled cells □_γ^η = η□ + ηγ and the interior index set Γ_η.

use crate::error::{Error, Result};
use crate::field::BoxDomain;
use crate::scalar::{lit, to_f64, CMat, Real};
use std::io::Write;

/// Parallelotope `origin + Σ t_i edges[i]`, `t ∈ [0,1]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell<T> {
    pub origin: Vec<T>,
    pub edges: Vec<Vec<T>>,
}

impl<T: Real> Cell<T> {
    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    /// Axis-aligned box cell.
    pub fn from_box(b: &BoxDomain<T>) -> Self {
        let d = b.dim();
        let edges = (0..d)
            .map(|i| {
                let mut e = vec![T::zero(); d];
                e[i] = b.hi[i] - b.lo[i];
                e
            })
            .collect();
        Self {
            origin: b.lo.clone(),
            edges,
        }
    }

    pub fn measure(&self) -> T {
        det(&self.edges).abs()
    }

    /// Maps `t ∈ [0,1]^d` into the cell.
    pub fn point(&self, t: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.origin);
        for (ti, e) in t.iter().zip(&self.edges) {
            for (o, ej) in out.iter_mut().zip(e) {
                *o += *ti * *ej;
            }
        }
    }

    pub fn vertices(&self) -> Vec<Vec<T>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                let t: Vec<T> = (0..d)
                    .map(|i| if mask >> i & 1 == 1 { T::one() } else { T::zero() })
                    .collect();
                let mut x = vec![T::zero(); d];
                self.point(&t, &mut x);
                x
            })
            .collect()
    }

    /// True when every edge is parallel to a coordinate axis.
    pub fn is_axis_aligned(&self) -> bool {
        self.edges
            .iter()
            .enumerate()
            .all(|(i, e)| e.iter().enumerate().all(|(j, v)| j == i || *v == T::zero()))
    }
}

/// Lattice `Γ = offset + basis · ℤ^d` with periodicity cell `□`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice<T> {
    /// Basis vectors `b_i` (each of length d).
    pub basis: Vec<Vec<T>>,
    pub offset: Vec<T>,
    pub cell: Cell<T>,
}

impl<T: Real> Lattice<T> {
    pub fn new(basis: Vec<Vec<T>>, offset: Vec<T>, cell: Cell<T>) -> Result<Self> {
        let d = offset.len();
        if d == 0 || basis.len() != d || basis.iter().any(|b| b.len() != d) || cell.dim() != d {
            return Err(Error::Dimension("lattice basis, offset and cell must share dimension".into()));
        }
        if det(&basis).abs() < lit(1e-12) {
            return Err(Error::InvalidArgument("lattice basis is degenerate".into()));
        }
        if !(cell.measure() > T::zero()) {
            return Err(Error::InvalidArgument("periodicity cell has zero measure".into()));
        }
        Ok(Self { basis, offset, cell })
    }

    /// `ℤ^d` with the unit cube cell.
    pub fn integer(d: usize) -> Self {
        let id = identity(d, T::one());
        Self {
            basis: id.clone(),
            offset: vec![T::zero(); d],
            cell: Cell {
                origin: vec![T::zero(); d],
                edges: id,
            },
        }
    }

    /// `(−1,…,−1) + 2ℤ^d` with cell `(0,2)^d`.
    pub fn odd(d: usize) -> Self {
        let two = identity(d, lit(2.0));
        Self {
            basis: two.clone(),
            offset: vec![-T::one(); d],
            cell: Cell {
                origin: vec![T::zero(); d],
                edges: two,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    /// Lattice point `offset + basis · k`.
    pub fn gamma(&self, k: &[i64]) -> Vec<T> {
        let mut g = self.offset.clone();
        for (ki, b) in k.iter().zip(&self.basis) {
            let kf: T = T::from_i64(*ki).expect("index fits");
            for (gj, bj) in g.iter_mut().zip(b) {
                *gj += kf * *bj;
            }
        }
        g
    }

    /// The scaled cell `η□ + ηγ`.
    pub fn scaled_cell(&self, k: &[i64], eta: T) -> Cell<T> {
        let g = self.gamma(k);
        Cell {
            origin: self.cell.origin.iter().zip(&g).map(|(o, gi)| eta * (*o + *gi)).collect(),
            edges: self
                .cell
                .edges
                .iter()
                .map(|e| e.iter().map(|v| eta * *v).collect())
                .collect(),
        }
    }
}

/// The set `Γ_η` of lattice indices whose scaled cells lie inside the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct CellIndexSet<T> {
    pub eta: T,
    pub gammas: Vec<Vec<i64>>,
}

impl<T: Real> CellIndexSet<T> {
    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn cells<'a>(&'a self, lattice: &'a Lattice<T>) -> impl Iterator<Item = Cell<T>> + 'a {
        self.gammas.iter().map(move |k| lattice.scaled_cell(k, self.eta))
    }

    /// Writes `gamma, corner, cell mean` rows; `means[i]` belongs to `gammas[i]`.
    pub fn write_csv<W: Write>(&self, lattice: &Lattice<T>, means: &[CMat<T>], mut w: W) -> Result<()> {
        if means.len() != self.gammas.len() {
            return Err(Error::Dimension("one mean per cell required".into()));
        }
        let d = lattice.dim();
        let n = means.first().map_or(0, |m| m.n());
        let mut header: Vec<String> = (0..d).map(|i| format!("gamma_{i}")).collect();
        header.extend((0..d).map(|i| format!("corner_{i}")));
        for r in 0..n {
            for c in 0..n {
                header.push(format!("mean_re_{r}{c}"));
                header.push(format!("mean_im_{r}{c}"));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for (k, m) in self.gammas.iter().zip(means) {
            let cell = lattice.scaled_cell(k, self.eta);
            let mut row: Vec<String> = k.iter().map(|v| v.to_string()).collect();
            row.extend(cell.origin.iter().map(|v| format!("{:.16e}", to_f64(*v))));
            for z in m.as_slice() {
                row.push(format!("{:.16e}", to_f64(z.re)));
                row.push(format!("{:.16e}", to_f64(z.im)));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Enumerates `Γ_η = {γ ∈ Γ : η□ + ηγ ⊂ Ω}` for a box `Ω` by the vertex test.
///
/// An `eta` exceeding the domain returns an empty set.
pub fn cells_inside<T: Real>(lattice: &Lattice<T>, eta: T, domain: &BoxDomain<T>) -> Result<CellIndexSet<T>> {
    let d = lattice.dim();
    if domain.dim() != d {
        return Err(Error::Dimension(format!("lattice dim {d} vs domain dim {}", domain.dim())));
    }
    if !(eta > T::zero()) {
        return Err(Error::InvalidArgument("eta must be positive".into()));
    }
    // Bounding box of admissible k: B k ∈ domain/η − (cell origin + offset) − cell extent.
    let inv = invert(&lattice.basis)?;
    let verts = lattice.cell.vertices();
    let mut kmin = vec![i64::MAX; d];
    let mut kmax = vec![i64::MIN; d];
    for mask in 0..1usize << d {
        for v in &verts {
            let y: Vec<T> = (0..d)
                .map(|i| {
                    let c = if mask >> i & 1 == 1 { domain.hi[i] } else { domain.lo[i] };
                    c / eta - v[i] - lattice.offset[i]
                })
                .collect();
            for i in 0..d {
                let ki = (0..d).map(|j| inv[j][i] * y[j]).sum::<T>();
                let ki = to_f64(ki);
                if !ki.is_finite() || ki.abs() > 1e12 {
                    return Err(Error::InvalidArgument("eta too small for cell enumeration".into()));
                }
                kmin[i] = kmin[i].min(ki.floor() as i64 - 1);
                kmax[i] = kmax[i].max(ki.ceil() as i64 + 1);
            }
        }
    }
    let tol = |x: T| lit::<T>(1e-12) * (T::one() + x.abs());
    let mut gammas = Vec::new();
    let mut k = kmin.clone();
    'outer: loop {
        let cell = lattice.scaled_cell(&k, eta);
        let inside = cell.vertices().iter().all(|x| {
            (0..d).all(|i| x[i] >= domain.lo[i] - tol(domain.lo[i]) && x[i] <= domain.hi[i] + tol(domain.hi[i]))
        });
        if inside {
            gammas.push(k.clone());
        }
        // Odometer increment, last axis fastest.
        let mut axis = d;
        loop {
            if axis == 0 {
                break 'outer;
            }
            axis -= 1;
            if k[axis] < kmax[axis] {
                k[axis] += 1;
                for j in axis + 1..d {
                    k[j] = kmin[j];
                }
                break;
            }
        }
    }
    Ok(CellIndexSet { eta, gammas })
}

fn identity<T: Real>(d: usize, s: T) -> Vec<Vec<T>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { s } else { T::zero() }).collect())
        .collect()
}

/// Determinant of the matrix whose rows (or columns) are `rows`.
pub(crate) fn det<T: Real>(rows: &[Vec<T>]) -> T {
    let d = rows.len();
    let mut a: Vec<Vec<T>> = rows.to_vec();
    let mut det = T::one();
    for c in 0..d {
        let p = (c..d)
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
            .unwrap();
        if a[p][c] == T::zero() {
            return T::zero();
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..d {
            let f = a[r][c] / a[c][c];
            for k in c..d {
                let v = a[c][k];
                a[r][k] -= f * v;
            }
        }
    }
    det
}

/// For basis vectors `rows`, returns `t` with `k_i = Σ_j t[j][i] y[j]` solving `Σ_i k_i rows[i] = y`.
fn invert<T: Real>(rows: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let d = rows.len();
    let mut m: Vec<Vec<T>> = (0..d).map(|j| (0..d).map(|i| rows[i][j]).collect()).collect();
    let mut inv: Vec<Vec<T>> = identity(d, T::one());
    for c in 0..d {
        let p = (c..d)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        if m[p][c] == T::zero() {
            return Err(Error::InvalidArgument("singular lattice basis".into()));
        }
        m.swap(p, c);
        inv.swap(p, c);
        let piv = m[c][c];
        for k in 0..d {
            m[c][k] /= piv;
            inv[c][k] /= piv;
        }
        for r in 0..d {
            if r != c {
                let f = m[r][c];
                for k in 0..d {
                    let (mv, iv) = (m[c][k], inv[c][k]);
                    m[r][k] -= f * mv;
                    inv[r][k] -= f * iv;
                }
            }
        }
    }
    Ok((0..d).map(|j| (0..d).map(|i| inv[i][j]).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BoxDomain<f64> {
        BoxDomain::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn quarter_cells_tile_unit_interval() {
        let s = cells_inside(&Lattice::integer(1), 0.25, &unit()).unwrap();
        assert_eq!(s.gammas, vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn overhanging_cell_excluded() {
        let s = cells_inside(&Lattice::integer(1), 0.3, &unit()).unwrap();
        assert_eq!(s.gammas, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn four_cells_in_unit_square() {
        let dom = BoxDomain::unit(2);
        let s = cells_inside(&Lattice::<f64>::integer(2), 0.5, &dom).unwrap();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn oversized_eta_gives_empty_set() {
        let s = cells_inside(&Lattice::integer(1), 1.5, &unit()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn odd_lattice_cells() {
        // Cells η(2k−1, 2k+1) inside (0,1) with η = 0.1: k = 1..4.
        let s = cells_inside(&Lattice::odd(1), 0.1, &unit()).unwrap();
        assert_eq!(s.gammas, vec![vec![1], vec![2], vec![3], vec![4]]);
    }

    #[test]
    fn skewed_lattice_cells_stay_inside() {
        let basis = vec![vec![1.0, 0.0], vec![0.5, 1.0]];
        let cell = Cell {
            origin: vec![0.0, 0.0],
            edges: basis.clone(),
        };
        let lat = Lattice::new(basis, vec![0.0, 0.0], cell).unwrap();
        let dom = BoxDomain::unit(2);
        let s = cells_inside(&lat, 0.1, &dom).unwrap();
        assert!(!s.is_empty());
        for c in s.cells(&lat) {
            for v in c.vertices() {
                assert!(v.iter().all(|x| *x >= -1e-12 && *x <= 1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn degenerate_basis_rejected() {
        let basis = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let cell = Cell {
            origin: vec![0.0, 0.0],
            edges: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert!(Lattice::new(basis, vec![0.0, 0.0], cell).is_err());
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let lat = Lattice::integer(1);
        let s = cells_inside(&lat, 0.5, &unit()).unwrap();
        let means = vec![CMat::identity(1); s.len()];
        let mut buf = Vec::new();
        s.write_csv(&lat, &means, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("gamma_0,corner_0,mean_re_00,mean_im_00"));
    }
}
