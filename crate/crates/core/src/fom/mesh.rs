use crate::error::{precondition, Result};

/// Uniform or graded 1D finite-volume mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh1d {
    cell_measures: Vec<f64>,
    periodic: bool,
}

impl Mesh1d {
    /// `n_cells` equal cells covering `[0, length]`.
    pub fn uniform(n_cells: usize, length: f64, periodic: bool) -> Self {
        assert!(n_cells >= 2, "mesh needs at least two cells");
        assert!(length > 0.0);
        Self {
            cell_measures: vec![length / n_cells as f64; n_cells],
            periodic,
        }
    }

    pub fn from_measures(cell_measures: Vec<f64>, periodic: bool) -> Result<Self> {
        precondition(cell_measures.len() >= 2, || "mesh needs at least two cells")?;
        precondition(cell_measures.iter().all(|&m| m > 0.0 && m.is_finite()), || {
            "cell measures must be positive"
        })?;
        Ok(Self {
            cell_measures,
            periodic,
        })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.cell_measures.len()
    }

    #[inline]
    pub fn cell_measures(&self) -> &[f64] {
        &self.cell_measures
    }

    #[inline]
    pub fn measure(&self, cell: usize) -> f64 {
        self.cell_measures[cell]
    }

    #[inline]
    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// The two end cells `{0, M−1}`.
    pub fn boundary_cells(&self) -> [usize; 2] {
        [0, self.n_cells() - 1]
    }

    /// Cell-centre coordinates, starting at `x = 0`.
    pub fn centers(&self) -> Vec<f64> {
        let mut x = 0.0;
        self.cell_measures
            .iter()
            .map(|&h| {
                let c = x + 0.5 * h;
                x += h;
                c
            })
            .collect()
    }

    pub fn length(&self) -> f64 {
        self.cell_measures.iter().sum()
    }

    /// Left and right neighbours; `None` marks a physical boundary.
    #[inline]
    pub fn neighbors(&self, cell: usize) -> (Option<usize>, Option<usize>) {
        let m = self.n_cells();
        let left = if cell > 0 {
            Some(cell - 1)
        } else if self.periodic {
            Some(m - 1)
        } else {
            None
        };
        let right = if cell + 1 < m {
            Some(cell + 1)
        } else if self.periodic {
            Some(0)
        } else {
            None
        };
        (left, right)
    }
}

/// Closed residual stencil of a set of requested cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stencil {
    pub requested: Vec<usize>,
    /// Sorted, deduplicated union of the requested cells and their neighbours.
    pub cells: Vec<usize>,
}

/// Union of the width-one stencils of `cells`.
pub fn stencil_of(mesh: &Mesh1d, cells: &[usize]) -> Result<Stencil> {
    let m = mesh.n_cells();
    let mut out = Vec::with_capacity(3 * cells.len());
    for &c in cells {
        precondition(c < m, || format!("cell {c} outside mesh of {m} cells"))?;
        let (l, r) = mesh.neighbors(c);
        out.extend(l);
        out.push(c);
        out.extend(r);
    }
    out.sort_unstable();
    out.dedup();
    Ok(Stencil {
        requested: cells.to_vec(),
        cells: out,
    })
}
