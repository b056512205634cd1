use crate::error::{precondition, Result};
use crate::fom::{Mesh1d, SubmeshIndex};

/// Magic points `S_rh`: forced boundary cells plus the cells picked by a selection rule,
/// in selection order.
#[derive(Clone, Debug, PartialEq)]
pub struct MagicPointSet {
    forced: Vec<usize>,
    selected: Vec<usize>,
    /// Score of each selected cell at the moment it was picked.
    scores: Vec<f64>,
    n_cells: usize,
}

impl MagicPointSet {
    pub fn new(forced: Vec<usize>, selected: Vec<usize>, scores: Vec<f64>, n_cells: usize) -> Result<Self> {
        precondition(selected.len() == scores.len(), || "one score per selected cell expected")?;
        let mut seen = vec![false; n_cells];
        for &c in forced.iter().chain(&selected) {
            precondition(c < n_cells, || format!("magic cell {c} outside mesh of {n_cells} cells"))?;
            precondition(!seen[c], || format!("magic cell {c} listed twice"))?;
            seen[c] = true;
        }
        Ok(Self {
            forced,
            selected,
            scores,
            n_cells,
        })
    }

    /// Forced cells first, then the selected cells in selection order.
    pub fn cells(&self) -> Vec<usize> {
        self.forced.iter().chain(&self.selected).copied().collect()
    }

    pub fn forced(&self) -> &[usize] {
        &self.forced
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Number of selected (non-forced) cells, the `r_h` budget.
    pub fn r_h(&self) -> usize {
        self.selected.len()
    }

    pub fn len(&self) -> usize {
        self.forced.len() + self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.forced.contains(&cell) || self.selected.contains(&cell)
    }
}

/// Magic points together with their stencil submesh `Sˢ_rh`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubmeshPlan {
    magic: MagicPointSet,
    index: SubmeshIndex,
    n_fields: usize,
}

impl SubmeshPlan {
    pub fn new(magic: MagicPointSet, mesh: &Mesh1d, n_fields: usize) -> Result<Self> {
        precondition(magic.n_cells() == mesh.n_cells(), || "magic points built for another mesh")?;
        precondition(!magic.is_empty(), || "empty magic point set")?;
        precondition(n_fields > 0, || "at least one field expected")?;
        let index = SubmeshIndex::new(mesh, &magic.cells())?;
        Ok(Self { magic, index, n_fields })
    }

    /// Every cell is a magic point.
    pub fn full(mesh: &Mesh1d, n_fields: usize) -> Result<Self> {
        let m = mesh.n_cells();
        let magic = MagicPointSet::new(Vec::new(), (0..m).collect(), vec![0.0; m], m)?;
        Self::new(magic, mesh, n_fields)
    }

    pub fn magic(&self) -> &MagicPointSet {
        &self.magic
    }

    pub fn index(&self) -> &SubmeshIndex {
        &self.index
    }

    pub fn n_fields(&self) -> usize {
        self.n_fields
    }

    pub fn n_cells(&self) -> usize {
        self.index.n_cells()
    }

    pub fn submesh_cells(&self) -> &[usize] {
        self.index.submesh()
    }

    /// `P_rh` as a list of full-state rows (field-major over the magic cells).
    pub fn magic_dofs(&self) -> Vec<usize> {
        self.index.magic_dofs(self.n_fields)
    }

    /// `Pˢ_rh` as a list of full-state rows (field-major over the submesh).
    pub fn submesh_dofs(&self) -> Vec<usize> {
        self.index.submesh_dofs(self.n_fields)
    }

    /// Number of magic rows `r_h·c` (forced cells included).
    pub fn n_magic_rows(&self) -> usize {
        self.index.n_magic() * self.n_fields
    }

    pub fn n_submesh_rows(&self) -> usize {
        self.index.n_submesh() * self.n_fields
    }
}
