use crate::error::{Error, Result};
use crate::mesh::PeriodicMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dof {
    Free(usize),
    Fixed(f64),
}

/// Maps raw degrees of freedom (`node * components + c`, followed by `extra` global
/// unknowns) onto a contiguous free range. Periodic slaves alias the index of their
/// master; fixed dofs carry a prescribed value.
#[derive(Clone, Debug)]
pub struct DofMap {
    n_nodes: usize,
    components: usize,
    n_extra: usize,
    dofs: Vec<Dof>,
    n_free: usize,
    master: Vec<usize>,
}

impl DofMap {
    pub fn builder(n_nodes: usize, components: usize) -> DofMapBuilder {
        DofMapBuilder {
            n_nodes,
            components,
            n_extra: 0,
            parent: (0..n_nodes).collect(),
            fixed: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_raw(&self) -> usize {
        self.dofs.len()
    }

    pub fn n_fixed(&self) -> usize {
        self.dofs.iter().filter(|d| matches!(d, Dof::Fixed(_))).count()
    }

    #[inline]
    pub fn raw(&self, node: usize, component: usize) -> usize {
        node * self.components + component
    }

    #[inline]
    pub fn extra(&self, e: usize) -> usize {
        debug_assert!(e < self.n_extra);
        self.n_nodes * self.components + e
    }

    #[inline]
    pub fn dof(&self, raw: usize) -> Dof {
        self.dofs[raw]
    }

    /// Periodic representative of a node.
    pub fn master_node(&self, node: usize) -> usize {
        self.master[node]
    }

    /// Raw values for every dof from the free unknowns.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        self.dofs
            .iter()
            .map(|d| match *d {
                Dof::Free(i) => free[i],
                Dof::Fixed(v) => v,
            })
            .collect()
    }

    /// Free unknowns read off a raw vector (first occurrence of each free index wins).
    pub fn restrict(&self, raw: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::NAN; self.n_free];
        for (r, d) in self.dofs.iter().enumerate().rev() {
            if let Dof::Free(i) = *d {
                out[i] = raw[r];
            }
        }
        out
    }

    /// Free index vector with zero in place of the fixed values.
    pub fn zero_free(&self) -> Vec<f64> {
        vec![0.0; self.n_free]
    }
}

pub struct DofMapBuilder {
    n_nodes: usize,
    components: usize,
    n_extra: usize,
    parent: Vec<usize>,
    fixed: Vec<(usize, f64)>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl DofMapBuilder {
    pub fn extra(mut self, n: usize) -> Self {
        self.n_extra = n;
        self
    }

    /// Identifies every component of each paired node.
    pub fn periodic(mut self, map: &PeriodicMap) -> Self {
        for (a, b) in map.all_pairs() {
            let ra = find(&mut self.parent, a);
            let rb = find(&mut self.parent, b);
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                self.parent[hi] = lo;
            }
        }
        self
    }

    pub fn fix(mut self, node: usize, component: usize, value: f64) -> Self {
        self.fixed.push((node * self.components + component, value));
        self
    }

    pub fn fix_nodes(mut self, nodes: &[usize], component: usize, value: f64) -> Self {
        for &n in nodes {
            self.fixed.push((n * self.components + component, value));
        }
        self
    }

    pub fn build(mut self) -> Result<DofMap> {
        let nc = self.components;
        let n_node_dofs = self.n_nodes * nc;
        let n_raw = n_node_dofs + self.n_extra;
        let master: Vec<usize> = (0..self.n_nodes).map(|i| find(&mut self.parent, i)).collect();
        let canonical = |raw: usize| if raw < n_node_dofs { master[raw / nc] * nc + raw % nc } else { raw };

        let mut fixed_val: Vec<Option<f64>> = vec![None; n_raw];
        for &(raw, v) in &self.fixed {
            if raw >= n_raw {
                return Err(Error::Argument(format!("fixed dof {raw} out of range")));
            }
            let c = canonical(raw);
            match fixed_val[c] {
                Some(old) if old != v => {
                    return Err(Error::Argument(format!(
                        "conflicting prescribed values {old} and {v} on a periodic dof class"
                    )))
                }
                _ => fixed_val[c] = Some(v),
            }
        }

        let mut index = vec![usize::MAX; n_raw];
        let mut n_free = 0;
        let mut dofs = Vec::with_capacity(n_raw);
        for raw in 0..n_raw {
            let c = canonical(raw);
            let d = match fixed_val[c] {
                Some(v) => Dof::Fixed(v),
                None => {
                    if index[c] == usize::MAX {
                        index[c] = n_free;
                        n_free += 1;
                    }
                    Dof::Free(index[c])
                }
            };
            dofs.push(d);
        }
        Ok(DofMap {
            n_nodes: self.n_nodes,
            components: nc,
            n_extra: self.n_extra,
            dofs,
            n_free,
            master,
        })
    }
}
