//! Within-block edge permutation.
//!
//! Shuffling edge weights inside each SBM block keeps the block structure
//! (and so the marginal distribution of the graph) while destroying any
//! edgewise dependence on a second graph. The output is expressed in the
//! vertex order obtained by sorting on the assignment; the companion graph
//! must be sorted the same way before the two are compared.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::graph::{sort_vertices, AdjacencyMatrix, CommunityAssignment};

/// Sorted graph plus block boundaries, reusable across many permutations.
#[derive(Debug, Clone)]
pub struct BlockPermuter {
    sorted: AdjacencyMatrix,
    assignment: CommunityAssignment,
    /// `blocks[b]` is the half-open vertex range of block `b` after sorting.
    blocks: Vec<std::ops::Range<usize>>,
}

impl BlockPermuter {
    pub fn new(x: &AdjacencyMatrix, z: &CommunityAssignment) -> Result<Self> {
        let (sorted, assignment) = sort_vertices(x, z)?;
        let mut blocks = Vec::with_capacity(assignment.k());
        let mut start = 0;
        for size in assignment.block_sizes() {
            blocks.push(start..start + size);
            start += size;
        }
        Ok(Self {
            sorted,
            assignment,
            blocks,
        })
    }

    /// The input graph in sorted vertex order.
    pub fn sorted(&self) -> &AdjacencyMatrix {
        &self.sorted
    }

    pub fn sorted_assignment(&self) -> &CommunityAssignment {
        &self.assignment
    }

    pub fn permute<R: Rng + ?Sized>(&self, rng: &mut R) -> AdjacencyMatrix {
        let src = self.sorted.weights();
        let n = src.nrows();
        let mut out = DMatrix::zeros(n, n);
        let mut buf = Vec::new();
        for (a, ra) in self.blocks.iter().enumerate() {
            for rb in &self.blocks[a..] {
                buf.clear();
                let diagonal = ra == rb;
                for i in ra.clone() {
                    let cols = if diagonal { i + 1..rb.end } else { rb.clone() };
                    for j in cols {
                        buf.push(src[(i, j)]);
                    }
                }
                if buf.len() >= 2 {
                    buf.shuffle(rng);
                }
                let mut it = buf.iter();
                for i in ra.clone() {
                    let cols = if diagonal { i + 1..rb.end } else { rb.clone() };
                    for j in cols {
                        let v = *it.next().expect("same traversal");
                        out[(i, j)] = v;
                        out[(j, i)] = v;
                    }
                }
            }
        }
        AdjacencyMatrix::from_raw_symmetric(out)
    }
}

/// Sorts `x` by `z` and permutes entries within every block of the upper
/// triangle, mirroring the result into a symmetric matrix.
pub fn block_permute<R: Rng + ?Sized>(
    x: &AdjacencyMatrix,
    z: &CommunityAssignment,
    rng: &mut R,
) -> Result<AdjacencyMatrix> {
    Ok(BlockPermuter::new(x, z)?.permute(rng))
}
