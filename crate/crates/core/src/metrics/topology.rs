//! Connected components and topology-preserving 3-D thinning.

use std::collections::VecDeque;
use std::sync::OnceLock;

use crate::volume::Mask3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Six,
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> &'static [[isize; 3]] {
        static SIX: [[isize; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];
        static ALL: OnceLock<Vec<[isize; 3]>> = OnceLock::new();
        match self {
            Connectivity::Six => &SIX,
            Connectivity::TwentySix => ALL.get_or_init(|| {
                let mut v = Vec::with_capacity(26);
                for dz in -1..=1 {
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            if (dx, dy, dz) != (0, 0, 0) {
                                v.push([dx, dy, dz]);
                            }
                        }
                    }
                }
                v
            }),
        }
    }
}

/// Component labels (0 = background, components numbered from 1 in scan order)
/// and the number of components.
pub fn label_components(m: &Mask3, conn: Connectivity) -> (Vec<u32>, usize) {
    let grid = *m.grid();
    let [nx, ny, nz] = grid.dims.map(|d| d as isize);
    let mut labels = vec![0u32; grid.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if !m.bits()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let [i, j, k] = grid.coords(idx).map(|c| c as isize);
            for d in conn.offsets() {
                let (a, b, c) = (i + d[0], j + d[1], k + d[2]);
                if a < 0 || b < 0 || c < 0 || a >= nx || b >= ny || c >= nz {
                    continue;
                }
                let n = grid.index(a as usize, b as usize, c as usize);
                if m.bits()[n] && labels[n] == 0 {
                    labels[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    (labels, next as usize)
}

pub fn count_components(m: &Mask3, conn: Connectivity) -> usize {
    label_components(m, conn).1
}

/// 6-connected components of the background, with everything outside the
/// grid counted as one extra background region joined to the border.
pub fn count_background_components(m: &Mask3) -> usize {
    let g = m.grid();
    let [nx, ny, nz] = g.dims;
    let padded = crate::volume::Grid::new([nx + 2, ny + 2, nz + 2], g.spacing_mm, [0.0; 3]).expect("padded grid");
    let bg = Mask3::from_index_fn(padded, |[i, j, k]| {
        i == 0 || j == 0 || k == 0 || i > nx || j > ny || k > nz || !m.get(i - 1, j - 1, k - 1)
    });
    count_components(&bg, Connectivity::Six)
}

/// Index into a 3×3×3 neighbourhood, `(dx+1) + 3(dy+1) + 9(dz+1)`.
const fn nb(dx: isize, dy: isize, dz: isize) -> usize {
    ((dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)) as usize
}

const CENTER: usize = 13;

struct NeighbourTables {
    adj26: Vec<Vec<usize>>,
    adj6: Vec<Vec<usize>>,
    in18: [bool; 27],
    face: [bool; 27],
}

fn tables() -> &'static NeighbourTables {
    static T: OnceLock<NeighbourTables> = OnceLock::new();
    T.get_or_init(|| {
        let pos = |p: usize| [(p % 3) as isize - 1, ((p / 3) % 3) as isize - 1, (p / 9) as isize - 1];
        let mut adj26 = vec![Vec::new(); 27];
        let mut adj6 = vec![Vec::new(); 27];
        let mut in18 = [false; 27];
        let mut face = [false; 27];
        for p in 0..27 {
            let a = pos(p);
            let l1: isize = a.iter().map(|c| c.abs()).sum();
            in18[p] = p != CENTER && l1 <= 2;
            face[p] = l1 == 1;
            for q in 0..27 {
                if p == q || q == CENTER || p == CENTER {
                    continue;
                }
                let b = pos(q);
                let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
                if d.iter().all(|c| c.abs() <= 1) {
                    adj26[p].push(q);
                    if d.iter().map(|c| c.abs()).sum::<isize>() == 1 {
                        adj6[p].push(q);
                    }
                }
            }
        }
        NeighbourTables { adj26, adj6, in18, face }
    })
}

/// Number of 26-components of foreground in the punctured 26-neighbourhood.
fn t26(n: &[bool; 27]) -> usize {
    let t = tables();
    let mut seen = [false; 27];
    let mut count = 0;
    let mut stack = Vec::with_capacity(26);
    for s in 0..27 {
        if s == CENTER || !n[s] || seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(p) = stack.pop() {
            for &q in &t.adj26[p] {
                if n[q] && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    count
}

/// Number of 6-components of background in the punctured 18-neighbourhood
/// that touch a face neighbour of the centre.
fn t6_background(n: &[bool; 27]) -> usize {
    let t = tables();
    let mut seen = [false; 27];
    let mut count = 0;
    let mut stack = Vec::with_capacity(18);
    for s in 0..27 {
        if !t.face[s] || n[s] || seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(p) = stack.pop() {
            for &q in &t.adj6[p] {
                if t.in18[q] && !n[q] && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    count
}

/// A foreground point whose deletion preserves topology under (26, 6) adjacency.
pub fn is_simple(n: &[bool; 27]) -> bool {
    t26(n) == 1 && t6_background(n) == 1
}

fn neighbours(bits: &[bool], dims: [usize; 3], idx: usize) -> [bool; 27] {
    let [nx, ny, _] = dims;
    let mut out = [false; 27];
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let off = dx + dy * nx as isize + dz * (nx * ny) as isize;
                out[nb(dx, dy, dz)] = bits[(idx as isize + off) as usize];
            }
        }
    }
    out
}

/// Simple and not the end of a curve.
fn deletable(bits: &[bool], dims: [usize; 3], idx: usize) -> bool {
    let n = neighbours(bits, dims, idx);
    let degree = n.iter().filter(|&&b| b).count() - 1;
    degree != 1 && is_simple(&n)
}

/// Thins a mask to a curve skeleton by directional border peeling.
///
/// Six sub-iterations per pass, one per face direction. Each collects the
/// border points open in that direction that are simple and not curve
/// endpoints, then deletes them one at a time, re-testing each against the
/// current state. Deletion order groups candidates into the eight parity
/// subfields (members of one subfield are never 26-adjacent) and then scan
/// order; a pure scan order unzips even-width strips from one end.
/// Passes repeat until nothing changes.
pub fn skeletonize(m: &Mask3) -> Mask3 {
    let grid = *m.grid();
    let [nx, ny, nz] = grid.dims;
    // one voxel of background padding keeps every neighbourhood in bounds
    let pd = [nx + 2, ny + 2, nz + 2];
    let pidx = |i: usize, j: usize, k: usize| i + pd[0] * (j + pd[1] * k);
    let mut bits = vec![false; pd[0] * pd[1] * pd[2]];
    for idx in 0..grid.len() {
        if m.bits()[idx] {
            let [i, j, k] = grid.coords(idx);
            bits[pidx(i + 1, j + 1, k + 1)] = true;
        }
    }
    let directions: [isize; 6] = {
        let sx = 1isize;
        let sy = pd[0] as isize;
        let sz = (pd[0] * pd[1]) as isize;
        [sz, -sz, sy, -sy, sx, -sx]
    };
    let mut fg: Vec<usize> = (0..bits.len()).filter(|&i| bits[i]).collect();
    // subfield parity measured from the bounding-box corner, so the result
    // commutes with translation
    let mut lo = [usize::MAX; 3];
    for &idx in &fg {
        let c = [idx % pd[0], (idx / pd[0]) % pd[1], idx / (pd[0] * pd[1])];
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
        }
    }
    let parity = |idx: usize| {
        let c = [idx % pd[0], (idx / pd[0]) % pd[1], idx / (pd[0] * pd[1])];
        ((c[0] - lo[0]) & 1) | ((c[1] - lo[1]) & 1) << 1 | ((c[2] - lo[2]) & 1) << 2
    };
    let mut candidates = Vec::new();
    loop {
        let mut changed = false;
        for &dir in &directions {
            candidates.clear();
            for &idx in &fg {
                if !bits[idx] || bits[(idx as isize + dir) as usize] {
                    continue;
                }
                if deletable(&bits, pd, idx) {
                    candidates.push(idx);
                }
            }
            candidates.sort_by_key(|&idx| (parity(idx), idx));
            for &idx in &candidates {
                if deletable(&bits, pd, idx) {
                    bits[idx] = false;
                    changed = true;
                }
            }
        }
        fg.retain(|&i| bits[i]);
        if !changed {
            break;
        }
    }
    let mut out = Mask3::empty(grid);
    for &idx in &fg {
        let (i, j, k) = (idx % pd[0], (idx / pd[0]) % pd[1], idx / (pd[0] * pd[1]));
        out.set(i - 1, j - 1, k - 1, true);
    }
    out
}
