//! Random region generators used by the property checkers.

use crate::grid::{CellSet, GridSpace, Mode, Region, Role};
use crate::rng::Rng;
use rand::seq::SliceRandom;
use rand::Rng as _;

pub fn random_cell(space: &GridSpace, rng: &mut Rng) -> usize {
    let cells: Vec<usize> = space.admissible().iter().collect();
    cells[rng.gen_range(0..cells.len())]
}

fn random_cell_in(cells: &CellSet, rng: &mut Rng) -> Option<usize> {
    let n = cells.count();
    if n == 0 {
        return None;
    }
    cells.iter().nth(rng.gen_range(0..n))
}

/// Connected region (in the role's adjacency) grown at random inside `within`.
pub fn blob_within(space: &GridSpace, rng: &mut Rng, within: &CellSet, size: usize, role: Role) -> Option<Region> {
    let within = &within.intersection(&space.usable(role));
    let start = random_cell_in(within, rng)?;
    let mut cells = CellSet::new(space.len());
    cells.insert(start);
    let mut frontier = vec![start];
    let mut count = 1;
    let conn = role.connectivity();
    while count < size && !frontier.is_empty() {
        let k = rng.gen_range(0..frontier.len());
        let c = frontier[k];
        let mut options: Vec<usize> = space
            .neighbours(c, conn)
            .filter(|&n| within.contains(n) && !cells.contains(n))
            .collect();
        if options.is_empty() {
            frontier.swap_remove(k);
            continue;
        }
        options.shuffle(rng);
        cells.insert(options[0]);
        frontier.push(options[0]);
        count += 1;
    }
    Some(space.region_from_set(cells, role).expect("blob stays admissible"))
}

pub fn blob(space: &GridSpace, rng: &mut Rng, size: usize, role: Role) -> Region {
    blob_within(space, rng, space.admissible(), size, role).expect("grid has admissible cells")
}

/// Add the holes of a connected region so that it becomes solid. In compact
/// mode the complement component meeting `outside` (or the largest one) is
/// kept; in marked-infinity mode every precompact component is filled.
pub fn fill_holes(space: &GridSpace, r: &Region, outside: Option<&CellSet>) -> Region {
    let holes = space.complement_components(r);
    let mut cells = r.cells().clone();
    match space.mode() {
        Mode::MarkedInfinity => {
            for h in &holes {
                if space.is_precompact(h).unwrap_or(false) {
                    cells.union_with(h.cells());
                }
            }
        }
        _ => {
            let keep = outside
                .and_then(|o| holes.iter().position(|h| h.cells().intersects(o)))
                .or_else(|| {
                    holes
                        .iter()
                        .enumerate()
                        .max_by_key(|(i, h)| (h.len(), usize::MAX - i))
                        .map(|(i, _)| i)
                });
            for (i, h) in holes.iter().enumerate() {
                if Some(i) != keep {
                    cells.union_with(h.cells());
                }
            }
        }
    }
    space.region_from_set(cells, r.role()).expect("hull stays admissible")
}

/// A random solid region of roughly `size` cells inside the solid container
/// `within` (the whole space when `None`).
pub fn solid_within(space: &GridSpace, rng: &mut Rng, within: Option<&Region>, size: usize, role: Role) -> Option<Region> {
    let cells = within.map_or_else(|| space.admissible().clone(), |w| w.cells().clone());
    let outside = space.admissible().difference(&cells);
    for _ in 0..8 {
        let b = blob_within(space, rng, &cells, size.max(1), role)?;
        let hull = fill_holes(space, &b, (!outside.is_empty()).then_some(&outside));
        if hull.cells().is_subset(&cells) && space.is_solid(&hull).unwrap_or(false) {
            return Some(hull);
        }
    }
    None
}

pub fn solid(space: &GridSpace, rng: &mut Rng, size: usize, role: Role) -> Region {
    loop {
        if let Some(r) = solid_within(space, rng, None, size, role) {
            return r;
        }
    }
}

/// Union of a few random blobs; generally not solid and not connected.
pub fn scatter(space: &GridSpace, rng: &mut Rng, pieces: usize, size: usize, role: Role) -> Region {
    let mut r = space.empty(role);
    for _ in 0..pieces.max(1) {
        let s = rng.gen_range(1..=size.max(1));
        let b = blob(space, rng, s, role);
        r = r.union(&b);
    }
    r
}

/// Up to `count` pairwise face-disjoint compact-role solid pieces inside `container`.
pub fn disjoint_solids_within(space: &GridSpace, rng: &mut Rng, container: &Region, count: usize, size: usize) -> Vec<Region> {
    let mut pieces: Vec<Region> = Vec::new();
    let mut free = container.cells().clone();
    for _ in 0..count * 3 {
        if pieces.len() == count {
            break;
        }
        let within = space.region_from_set(free.clone(), Role::Compact).ok();
        let Some(within) = within else { break };
        if within.is_empty() {
            break;
        }
        let s = rng.gen_range(1..=size.max(1));
        let Some(b) = blob_within(space, rng, within.cells(), s, Role::Compact) else { break };
        let outside = space.admissible().difference(&free);
        let hull = fill_holes(space, &b, (!outside.is_empty()).then_some(&outside));
        if !hull.cells().is_subset(&free) || !space.is_solid(&hull).unwrap_or(false) {
            continue;
        }
        // keep later pieces away from the closed cells of this one
        let halo = space.dilate(&hull, crate::grid::Connectivity::Eight);
        free.subtract(halo.cells());
        pieces.push(hull);
    }
    pieces
}
