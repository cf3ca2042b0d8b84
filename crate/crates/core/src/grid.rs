//! Finite cell grids standing in for compact and noncompact planar spaces.
//!
//! A region is a set of cells plus a role. A compact-role region denotes the
//! union of its closed cells; an open-role region denotes the relative interior
//! of that union. Connectivity follows from that reading: closed cells that
//! share a corner touch, so compact-role regions are 8-connected, while open
//! interiors only join across a shared edge, so open-role regions are
//! 4-connected. The complement of a region carries the flipped role and hence
//! the dual adjacency.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct CellSet {
    words: Vec<u64>,
    len: usize,
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl CellSet {
    pub fn new(len: usize) -> Self {
        CellSet {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = CellSet::new(len);
        for w in s.words.iter_mut() {
            *w = u64::MAX;
        }
        s.trim();
        s
    }

    pub fn from_indices(len: usize, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut s = CellSet::new(len);
        for c in cells {
            s.insert(c);
        }
        s
    }

    fn trim(&mut self) {
        let extra = self.words.len() * 64 - self.len;
        if extra > 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= u64::MAX >> extra;
            }
        }
    }

    /// Capacity of the universe, not the number of members.
    pub fn universe(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "cell {i} outside universe {}", self.len);
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        if i < self.len {
            self.words[i >> 6] &= !(1 << (i & 63));
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let t = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(k * 64 + t)
            })
        })
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn union_with(&mut self, other: &CellSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn intersect_with(&mut self, other: &CellSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= *b;
        }
    }

    pub fn subtract(&mut self, other: &CellSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !*b;
        }
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    pub fn difference(&self, other: &CellSet) -> CellSet {
        let mut s = self.clone();
        s.subtract(other);
        s
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn intersects(&self, other: &CellSet) -> bool {
        !self.is_disjoint(other)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Compact,
    Open,
}

impl Role {
    pub fn flip(self) -> Role {
        match self {
            Role::Compact => Role::Open,
            Role::Open => Role::Compact,
        }
    }

    pub fn connectivity(self) -> Connectivity {
        match self {
            Role::Compact => Connectivity::Eight,
            Role::Open => Connectivity::Four,
        }
    }

    pub fn tag(self) -> char {
        match self {
            Role::Compact => 'K',
            Role::Open => 'O',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn dual(self) -> Connectivity {
        match self {
            Connectivity::Four => Connectivity::Eight,
            Connectivity::Eight => Connectivity::Four,
        }
    }
}

/// Which adjacency to use when splitting a region into components.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adjacency {
    /// The region's own adjacency (8 for compact role, 4 for open role).
    Region,
    /// The adjacency its complement would use.
    Complement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Compact,
    MarkedInfinity,
    /// Isolated points with no adjacency; used for finite sample spaces.
    Discrete,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Region {
    cells: CellSet,
    role: Role,
}

impl Region {
    pub fn cells(&self) -> &CellSet {
        &self.cells
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.count()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cells.contains(cell)
    }

    pub fn with_role(&self, role: Role) -> Region {
        Region {
            cells: self.cells.clone(),
            role,
        }
    }

    /// Cell-wise union; the result takes `self`'s role.
    pub fn union(&self, other: &Region) -> Region {
        Region {
            cells: self.cells.union(&other.cells),
            role: self.role,
        }
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region {
            cells: self.cells.intersection(&other.cells),
            role: self.role,
        }
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region {
            cells: self.cells.difference(&other.cells),
            role: self.role,
        }
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.cells.is_subset(&other.cells)
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.cells.is_disjoint(&other.cells)
    }

    /// Role tag followed by alternating run lengths over the row-major cell
    /// bitset, starting with a run of absent cells: `K:5.3.2` marks cells 5..8.
    pub fn to_rle(&self) -> String {
        let mut runs = Vec::new();
        let mut current = false;
        let mut run = 0usize;
        for i in 0..self.cells.universe() {
            let bit = self.cells.contains(i);
            if bit != current {
                runs.push(run);
                run = 0;
                current = bit;
            }
            run += 1;
        }
        if current {
            runs.push(run);
        }
        let body: Vec<String> = runs.iter().map(|r| r.to_string()).collect();
        format!("{}:{}", self.role.tag(), body.join("."))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpace {
    width: usize,
    height: usize,
    mode: Mode,
    cell_size: f64,
    origin: [f64; 2],
    admissible: CellSet,
    frame: CellSet,
}

const N4: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const N8: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

impl GridSpace {
    /// A rectangular planar grid. In marked-infinity mode the outer ring is
    /// excluded from every region.
    pub fn new(width: usize, height: usize, mode: Mode) -> Result<Self> {
        if mode != Mode::Discrete && (width < 3 || height < 3) {
            return Err(Error::InvalidGrid(format!(
                "planar grids need width, height >= 3, got {width}x{height}"
            )));
        }
        if mode == Mode::MarkedInfinity && (width < 3 || height < 3) {
            return Err(Error::InvalidGrid("no interior cells".into()));
        }
        Self::build(width, height, mode, None)
    }

    /// A single row of cells modelling an interval: `[c, d]` in compact mode,
    /// the real line in marked-infinity mode (end cells form the ring).
    pub fn line(cells: usize, mode: Mode) -> Result<Self> {
        let min = if mode == Mode::MarkedInfinity { 5 } else { 3 };
        if cells < min || mode == Mode::Discrete {
            return Err(Error::InvalidGrid(format!(
                "a line needs at least {min} cells and a topological mode"
            )));
        }
        Self::build(cells, 1, mode, None)
    }

    /// `n` isolated points.
    pub fn discrete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("empty sample space".into()));
        }
        Self::build(n, 1, Mode::Discrete, None)
    }

    /// Compact grid with an activity mask (row-major, `true` = part of X).
    pub fn with_mask(width: usize, height: usize, mask: &[bool]) -> Result<Self> {
        if width < 3 || height < 3 || mask.len() != width * height {
            return Err(Error::InvalidGrid("mask shape mismatch".into()));
        }
        Self::build(width, height, Mode::Compact, Some(mask))
    }

    /// Compact digital disk: cells whose centre lies within `radius` cells of
    /// the centre cell.
    pub fn digital_disk(radius: f64) -> Result<Self> {
        if !(radius >= 1.5) {
            return Err(Error::InvalidGrid("digital disk radius must be >= 1.5".into()));
        }
        let r = radius.floor() as usize;
        let side = 2 * r + 3;
        let c = (side / 2) as f64;
        let mask: Vec<bool> = (0..side * side)
            .map(|i| {
                let (x, y) = ((i % side) as f64, (i / side) as f64);
                ((x - c).powi(2) + (y - c).powi(2)).sqrt() <= radius + 1e-9
            })
            .collect();
        Self::with_mask(side, side, &mask)
    }

    /// Grid covering the rectangle `[x0,x1]×[y0,y1]` with square cells.
    pub fn over_rect(x: [f64; 2], y: [f64; 2], width: usize, height: usize, mode: Mode) -> Result<Self> {
        let cs = (x[1] - x[0]) / width as f64;
        let cs_y = (y[1] - y[0]) / height as f64;
        if !(cs > 0.0) || (cs - cs_y).abs() > 1e-12 * cs.max(1.0) {
            return Err(Error::InvalidGrid("rectangle must give square cells".into()));
        }
        Ok(Self::new(width, height, mode)?
            .with_cell_size(cs)
            .with_origin([x[0] + cs / 2.0, y[0] + cs / 2.0]))
    }

    pub fn with_cell_size(mut self, cell_size: f64) -> Self {
        assert!(cell_size > 0.0);
        self.cell_size = cell_size;
        self
    }

    pub fn with_origin(mut self, origin: [f64; 2]) -> Self {
        self.origin = origin;
        self
    }

    fn build(width: usize, height: usize, mode: Mode, mask: Option<&[bool]>) -> Result<Self> {
        let n = width * height;
        let mut admissible = CellSet::new(n);
        for i in 0..n {
            let (x, y) = (i % width, i / width);
            let ok = match mode {
                Mode::MarkedInfinity if height == 1 => x > 0 && x + 1 < width,
                Mode::MarkedInfinity => x > 0 && y > 0 && x + 1 < width && y + 1 < height,
                _ => mask.is_none_or(|m| m[i]),
            };
            if ok {
                admissible.insert(i);
            }
        }
        let mut space = GridSpace {
            width,
            height,
            mode,
            cell_size: 1.0,
            origin: [0.0, 0.0],
            admissible,
            frame: CellSet::new(n),
        };
        if space.admissible.is_empty() {
            return Err(Error::InvalidGrid("no admissible cells".into()));
        }
        if mode == Mode::MarkedInfinity {
            let mut frame = CellSet::new(n);
            for i in space.admissible.iter() {
                let (x, y) = space.coords(i);
                let touches = N8.iter().any(|&(dx, dy)| {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if height == 1 && dy != 0 {
                        return false;
                    }
                    nx >= 0
                        && ny >= 0
                        && (nx as usize) < width
                        && (ny as usize) < height
                        && !space.admissible.contains(ny as usize * width + nx as usize)
                });
                if touches {
                    frame.insert(i);
                }
            }
            space.frame = frame;
        }
        if mode != Mode::Discrete {
            let full = space.full(Role::Open);
            if space.components(&full, Adjacency::Region).len() != 1 {
                return Err(Error::InvalidGrid("interior cells are not 4-connected".into()));
            }
            if mask.is_some() && space.has_pinch() {
                return Err(Error::InvalidGrid(
                    "mask has a pinch point (diagonal cells with both shared neighbours missing)".into(),
                ));
            }
        }
        Ok(space)
    }

    fn has_pinch(&self) -> bool {
        for y in 0..self.height.saturating_sub(1) {
            for x in 0..self.width - 1 {
                let a = self.admissible.contains(self.index(x, y));
                let b = self.admissible.contains(self.index(x + 1, y));
                let c = self.admissible.contains(self.index(x, y + 1));
                let d = self.admissible.contains(self.index(x + 1, y + 1));
                if (a && d && !b && !c) || (b && c && !a && !d) {
                    return true;
                }
            }
        }
        false
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Number of cells in the underlying rectangle (admissible or not).
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_line(&self) -> bool {
        self.height == 1 && self.mode != Mode::Discrete
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height && self.admissible.count() == self.len() && self.mode == Mode::Compact
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    pub fn center(&self, i: usize) -> [f64; 2] {
        let (x, y) = self.coords(i);
        [
            self.origin[0] + x as f64 * self.cell_size,
            self.origin[1] + y as f64 * self.cell_size,
        ]
    }

    /// Euclidean distance between cell centres.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.center(a), self.center(b));
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    }

    pub fn admissible(&self) -> &CellSet {
        &self.admissible
    }

    pub fn is_admissible(&self, i: usize) -> bool {
        self.admissible.contains(i)
    }

    /// Admissible cells 8-adjacent to the infinity ring (empty unless marked-infinity).
    pub fn frame(&self) -> &CellSet {
        &self.frame
    }

    pub fn neighbours(&self, i: usize, conn: Connectivity) -> impl Iterator<Item = usize> + '_ {
        let offsets: &[(isize, isize)] = match (self.mode, conn) {
            (Mode::Discrete, _) => &[],
            (_, Connectivity::Four) => &N4,
            (_, Connectivity::Eight) => &N8,
        };
        let (x, y) = self.coords(i);
        offsets.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx < 0 || ny < 0 || nx as usize >= self.width || ny as usize >= self.height {
                return None;
            }
            let j = ny as usize * self.width + nx as usize;
            self.admissible.contains(j).then_some(j)
        })
    }

    pub fn full(&self, role: Role) -> Region {
        Region {
            cells: self.admissible.clone(),
            role,
        }
    }

    pub fn empty(&self, role: Role) -> Region {
        Region {
            cells: CellSet::new(self.len()),
            role,
        }
    }

    pub fn region(&self, cells: impl IntoIterator<Item = usize>, role: Role) -> Result<Region> {
        let mut set = CellSet::new(self.len());
        for c in cells {
            if c >= self.len() || !self.admissible.contains(c) {
                return Err(Error::NotAdmissible(format!("cell {c} is not an admissible cell")));
            }
            set.insert(c);
        }
        Ok(Region { cells: set, role })
    }

    pub fn region_from_set(&self, cells: CellSet, role: Role) -> Result<Region> {
        let r = Region { cells, role };
        self.check(&r)?;
        Ok(r)
    }

    /// Rectangle of cells `[x0, x0+w) × [y0, y0+h)`.
    pub fn block(&self, x0: usize, y0: usize, w: usize, h: usize, role: Role) -> Result<Region> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::NotAdmissible("block leaves the grid".into()));
        }
        let cells = (y0..y0 + h).flat_map(|y| (x0..x0 + w).map(move |x| (x, y)));
        self.region(cells.map(|(x, y)| self.index(x, y)), role)
    }

    /// Admissible cells whose centres lie within `radius` of `centre` (world coordinates).
    pub fn disk(&self, centre: [f64; 2], radius: f64, role: Role) -> Region {
        let mut set = CellSet::new(self.len());
        for i in self.admissible.iter() {
            let p = self.center(i);
            if ((p[0] - centre[0]).powi(2) + (p[1] - centre[1]).powi(2)).sqrt() <= radius {
                set.insert(i);
            }
        }
        Region { cells: set, role }
    }

    pub fn parse_region(&self, rle: &str) -> Result<Region> {
        let (tag, body) = rle
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("region literal {rle:?} lacks a role tag")))?;
        let role = match tag.trim() {
            "K" | "k" | "compact" => Role::Compact,
            "O" | "o" | "open" => Role::Open,
            other => return Err(Error::Parse(format!("unknown role tag {other:?}"))),
        };
        let mut set = CellSet::new(self.len());
        let mut pos = 0usize;
        let mut bit = false;
        for part in body.split('.').filter(|s| !s.trim().is_empty()) {
            let run: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad run length {part:?}")))?;
            if pos + run > self.len() {
                return Err(Error::Parse("run lengths exceed the grid".into()));
            }
            if bit {
                for i in pos..pos + run {
                    set.insert(i);
                }
            }
            pos += run;
            bit = !bit;
        }
        self.region_from_set(set, role)
    }

    pub fn check(&self, r: &Region) -> Result<()> {
        if r.cells.universe() != self.len() {
            return Err(Error::NotAdmissible(format!(
                "region built for {} cells used on a {}-cell grid",
                r.cells.universe(),
                self.len()
            )));
        }
        if !r.cells.is_subset(&self.admissible) {
            return Err(Error::NotAdmissible("region contains excluded cells".into()));
        }
        Ok(())
    }

    /// `check` plus the domain rule for measures: in marked-infinity mode a
    /// compact-role region must be precompact (a closed set reaching the ring
    /// is not compact).
    pub fn check_evaluable(&self, r: &Region) -> Result<()> {
        self.check(r)?;
        if self.mode == Mode::MarkedInfinity && r.role == Role::Compact && r.cells.intersects(&self.frame) {
            return Err(Error::NotAdmissible(format!(
                "compact-role region {} reaches the infinity frame",
                r.to_rle()
            )));
        }
        Ok(())
    }

    /// Cells a region of this role may use: the frame is off limits to
    /// compact-role regions in marked-infinity mode.
    pub fn usable(&self, role: Role) -> CellSet {
        if self.mode == Mode::MarkedInfinity && role == Role::Compact {
            self.admissible.difference(&self.frame)
        } else {
            self.admissible.clone()
        }
    }

    fn flood(&self, cells: &CellSet, conn: Connectivity) -> Vec<CellSet> {
        let mut seen = CellSet::new(self.len());
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in cells.iter() {
            if seen.contains(start) {
                continue;
            }
            let mut comp = CellSet::new(self.len());
            seen.insert(start);
            stack.push(start);
            while let Some(c) = stack.pop() {
                comp.insert(c);
                for n in self.neighbours(c, conn) {
                    if cells.contains(n) && !seen.contains(n) {
                        seen.insert(n);
                        stack.push(n);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Maximal connected pieces of `r`, each keeping `r`'s role.
    pub fn components(&self, r: &Region, adjacency: Adjacency) -> Vec<Region> {
        let conn = match adjacency {
            Adjacency::Region => r.role.connectivity(),
            Adjacency::Complement => r.role.connectivity().dual(),
        };
        self.flood(&r.cells, conn)
            .into_iter()
            .map(|cells| Region { cells, role: r.role })
            .collect()
    }

    pub fn is_connected(&self, r: &Region) -> bool {
        self.components(r, Adjacency::Region).len() == 1
    }

    pub fn complement(&self, r: &Region) -> Region {
        Region {
            cells: self.admissible.difference(&r.cells),
            role: r.role.flip(),
        }
    }

    /// Connected components of the complement (each with the flipped role).
    pub fn complement_components(&self, r: &Region) -> Vec<Region> {
        let c = self.complement(r);
        self.components(&c, Adjacency::Region)
    }

    pub fn is_solid(&self, r: &Region) -> Result<bool> {
        if self.mode == Mode::Discrete {
            return Err(Error::DiscreteSolidness);
        }
        if r.is_empty() {
            return Err(Error::EmptySolidness);
        }
        if !self.is_connected(r) {
            return Ok(false);
        }
        let holes = self.complement_components(r);
        Ok(match self.mode {
            Mode::Compact => holes.len() <= 1,
            _ => holes.iter().all(|h| h.cells.intersects(&self.frame)),
        })
    }

    pub fn is_precompact(&self, r: &Region) -> Result<bool> {
        if self.mode != Mode::MarkedInfinity {
            return Err(Error::AllPrecompact);
        }
        Ok(r.cells.is_disjoint(&self.frame))
    }

    /// Grow by one cell in the given connectivity (admissible cells only).
    pub fn dilate(&self, r: &Region, conn: Connectivity) -> Region {
        let mut cells = r.cells.clone();
        for c in r.cells.iter() {
            for n in self.neighbours(c, conn) {
                cells.insert(n);
            }
        }
        Region { cells, role: r.role }
    }

    /// Keep the cells all of whose admissible neighbours (in the given
    /// connectivity) lie in `r`.
    pub fn erode(&self, r: &Region, conn: Connectivity) -> Region {
        let mut cells = CellSet::new(self.len());
        for c in r.cells.iter() {
            if self.neighbours(c, conn).all(|n| r.cells.contains(n)) {
                cells.insert(c);
            }
        }
        Region { cells, role: r.role }
    }

    /// Length of the face lattice: cells, edges and vertices of the grid.
    pub fn face_len(&self) -> usize {
        (2 * self.width + 1) * (2 * self.height + 1)
    }

    fn incident_cells(&self, i: usize, j: usize, out: &mut Vec<Option<usize>>) {
        out.clear();
        let span = |k: usize| -> (isize, isize) {
            if k % 2 == 1 {
                ((k as isize - 1) / 2, (k as isize - 1) / 2)
            } else {
                (k as isize / 2 - 1, k as isize / 2)
            }
        };
        let (x0, x1) = span(i);
        let (y0, y1) = span(j);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
                    out.push(None);
                } else {
                    out.push(Some(y as usize * self.width + x as usize));
                }
            }
        }
    }

    /// The point set a region denotes, as a set of open faces (cells, edges,
    /// vertices) of the grid complex. Two regions with the same face set are
    /// the same subset of X.
    pub fn faces(&self, r: &Region) -> CellSet {
        let fw = 2 * self.width + 1;
        let mut out = CellSet::new(self.face_len());
        if self.mode == Mode::Discrete {
            for c in r.cells.iter() {
                let (x, y) = self.coords(c);
                out.insert((2 * y + 1) * fw + 2 * x + 1);
            }
            return out;
        }
        let mut inc = Vec::with_capacity(4);
        for j in 0..2 * self.height + 1 {
            for i in 0..fw {
                self.incident_cells(i, j, &mut inc);
                let in_space = match self.mode {
                    Mode::MarkedInfinity => inc.iter().all(|c| c.is_some_and(|c| self.admissible.contains(c))),
                    _ => inc.iter().flatten().any(|&c| self.admissible.contains(c)),
                };
                if !in_space {
                    continue;
                }
                let mut active = inc.iter().flatten().filter(|&&c| self.admissible.contains(c));
                let member = match r.role {
                    Role::Compact => active.any(|&c| r.cells.contains(c)),
                    Role::Open => active.all(|&c| r.cells.contains(c)),
                };
                if member {
                    out.insert(j * fw + i);
                }
            }
        }
        out
    }

    /// True when `a` and `b` are disjoint subsets of X whose union is exactly
    /// the set denoted by `union`.
    pub fn is_disjoint_union(&self, a: &Region, b: &Region, union: &Region) -> bool {
        let (fa, fb) = (self.faces(a), self.faces(b));
        fa.is_disjoint(&fb) && fa.union(&fb) == self.faces(union)
    }

    /// Topological inclusion of the denoted subsets.
    pub fn is_inside(&self, inner: &Region, outer: &Region) -> bool {
        self.faces(inner).is_subset(&self.faces(outer))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize) -> GridSpace {
        GridSpace::new(w, h, Mode::Compact).unwrap()
    }

    #[test]
    fn diagonal_pair_components() {
        let s = grid(4, 4);
        let r = s.region([s.index(1, 1), s.index(2, 2)], Role::Open).unwrap();
        assert_eq!(s.components(&r, Adjacency::Region).len(), 2);
        assert_eq!(s.components(&r, Adjacency::Complement).len(), 1);
        // closed cells touching at a corner form one piece
        let k = r.with_role(Role::Compact);
        assert_eq!(s.components(&k, Adjacency::Region).len(), 1);
    }

    #[test]
    fn single_cell_and_full_grid() {
        let s = grid(5, 5);
        assert_eq!(s.components(&s.full(Role::Compact), Adjacency::Region).len(), 1);
        let one = s.region([7], Role::Compact).unwrap();
        let comps = s.components(&one, Adjacency::Region);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].len(), 1);
        assert!(s.components(&s.empty(Role::Open), Adjacency::Region).is_empty());
    }

    #[test]
    fn solidness_examples() {
        let s = grid(7, 7);
        assert!(s.is_solid(&s.full(Role::Compact)).unwrap());
        let mut ring = s.block(1, 1, 5, 5, Role::Compact).unwrap();
        ring = ring.difference(&s.block(2, 2, 3, 3, Role::Compact).unwrap());
        assert!(!s.is_solid(&ring).unwrap());
        assert_eq!(s.is_solid(&s.empty(Role::Open)), Err(Error::EmptySolidness));

        let m = GridSpace::new(9, 9, Mode::MarkedInfinity).unwrap();
        let b = m.block(3, 3, 3, 3, Role::Compact).unwrap();
        assert!(m.is_solid(&b).unwrap());
    }

    #[test]
    fn complement_examples() {
        let s = grid(9, 9);
        let b = s.block(3, 3, 3, 3, Role::Compact).unwrap();
        let c = s.complement(&b);
        assert_eq!(c.len(), 72);
        assert_eq!(c.role(), Role::Open);
        assert_eq!(s.complement(&c), b);
        let e = s.complement(&s.full(Role::Compact));
        assert!(e.is_empty());
        assert_eq!(e.role(), Role::Open);
    }

    #[test]
    fn precompact_examples() {
        let m = GridSpace::new(10, 10, Mode::MarkedInfinity).unwrap();
        assert!(m.is_precompact(&m.block(4, 4, 2, 2, Role::Open).unwrap()).unwrap());
        assert!(!m.is_precompact(&m.block(1, 4, 2, 2, Role::Open).unwrap()).unwrap());
        let annulus = m
            .block(2, 2, 6, 6, Role::Compact)
            .unwrap()
            .difference(&m.block(3, 3, 4, 4, Role::Compact).unwrap());
        let holes: Vec<_> = m
            .complement_components(&annulus)
            .into_iter()
            .filter(|h| m.is_precompact(h).unwrap())
            .collect();
        assert_eq!(holes.len(), 1);
        assert_eq!(holes[0].len(), 16);
        let s = grid(4, 4);
        assert_eq!(s.is_precompact(&s.full(Role::Open)), Err(Error::AllPrecompact));
    }

    #[test]
    fn ring_cells_are_not_admissible() {
        let m = GridSpace::new(5, 5, Mode::MarkedInfinity).unwrap();
        assert!(m.region([0], Role::Open).is_err());
        assert_eq!(m.full(Role::Open).len(), 9);
        assert_eq!(m.frame().count(), 8);
    }

    #[test]
    fn rle_round_trip() {
        let s = grid(6, 5);
        let r = s.region([0, 1, 7, 8, 29], Role::Open).unwrap();
        let text = r.to_rle();
        assert_eq!(text, "O:0.2.5.2.20.1");
        assert_eq!(s.parse_region(&text).unwrap(), r);
        assert_eq!(s.parse_region("K:").unwrap(), s.empty(Role::Compact));
    }

    #[test]
    fn digital_disk_shape() {
        let d = GridSpace::digital_disk(3.0).unwrap();
        assert_eq!(d.width(), 9);
        assert_eq!(d.admissible().count(), 29);
        assert!(d.is_solid(&d.full(Role::Compact)).unwrap());
    }

    #[test]
    fn faces_split_a_square() {
        let s = grid(3, 3);
        let centre = s.region([4], Role::Compact).unwrap();
        let rest = s.complement(&centre);
        assert!(s.is_disjoint_union(&centre, &rest, &s.full(Role::Compact)));
        // both compact: they share boundary edges
        assert!(!s.is_disjoint_union(&centre, &rest.with_role(Role::Compact), &s.full(Role::Compact)));
        // closed block is inside the open region around it
        let big = s.full(Role::Open);
        assert!(s.is_inside(&centre, &big));
        assert_eq!(s.faces(&s.full(Role::Open)), s.faces(&s.full(Role::Compact)));
    }

    #[test]
    fn line_topology() {
        let l = GridSpace::line(7, Mode::Compact).unwrap();
        let mid = l.region([3], Role::Compact).unwrap();
        assert!(!l.is_solid(&mid).unwrap());
        assert!(l.is_solid(&l.region([0, 1, 2], Role::Compact).unwrap()).unwrap());
        let r = GridSpace::line(7, Mode::MarkedInfinity).unwrap();
        assert!(r.is_solid(&r.region([3], Role::Compact).unwrap()).unwrap());
        assert!(r.is_solid(&r.region([2, 3], Role::Open).unwrap()).unwrap());
        let gap = r.region([2, 4], Role::Open).unwrap();
        assert_eq!(r.components(&gap, Adjacency::Region).len(), 2);
    }
}
