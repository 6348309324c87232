use super::expr::{eval_geometric, Atom, Coords, EvalError, Pred, Tolerance};
use crate::geometry::{collinear, Label, Point, Role, Scene, SceneIndex, EPS};
use std::collections::BTreeMap;

/// Upper bound on bindings enumerated per theorem and figure.
pub const MAX_BINDINGS: usize = 512;

/// Precomputed structure used to bind theorem variables to a scene.
pub struct MatchContext<'a> {
    scene: &'a Scene,
    idx: SceneIndex,
    /// Convex quadrilaterals with all four sides drawn, every orientation.
    quads: Vec<[usize; 4]>,
    role_segs: BTreeMap<Role, Vec<[usize; 2]>>,
}

impl<'a> MatchContext<'a> {
    pub fn new(scene: &'a Scene) -> Self {
        let idx = scene.index();
        let n = idx.len();
        let mut quads = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if b == a || !idx.connected[a][b] {
                    continue;
                }
                for c in 0..n {
                    if c == a || c == b || !idx.connected[b][c] {
                        continue;
                    }
                    for d in 0..n {
                        if d == a || d == b || d == c || !idx.connected[c][d] || !idx.connected[d][a] {
                            continue;
                        }
                        if convex(&[idx.points[a], idx.points[b], idx.points[c], idx.points[d]]) {
                            quads.push([a, b, c, d]);
                        }
                    }
                }
            }
        }
        let mut role_segs: BTreeMap<Role, Vec<[usize; 2]>> = BTreeMap::new();
        for p in scene.primitives() {
            if let Some((a, b)) = p.endpoints() {
                let (Some(i), Some(j)) = (idx.idx(a), idx.idx(b)) else { continue };
                for r in &p.roles {
                    role_segs.entry(*r).or_default().extend([[i, j], [j, i]]);
                }
            }
        }
        Self {
            scene,
            idx,
            quads,
            role_segs,
        }
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    pub fn index(&self) -> &SceneIndex {
        &self.idx
    }

    /// All variable bindings satisfying `pre`, in enumeration order.
    pub fn bindings(&self, pre: &[Atom], distinct: bool) -> Vec<BTreeMap<Label, Label>> {
        let mut vars: Vec<Label> = Vec::new();
        for a in pre {
            for l in a.labels() {
                if !vars.contains(&l) {
                    vars.push(l);
                }
            }
        }
        let mut state = Search {
            ctx: self,
            pre,
            vars: &vars,
            vals: vec![None; vars.len()],
            distinct,
            out: Vec::new(),
        };
        state.solve(0);
        state.out
    }

    fn is_center(&self, v: usize) -> bool {
        self.idx.circles.iter().any(|c| c.1 == v)
    }

    fn structural(&self, pred: Pred, vals: &[usize], name: Option<&str>) -> Option<bool> {
        let con = |i: usize, j: usize| self.idx.connected[vals[i]][vals[j]];
        Some(match pred {
            Pred::Point => true,
            Pred::Seg => con(0, 1),
            Pred::Triangle => {
                let p = &self.idx.points;
                con(0, 1) && con(1, 2) && con(0, 2) && !collinear(p[vals[0]], p[vals[1]], p[vals[2]])
            }
            Pred::Quad => self.quads.iter().any(|q| q[..] == vals[..]),
            Pred::Circle => self.is_center(vals[0]),
            Pred::Role => {
                let role: Role = name?.parse().ok()?;
                self.role_segs
                    .get(&role)
                    .is_some_and(|s| s.iter().any(|p| p[..] == vals[..]))
            }
            Pred::Shape => self.scene.substrates.iter().any(|s| {
                s.kind == name.unwrap_or_default()
                    && s.vertices.len() == vals.len()
                    && s.vertices.iter().zip(vals).all(|(l, &v)| self.idx.idx(l) == Some(v))
            }),
            Pred::Substrate => self.scene.substrates.iter().any(|s| s.kind == name.unwrap_or_default()),
            _ => return None,
        })
    }

    /// Candidate assignments for an atom's labels, or `None` when the
    /// predicate has no generator and must fall back to enumeration.
    fn candidates(&self, pred: Pred, name: Option<&str>, arity: usize) -> Option<Vec<Vec<usize>>> {
        let n = self.idx.len();
        Some(match pred {
            Pred::Point => (0..n).map(|i| vec![i]).collect(),
            Pred::Seg => (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| vec![i, j]))
                .filter(|v| self.idx.connected[v[0]][v[1]])
                .collect(),
            Pred::Triangle => self
                .idx
                .triangles
                .iter()
                .flat_map(|&[i, j, k]| {
                    [[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]]
                        .map(|t| t.to_vec())
                })
                .collect(),
            Pred::Quad => self.quads.iter().map(|q| q.to_vec()).collect(),
            Pred::Circle => self.idx.circles.iter().map(|c| vec![c.1]).collect(),
            Pred::OnCircle => self
                .idx
                .circles
                .iter()
                .flat_map(|(_, c, _, m)| m.iter().map(move |&x| vec![x, *c]))
                .collect(),
            Pred::Between | Pred::Midpoint => {
                let mut out = Vec::new();
                for (_, m) in &self.idx.on_segment {
                    for &x in m {
                        for &y in m {
                            for &z in m {
                                if x != y && y != z && x != z {
                                    out.push(vec![x, y, z]);
                                }
                            }
                        }
                    }
                }
                out.sort();
                out.dedup();
                out
            }
            Pred::Role => {
                let role: Role = name?.parse().ok()?;
                self.role_segs
                    .get(&role)
                    .map(|s| s.iter().map(|p| p.to_vec()).collect())
                    .unwrap_or_default()
            }
            Pred::Shape => self
                .scene
                .substrates
                .iter()
                .filter(|s| s.kind == name.unwrap_or_default() && s.vertices.len() == arity)
                .filter_map(|s| s.vertices.iter().map(|l| self.idx.idx(l)).collect())
                .collect(),
            _ => return None,
        })
    }
}

fn convex(p: &[Point; 4]) -> bool {
    let scale = (0..4).map(|i| p[i].sub(p[(i + 1) % 4]).norm()).fold(1.0, f64::max);
    let turns: Vec<f64> = (0..4)
        .map(|i| {
            let (a, b, c) = (p[i], p[(i + 1) % 4], p[(i + 2) % 4]);
            b.sub(a).cross(c.sub(b))
        })
        .collect();
    let tol = EPS * scale * scale;
    turns.iter().all(|&t| t > tol) || turns.iter().all(|&t| t < -tol)
}

struct Search<'c, 'a> {
    ctx: &'c MatchContext<'a>,
    pre: &'c [Atom],
    vars: &'c [Label],
    vals: Vec<Option<usize>>,
    distinct: bool,
    out: Vec<BTreeMap<Label, Label>>,
}

struct View<'s, 'c, 'a> {
    search: &'s Search<'c, 'a>,
}

impl Coords for View<'_, '_, '_> {
    fn point(&self, l: &Label) -> Option<Point> {
        let v = self.search.value(l)?;
        Some(self.search.ctx.idx.points[v])
    }

    fn radius(&self, center: &Label) -> Option<f64> {
        let v = self.search.value(center)?;
        self.search.ctx.idx.circles.iter().find(|c| c.1 == v).map(|c| c.2)
    }
}

impl Search<'_, '_> {
    fn pos(&self, l: &Label) -> usize {
        self.vars.iter().position(|v| v == l).expect("collected")
    }

    fn value(&self, l: &Label) -> Option<usize> {
        self.vals[self.pos(l)]
    }

    fn holds(&self, atom: &Atom) -> bool {
        if let Atom::Pred { pred, labels, name } = atom {
            let vals: Vec<usize> = labels.iter().map(|l| self.value(l).expect("bound")).collect();
            if let Some(ok) = self.ctx.structural(*pred, &vals, name.as_deref()) {
                return ok;
            }
        }
        match eval_geometric(atom, &View { search: self }, Tolerance::Exact) {
            Ok(Some((ok, _))) => ok,
            Ok(None) => false,
            Err(EvalError::UnknownVertex(_)) => unreachable!("all variables bound"),
            Err(_) => false,
        }
    }

    fn solve(&mut self, i: usize) {
        if self.out.len() >= MAX_BINDINGS {
            return;
        }
        let Some(atom) = self.pre.get(i) else {
            let b = self
                .vars
                .iter()
                .zip(&self.vals)
                .map(|(k, v)| (k.clone(), self.ctx.idx.labels[v.expect("bound")].clone()))
                .collect();
            self.out.push(b);
            return;
        };
        let labels = atom.labels();
        let free: Vec<usize> = {
            let mut f: Vec<usize> = labels.iter().map(|l| self.pos(l)).filter(|&p| self.vals[p].is_none()).collect();
            f.dedup();
            f
        };
        if free.is_empty() {
            if self.holds(atom) {
                self.solve(i + 1);
            }
            return;
        }
        let gen = match atom {
            Atom::Pred { pred, name, .. } => self.ctx.candidates(*pred, name.as_deref(), labels.len()),
            Atom::Cmp(..) => None,
        };
        let positions: Vec<usize> = labels.iter().map(|l| self.pos(l)).collect();
        let cands: Vec<Vec<usize>> = match gen {
            Some(c) => c,
            None => {
                // enumerate free variables over all vertices
                let n = self.ctx.idx.len();
                let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
                let mut uniq = free.clone();
                uniq.sort();
                uniq.dedup();
                for _ in &uniq {
                    combos = combos
                        .into_iter()
                        .flat_map(|c| (0..n).map(move |v| [c.clone(), vec![v]].concat()))
                        .collect();
                }
                combos
                    .into_iter()
                    .map(|c| {
                        positions
                            .iter()
                            .map(|p| match uniq.iter().position(|u| u == p) {
                                Some(k) => c[k],
                                None => self.vals[*p].expect("bound"),
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        let saved = self.vals.clone();
        for cand in cands {
            if self.assign(&positions, &cand) && self.holds(atom) {
                self.solve(i + 1);
            }
            self.vals.clone_from(&saved);
            if self.out.len() >= MAX_BINDINGS {
                return;
            }
        }
    }

    fn assign(&mut self, positions: &[usize], cand: &[usize]) -> bool {
        for (&p, &v) in positions.iter().zip(cand) {
            match self.vals[p] {
                Some(cur) if cur != v => return false,
                Some(_) => {}
                None => {
                    if self.distinct && self.vals.iter().any(|x| *x == Some(v)) {
                        return false;
                    }
                    self.vals[p] = Some(v);
                }
            }
        }
        true
    }
}
