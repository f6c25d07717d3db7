//! Return structures and dynamical partitions generated by the critical orbit.
//!
//! For a map whose rotation number realizes partial quotients a_0, a_1, ...
//! the points f^j(c), 0 <= j < q_n + q_{n+1}, cut the circle into exactly
//! q_n + q_{n+1} arcs: the level-n partition. Its atoms are the iterates
//! f^i(I_n) (i < q_{n+1}) of the central interval I_n = [c, f^{q_n}(c)] and
//! the iterates f^i(I_{n+1}) (i < q_n) of I_{n+1}.
//!
//! Construction is certifying throughout. The return structure verifies the
//! closest-return property (the orbit point f^{q_k}(c) is strictly closer to
//! c than every earlier point of the orbit); the partition verifies that
//! every atom is an arc between circularly adjacent orbit points and that
//! every adjacency gap is claimed by exactly one atom. Failures surface as
//! `Certification` errors, never as silent mispartitions.

use crate::circle::{circle_dist, frac, Arc};
use crate::error::{Error, Result};
use crate::maps::MapSpec;
use crate::rotation::{Convergents, ORBIT_CAP};
use serde::{Deserialize, Serialize};

/// Containment slack for arc checks on orbit-point endpoints.
const ARC_TOL: f64 = 1e-12;

/// Critical orbit bookkeeping at a fixed level n: the finite orbit table,
/// the signed closest-return offsets delta_k = F^{q_k}(0) - p_k, and the
/// certified closest-return combinatorics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnStructure {
    spec: MapSpec,
    level: usize,
    conv: Convergents,
    /// delta[k] for k = 0..=level+1 (delta_0 pairs with q_0 = 1, so
    /// delta_0 = F(0) - p_0, which may exceed 1/2 in absolute value).
    delta: Vec<f64>,
    /// f^j(0) for 0 <= j <= q_n + q_{n+1}.
    orbit: Vec<f64>,
}

/// Build the level-n return structure and certify the closest-return
/// property at every q_k, k <= n + 1. Needs quotients to depth >= n + 1.
pub fn return_structure(spec: &MapSpec, quotients: &[u32], level: usize) -> Result<ReturnStructure> {
    let conv = Convergents::new(quotients)?;
    if conv.depth() < level + 1 {
        return Err(Error::Domain(format!(
            "level {level} needs at least {} partial quotients, got {}",
            level + 1,
            conv.depth()
        )));
    }
    let qn = conv.q[level] as usize;
    let qn1 = conv.q[level + 1] as usize;
    let table = qn + qn1;
    if table + 1 > ORBIT_CAP {
        return Err(Error::OrbitBudget {
            needed: table + 1,
            cap: ORBIT_CAP,
        });
    }

    let mut orbit = Vec::with_capacity(table + 1);
    let mut delta = vec![0.0f64; level + 2];
    let mut x = 0.0f64;
    let mut winding: i64 = 0;
    let mut closest = f64::INFINITY;
    orbit.push(x);
    for j in 1..=table as u64 {
        let fx = spec.lift(x);
        let w = fx.floor();
        winding += w as i64;
        x = frac(fx - w);
        orbit.push(x);
        let dist = circle_dist(x, 0.0);
        for (k, &qk) in conv.q.iter().enumerate().take(level + 2) {
            if qk == j {
                delta[k] = winding as f64 + x - conv.p[k] as f64;
                if dist >= closest {
                    return Err(Error::Certification(format!(
                        "closest-return failure at q_{k} = {j}: distance {dist:.3e} \
                         not below the running minimum {closest:.3e}"
                    )));
                }
            }
        }
        closest = closest.min(dist);
    }
    Ok(ReturnStructure {
        spec: *spec,
        level,
        conv,
        delta,
        orbit,
    })
}

impl ReturnStructure {
    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn convergents(&self) -> &Convergents {
        &self.conv
    }

    /// f^j(0) for 0 <= j <= q_n + q_{n+1}.
    pub fn orbit(&self) -> &[f64] {
        &self.orbit
    }

    /// Signed offset delta_k, 0 <= k <= n + 1.
    pub fn delta(&self, k: usize) -> Result<f64> {
        self.delta.get(k).copied().ok_or_else(|| {
            Error::Domain(format!(
                "delta_{k} beyond level {} structure",
                self.level
            ))
        })
    }

    pub fn deltas(&self) -> &[f64] {
        &self.delta
    }

    /// Scaling ratio s_k = |delta_{k+1} / delta_k|, 0 <= k <= n.
    pub fn scaling_ratio(&self, k: usize) -> Result<f64> {
        let num = self.delta(k + 1)?;
        let den = self.delta(k)?;
        if den == 0.0 {
            return Err(Error::Degenerate(format!("delta_{k} vanishes")));
        }
        Ok((num / den).abs())
    }

    /// Central interval I_k = arc between c = 0 and f^{q_k}(c), oriented by
    /// the sign of delta_k.
    pub fn central_interval(&self, k: usize) -> Result<Arc> {
        let dk = self.delta(k)?;
        let q = self.conv.q[k] as usize;
        let end = self.orbit[q];
        Ok(if dk >= 0.0 {
            Arc::from_endpoints(0.0, end)
        } else {
            Arc::from_endpoints(end, 0.0)
        })
    }

    /// Two-sided interval Delta_k = I_k union I_{k+1}, spanning c from
    /// f^{q_{k+1}}(c) to f^{q_k}(c). Requires 1 <= k <= n: Delta_0 can wrap
    /// the entire circle (|delta_0| + |delta_1| = 1 at golden combinatorics)
    /// and is not an interval in any useful sense.
    pub fn two_sided_interval(&self, k: usize) -> Result<Arc> {
        if k == 0 {
            return Err(Error::Domain(
                "two-sided interval needs k >= 1".into(),
            ));
        }
        let dk = self.delta(k)?;
        let _ = self.delta(k + 1)?;
        let a = self.orbit[self.conv.q[k + 1] as usize];
        let b = self.orbit[self.conv.q[k] as usize];
        Ok(if dk >= 0.0 {
            Arc::from_endpoints(a, b)
        } else {
            Arc::from_endpoints(b, a)
        })
    }

    /// Arc of f^j(I_n) read off the orbit table: endpoints x_j, x_{j+q_n},
    /// oriented by the sign of delta_n (iterates of an orientation-preserving
    /// map keep the endpoint order).
    fn old_iterate_arc(&self, j: usize) -> Arc {
        let qn = self.conv.q[self.level] as usize;
        let (s, e) = if self.delta[self.level] >= 0.0 {
            (self.orbit[j], self.orbit[j + qn])
        } else {
            (self.orbit[j + qn], self.orbit[j])
        };
        Arc::from_endpoints(s, e)
    }

    /// Backward-moment structure of the pullback of I_n along the critical
    /// orbit, checked against the return times.
    ///
    /// J_{-i} = f^{q_{n+1} - i}(I_n). The scan certifies that the first
    /// i >= 1 with J_{-i} inside I_{m+1} is exactly q_{m+2}, and that the
    /// a_{m+1} moments i_k = (k-1) q_{m+1} + q_m satisfy
    /// J_{-i_k} inside f^{E_k}(I_{m+1}) with E_k = (a_{m+1} - k + 1) q_{m+1}.
    pub fn backward_moments(&self, m: usize) -> Result<BackwardMoments> {
        let n = self.level;
        if m + 1 > n {
            return Err(Error::Domain(format!(
                "backward moments need m < n, got m = {m}, n = {n}"
            )));
        }
        if self.conv.depth() < m + 2 {
            return Err(Error::Domain(format!(
                "backward moments at m = {m} need quotient depth {}",
                m + 2
            )));
        }
        let q = &self.conv.q;
        let qn1 = q[n + 1] as usize;
        let q_m2 = q[m + 2] as usize;
        let target = self.central_interval(m + 1)?;

        // First full return of J_{-i} into I_{m+1}.
        let mut first_return = None;
        for i in 1..=q_m2 {
            let j = qn1 - i;
            if self.old_iterate_arc(j).contained_in_certified(&target) {
                first_return = Some(i);
                break;
            }
        }
        let first_return = first_return.ok_or_else(|| {
            Error::Certification(format!(
                "pullback of I_{n} never entered I_{} within q_{} steps",
                m + 1,
                m + 2
            ))
        })?;
        let first_return_verified = first_return == q_m2;

        // Moments: equally spaced entries into the level-(m+1) central tower.
        let a_next = self.conv.quotients[m + 1] as usize;
        let q_m = q[m] as usize;
        let q_m1 = q[m + 1] as usize;
        let mut moments = Vec::with_capacity(a_next);
        for k in 1..=a_next {
            let i = (k - 1) * q_m1 + q_m;
            let exponent = (a_next - k + 1) * q_m1;
            let piece = self.old_iterate_arc(qn1 - i);
            // f^{E_k}(I_{m+1}) has endpoints x_{E_k} and x_{E_k + q_{m+1}}.
            let (s, e) = if self.delta[m + 1] >= 0.0 {
                (self.orbit[exponent], self.orbit[exponent + q_m1])
            } else {
                (self.orbit[exponent + q_m1], self.orbit[exponent])
            };
            let tower_atom = Arc::from_endpoints(s, e);
            moments.push(Moment {
                k,
                i,
                exponent,
                contained: piece.contained_in_certified(&tower_atom),
            });
        }

        Ok(BackwardMoments {
            m,
            first_return,
            first_return_verified,
            moments,
        })
    }
}

/// One certified backward moment: at pullback time i, the interval lands in
/// the level-(m+1) tower atom f^exponent(I_{m+1}).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Moment {
    pub k: usize,
    pub i: usize,
    pub exponent: usize,
    pub contained: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackwardMoments {
    pub m: usize,
    pub first_return: usize,
    pub first_return_verified: bool,
    pub moments: Vec<Moment>,
}

impl BackwardMoments {
    pub fn all_certified(&self) -> bool {
        self.first_return_verified && self.moments.iter().all(|mo| mo.contained)
    }
}

/// Which central interval an atom iterates: the level-n interval I_n
/// (the "old" generation, q_{n+1} iterates) or I_{n+1} (the "new" one,
/// q_n iterates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generation {
    Old,
    New,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Atom {
    pub generation: Generation,
    /// Iterate index i: the atom is f^i(I_n) or f^i(I_{n+1}).
    pub iterate: usize,
    pub arc: Arc,
}

impl Atom {
    pub fn length(&self) -> f64 {
        self.arc.len()
    }
}

/// The level-n dynamical partition of the critical orbit, certified.
#[derive(Debug, Clone)]
pub struct DynamicalPartition {
    pub level: usize,
    pub returns: ReturnStructure,
    /// Atoms in circular order (sorted by left endpoint).
    pub atoms: Vec<Atom>,
}

/// Derive and certify the level-n partition from a return structure.
pub fn dynamical_partition(rs: &ReturnStructure) -> Result<DynamicalPartition> {
    let level = rs.level;
    let orbit = &rs.orbit;
    let qn = rs.conv.q[level] as usize;
    let qn1 = rs.conv.q[level + 1] as usize;
    let n_points = qn + qn1;

    // Circular order of the partition endpoints x_0 .. x_{N-1}.
    let mut order: Vec<usize> = (0..n_points).collect();
    order.sort_by(|&i, &j| orbit[i].total_cmp(&orbit[j]));
    for w in order.windows(2) {
        if orbit[w[1]] - orbit[w[0]] <= 0.0 {
            return Err(Error::Certification(format!(
                "orbit points {} and {} coincide at level {level}",
                w[0], w[1]
            )));
        }
    }
    // rank[j] = position of x_j in circular order.
    let mut rank = vec![0usize; n_points];
    for (pos, &j) in order.iter().enumerate() {
        rank[j] = pos;
    }

    // Each atom must claim one adjacency gap [sorted_g, sorted_{g+1}].
    let mut claimed = vec![false; n_points];
    let mut atoms = Vec::with_capacity(n_points);
    let mut claim = |j1: usize,
                     j2: usize,
                     generation: Generation,
                     iterate: usize,
                     atoms: &mut Vec<Atom>|
     -> Result<()> {
        let (r1, r2) = (rank[j1], rank[j2]);
        let gap = if (r1 + 1) % n_points == r2 {
            r1
        } else if (r2 + 1) % n_points == r1 {
            r2
        } else {
            return Err(Error::Certification(format!(
                "atom f^{iterate} endpoints x_{j1}, x_{j2} are not adjacent in the circular order"
            )));
        };
        if claimed[gap] {
            return Err(Error::Certification(format!(
                "adjacency gap {gap} claimed twice (at iterate {iterate})"
            )));
        }
        claimed[gap] = true;
        let start = orbit[order[gap]];
        let end = orbit[order[(gap + 1) % n_points]];
        atoms.push(Atom {
            generation,
            iterate,
            arc: Arc::from_endpoints(start, end),
        });
        Ok(())
    };

    for i in 0..qn1 {
        claim(i, i + qn, Generation::Old, i, &mut atoms)?;
    }
    for i in 0..qn {
        claim(i, i + qn1, Generation::New, i, &mut atoms)?;
    }
    debug_assert!(claimed.iter().all(|&c| c));
    atoms.sort_by(|a, b| a.arc.start().total_cmp(&b.arc.start()));

    Ok(DynamicalPartition {
        level,
        returns: rs.clone(),
        atoms,
    })
}

impl DynamicalPartition {
    /// Convenience: return structure plus partition in one call.
    pub fn build(spec: &MapSpec, quotients: &[u32], level: usize) -> Result<DynamicalPartition> {
        let rs = return_structure(spec, quotients, level)?;
        dynamical_partition(&rs)
    }

    pub fn orbit(&self) -> &[f64] {
        self.returns.orbit()
    }

    /// Largest atom length.
    pub fn mesh(&self) -> f64 {
        self.atoms.iter().map(Atom::length).fold(0.0f64, f64::max)
    }

    pub fn min_length(&self) -> f64 {
        self.atoms
            .iter()
            .map(Atom::length)
            .fold(f64::INFINITY, f64::min)
    }

    /// Max over circularly adjacent atom pairs of the length ratio >= 1.
    /// Bounded in n exactly when the map has real a-priori bounds.
    pub fn comparability(&self) -> f64 {
        let n = self.atoms.len();
        let mut worst = 1.0f64;
        for g in 0..n {
            let a = self.atoms[g].length();
            let b = self.atoms[(g + 1) % n].length();
            worst = worst.max(a / b).max(b / a);
        }
        worst
    }

    pub fn central_interval(&self, k: usize) -> Result<Arc> {
        self.returns.central_interval(k)
    }
}

/// Per-level partition statistics for real-bounds experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub atom_count: usize,
    pub mesh: f64,
    pub min_length: f64,
    pub comparability: f64,
}

/// Build partitions for levels n_lo..=n_hi and report their length
/// statistics. The quotient list must reach depth n_hi + 1.
pub fn real_bounds_stats(
    spec: &MapSpec,
    quotients: &[u32],
    n_lo: usize,
    n_hi: usize,
) -> Result<Vec<LevelStats>> {
    if n_lo > n_hi {
        return Err(Error::Domain(format!(
            "empty level range {n_lo}..={n_hi}"
        )));
    }
    let mut stats = Vec::with_capacity(n_hi - n_lo + 1);
    for level in n_lo..=n_hi {
        let p = DynamicalPartition::build(spec, quotients, level)?;
        stats.push(LevelStats {
            level,
            atom_count: p.atoms.len(),
            mesh: p.mesh(),
            min_length: p.min_length(),
            comparability: p.comparability(),
        });
    }
    Ok(stats)
}

/// Report of the preimage-disjointness check for the two-sided interval
/// Delta_n: the arcs f^{-i}(Delta_n), 0 <= i < q_n, read off the orbit
/// table, and whether their interiors are pairwise disjoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisjointPreimages {
    pub level: usize,
    pub arcs: Vec<Arc>,
    pub disjoint: bool,
    pub total_length: f64,
}

/// Check that Delta_n, f^{-1}(Delta_n), ..., f^{-q_n + 1}(Delta_n) have
/// pairwise disjoint interiors. The i-th preimage has endpoints
/// x_{q_{n+1} - i} and x_{q_n - i}, so everything reduces to stored orbit
/// points; no numerical inversion is involved.
pub fn disjoint_preimages_check(rs: &ReturnStructure) -> Result<DisjointPreimages> {
    let n = rs.level();
    if n == 0 {
        return Err(Error::Domain(
            "preimage disjointness needs level >= 1".into(),
        ));
    }
    let qn = rs.convergents().q[n] as usize;
    let qn1 = rs.convergents().q[n + 1] as usize;
    let dn = rs.delta(n)?;
    let orbit = rs.orbit();
    let mut arcs = Vec::with_capacity(qn);
    for i in 0..qn {
        let a = orbit[qn1 - i];
        let b = orbit[qn - i];
        arcs.push(if dn >= 0.0 {
            Arc::from_endpoints(a, b)
        } else {
            Arc::from_endpoints(b, a)
        });
    }
    let disjoint = arcs_pairwise_disjoint(&arcs, ARC_TOL);
    let total_length: f64 = arcs.iter().map(Arc::len).sum();
    Ok(DisjointPreimages {
        level: n,
        arcs,
        disjoint,
        total_length,
    })
}

/// True when no two arcs overlap on a set of length > tol.
pub fn arcs_pairwise_disjoint(arcs: &[Arc], tol: f64) -> bool {
    for (i, a) in arcs.iter().enumerate() {
        for b in arcs.iter().skip(i + 1) {
            if a.overlaps_interior(b, tol) {
                return false;
            }
        }
    }
    true
}

trait ArcContainExt {
    fn contained_in_certified(&self, outer: &Arc) -> bool;
}

impl ArcContainExt for Arc {
    fn contained_in_certified(&self, outer: &Arc) -> bool {
        outer.contains_arc(self, ARC_TOL)
    }
}
