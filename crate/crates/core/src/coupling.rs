//! Moving-band coupling of the stator and rotor domains.
//!
//! At step `s` the rotor has turned by `3 s` contour segments, so rotor
//! contour node `k` coincides with stator contour node `(k + 3 s) mod M`. The
//! continuity of `A_z` across the contour is imposed by one Lagrange
//! multiplier per stator contour node:
//!
//! ```text
//! [ K_s   0    P_s ] [a_s]   [f_s]
//! [ 0     K_r  P_r ] [a_r] = [f_r]
//! [ P_s^T P_r^T 0  ] [ l ]   [ 0 ]
//! ```
//!
//! with `P_s = +1` at (stator node j, multiplier j) and `P_r = -1` at
//! (rotor node k, multiplier (k + 3 s) mod M).
//!
//! [`CoupledSolver`] solves this system by static condensation: each domain's
//! interior is eliminated once with a sparse Cholesky factorization, leaving
//! dense contour Schur complements `S_s`, `S_r`. Only the permutation that
//! matches the two contours changes with the step, so every step is one dense
//! `M x M` Cholesky solve plus two sparse back-substitutions.
//! [`solve_saddle_direct`] and [`solve_monolithic`] are independent
//! reference solvers for the same problem.

use std::sync::{Arc, Once};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt as SparseLlt;
use faer::{Mat, Side};

use crate::assembly::DomainSystem;
use crate::error::{Domain, Error, Result};
use crate::mesh::CoupledMesh;
use crate::sparse::CsrMatrix;

/// Contour nodes the rotor advances per time step.
pub const NODES_PER_STEP: usize = 3;

/// Relative residual accepted from a coupled solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

static SEQUENTIAL: Once = Once::new();

/// Parallelism is applied across UQ samples, never inside a factorization.
fn sequential_kernels() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Contour matching at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceCoupling {
    pub step: usize,
    /// Contour node count M.
    pub count: usize,
    pub stator_interface: Vec<usize>,
    pub rotor_interface: Vec<usize>,
    stator_nodes: usize,
    rotor_nodes: usize,
}

impl InterfaceCoupling {
    /// Contour nodes the rotor has turned by, in `[0, M)`.
    pub fn shift(&self) -> usize {
        (NODES_PER_STEP * self.step) % self.count
    }

    pub fn steps_per_revolution(&self) -> usize {
        self.count / NODES_PER_STEP
    }

    /// Rotor angle of this step in `[0, 2 pi)`.
    pub fn rotor_angle(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.shift() as f64 / self.count as f64
    }

    /// Stator contour index matched to rotor contour index `k`.
    pub fn matched_stator(&self, k: usize) -> usize {
        (k + self.shift()) % self.count
    }

    /// Rotor contour index matched to stator contour index `j`.
    pub fn matched_rotor(&self, j: usize) -> usize {
        (j + self.count - self.shift()) % self.count
    }

    /// `P_s` as a (stator nodes x M) matrix.
    pub fn stator_projector(&self) -> CsrMatrix {
        let t: Vec<_> = self
            .stator_interface
            .iter()
            .enumerate()
            .map(|(j, &n)| (n, j, 1.0))
            .collect();
        CsrMatrix::from_triplets(self.stator_nodes, self.count, &t)
    }

    /// `P_r(t)` as a (rotor nodes x M) matrix.
    pub fn rotor_projector(&self) -> CsrMatrix {
        let t: Vec<_> = self
            .rotor_interface
            .iter()
            .enumerate()
            .map(|(k, &n)| (n, self.matched_stator(k), -1.0))
            .collect();
        CsrMatrix::from_triplets(self.rotor_nodes, self.count, &t)
    }

    /// `max |P_s^T a_s + P_r^T a_r|`.
    pub fn constraint_residual(&self, stator: &[f64], rotor: &[f64]) -> f64 {
        (0..self.count)
            .map(|k| {
                (stator[self.stator_interface[self.matched_stator(k)]]
                    - rotor[self.rotor_interface[k]])
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Projectors for time step `step` (taken modulo one revolution).
pub fn build_projectors(mesh: &CoupledMesh, step: usize) -> Result<InterfaceCoupling> {
    let m = mesh.interface_count;
    if mesh.stator.interface.len() != m || mesh.rotor.interface.len() != m {
        return Err(Error::Coupling(format!(
            "contour node counts differ: stator {}, rotor {}, expected {m}",
            mesh.stator.interface.len(),
            mesh.rotor.interface.len()
        )));
    }
    if m == 0 || !m.is_multiple_of(NODES_PER_STEP) {
        return Err(Error::Coupling(format!(
            "contour node count {m} is not a multiple of {NODES_PER_STEP}"
        )));
    }
    Ok(InterfaceCoupling {
        step: step % (m / NODES_PER_STEP),
        count: m,
        stator_interface: mesh.stator.interface.clone(),
        rotor_interface: mesh.rotor.interface.clone(),
        stator_nodes: mesh.stator.nodes.len(),
        rotor_nodes: mesh.rotor.nodes.len(),
    })
}

/// Coupled field at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub step: usize,
    pub time: f64,
    /// Rotor angle (rad) relative to step 0.
    pub rotor_angle: f64,
    /// Stator DoFs (Wb), indexed by stator node.
    pub stator: Vec<f64>,
    /// Rotor DoFs (Wb), indexed by rotor node in the rotor frame.
    pub rotor: Vec<f64>,
    /// Interface multipliers, indexed by stator contour node.
    pub multipliers: Vec<f64>,
    /// Relative residual of the full block system.
    pub residual: f64,
}

/// One domain with its interior eliminated.
#[derive(Debug)]
pub struct CondensedDomain {
    pub domain: Domain,
    node_count: usize,
    interface: Vec<usize>,
    interior: Vec<usize>,
    interior_llt: SparseLlt<usize, f64>,
    /// Rows: interior, columns: interface.
    k_ig: CsrMatrix,
    /// Rows: interface, columns: interior.
    k_gi: CsrMatrix,
    /// Dense contour Schur complement, row-major M x M.
    schur: Vec<f64>,
    /// Condensed form `g_p` of each load component `f_p` of the domain.
    component_loads: Vec<Vec<f64>>,
    /// `f_p,I^T K_II^-1 f_q,I`.
    component_gram: Vec<Vec<f64>>,
}

const SCHUR_CHUNK: usize = 96;

impl CondensedDomain {
    pub fn new(sys: &DomainSystem) -> Result<Self> {
        sequential_kernels();
        let n = sys.node_count();
        let m = sys.interface.len();
        let mut kind = vec![0u8; n];
        for &d in &sys.dirichlet {
            kind[d] = 1;
        }
        for &g in &sys.interface {
            if kind[g] == 1 {
                return Err(Error::Coupling(format!(
                    "{} contour node {g} is also a Dirichlet node",
                    sys.domain
                )));
            }
            kind[g] = 2;
        }
        let interior: Vec<usize> = (0..n).filter(|&i| kind[i] == 0).collect();
        let k_ii = sys.stiffness.submatrix(&interior, &interior);
        let k_ig = sys.stiffness.submatrix(&interior, &sys.interface);
        let k_gi = sys.stiffness.submatrix(&sys.interface, &interior);
        let k_gg = sys.stiffness.submatrix(&sys.interface, &sys.interface);
        let interior_llt = k_ii.to_faer().sp_cholesky(Side::Lower).map_err(|e| {
            Error::Solver(format!(
                "{} interior stiffness is not positive definite: {e:?}",
                sys.domain
            ))
        })?;

        let ni = interior.len();
        let mut schur = vec![0.0; m * m];
        for (g, row) in schur.chunks_mut(m).enumerate() {
            for (c, v) in k_gg.row(g) {
                row[c] = v;
            }
        }
        let k_ig_cols = k_ig.transpose();
        for start in (0..m).step_by(SCHUR_CHUNK) {
            let width = SCHUR_CHUNK.min(m - start);
            let mut y = Mat::<f64>::zeros(ni, width);
            for c in 0..width {
                for (i, v) in k_ig_cols.row(start + c) {
                    y[(i, c)] = v;
                }
            }
            interior_llt.solve_in_place(&mut y);
            for g in 0..m {
                for (i, v) in k_gi.row(g) {
                    for c in 0..width {
                        schur[g * m + start + c] -= v * y[(i, c)];
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                let s = 0.5 * (schur[a * m + b] + schur[b * m + a]);
                schur[a * m + b] = s;
                schur[b * m + a] = s;
            }
        }
        let mut out = CondensedDomain {
            domain: sys.domain,
            node_count: n,
            interface: sys.interface.clone(),
            interior,
            interior_llt,
            k_ig,
            k_gi,
            schur,
            component_loads: Vec::new(),
            component_gram: Vec::new(),
        };
        let components = sys.load_components();
        let interior_parts: Vec<Vec<f64>> = components
            .iter()
            .map(|f| out.interior.iter().map(|&i| f[i]).collect())
            .collect();
        let solved: Vec<Vec<f64>> = interior_parts
            .iter()
            .map(|f| out.interior_solve(f.clone()))
            .collect();
        out.component_gram = interior_parts
            .iter()
            .map(|fp| solved.iter().map(|cq| dot(fp, cq)).collect())
            .collect();
        out.component_loads = components
            .iter()
            .zip(&solved)
            .map(|(f, c)| {
                let mut g: Vec<f64> = out.interface.iter().map(|&n| f[n]).collect();
                out.k_gi.mul_vec_add(-1.0, c, &mut g);
                g
            })
            .collect();
        Ok(out)
    }

    fn combined_load(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.interface.len()];
        for (gp, &alpha) in self.component_loads.iter().zip(coefficients) {
            if alpha != 0.0 {
                g.iter_mut().zip(gp).for_each(|(x, y)| *x += alpha * y);
            }
        }
        g
    }

    fn schur_form(&self, u: &[f64]) -> f64 {
        self.schur
            .chunks(u.len())
            .zip(u)
            .map(|(row, ua)| ua * dot(row, u))
            .sum()
    }

    /// `(1/2 a^T K a, [f_p^T a])` of the domain solution whose contour values
    /// are `u`, for the load `sum_p coefficients[p] f_p`.
    fn functionals(&self, coefficients: &[f64], u: &[f64]) -> (f64, Vec<f64>) {
        let gram_alpha: Vec<f64> = self
            .component_gram
            .iter()
            .map(|row| dot(row, coefficients))
            .collect();
        let energy = 0.5 * (self.schur_form(u) + dot(coefficients, &gram_alpha));
        let values = gram_alpha
            .iter()
            .zip(&self.component_loads)
            .map(|(ga, gp)| ga + dot(gp, u))
            .collect();
        (energy, values)
    }

    pub fn interface_count(&self) -> usize {
        self.interface.len()
    }

    pub fn schur(&self, a: usize, b: usize) -> f64 {
        self.schur[a * self.interface.len() + b]
    }

    fn interior_solve(&self, rhs: Vec<f64>) -> Vec<f64> {
        let mut x = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.interior_llt.solve_in_place(&mut x);
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }

    /// `g = f_G - K_GI K_II^-1 f_I`.
    pub fn condense_load(&self, f: &[f64]) -> Vec<f64> {
        let f_i: Vec<f64> = self.interior.iter().map(|&i| f[i]).collect();
        let y = self.interior_solve(f_i);
        let mut g: Vec<f64> = self.interface.iter().map(|&n| f[n]).collect();
        self.k_gi.mul_vec_add(-1.0, &y, &mut g);
        g
    }

    /// Full DoF vector from the contour values `u`; Dirichlet entries are 0.
    pub fn expand(&self, f: &[f64], u: &[f64]) -> Vec<f64> {
        let mut rhs: Vec<f64> = self.interior.iter().map(|&i| f[i]).collect();
        self.k_ig.mul_vec_add(-1.0, u, &mut rhs);
        let a_i = self.interior_solve(rhs);
        let mut a = vec![0.0; self.node_count];
        for (&n, v) in self.interior.iter().zip(a_i) {
            a[n] = v;
        }
        for (&n, &v) in self.interface.iter().zip(u) {
            a[n] = v;
        }
        a
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scalar outputs of a step computed without expanding the interior DoFs.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedStep {
    /// Stator contour values, indexed by stator contour node.
    pub contour: Vec<f64>,
    /// `1/2 a^T K a` summed over both domains.
    pub quadratic_energy: f64,
    /// `f_p^T a_s` for every stator load component (see
    /// [`DomainSystem::load_components`]).
    pub stator_functionals: Vec<f64>,
    /// `f_p^T a_r` for every rotor load component.
    pub rotor_functionals: Vec<f64>,
    /// Relative residual of the condensed contour system.
    pub residual: f64,
}

/// Condensed two-domain solver. The stator half is usually shared between
/// many rotor geometries.
#[derive(Debug, Clone)]
pub struct CoupledSolver {
    stator_system: Arc<DomainSystem>,
    rotor_system: Arc<DomainSystem>,
    stator: Arc<CondensedDomain>,
    rotor: Arc<CondensedDomain>,
}

impl CoupledSolver {
    pub fn new(
        stator_system: Arc<DomainSystem>,
        stator: Arc<CondensedDomain>,
        rotor_system: Arc<DomainSystem>,
        rotor: Arc<CondensedDomain>,
    ) -> Result<Self> {
        if stator.interface_count() != rotor.interface_count() {
            return Err(Error::Coupling(format!(
                "contour node counts differ: stator {}, rotor {}",
                stator.interface_count(),
                rotor.interface_count()
            )));
        }
        Ok(CoupledSolver {
            stator_system,
            rotor_system,
            stator,
            rotor,
        })
    }

    pub fn from_systems(stator: DomainSystem, rotor: DomainSystem) -> Result<Self> {
        let cs = Arc::new(CondensedDomain::new(&stator)?);
        let cr = Arc::new(CondensedDomain::new(&rotor)?);
        Self::new(Arc::new(stator), cs, Arc::new(rotor), cr)
    }

    /// Replaces the rotor, keeping the condensed stator.
    pub fn with_rotor(&self, rotor: DomainSystem) -> Result<Self> {
        let cr = Arc::new(CondensedDomain::new(&rotor)?);
        Self::new(
            self.stator_system.clone(),
            self.stator.clone(),
            Arc::new(rotor),
            cr,
        )
    }

    pub fn stator_system(&self) -> &DomainSystem {
        &self.stator_system
    }

    pub fn rotor_system(&self) -> &DomainSystem {
        &self.rotor_system
    }

    fn factor_contour(
        &self,
        coupling: &InterfaceCoupling,
    ) -> Result<(Mat<f64>, faer::linalg::solvers::Llt<f64>)> {
        let m = coupling.count;
        if self.stator.interface_count() != m {
            return Err(Error::Coupling(format!(
                "coupling has {m} contour nodes, solver {}",
                self.stator.interface_count()
            )));
        }
        let perm: Vec<usize> = (0..m).map(|j| coupling.matched_rotor(j)).collect();
        let s_tot = Mat::from_fn(m, m, |a, b| {
            self.stator.schur[a * m + b] + self.rotor.schur[perm[a] * m + perm[b]]
        });
        let llt = s_tot.llt(Side::Lower).map_err(|e| {
            Error::Solver(format!(
                "condensed contour system is singular at step {}: {e:?}",
                coupling.step
            ))
        })?;
        Ok((s_tot, llt))
    }

    /// Solves a step for the load `sum_p alpha_p f_p` of each domain's load
    /// components and returns only contour values and scalar functionals.
    pub fn solve_condensed(
        &self,
        coupling: &InterfaceCoupling,
        stator_coefficients: &[f64],
        rotor_coefficients: &[f64],
    ) -> Result<CondensedStep> {
        let m = coupling.count;
        let (s_tot, llt) = self.factor_contour(coupling)?;
        let g_s = self.stator.combined_load(stator_coefficients);
        let g_r = self.rotor.combined_load(rotor_coefficients);
        let rhs: Vec<f64> = (0..m)
            .map(|j| g_s[j] + g_r[coupling.matched_rotor(j)])
            .collect();
        let mut x = Mat::from_fn(m, 1, |j, _| rhs[j]);
        llt.solve_in_place(&mut x);
        let u_s: Vec<f64> = (0..m).map(|j| x[(j, 0)]).collect();
        let u_r: Vec<f64> = (0..m).map(|k| u_s[coupling.matched_stator(k)]).collect();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for a in 0..m {
            let su: f64 = (0..m).map(|b| s_tot[(a, b)] * u_s[b]).sum();
            worst = worst.max((su - rhs[a]).abs());
            scale = scale.max(rhs[a].abs()).max(su.abs());
        }
        let residual = if scale > 0.0 { worst / scale } else { worst };
        if !(residual <= RESIDUAL_TOLERANCE) {
            return Err(Error::Solver(format!(
                "contour residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE:e} at step {}",
                coupling.step
            )));
        }
        let (e_s, stator_functionals) = self.stator.functionals(stator_coefficients, &u_s);
        let (e_r, rotor_functionals) = self.rotor.functionals(rotor_coefficients, &u_r);
        Ok(CondensedStep {
            contour: u_s,
            quadratic_energy: e_s + e_r,
            stator_functionals,
            rotor_functionals,
            residual,
        })
    }

    /// Solves the coupled system for loads `f_s`, `f_r` (full node vectors).
    pub fn solve_step(
        &self,
        coupling: &InterfaceCoupling,
        f_s: &[f64],
        f_r: &[f64],
    ) -> Result<FieldSolution> {
        let m = coupling.count;
        let (_, llt) = self.factor_contour(coupling)?;
        let g_s = self.stator.condense_load(f_s);
        let g_r = self.rotor.condense_load(f_r);
        let perm: Vec<usize> = (0..m).map(|j| coupling.matched_rotor(j)).collect();
        let mut rhs = Mat::from_fn(m, 1, |j, _| g_s[j] + g_r[perm[j]]);
        llt.solve_in_place(&mut rhs);
        let u_s: Vec<f64> = (0..m).map(|j| rhs[(j, 0)]).collect();
        let u_r: Vec<f64> = (0..m).map(|k| u_s[coupling.matched_stator(k)]).collect();
        let multipliers: Vec<f64> = (0..m)
            .map(|j| {
                g_s[j]
                    - (0..m)
                        .map(|b| self.stator.schur(j, b) * u_s[b])
                        .sum::<f64>()
            })
            .collect();
        let stator = self.stator.expand(f_s, &u_s);
        let rotor = self.rotor.expand(f_r, &u_r);
        let mut sol = FieldSolution {
            step: coupling.step,
            time: 0.0,
            rotor_angle: coupling.rotor_angle(),
            stator,
            rotor,
            multipliers,
            residual: 0.0,
        };
        sol.residual = block_residual(
            &self.stator_system,
            &self.rotor_system,
            coupling,
            f_s,
            f_r,
            &sol,
        );
        if !(sol.residual <= RESIDUAL_TOLERANCE) {
            return Err(Error::Solver(format!(
                "block residual {:.3e} exceeds {RESIDUAL_TOLERANCE:e} at step {}",
                sol.residual, coupling.step
            )));
        }
        Ok(sol)
    }
}

/// Relative residual of the saddle system over the free DoFs:
/// `||r||_inf / max(||f||_inf, ||K a||_inf)`.
pub fn block_residual(
    stator: &DomainSystem,
    rotor: &DomainSystem,
    coupling: &InterfaceCoupling,
    f_s: &[f64],
    f_r: &[f64],
    sol: &FieldSolution,
) -> f64 {
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    let mut domain = |sys: &DomainSystem, a: &[f64], f: &[f64], p: &CsrMatrix| {
        let ka = sys.stiffness.mul_vec(a);
        let pl = p.mul_vec(&sol.multipliers);
        let mut fixed = vec![false; a.len()];
        for &d in &sys.dirichlet {
            fixed[d] = true;
        }
        for i in 0..a.len() {
            if fixed[i] {
                continue;
            }
            scale = scale.max(ka[i].abs()).max(f[i].abs());
            worst = worst.max((ka[i] + pl[i] - f[i]).abs());
        }
    };
    domain(stator, &sol.stator, f_s, &coupling.stator_projector());
    domain(rotor, &sol.rotor, f_r, &coupling.rotor_projector());
    let a_scale = sol
        .stator
        .iter()
        .chain(&sol.rotor)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let constraint = coupling.constraint_residual(&sol.stator, &sol.rotor);
    if scale == 0.0 && a_scale == 0.0 {
        return 0.0;
    }
    let force = if scale > 0.0 { worst / scale } else { worst };
    let cons = if a_scale > 0.0 {
        constraint / a_scale
    } else {
        constraint
    };
    force.max(cons)
}

/// Reference solver: assembles the full saddle-point matrix over the free DoFs
/// and factors it with a sparse LU.
pub fn solve_saddle_direct(
    stator: &DomainSystem,
    rotor: &DomainSystem,
    coupling: &InterfaceCoupling,
    f_s: &[f64],
    f_r: &[f64],
) -> Result<FieldSolution> {
    sequential_kernels();
    let free_s = stator.free_nodes();
    let free_r = rotor.free_nodes();
    let (ns, nr, m) = (free_s.len(), free_r.len(), coupling.count);
    let mut index_s = vec![usize::MAX; stator.node_count()];
    for (k, &n) in free_s.iter().enumerate() {
        index_s[n] = k;
    }
    let mut index_r = vec![usize::MAX; rotor.node_count()];
    for (k, &n) in free_r.iter().enumerate() {
        index_r[n] = ns + k;
    }
    let mut t = Vec::new();
    for (i, j, v) in stator.stiffness.triplets() {
        if index_s[i] != usize::MAX && index_s[j] != usize::MAX {
            t.push(faer::sparse::Triplet::new(index_s[i], index_s[j], v));
        }
    }
    for (i, j, v) in rotor.stiffness.triplets() {
        if index_r[i] != usize::MAX && index_r[j] != usize::MAX {
            t.push(faer::sparse::Triplet::new(index_r[i], index_r[j], v));
        }
    }
    // constraint rows scaled to the stiffness magnitude; multipliers are
    // scaled back after the solve
    let diag: f64 = free_s
        .iter()
        .map(|&n| stator.stiffness.get(n, n).abs())
        .sum::<f64>()
        / ns.max(1) as f64;
    let c_scale = if diag > 0.0 { diag } else { 1.0 };
    let mut push_projector = |p: CsrMatrix, index: &[usize]| {
        for (n, c, v) in p.triplets() {
            t.push(faer::sparse::Triplet::new(
                index[n],
                ns + nr + c,
                c_scale * v,
            ));
            t.push(faer::sparse::Triplet::new(
                ns + nr + c,
                index[n],
                c_scale * v,
            ));
        }
    };
    push_projector(coupling.stator_projector(), &index_s);
    push_projector(coupling.rotor_projector(), &index_r);
    let dim = ns + nr + m;
    let mat = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &t)
        .map_err(|e| Error::Solver(format!("saddle matrix: {e:?}")))?;
    let lu = mat
        .sp_lu()
        .map_err(|e| Error::Solver(format!("saddle matrix is singular: {e:?}")))?;
    let mut rhs = Mat::<f64>::zeros(dim, 1);
    for (k, &n) in free_s.iter().enumerate() {
        rhs[(k, 0)] = f_s[n];
    }
    for (k, &n) in free_r.iter().enumerate() {
        rhs[(ns + k, 0)] = f_r[n];
    }
    lu.solve_in_place(&mut rhs);
    let mut a_s = vec![0.0; stator.node_count()];
    for (k, &n) in free_s.iter().enumerate() {
        a_s[n] = rhs[(k, 0)];
    }
    let mut a_r = vec![0.0; rotor.node_count()];
    for (k, &n) in free_r.iter().enumerate() {
        a_r[n] = rhs[(ns + k, 0)];
    }
    let mut sol = FieldSolution {
        step: coupling.step,
        time: 0.0,
        rotor_angle: coupling.rotor_angle(),
        stator: a_s,
        rotor: a_r,
        multipliers: (0..m).map(|c| c_scale * rhs[(ns + nr + c, 0)]).collect(),
        residual: 0.0,
    };
    sol.residual = block_residual(stator, rotor, coupling, f_s, f_r, &sol);
    Ok(sol)
}

/// Reference solver: glues the rotated rotor mesh onto the stator mesh at the
/// coinciding contour nodes and solves the single conforming system.
/// Returns `(a_s, a_r)`.
pub fn solve_monolithic(
    stator: &DomainSystem,
    rotor: &DomainSystem,
    coupling: &InterfaceCoupling,
    f_s: &[f64],
    f_r: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    sequential_kernels();
    let ns = stator.node_count();
    let nr = rotor.node_count();
    // global index of every rotor node
    let mut map_r: Vec<usize> = (0..nr).map(|i| ns + i).collect();
    for (k, &n) in coupling.rotor_interface.iter().enumerate() {
        map_r[n] = coupling.stator_interface[coupling.matched_stator(k)];
    }
    let total = ns + nr;
    let mut fixed = vec![false; total];
    for &d in &stator.dirichlet {
        fixed[d] = true;
    }
    for &d in &rotor.dirichlet {
        fixed[map_r[d]] = true;
    }
    let mut used = vec![false; total];
    used[..ns].iter_mut().for_each(|u| *u = true);
    for &g in &map_r {
        used[g] = true;
    }
    let free: Vec<usize> = (0..total).filter(|&g| used[g] && !fixed[g]).collect();
    let mut index = vec![usize::MAX; total];
    for (k, &g) in free.iter().enumerate() {
        index[g] = k;
    }
    let mut t = Vec::new();
    let mut f = vec![0.0; free.len()];
    for (i, j, v) in stator.stiffness.triplets() {
        if index[i] != usize::MAX && index[j] != usize::MAX {
            t.push((index[i], index[j], v));
        }
    }
    for (i, j, v) in rotor.stiffness.triplets() {
        let (gi, gj) = (map_r[i], map_r[j]);
        if index[gi] != usize::MAX && index[gj] != usize::MAX {
            t.push((index[gi], index[gj], v));
        }
    }
    for (n, &v) in f_s.iter().enumerate() {
        if index[n] != usize::MAX {
            f[index[n]] += v;
        }
    }
    for (n, &v) in f_r.iter().enumerate() {
        let g = map_r[n];
        if index[g] != usize::MAX {
            f[index[g]] += v;
        }
    }
    let k = CsrMatrix::from_triplets(free.len(), free.len(), &t);
    let llt = k
        .to_faer()
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Solver(format!("glued stiffness is not positive definite: {e:?}")))?;
    let mut x = Mat::from_fn(f.len(), 1, |i, _| f[i]);
    llt.solve_in_place(&mut x);
    let value = |g: usize| {
        if index[g] == usize::MAX {
            0.0
        } else {
            x[(index[g], 0)]
        }
    };
    let a_s = (0..ns).map(value).collect();
    let a_r = (0..nr).map(|n| value(map_r[n])).collect();
    Ok((a_s, a_r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_stiffness, line_current_load, Reluctivity};
    use crate::mesh::{build_annulus_mesh, AnnulusGeometry};

    fn annulus(refinement: u32) -> (CoupledMesh, DomainSystem, DomainSystem) {
        let mesh = build_annulus_mesh(AnnulusGeometry::default(), refinement).unwrap();
        let nu = Reluctivity::vacuum();
        let sys = |d: &crate::mesh::DomainMesh| DomainSystem {
            domain: d.domain,
            stiffness: assemble_stiffness(d, |r| nu.of(r), 1.0).unwrap(),
            fixed_source: vec![0.0; d.nodes.len()],
            winding: None,
            dirichlet: d.dirichlet.clone(),
            interface: d.interface.clone(),
        };
        let s = sys(&mesh.stator);
        let r = sys(&mesh.rotor);
        (mesh, s, r)
    }

    #[test]
    fn projector_entries_and_shift() {
        let (mesh, _, _) = annulus(0);
        let m = mesh.interface_count;
        let c0 = build_projectors(&mesh, 0).unwrap();
        let c1 = build_projectors(&mesh, 1).unwrap();
        let cp = build_projectors(&mesh, m / 3).unwrap();
        assert_eq!(cp.rotor_projector(), c0.rotor_projector());
        for k in 0..m {
            assert_eq!(c0.matched_stator(k), k);
            assert_eq!(c1.matched_stator(k), (k + 3) % m);
        }
        for p in [c1.stator_projector(), c1.rotor_projector()] {
            let mut per_col = vec![0; m];
            for (_, c, v) in p.triplets() {
                assert!(v == 1.0 || v == -1.0);
                per_col[c] += 1;
            }
            assert!(per_col.iter().all(|&n| n == 1));
        }
    }

    #[test]
    fn mismatched_contours_are_rejected() {
        let (mut mesh, _, _) = annulus(0);
        mesh.rotor.interface.pop();
        assert!(build_projectors(&mesh, 0).is_err());
    }

    #[test]
    fn condensed_matches_direct_saddle_solve() {
        let (mesh, s, r) = annulus(0);
        let f_r = line_current_load(&mesh.rotor, 3.0);
        let f_s = vec![0.0; s.node_count()];
        let solver = CoupledSolver::from_systems(s.clone(), r.clone()).unwrap();
        for step in [0, 5] {
            let c = build_projectors(&mesh, step).unwrap();
            let a = solver.solve_step(&c, &f_s, &f_r).unwrap();
            let b = solve_saddle_direct(&s, &r, &c, &f_s, &f_r).unwrap();
            assert!(b.residual < 1e-10, "direct residual {}", b.residual);
            let scale = a.stator.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a
                .stator
                .iter()
                .chain(&a.rotor)
                .zip(b.stator.iter().chain(&b.rotor))
            {
                assert!((x - y).abs() < 1e-10 * scale);
            }
            let lscale = b.multipliers.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.multipliers.iter().zip(&b.multipliers) {
                assert!((x - y).abs() < 1e-8 * lscale);
            }
        }
    }

    #[test]
    fn zero_and_scaled_sources() {
        let (mesh, s, r) = annulus(0);
        let solver = CoupledSolver::from_systems(s.clone(), r.clone()).unwrap();
        let c = build_projectors(&mesh, 2).unwrap();
        let zero = solver
            .solve_step(&c, &vec![0.0; s.node_count()], &vec![0.0; r.node_count()])
            .unwrap();
        assert!(zero.stator.iter().chain(&zero.rotor).all(|v| *v == 0.0));
        let f1 = line_current_load(&mesh.rotor, 1.0);
        let f2 = line_current_load(&mesh.rotor, 2.5);
        let fs = vec![0.0; s.node_count()];
        let a1 = solver.solve_step(&c, &fs, &f1).unwrap();
        let a2 = solver.solve_step(&c, &fs, &f2).unwrap();
        let scale = a2.rotor.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a1.rotor.iter().zip(&a2.rotor) {
            assert!((2.5 * x - y).abs() < 1e-12 * scale);
        }
    }
}
