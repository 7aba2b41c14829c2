//! Cantilevered 3D frame-element beam: mesh, element matrices, assembly,
//! constraints, Rayleigh damping, static and harmonic solves, frequency
//! sweeps, and determinant-scan modal extraction.
//!
//! DOF layout is six per node, `[ux, uy, uz, θx, θy, θz]`, node-major. Local
//! element axes are `x` along the beam, `y` across the section width and `z`
//! across its height; bending deflection along local `y` uses `I_z`, along
//! local `z` uses `I_y`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{angular, FrequencyGrid};
use crate::numerics::{det_sign, lu_factor, norm2, LinalgError, RealMatrix};

pub type Vec3 = [f64; 3];

pub const DOF_PER_NODE: usize = 6;

/// Relative bracket width at which frequency bisection stops.
pub const MODAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeamError {
    #[error("invalid beam spec field `{field}`: {reason}")]
    InvalidSpec {
        field: &'static str,
        reason: &'static str,
    },
    #[error("element index {index} out of range for {count} elements")]
    ElementIndex { index: usize, count: usize },
    #[error("every degree of freedom is fixed")]
    EmptySystem,
    #[error("fixed DOF index {index} out of range for {total} DOFs")]
    BadFixedDof { index: usize, total: usize },
    #[error(
        "Rayleigh coefficients must be non-negative and not both zero (alpha={alpha}, beta={beta})"
    )]
    InvalidDamping { alpha: f64, beta: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("at {freq_hz} Hz: {source}")]
    AtFrequency {
        freq_hz: f64,
        #[source]
        source: Box<BeamError>,
    },
    #[error("{} sweep frequencies failed, first at {} Hz", failures.len(), failures[0].0)]
    SweepFailed { failures: Vec<(f64, LinalgError)> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Pa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// kg/m³
    pub density: f64,
}

impl Material {
    /// Handbook values for 304 stainless steel.
    pub fn stainless_steel() -> Self {
        Self {
            youngs_modulus: 193e9,
            poisson_ratio: 0.29,
            density: 8000.0,
        }
    }

    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }
}

/// Solid rectangle, `width` along local y and `height` along local z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossSection {
    pub width: f64,
    pub height: f64,
}

impl CrossSection {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Second moment about local y (resists deflection along local z).
    pub fn i_y(&self) -> f64 {
        self.width * self.height.powi(3) / 12.0
    }

    /// Second moment about local z (resists deflection along local y).
    pub fn i_z(&self) -> f64 {
        self.height * self.width.powi(3) / 12.0
    }

    pub fn polar_moment(&self) -> f64 {
        self.i_y() + self.i_z()
    }

    /// St. Venant torsion constant, `b t³ (1/3 - 0.21 (t/b)(1 - t⁴/(12 b⁴)))`
    /// with `b` the long side and `t` the short side.
    pub fn torsion_constant(&self) -> f64 {
        let (b, t) = if self.width >= self.height {
            (self.width, self.height)
        } else {
            (self.height, self.width)
        };
        let r = t / b;
        b * t.powi(3) * (1.0 / 3.0 - 0.21 * r * (1.0 - r.powi(4) / 12.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSpec {
    /// m
    pub length: f64,
    pub section: CrossSection,
    pub material: Material,
    pub n_elements: usize,
    /// Unit vector from the clamped end to the free end.
    pub axis_direction: Vec3,
    /// Harmonic force amplitude (N) applied at the free end, global axes.
    pub tip_load: Vec3,
    /// Direction the section height (local z) should point toward. Projected
    /// onto the plane normal to the axis. `None` picks global Z, or global Y
    /// when the axis is nearly vertical.
    pub height_direction: Option<Vec3>,
}

impl BeamSpec {
    /// 1 m stainless bar, 30 mm x 20 mm, 20 elements, along global x.
    pub fn straight() -> Self {
        Self {
            length: 1.0,
            section: CrossSection {
                width: 0.03,
                height: 0.02,
            },
            material: Material::stainless_steel(),
            n_elements: 20,
            axis_direction: [1.0, 0.0, 0.0],
            tip_load: [0.0, 10.0, 10.0],
            height_direction: None,
        }
    }

    /// The straight bar tilted along (1,1,1)/√3 so that every global axis
    /// sees bending resonances; tip load (0, 10, 10) N.
    pub fn example2() -> Self {
        let s = 1.0 / libm::sqrt(3.0);
        Self {
            axis_direction: [s, s, s],
            ..Self::straight()
        }
    }

    pub fn element_length(&self) -> f64 {
        self.length / self.n_elements as f64
    }

    pub fn validate(&self) -> Result<(), BeamError> {
        let fail = |field, reason| Err(BeamError::InvalidSpec { field, reason });
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.length) {
            return fail("length", "must be positive");
        }
        if !positive(self.section.width) {
            return fail("width", "must be positive");
        }
        if !positive(self.section.height) {
            return fail("height", "must be positive");
        }
        if !positive(self.material.youngs_modulus) {
            return fail("youngs_modulus", "must be positive");
        }
        let nu = self.material.poisson_ratio;
        if !(nu >= 0.0 && nu < 0.5) {
            return fail("poisson_ratio", "must lie in [0, 0.5)");
        }
        if !positive(self.material.density) {
            return fail("density", "must be positive");
        }
        if self.n_elements < 2 {
            return fail("n_elements", "must be at least 2");
        }
        if libm::fabs(norm(self.axis_direction) - 1.0) > 1e-12 {
            return fail("axis_direction", "must be a unit vector");
        }
        if self.tip_load.iter().any(|v| !v.is_finite()) {
            return fail("tip_load", "must be finite");
        }
        if let Some(h) = self.height_direction {
            let along = dot(h, self.axis_direction);
            let across = sub(h, scale(self.axis_direction, along));
            if !(norm(across) > 1e-9 * norm(h)) {
                return fail("height_direction", "must not be parallel to the axis");
            }
        }
        Ok(())
    }

    /// Orthonormal local frame `[x, y, z]` in global coordinates.
    pub fn local_frame(&self) -> [Vec3; 3] {
        let x = self.axis_direction;
        let reference = self.height_direction.unwrap_or(if libm::fabs(x[2]) > 0.99 {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        });
        let y = normalize(cross(reference, x));
        let z = cross(x, y);
        [x, y, z]
    }
}

/// Mesh and boundary conditions derived from a [`BeamSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct BeamModel {
    pub nodes: Vec<Vec3>,
    pub elements: Vec<[usize; 2]>,
    /// Sorted; the six DOFs of node 0.
    pub fixed_dofs: Vec<usize>,
    /// Global load vector over all DOFs.
    pub load: Vec<f64>,
    pub frame: [Vec3; 3],
}

impl BeamModel {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len() * DOF_PER_NODE
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.n_dofs())
            .filter(|d| self.fixed_dofs.binary_search(d).is_err())
            .collect()
    }

    /// Global DOF index of `component` (0..6) at `node`.
    pub fn dof(node: usize, component: usize) -> usize {
        node * DOF_PER_NODE + component
    }
}

pub fn build_mesh(spec: &BeamSpec) -> Result<BeamModel, BeamError> {
    spec.validate()?;
    let n = spec.n_elements;
    let nodes = (0..=n)
        .map(|i| scale(spec.axis_direction, spec.length * i as f64 / n as f64))
        .collect::<Vec<_>>();
    let elements = (0..n).map(|e| [e, e + 1]).collect();
    let mut load = vec![0.0; (n + 1) * DOF_PER_NODE];
    for (axis, &f) in spec.tip_load.iter().enumerate() {
        load[BeamModel::dof(n, axis)] = f;
    }
    Ok(BeamModel {
        nodes,
        elements,
        fixed_dofs: (0..DOF_PER_NODE).collect(),
        load,
        frame: spec.local_frame(),
    })
}

/// 12x12 local stiffness and consistent mass of one element.
pub fn element_matrices(
    spec: &BeamSpec,
    element_index: usize,
) -> Result<(RealMatrix, RealMatrix), BeamError> {
    spec.validate()?;
    if element_index >= spec.n_elements {
        return Err(BeamError::ElementIndex {
            index: element_index,
            count: spec.n_elements,
        });
    }
    Ok(local_matrices(spec, spec.element_length()))
}

fn local_matrices(spec: &BeamSpec, le: f64) -> (RealMatrix, RealMatrix) {
    let sec = &spec.section;
    let mat = &spec.material;
    let e = mat.youngs_modulus;
    let a = sec.area();
    let mut k = RealMatrix::zeros(12, 12);
    let mut m = RealMatrix::zeros(12, 12);

    let put = |target: &mut RealMatrix, idx: &[usize], block: &[&[f64]], factor: f64| {
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                target[(i, j)] += factor * block[r][c];
            }
        }
    };

    let l = le;
    let l2 = le * le;
    let bar = [&[1.0, -1.0][..], &[-1.0, 1.0][..]];
    let bar_mass = [&[2.0, 1.0][..], &[1.0, 2.0][..]];

    put(&mut k, &[0, 6], &bar, e * a / l);
    put(
        &mut k,
        &[3, 9],
        &bar,
        mat.shear_modulus() * sec.torsion_constant() / l,
    );
    put(
        &mut k,
        &[1, 5, 7, 11],
        &[
            &[12.0, 6.0 * l, -12.0, 6.0 * l],
            &[6.0 * l, 4.0 * l2, -6.0 * l, 2.0 * l2],
            &[-12.0, -6.0 * l, 12.0, -6.0 * l],
            &[6.0 * l, 2.0 * l2, -6.0 * l, 4.0 * l2],
        ],
        e * sec.i_z() / (l2 * l),
    );
    put(
        &mut k,
        &[2, 4, 8, 10],
        &[
            &[12.0, -6.0 * l, -12.0, -6.0 * l],
            &[-6.0 * l, 4.0 * l2, 6.0 * l, 2.0 * l2],
            &[-12.0, 6.0 * l, 12.0, 6.0 * l],
            &[-6.0 * l, 2.0 * l2, 6.0 * l, 4.0 * l2],
        ],
        e * sec.i_y() / (l2 * l),
    );

    let rho = mat.density;
    put(&mut m, &[0, 6], &bar_mass, rho * a * l / 6.0);
    put(
        &mut m,
        &[3, 9],
        &bar_mass,
        rho * sec.polar_moment() * l / 6.0,
    );
    put(
        &mut m,
        &[1, 5, 7, 11],
        &[
            &[156.0, 22.0 * l, 54.0, -13.0 * l],
            &[22.0 * l, 4.0 * l2, 13.0 * l, -3.0 * l2],
            &[54.0, 13.0 * l, 156.0, -22.0 * l],
            &[-13.0 * l, -3.0 * l2, -22.0 * l, 4.0 * l2],
        ],
        rho * a * l / 420.0,
    );
    put(
        &mut m,
        &[2, 4, 8, 10],
        &[
            &[156.0, -22.0 * l, 54.0, 13.0 * l],
            &[-22.0 * l, 4.0 * l2, -13.0 * l, -3.0 * l2],
            &[54.0, -13.0 * l, 156.0, 22.0 * l],
            &[13.0 * l, -3.0 * l2, 22.0 * l, 4.0 * l2],
        ],
        rho * a * l / 420.0,
    );
    (k, m)
}

/// `Tᵀ A T` with `T = diag(λ, λ, λ, λ)`, `λ` rows being the local axes.
fn to_global(local: &RealMatrix, frame: &[Vec3; 3]) -> RealMatrix {
    let mut t = RealMatrix::zeros(12, 12);
    for block in 0..4 {
        for (r, axis) in frame.iter().enumerate() {
            for c in 0..3 {
                t[(3 * block + r, 3 * block + c)] = axis[c];
            }
        }
    }
    let at = local.matmul(&t).expect("12x12");
    t.transpose().matmul(&at).expect("12x12")
}

/// Global stiffness and mass over all DOFs, before constraints.
pub fn assemble(model: &BeamModel, spec: &BeamSpec) -> (RealMatrix, RealMatrix) {
    let n = model.n_dofs();
    let mut k = RealMatrix::zeros(n, n);
    let mut m = RealMatrix::zeros(n, n);
    for &[a, b] in &model.elements {
        let le = norm(sub(model.nodes[b], model.nodes[a]));
        let (kl, ml) = local_matrices(spec, le);
        let kg = to_global(&kl, &model.frame);
        let mg = to_global(&ml, &model.frame);
        let dofs: Vec<usize> = (0..DOF_PER_NODE)
            .map(|c| BeamModel::dof(a, c))
            .chain((0..DOF_PER_NODE).map(|c| BeamModel::dof(b, c)))
            .collect();
        for (r, &i) in dofs.iter().enumerate() {
            for (c, &j) in dofs.iter().enumerate() {
                k[(i, j)] += kg[(r, c)];
                m[(i, j)] += mg[(r, c)];
            }
        }
    }
    (k, m)
}

/// System restricted to the free DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub k: RealMatrix,
    pub m: RealMatrix,
    pub c: Option<RealMatrix>,
    pub f: Vec<f64>,
    /// Full-system index of each reduced DOF.
    pub free_dofs: Vec<usize>,
    pub total_dofs: usize,
}

impl ReducedSystem {
    /// Scatters a reduced vector back to all DOFs, zeros at fixed ones.
    pub fn expand<T: Copy + Default>(&self, reduced: &[T]) -> Vec<T> {
        let mut full = vec![T::default(); self.total_dofs];
        for (&dof, &v) in self.free_dofs.iter().zip(reduced) {
            full[dof] = v;
        }
        full
    }
}

/// Deletes the rows and columns of `fixed_dofs`.
pub fn apply_constraints(
    k: &RealMatrix,
    m: &RealMatrix,
    c: Option<&RealMatrix>,
    f: &[f64],
    fixed_dofs: &[usize],
) -> Result<ReducedSystem, BeamError> {
    let total = k.rows();
    if let Some(&index) = fixed_dofs.iter().find(|&&d| d >= total) {
        return Err(BeamError::BadFixedDof { index, total });
    }
    let free: Vec<usize> = (0..total).filter(|d| !fixed_dofs.contains(d)).collect();
    if free.is_empty() {
        return Err(BeamError::EmptySystem);
    }
    Ok(ReducedSystem {
        k: k.select(&free, &free),
        m: m.select(&free, &free),
        c: c.map(|c| c.select(&free, &free)),
        f: free.iter().map(|&d| f[d]).collect(),
        free_dofs: free,
        total_dofs: total,
    })
}

/// Rayleigh coefficients for `C = alpha·M + beta·K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighDamping {
    /// 1/s
    pub alpha: f64,
    /// s
    pub beta: f64,
}

impl RayleighDamping {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, BeamError> {
        if !(alpha >= 0.0 && beta >= 0.0)
            || (alpha == 0.0 && beta == 0.0)
            || !alpha.is_finite()
            || !beta.is_finite()
        {
            return Err(BeamError::InvalidDamping { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    /// Stiffness-proportional damping giving ratio `zeta` at `freq_hz`.
    pub fn stiffness_proportional(zeta: f64, freq_hz: f64) -> Result<Self, BeamError> {
        Self::new(0.0, 2.0 * zeta / angular(freq_hz))
    }

    /// Modal damping ratio `alpha/(2ω) + beta·ω/2` at `freq_hz`.
    pub fn modal_ratio(&self, freq_hz: f64) -> f64 {
        let w = angular(freq_hz);
        self.alpha / (2.0 * w) + self.beta * w / 2.0
    }
}

pub fn rayleigh_damping(
    k: &RealMatrix,
    m: &RealMatrix,
    alpha: f64,
    beta: f64,
) -> Result<RealMatrix, BeamError> {
    let d = RayleighDamping::new(alpha, beta)?;
    Ok(m.scale(d.alpha).add_scaled(d.beta, k)?)
}

pub fn static_solve(k: &RealMatrix, f: &[f64]) -> Result<Vec<f64>, BeamError> {
    Ok(lu_factor(k)?.solve(f)?)
}

fn dynamic_matrix(
    k: &RealMatrix,
    m: &RealMatrix,
    c: Option<&RealMatrix>,
    omega: f64,
) -> Result<crate::numerics::ComplexMatrix, BeamError> {
    let n = k.rows();
    let w2 = omega * omega;
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let re = k[(i, j)] - w2 * m[(i, j)];
            let im = c.map_or(0.0, |c| omega * c[(i, j)]);
            data.push(Complex64::new(re, im));
        }
    }
    Ok(crate::numerics::ComplexMatrix::from_row_major(n, n, data)?)
}

/// Solves `(K - ω²M + iωC) u = F` at `ω = 2π·freq_hz`.
pub fn harmonic_solve(
    k: &RealMatrix,
    m: &RealMatrix,
    c: Option<&RealMatrix>,
    f: &[f64],
    freq_hz: f64,
) -> Result<Vec<Complex64>, BeamError> {
    let a = dynamic_matrix(k, m, c, angular(freq_hz))?;
    let rhs: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok(lu_factor(&a)?.solve(&rhs)?)
}

/// `‖(K - ω²M + iωC) u - F‖ / ‖F‖`.
pub fn dynamic_residual(
    k: &RealMatrix,
    m: &RealMatrix,
    c: Option<&RealMatrix>,
    f: &[f64],
    freq_hz: f64,
    u: &[Complex64],
) -> Result<f64, BeamError> {
    let a = dynamic_matrix(k, m, c, angular(freq_hz))?;
    let au = a.mul_vec(u)?;
    let r: Vec<Complex64> = au
        .iter()
        .zip(f)
        .map(|(&x, &b)| x - Complex64::new(b, 0.0))
        .collect();
    Ok(norm2(&r) / norm2(f))
}

/// Per global axis, the largest translational amplitude over all nodes.
/// `u` is indexed like `model.free_dofs()`.
pub fn max_displacements(u: &[Complex64], model: &BeamModel) -> Vec3 {
    let mut out = [0.0f64; 3];
    for (&dof, v) in model.free_dofs().iter().zip(u) {
        let component = dof % DOF_PER_NODE;
        if component < 3 {
            out[component] = out[component].max(v.norm());
        }
    }
    out
}

/// Real-valued variant of [`max_displacements`] for static fields.
pub fn max_static_displacements(u: &[f64], model: &BeamModel) -> Vec3 {
    let complex: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    max_displacements(&complex, model)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseRow {
    pub freq_hz: f64,
    pub ux_max: f64,
    pub uy_max: f64,
    pub uz_max: f64,
}

impl ResponseRow {
    pub fn maxima(&self) -> Vec3 {
        [self.ux_max, self.uy_max, self.uz_max]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResponseTable {
    pub rows: Vec<ResponseRow>,
}

impl ResponseTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn channel(&self, axis: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.maxima()[axis]).collect()
    }
}

impl fmt::Display for ResponseRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            self.freq_hz, self.ux_max, self.uy_max, self.uz_max
        )
    }
}

/// Assembled, constrained, and damped beam ready for per-frequency solves.
/// Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct HarmonicSystem {
    pub model: BeamModel,
    pub reduced: ReducedSystem,
    pub damping: RayleighDamping,
}

impl HarmonicSystem {
    pub fn new(spec: &BeamSpec, damping: RayleighDamping) -> Result<Self, BeamError> {
        let model = build_mesh(spec)?;
        let (k, m) = assemble(&model, spec);
        let c = rayleigh_damping(&k, &m, damping.alpha, damping.beta)?;
        let reduced = apply_constraints(&k, &m, Some(&c), &model.load, &model.fixed_dofs)?;
        Ok(Self {
            model,
            reduced,
            damping,
        })
    }

    pub fn solve(&self, freq_hz: f64) -> Result<Vec<Complex64>, BeamError> {
        let r = &self.reduced;
        harmonic_solve(&r.k, &r.m, r.c.as_ref(), &r.f, freq_hz)
    }

    pub fn residual(&self, freq_hz: f64, u: &[Complex64]) -> Result<f64, BeamError> {
        let r = &self.reduced;
        dynamic_residual(&r.k, &r.m, r.c.as_ref(), &r.f, freq_hz, u)
    }

    pub fn response_at(&self, freq_hz: f64) -> Result<ResponseRow, BeamError> {
        let u = self.solve(freq_hz)?;
        let [ux_max, uy_max, uz_max] = max_displacements(&u, &self.model);
        Ok(ResponseRow {
            freq_hz,
            ux_max,
            uy_max,
            uz_max,
        })
    }

    /// Collects per-frequency results in grid order, reporting every failure.
    pub fn collect_rows<I>(results: I) -> Result<ResponseTable, BeamError>
    where
        I: IntoIterator<Item = (f64, Result<ResponseRow, BeamError>)>,
    {
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        for (f, r) in results {
            match r {
                Ok(row) => rows.push(row),
                Err(BeamError::Linalg(e)) => failures.push((f, e)),
                Err(other) => {
                    return Err(BeamError::AtFrequency {
                        freq_hz: f,
                        source: Box::new(other),
                    })
                }
            }
        }
        if failures.is_empty() {
            Ok(ResponseTable { rows })
        } else {
            Err(BeamError::SweepFailed { failures })
        }
    }
}

/// Assembles once and solves one complex system per grid frequency.
pub fn frequency_sweep(
    spec: &BeamSpec,
    grid: &FrequencyGrid,
    damping: RayleighDamping,
) -> Result<ResponseTable, BeamError> {
    let system = HarmonicSystem::new(spec, damping)?;
    HarmonicSystem::collect_rows(grid.values().iter().map(|&f| (f, system.response_at(f))))
}

fn reduced_undamped(spec: &BeamSpec) -> Result<(BeamModel, ReducedSystem), BeamError> {
    let model = build_mesh(spec)?;
    let (k, m) = assemble(&model, spec);
    let reduced = apply_constraints(&k, &m, None, &model.load, &model.fixed_dofs)?;
    Ok((model, reduced))
}

fn det_sign_at(r: &ReducedSystem, freq_hz: f64) -> i8 {
    let w = angular(freq_hz);
    match r.k.add_scaled(-w * w, &r.m) {
        Ok(a) => det_sign(&a),
        Err(_) => 0,
    }
}

/// Natural frequencies in `(0, f_max]` from sign changes of `det(K - ω²M)`
/// on a uniform scan, each refined by bisection to [`MODAL_TOLERANCE`].
pub fn natural_frequencies(
    spec: &BeamSpec,
    f_max: f64,
    scan_points: usize,
) -> Result<Vec<f64>, BeamError> {
    if scan_points < 100 {
        return Err(BeamError::InvalidSpec {
            field: "scan_points",
            reason: "must be at least 100",
        });
    }
    if !(f_max > 0.0) || !f_max.is_finite() {
        return Err(BeamError::InvalidSpec {
            field: "f_max",
            reason: "must be positive",
        });
    }
    let (_, reduced) = reduced_undamped(spec)?;
    Ok(scan_roots(&reduced, f_max, scan_points))
}

fn scan_roots(r: &ReducedSystem, f_max: f64, scan_points: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut lo = 0.0;
    let mut sign_lo = det_sign_at(r, lo);
    for i in 1..=scan_points {
        let hi = f_max * i as f64 / scan_points as f64;
        let sign_hi = det_sign_at(r, hi);
        if sign_hi == 0 {
            roots.push(hi);
        } else if sign_lo != 0 && sign_hi != sign_lo {
            roots.push(bisect(r, lo, hi, sign_lo));
        }
        lo = hi;
        sign_lo = sign_hi;
    }
    roots
}

fn bisect(r: &ReducedSystem, mut lo: f64, mut hi: f64, sign_lo: i8) -> f64 {
    while hi - lo > MODAL_TOLERANCE * 0.5 * hi {
        let mid = 0.5 * (lo + hi);
        match det_sign_at(r, mid) {
            0 => return mid,
            s if s == sign_lo => lo = mid,
            _ => hi = mid,
        }
    }
    0.5 * (lo + hi)
}

/// Dominant deformation family of a mode, judged in the local frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Axial,
    /// Deflection along local y (width direction).
    BendingY,
    /// Deflection along local z (height direction).
    BendingZ,
    Torsion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub freq_hz: f64,
    pub kind: ModeKind,
    /// Full-DOF mode shape, global axes, max-normalized.
    pub shape: Vec<f64>,
}

/// [`natural_frequencies`] with each mode's shape recovered by inverse
/// iteration and classified.
pub fn modes(spec: &BeamSpec, f_max: f64, scan_points: usize) -> Result<Vec<Mode>, BeamError> {
    let freqs = natural_frequencies(spec, f_max, scan_points)?;
    let (model, reduced) = reduced_undamped(spec)?;
    freqs
        .into_iter()
        .map(|f| {
            let shape = reduced.expand(&mode_shape(&reduced, f)?);
            let kind = classify(&shape, &model, &spec.section);
            Ok(Mode {
                freq_hz: f,
                kind,
                shape,
            })
        })
        .collect()
}

fn mode_shape(r: &ReducedSystem, freq_hz: f64) -> Result<Vec<f64>, BeamError> {
    let w = angular(freq_hz);
    let shifted = r.k.add_scaled(-w * w * (1.0 - 1e-9), &r.m)?;
    let lu = lu_factor(&shifted)?;
    let n = r.k.rows();
    // Deterministic start vector with components in every DOF family.
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.37 * ((i * 7919) % 13) as f64)
        .collect();
    for _ in 0..6 {
        let mx = r.m.mul_vec(&x)?;
        x = lu.solve(&mx)?;
        let peak = x.iter().fold(0.0, |a: f64, v| a.max(libm::fabs(*v)));
        x.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(x)
}

fn classify(shape: &[f64], model: &BeamModel, section: &CrossSection) -> ModeKind {
    let [ex, ey, ez] = model.frame;
    let gyration2 = section.polar_moment() / section.area();
    let mut share = [0.0; 4];
    for node in 0..model.n_nodes() {
        let base = node * DOF_PER_NODE;
        let t = [shape[base], shape[base + 1], shape[base + 2]];
        let r = [shape[base + 3], shape[base + 4], shape[base + 5]];
        share[0] += dot(t, ex).powi(2);
        share[1] += dot(t, ey).powi(2);
        share[2] += dot(t, ez).powi(2);
        share[3] += gyration2 * dot(r, ex).powi(2);
    }
    let best = (0..4)
        .max_by(|&a, &b| share[a].total_cmp(&share[b]))
        .unwrap_or(0);
    [
        ModeKind::Axial,
        ModeKind::BendingY,
        ModeKind::BendingZ,
        ModeKind::Torsion,
    ][best]
}

/// Euler–Bernoulli cantilever frequency (Hz) for mode constant `beta_l`
/// (1.875104, 4.694091, ...) using second moment `second_moment`.
pub fn cantilever_frequency(spec: &BeamSpec, beta_l: f64, second_moment: f64) -> f64 {
    let mat = &spec.material;
    let a = spec.section.area();
    let l = spec.length;
    beta_l * beta_l / (2.0 * core::f64::consts::PI)
        * libm::sqrt(mat.youngs_modulus * second_moment / (mat.density * a * l.powi(4)))
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    libm::sqrt(dot(a, a))
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn normalize(a: Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}
