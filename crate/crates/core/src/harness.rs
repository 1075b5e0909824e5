//! Reproducible experiments: the `f_n` separation between dyadic and full
//! `H^1`, constant-1 pairing checks and equivalence-ratio ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::atoms::{special_atom, AtomCert, SpecialAtomId, SpecialBasis};
use crate::dyadic::{Cube, DyadicBox, DyadicCube, Family, ScaleWindow};
use crate::error::{Error, Result};
use crate::lipnorm::{default_window, lambda_norm_with, NormReport};
use crate::atoms::a_alpha_with;
use crate::par::Exec;
use crate::pwpoly::{ingest, AlphaContext, Discretization, PPFunction, Piece, PieceFn};

/// Deepest staircase or `f_n` level; keeps every breakpoint exact in f64.
pub const MAX_DEPTH: u32 = 50;

fn constant_cell(level: i32, k: i64, value: f64) -> (DyadicCube, Vec<f64>) {
    let c = DyadicCube::new(level, vec![k]);
    let vol = c.corners().volume();
    (c, vec![value * vol.sqrt()])
}

fn two() -> DyadicBox {
    DyadicBox::from_f64(&[0.0], &[2.0]).expect("static box")
}

/// `j` on `[1 - 2^-j, 1 - 2^(-j-1)]` for `j = 1..=m`, 0 on `[0, 1/2]` and
/// `[1, 2]`, and `m + 2` on the last cell `[1 - 2^(-m-1), 1]`, which is the
/// mean the untruncated staircase has there. Domain `[0, 2]`, mesh `m + 1`.
pub fn staircase_g(m: u32) -> Result<PPFunction> {
    if m == 0 || m > MAX_DEPTH {
        return Err(Error::param("m", format!("must lie in 1..={MAX_DEPTH}")));
    }
    let mut cells = vec![constant_cell(-1, 1, 0.0)];
    for j in 1..=m as i32 {
        cells.push(constant_cell(-j - 1, (1i64 << (j + 1)) - 1, j as f64));
    }
    let top = m as i32 + 1;
    cells.push(constant_cell(-top, 1i64 << top, (m + 2) as f64));
    cells.push(constant_cell(0, 2, 0.0));
    PPFunction::from_cells(two(), top, 0, cells)
}

/// `f_n = 2^n (chi_[1-2^-n, 1] - chi_[1, 1+2^-n])` on `[0, 2]`.
pub fn fn_function(n: u32) -> Result<PPFunction> {
    if n == 0 || n > MAX_DEPTH {
        return Err(Error::param("n", format!("must lie in 1..={MAX_DEPTH}")));
    }
    let h = (n as f64).exp2();
    let k = 1i64 << n;
    let cells = vec![constant_cell(-(n as i32), k, h), constant_cell(-(n as i32), k + 1, -h)];
    PPFunction::from_cells(two(), n as i32, 0, cells)
}

#[derive(Clone, Debug, Serialize)]
pub struct FnReport {
    pub n: u32,
    pub depth: u32,
    pub special_id: SpecialAtomId,
    /// `f_n = c p^1_{n,-2^n,0}`.
    pub coefficient: f64,
    /// `||f_n - c p||_2 / ||f_n||_2`.
    pub representation_residual: f64,
    /// Special atomic cost of the one-term representation, `|c|`.
    pub upper_bound: f64,
    pub pairing: f64,
    pub staircase_norm: NormReport,
    /// `<f_n, g_m> / ||g_m||_{Lambda_0, D}`.
    pub lower_bound: f64,
    /// `lower_bound / upper_bound`.
    pub separation: f64,
}

pub fn fn_counterexample(n: u32, m: u32) -> Result<FnReport> {
    fn_counterexample_with(n, m, Exec::default())
}

pub fn fn_counterexample_with(n: u32, m: u32, exec: Exec) -> Result<FnReport> {
    if m < n + 8 {
        return Err(Error::InsufficientDepth { n, depth: m });
    }
    let ctx = AlphaContext::new(1, 0.0)?;
    let basis = SpecialBasis::build(&ctx)?;
    let f = fn_function(n)?;
    let id = SpecialAtomId::new(1, n as i32, vec![-(1i64 << n)]);
    let p = special_atom(&basis, &id)?;
    let c = f.inner_product_with(&p, exec) / p.norm_sq();
    let representation_residual = PPFunction::combine(1.0, &f, -c, &p)?.norm() / f.norm();
    let g = staircase_g(m)?;
    let pairing = f.inner_product_with(&g, exec);
    let staircase_norm = lambda_norm_with(&g, &ctx, Family::D, &default_window(&g), exec)?;
    let upper_bound = c.abs();
    let lower_bound = pairing.abs() / staircase_norm.norm;
    Ok(FnReport {
        n,
        depth: m,
        special_id: id,
        coefficient: c,
        representation_residual,
        upper_bound,
        pairing,
        staircase_norm,
        lower_bound,
        separation: lower_bound / upper_bound,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// `Jump` for `alpha = 0`, `Continuous` otherwise.
    #[default]
    Auto,
    /// Independent degree `[alpha] + 1` polynomials per cell.
    Jump,
    /// Value-continuous, vanishing on the boundary of the domain.
    Continuous,
}

impl Generator {
    pub fn resolve(self, alpha: f64) -> Generator {
        match self {
            Generator::Auto if alpha == 0.0 => Generator::Jump,
            Generator::Auto => Generator::Continuous,
            g => g,
        }
    }
}

/// Random piecewise polynomial on `[-1, 1]^N` with cells of level `-mesh_level`.
pub fn random_pp(seed: u64, ctx: &AlphaContext, mesh_level: i32, generator: Generator) -> Result<PPFunction> {
    if !(0..=12).contains(&mesh_level) {
        return Err(Error::param("mesh_level", "must lie in 0..=12"));
    }
    let dim = ctx.dim();
    let per_axis = 1i64 << (mesh_level + 1);
    if (per_axis as u64).checked_pow(dim as u32).is_none_or(|c| c > 1 << 20) {
        return Err(Error::ResourceLimit(format!("{per_axis}^{dim} cells")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = DyadicBox::q0(dim);
    let d = ctx.degree();
    match generator.resolve(ctx.alpha()) {
        Generator::Jump | Generator::Auto => {
            let deg = d + 1;
            let len = crate::legendre::poly_space_dim(dim, deg);
            let cells = domain
                .dyadic_tiling(0)?
                .iter()
                .flat_map(|c| c.descendants(-mesh_level))
                .map(|c| {
                    let scale = c.corners().volume().sqrt();
                    let v = (0..len).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
                    (c, v)
                })
                .collect();
            PPFunction::from_cells(domain, mesh_level, deg, cells)
        }
        Generator::Continuous => {
            let nodes = (per_axis + 1) as usize;
            let h = 2.0 / per_axis as f64;
            let total = nodes.pow(dim as u32);
            let mut values = vec![0.0; total];
            for (i, v) in values.iter_mut().enumerate() {
                let mut r = i;
                let interior = (0..dim).all(|_| {
                    let t = r % nodes;
                    r /= nodes;
                    t != 0 && t != nodes - 1
                });
                if interior {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            // 1-D only: bubbles (x-a)(b-x)/h^2 times a random polynomial of
            // degree d-1 raise the degree to d+1.
            let bubbles: Vec<Vec<f64>> = if dim == 1 && d >= 1 {
                (0..per_axis).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
            } else {
                Vec::new()
            };
            let deg = if dim == 1 { d + 1 } else { (d + 1).max(dim) };
            let f = move |x: &[f64]| -> f64 {
                let mut cell = vec![0usize; x.len()];
                let mut frac = vec![0.0; x.len()];
                for (a, &xa) in x.iter().enumerate() {
                    let t = (xa + 1.0) / h;
                    let c = (t.floor().max(0.0) as usize).min(nodes - 2);
                    cell[a] = c;
                    frac[a] = t - c as f64;
                }
                let mut acc = 0.0;
                for corner in 0..(1usize << x.len()) {
                    let mut idx = 0;
                    let mut w = 1.0;
                    for a in (0..x.len()).rev() {
                        let up = (corner >> a) & 1;
                        idx = idx * nodes + cell[a] + up;
                        w *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
                    }
                    acc += w * values[idx];
                }
                if let Some(b) = bubbles.get(cell[0]) {
                    let s = frac[0];
                    let u = 2.0 * s - 1.0;
                    acc += s * (1.0 - s) * b.iter().rev().fold(0.0, |p, c| p * u + c);
                }
                acc
            };
            ingest(&[Piece { region: domain.clone(), f: PieceFn::analytic(f) }], &Discretization::new(domain, mesh_level, deg))
        }
    }
}

/// Random atom on the cube `q`: random degree `[alpha] + 1` cells a quarter
/// of the side of `q` (or finer, to respect its corners), minus the
/// projection onto degree `[alpha]` on `q`, scaled to size exactly 1.
pub fn random_atom(seed: u64, q: &DyadicBox, ctx: &AlphaContext) -> Result<PPFunction> {
    if q.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch { expected: ctx.dim(), got: q.dim() });
    }
    let side = q.cube_side().ok_or_else(|| Error::NotACube(q.to_string()))?;
    if side.is_zero() {
        return Err(Error::DegenerateBox(q.to_string()));
    }
    let level = q.alignment_level(side.log2_floor() - 2);
    let tiles = q.dyadic_tiling(level)?;
    let count: u64 = tiles
        .iter()
        .map(|t| 1u64.checked_shl(((t.level - level) as u32) * q.dim() as u32).unwrap_or(u64::MAX))
        .fold(0, u64::saturating_add);
    if count > 1 << 16 {
        return Err(Error::ResourceLimit(format!("{count} cells for a random atom on {q}")));
    }
    let deg = ctx.degree() + 1;
    let len = crate::legendre::poly_space_dim(ctx.dim(), deg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<_> = tiles
        .iter()
        .flat_map(|t| t.descendants(level))
        .map(|c| {
            let v = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (c, v)
        })
        .collect();
    let f = PPFunction::from_cells(q.clone(), -level, deg, cells)?;
    let proj = f.project_poly(q, ctx.degree())?.to_function(-level)?;
    let a = PPFunction::combine(1.0, &f, -1.0, &proj)?;
    let size = q.volume().powf(1.0 / ctx.p() - 0.5) * a.norm();
    if size == 0.0 {
        return Err(Error::InvalidAtom("random draw vanished".into()));
    }
    Ok(a.scale(1.0 / size))
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    pub cube: Cube,
    /// `<g, a>`.
    pub pairing: f64,
    pub lambda_norm: NormReport,
    /// `lambda_norm + 1e-9 - |<g, a>|`.
    pub slack: f64,
    pub holds: bool,
}

/// Absolute allowance in the constant-1 pairing inequality.
pub const PAIRING_TOL: f64 = 1e-9;

pub fn pairing_check(
    g: &PPFunction,
    a: &AtomCert,
    family: Family,
    w: &ScaleWindow,
) -> Result<PairingReport> {
    pairing_check_with(g, a, family, w, Exec::default())
}

pub fn pairing_check_with(
    g: &PPFunction,
    a: &AtomCert,
    family: Family,
    w: &ScaleWindow,
    exec: Exec,
) -> Result<PairingReport> {
    if !a.pass {
        return Err(Error::InvalidAtom(format!("atom does not validate against {}", a.cube)));
    }
    let cube = Cube::from_box(family, &a.cube).ok_or_else(|| Error::CubeOutsideWindow {
        cube: a.cube.to_string(),
        reason: format!("not a member of {family}"),
    })?;
    if !w.contains_level(cube.level()) {
        return Err(Error::CubeOutsideWindow {
            cube: a.cube.to_string(),
            reason: format!("level {} outside {}..={}", cube.level(), w.n_min, w.n_max),
        });
    }
    if !cube.corners().interiors_intersect(&w.bbox) {
        return Err(Error::CubeOutsideWindow { cube: a.cube.to_string(), reason: "misses the window box".into() });
    }
    let pairing = g.inner_product_with(&a.atom, exec);
    let lambda_norm = lambda_norm_with(g, &a.ctx, family, w, exec)?;
    let slack = lambda_norm.norm + PAIRING_TOL - pairing.abs();
    Ok(PairingReport { cube, pairing, lambda_norm, slack, holds: slack >= 0.0 })
}

fn default_alphas() -> Vec<f64> {
    vec![0.0]
}

fn default_ensemble() -> usize {
    50
}

fn default_mesh() -> i32 {
    4
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dim: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    #[serde(default = "default_mesh")]
    pub mesh_level: i32,
    /// Defaults to [`default_window`] of each sample.
    #[serde(default)]
    pub window: Option<ScaleWindow>,
    #[serde(default)]
    pub generator: Generator,
    /// Every sample is multiplied by this factor.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub seed: u64,
    pub lam_d: f64,
    pub a_alpha: f64,
    pub lam_d0: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub alpha: f64,
    pub generator: Generator,
    /// `alpha >= 1`: continuity does not place samples in `Lambda_alpha`.
    pub experimental: bool,
    pub samples: Vec<RatioSample>,
    /// Seeds whose denominator vanished.
    pub skipped: Vec<u64>,
    pub min: f64,
    pub max: f64,
    /// `max / min`.
    pub spread: f64,
}

pub const CSV_HEADER: &str = "seed,lam_D,a_alpha,lam_D0,ratio";

impl RatioReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.samples {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.seed,
                crate::report::fmt_f64(r.lam_d),
                crate::report::fmt_f64(r.a_alpha),
                crate::report::fmt_f64(r.lam_d0),
                crate::report::fmt_f64(r.ratio)
            ));
        }
        s
    }
}

/// One [`RatioReport`] per entry of `cfg.alphas`.
pub fn equivalence_experiment(cfg: &ExperimentConfig) -> Result<Vec<RatioReport>> {
    equivalence_experiment_with(cfg, Exec::default())
}

pub fn equivalence_experiment_with(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<RatioReport>> {
    if cfg.alphas.is_empty() {
        return Err(Error::param("alphas", "empty"));
    }
    if !(cfg.scale.is_finite() && cfg.scale != 0.0) {
        return Err(Error::param("scale", "must be finite and nonzero"));
    }
    cfg.alphas.iter().map(|&alpha| ratio_ensemble(cfg, alpha, exec)).collect()
}

fn ratio_ensemble(cfg: &ExperimentConfig, alpha: f64, exec: Exec) -> Result<RatioReport> {
    let ctx = AlphaContext::new(cfg.dim, alpha)?;
    let generator = cfg.generator.resolve(alpha);
    if generator == Generator::Jump && alpha > 0.0 {
        return Err(Error::param("generator", "jump samples are not in Lambda_alpha for alpha > 0"));
    }
    let basis = SpecialBasis::build(&ctx)?;
    let seeds: Vec<u64> = (0..cfg.ensemble as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    // Samples run in parallel; each sample's own norms run sequentially.
    let rows = exec.try_map(&seeds, |&seed| -> Result<RatioSample> {
        let g = random_pp(seed, &ctx, cfg.mesh_level, generator)?.scale(cfg.scale);
        let w = cfg.window.clone().unwrap_or_else(|| default_window(&g));
        let lam_d = lambda_norm_with(&g, &ctx, Family::D, &w, Exec::Sequential)?.norm;
        let a_alpha = a_alpha_with(&g, &basis, &w, Exec::Sequential)?.norm;
        let lam_d0 = lambda_norm_with(&g, &ctx, Family::D0, &w, Exec::Sequential)?.norm;
        let denom = lam_d + a_alpha;
        let ratio = if denom > 0.0 { lam_d0 / denom } else { f64::NAN };
        Ok(RatioSample { seed, lam_d, a_alpha, lam_d0, ratio })
    })?;
    let (samples, skipped): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r.ratio.is_finite());
    let skipped: Vec<u64> = skipped.into_iter().map(|r| r.seed).collect();
    let min = samples.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max = samples.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let spread = if samples.is_empty() { f64::NAN } else { max / min };
    Ok(RatioReport { alpha, generator, experimental: alpha >= 1.0, samples, skipped, min, max, spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::validate_atom;

    #[test]
    fn staircase_values() {
        let g = staircase_g(24).unwrap();
        assert!((g.eval(&[0.8]) - 2.0).abs() < 1e-14);
        assert!((g.eval(&[0.25]) - 0.0).abs() < 1e-14);
        assert!((g.eval(&[1.5]) - 0.0).abs() < 1e-14);
    }

    #[test]
    fn fn_pairing_and_norm() {
        for (n, m) in [(2u32, 10u32), (4, 24)] {
            let f = fn_function(n).unwrap();
            let g = staircase_g(m).unwrap();
            assert!((f.inner_product(&g) - (n + 1) as f64).abs() < 1e-12);
            let ctx = AlphaContext::new(1, 0.0).unwrap();
            let r = lambda_norm_with(&g, &ctx, Family::D, &default_window(&g), Exec::Sequential).unwrap();
            let expect = (2.0 - (-(m as f64)).exp2()).sqrt();
            assert!((r.norm - expect).abs() < 1e-12, "{} vs {}", r.norm, expect);
        }
    }

    #[test]
    fn fn_demo_example() {
        let r = fn_counterexample(4, 24).unwrap();
        assert!((r.upper_bound - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.representation_residual < 1e-14);
        assert!((r.lower_bound - 5.0 / 2f64.sqrt()).abs() < 1e-6);
        assert!(matches!(fn_counterexample(4, 11), Err(Error::InsufficientDepth { .. })));
    }

    #[test]
    fn random_draws_are_seeded() {
        let ctx = AlphaContext::new(1, 0.5).unwrap();
        let a = random_pp(7, &ctx, 3, Generator::Auto).unwrap();
        let b = random_pp(7, &ctx, 3, Generator::Auto).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_pp(8, &ctx, 3, Generator::Auto).unwrap());
    }

    #[test]
    fn continuous_generator_is_continuous() {
        let ctx = AlphaContext::new(1, 1.0).unwrap();
        let g = random_pp(3, &ctx, 3, Generator::Continuous).unwrap();
        for i in 1..16 {
            let x = -1.0 + i as f64 / 8.0;
            assert!((g.eval(&[x - 1e-9]) - g.eval(&[x + 1e-9])).abs() < 1e-6);
        }
        assert!(g.eval(&[-1.0 + 1e-12]).abs() < 1e-9);
    }

    #[test]
    fn random_atom_is_an_atom() {
        for (dim, alpha) in [(1, 0.0), (2, 1.0)] {
            let ctx = AlphaContext::new(dim, alpha).unwrap();
            let q = DyadicBox::centered(dim, -1);
            let a = random_atom(11, &q, &ctx).unwrap();
            let c = validate_atom(&a, &q, &ctx).unwrap();
            assert!(c.pass);
            assert!((c.size - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn step_pairing_is_tight() {
        let ctx = AlphaContext::new(1, 0.0).unwrap();
        let domain = DyadicBox::from_f64(&[-8.0], &[8.0]).unwrap();
        let g = ingest(
            &[Piece { region: DyadicBox::from_f64(&[0.0], &[8.0]).unwrap(), f: PieceFn::constant(1.0) }],
            &Discretization::new(domain, 4, 0),
        )
        .unwrap();
        let a = ingest(
            &[
                Piece { region: DyadicBox::from_f64(&[-1.0], &[0.0]).unwrap(), f: PieceFn::constant(-0.5) },
                Piece { region: DyadicBox::from_f64(&[0.0], &[1.0]).unwrap(), f: PieceFn::constant(0.5) },
            ],
            &Discretization::new(DyadicBox::q0(1), 0, 0),
        )
        .unwrap();
        let cert = validate_atom(&a, &DyadicBox::q0(1), &ctx).unwrap();
        let w = ScaleWindow::new(-5, 2, DyadicBox::from_f64(&[-4.0], &[4.0]).unwrap()).unwrap();
        let r = pairing_check(&g, &cert, Family::D0, &w).unwrap();
        assert!((r.pairing - 0.5).abs() < 1e-15);
        assert!((r.lambda_norm.norm - 0.5).abs() < 1e-12);
        assert!(r.holds);
        assert!(matches!(pairing_check(&g, &cert, Family::D, &w), Err(Error::CubeOutsideWindow { .. })));
    }
}
