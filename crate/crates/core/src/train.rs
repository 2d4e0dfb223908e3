//! Initialisation from SfM points and the coarse and fine training stages.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::appearance::{backward_appearance, render_appearance, spawn_soup, AppearanceAttachment, AppearanceGrads};
use crate::control::*;
use crate::error::{Error, Result};
use crate::geometry::{logistic, TrianglePrimitive, Vec3};
use crate::io::text::{format_key_values, parse_key_values};
use crate::losses::*;
use crate::optim::Adam;
use crate::render::{self, RenderGrads, RenderSettings};
use crate::scene::SceneBundle;
use crate::soup::TriangleSoup;
use crate::spatial::PointIndex;

const GEOMETRY: u8 = 0;
const APPEARANCE: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub coarse_iters: usize,
    pub fine_iters: usize,
    pub seed: u64,
    pub lambda_d: f64,
    pub lambda_rgb: f64,
    pub lambda_c: f64,
    pub lambda_s: f64,
    pub lambda_entropy: f64,
    pub grad_threshold: f64,
    pub prune_alpha: f64,
    pub prune_gamma: f64,
    pub prune_interval: usize,
    pub entropy_window: usize,
    pub split_interval: usize,
    pub normal_spread: f64,
    pub enable_pruning: bool,
    pub enable_splitting: bool,
    /// Vertex rates are multiplied by the scene diagonal.
    pub lr_vertices_init: f64,
    pub lr_vertices_final: f64,
    pub lr_opacity: f64,
    pub lr_sharpness: f64,
    pub lr_smoothness: f64,
    pub lr_color: f64,
    pub lr_offset: f64,
    pub lr_scaling: f64,
    pub lr_offset_opacity: f64,
    pub lr_offset_scale: f64,
    pub lr_offset_rotation: f64,
    pub radius_factor: f64,
    pub offsets_per_triangle: usize,
    pub init_alpha: f64,
    pub init_sharpness: f64,
    pub init_smoothness: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        let d = DensityConfig::default();
        Self {
            coarse_iters: 10_000,
            fine_iters: 10_000,
            seed: 0,
            lambda_d: w.lambda_d,
            lambda_rgb: w.lambda_rgb,
            lambda_c: w.lambda_c,
            lambda_s: w.lambda_s,
            lambda_entropy: 0.1,
            grad_threshold: d.grad_threshold,
            prune_alpha: d.prune_alpha,
            prune_gamma: d.prune_gamma,
            prune_interval: d.prune_interval,
            entropy_window: d.entropy_window,
            split_interval: d.split_interval,
            normal_spread: d.normal_spread,
            enable_pruning: true,
            enable_splitting: true,
            lr_vertices_init: 1.6e-4,
            lr_vertices_final: 1.6e-6,
            lr_opacity: 5e-2,
            lr_sharpness: 5e-2,
            lr_smoothness: 5e-2,
            lr_color: 2.5e-3,
            lr_offset: 1e-2,
            lr_scaling: 7e-3,
            lr_offset_opacity: 5e-2,
            lr_offset_scale: 5e-3,
            lr_offset_rotation: 1e-3,
            radius_factor: 0.5,
            offsets_per_triangle: crate::appearance::DEFAULT_OFFSETS,
            init_alpha: 0.5,
            init_sharpness: 20.0,
            init_smoothness: 5.0,
        }
    }
}

macro_rules! config_keys {
    ($m:ident) => {
        $m!(
            coarse_iters, fine_iters, seed, lambda_d, lambda_rgb, lambda_c, lambda_s, lambda_entropy, grad_threshold, prune_alpha, prune_gamma, prune_interval, entropy_window, split_interval,
            normal_spread, enable_pruning, enable_splitting, lr_vertices_init, lr_vertices_final, lr_opacity, lr_sharpness, lr_smoothness, lr_color, lr_offset, lr_scaling, lr_offset_opacity,
            lr_offset_scale, lr_offset_rotation, radius_factor, offsets_per_triangle, init_alpha, init_sharpness, init_smoothness
        )
    };
}

impl TrainConfig {
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        macro_rules! pairs {
            ($($k:ident),*) => { vec![$((stringify!($k), self.$k.to_string())),*] };
        }
        config_keys!(pairs)
    }

    pub fn to_text(&self) -> String {
        format_key_values(self.to_pairs())
    }

    /// Overrides defaults with the keys of a `key=value` text.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(&parse_key_values(text)?)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in map {
            macro_rules! set {
                ($($key:ident),*) => {
                    match k.as_str() {
                        $(stringify!($key) => c.$key = v.parse().map_err(|_| Error::InvalidConfig(format!("bad value `{v}` for {k}")))?,)*
                        _ => return Err(Error::InvalidConfig(format!("unknown key `{k}`"))),
                    }
                };
            }
            config_keys!(set);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.lr_vertices_init,
            self.lr_vertices_final,
            self.lr_opacity,
            self.lr_sharpness,
            self.lr_smoothness,
            self.lr_color,
            self.lr_offset,
            self.lr_scaling,
            self.lr_offset_opacity,
            self.lr_offset_scale,
            self.lr_offset_rotation,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidConfig("learning rates must be positive".into()));
        }
        if self.prune_interval == 0 || self.split_interval == 0 {
            return Err(Error::InvalidConfig("density intervals must be positive".into()));
        }
        let pos = [self.radius_factor, self.init_sharpness, self.init_smoothness, self.normal_spread];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig("radius factor, kernel parameters and spread must be positive".into()));
        }
        if !(self.init_alpha > 0.0 && self.init_alpha < 1.0) || !(0.0..=1.0).contains(&self.lambda_c) {
            return Err(Error::InvalidConfig("init_alpha must lie in (0,1) and lambda_c in [0,1]".into()));
        }
        let weights = [self.lambda_d, self.lambda_rgb, self.lambda_s, self.lambda_entropy, self.grad_threshold, self.prune_alpha, self.prune_gamma];
        if weights.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig("weights and thresholds must be non-negative".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights { lambda_d: self.lambda_d, lambda_rgb: self.lambda_rgb, lambda_c: self.lambda_c, lambda_s: self.lambda_s }
    }

    pub fn density(&self) -> DensityConfig {
        DensityConfig {
            grad_threshold: self.grad_threshold,
            prune_alpha: self.prune_alpha,
            prune_gamma: self.prune_gamma,
            prune_interval: self.prune_interval,
            entropy_window: self.entropy_window,
            split_interval: self.split_interval,
            normal_spread: self.normal_spread,
        }
    }
}

/// Three vertices on a randomly oriented circle around each point, radius
/// `radius_factor` times the mean nearest-neighbour distance, with angular
/// gaps of at least 60 degrees.
pub fn init_from_points(points: &[Vec3], config: &TrainConfig) -> Result<TriangleSoup> {
    if points.is_empty() {
        return Err(Error::InsufficientPoints(0));
    }
    let radius = config.radius_factor * mean_nn_distance(points);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x1a17);
    let mut soup = TriangleSoup::new();
    for p in points {
        let n = random_unit(&mut rng);
        let u = if n.x.abs() < 0.9 { n.cross(&Vec3::x()) } else { n.cross(&Vec3::y()) }.normalize();
        let v = n.cross(&u);
        let theta0 = rng.random_range(0.0..std::f64::consts::TAU);
        // gaps = 60 deg + 180 deg * uniform simplex point
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let (lo, hi) = (a.min(b), a.max(b));
        let half = std::f64::consts::PI;
        let third = half / 3.0;
        let angles = [theta0, theta0 + third + half * lo, theta0 + 2.0 * third + half * hi];
        let vertices = angles.map(|t| p + (u * t.cos() + v * t.sin()) * radius);
        let id = soup.allocate_id();
        let mut tri = TrianglePrimitive::new(id, vertices, config.init_alpha, config.init_sharpness, config.init_smoothness);
        tri.appearance = AppearanceAttachment::initialize(&tri, config.offsets_per_triangle)?;
        soup.triangles.push(tri);
    }
    Ok(soup)
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Mean distance to the nearest other point; 1 for a single point.
pub fn mean_nn_distance(points: &[Vec3]) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    let index = PointIndex::new(points);
    let sum: f64 = points.iter().map(|p| index.knn(p, 2).get(1).map_or(0.0, |n| n.1)).sum();
    let mean = sum / points.len() as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// Pairs of (prior depth, SfM ray depth) for one view.
pub fn calibration_pairs(bundle: &SceneBundle, view: usize) -> (Vec<f64>, Vec<f64>) {
    let cam = &bundle.cameras[view];
    let depth = &bundle.views[view].depth;
    let (mut mono, mut metric) = (Vec::new(), Vec::new());
    for t in &bundle.tracks {
        for o in t.observations.iter().filter(|o| o.camera == cam.id) {
            let [x, y] = o.pixel;
            if !(x >= 0.0 && y >= 0.0 && x < cam.width as f64 && y < cam.height as f64) {
                continue;
            }
            let d = depth[y as usize * cam.width + x as usize];
            if d.is_finite() && d > 0.0 {
                mono.push(d);
                metric.push((bundle.points[t.point] - cam.center()).norm());
            }
        }
    }
    (mono, metric)
}

pub fn calibrate_view(bundle: &SceneBundle, view: usize) -> Result<CalibrationModel> {
    let (mono, metric) = calibration_pairs(bundle, view);
    calibrate_depth_ransac(&mono, &metric)
}

/// Supervision with the depth prior mapped through its calibration.
pub fn calibrated_supervision(bundle: &SceneBundle, view: usize, model: &CalibrationModel) -> SupervisionSet {
    let mut sup = bundle.supervision(view);
    for (d, ok) in sup.depth.iter_mut().zip(&sup.depth_valid) {
        if *ok {
            *d = model.apply(*d);
        }
    }
    sup.depth_valid = sup.depth.iter().zip(&sup.depth_valid).map(|(d, ok)| *ok && *d > 0.0).collect();
    sup
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub stage: &'static str,
    pub iteration: usize,
    /// Mean loss since the previous entry.
    pub loss: f64,
    pub triangles: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub calibration: Vec<(u32, CalibrationModel)>,
    pub initial_flips: usize,
    pub log: Vec<LogEntry>,
    pub splits: Vec<(usize, SplitReport)>,
    pub prunes: Vec<(usize, PruneReport)>,
    pub final_flips: usize,
}

/// Optimiser state shared by both stages.
pub struct Trainer<'a> {
    pub bundle: &'a SceneBundle,
    pub config: TrainConfig,
    pub settings: RenderSettings,
    pub supervision: Vec<SupervisionSet>,
    pub manifest: RunManifest,
    adam: Adam,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    extent: f64,
}

impl<'a> Trainer<'a> {
    /// Calibrates the depth prior of every training view.
    pub fn new(bundle: &'a SceneBundle, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let train = bundle.train_indices();
        if train.is_empty() {
            return Err(Error::InvalidConfig("scene has no training views".into()));
        }
        let mut supervision = Vec::with_capacity(bundle.cameras.len());
        let mut calibration = Vec::new();
        for v in 0..bundle.cameras.len() {
            if train.contains(&v) {
                let model = calibrate_view(bundle, v)?;
                calibration.push((bundle.cameras[v].id, model));
                supervision.push(calibrated_supervision(bundle, v, &model));
            } else {
                supervision.push(bundle.supervision(v));
            }
        }
        let extent = bundle.diagonal();
        let manifest = RunManifest { config_hash: config.hash(), seed: config.seed, threads: rayon::current_num_threads(), calibration, ..Default::default() };
        Ok(Self { bundle, settings: RenderSettings::for_scene(extent), supervision, manifest, adam: Adam::default(), rng: ChaCha8Rng::seed_from_u64(config.seed), order: Vec::new(), cursor: 0, extent, config })
    }

    fn next_view(&mut self) -> usize {
        if self.cursor >= self.order.len() {
            self.order = self.bundle.train_indices();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    fn vertex_lr(&self, global: usize) -> f64 {
        let total = (self.config.coarse_iters + self.config.fine_iters).max(1) as f64;
        let t = (global as f64 / total).clamp(0.0, 1.0);
        let (a, b) = (self.config.lr_vertices_init.ln(), self.config.lr_vertices_final.ln());
        (a + (b - a) * t).exp() * self.extent
    }

    fn geometry_step(&mut self, tri: &mut TrianglePrimitive, g_vert: &[Vec3; 3], g_kernel: [f64; 3], global: usize) {
        let mut p = [0.0; 12];
        let mut g = [0.0; 12];
        let mut lr = [self.vertex_lr(global); 12];
        for k in 0..3 {
            for c in 0..3 {
                p[3 * k + c] = tri.vertices[k][c];
                g[3 * k + c] = g_vert[k][c];
            }
        }
        p[9..].copy_from_slice(&[tri.opacity_logit, tri.sharpness_log, tri.smoothness_log]);
        g[9..].copy_from_slice(&g_kernel);
        lr[9..].copy_from_slice(&[self.config.lr_opacity, self.config.lr_sharpness, self.config.lr_smoothness]);
        self.adam.step(tri.id, GEOMETRY, &mut p, &g, &lr);
        for k in 0..3 {
            tri.vertices[k] = Vec3::new(p[3 * k], p[3 * k + 1], p[3 * k + 2]);
        }
        tri.opacity_logit = p[9];
        tri.sharpness_log = p[10];
        tri.smoothness_log = p[11];
    }

    fn appearance_step(&mut self, tri: &mut TrianglePrimitive, g: &crate::appearance::AttachmentGrad) {
        let c = &self.config;
        let att = &mut tri.appearance;
        let mut p = vec![att.scaling.x, att.scaling.y, att.scaling.z];
        let mut gr = vec![g.scaling.x, g.scaling.y, g.scaling.z];
        let mut lr = vec![c.lr_scaling; 3];
        for (o, og) in att.offsets.iter().zip(&g.offsets) {
            p.extend([o.offset.x, o.offset.y, o.offset.z, o.color.x, o.color.y, o.color.z, o.opacity_logit, o.scale_log[0], o.scale_log[1], o.rotation]);
            gr.extend([og.offset.x, og.offset.y, og.offset.z, og.color.x, og.color.y, og.color.z, og.opacity_logit, og.scale_log[0], og.scale_log[1], og.rotation]);
            lr.extend([c.lr_offset, c.lr_offset, c.lr_offset, c.lr_color, c.lr_color, c.lr_color, c.lr_offset_opacity, c.lr_offset_scale, c.lr_offset_scale, c.lr_offset_rotation]);
        }
        self.adam.step(tri.id, APPEARANCE, &mut p, &gr, &lr);
        att.scaling = Vec3::new(p[0], p[1], p[2]);
        for (j, o) in att.offsets.iter_mut().enumerate() {
            let q = &p[3 + 10 * j..13 + 10 * j];
            o.offset = Vec3::new(q[0], q[1], q[2]);
            o.color = Vec3::new(q[3], q[4], q[5]).map(|v| v.clamp(0.0, 1.0));
            o.opacity_logit = q[6];
            o.scale_log = [q[7], q[8]];
            o.rotation = q[9];
        }
    }

    /// Flips triangles to face the training cameras that see them.
    pub fn orient(&mut self, soup: &TriangleSoup) -> (TriangleSoup, usize) {
        let mut vis = VisibilityRecords::default();
        for v in self.bundle.train_indices() {
            let cam = &self.bundle.cameras[v];
            vis.record(soup, cam.id, &render::render(soup, cam, &self.settings));
        }
        orient_normals(soup, &self.bundle.cameras, &vis)
    }

    fn log(&mut self, stage: &'static str, iteration: usize, window: &mut Vec<f64>, triangles: usize) {
        if window.is_empty() {
            return;
        }
        let loss = window.iter().sum::<f64>() / window.len() as f64;
        self.manifest.log.push(LogEntry { stage, iteration, loss, triangles });
        window.clear();
    }

    /// Geometric-prior optimisation of the triangles alone.
    pub fn coarse(&mut self, soup: TriangleSoup) -> Result<TriangleSoup> {
        if self.config.coarse_iters == 0 {
            return Ok(soup);
        }
        let (mut soup, flips) = self.orient(&soup);
        self.manifest.initial_flips = flips;
        let lambda_d = self.config.lambda_d;
        let mut window = Vec::new();
        for it in 0..self.config.coarse_iters {
            let v = self.next_view();
            let cam = &self.bundle.cameras[v];
            let sup = &self.supervision[v];
            let target = render::render(&soup, cam, &self.settings);
            let loss = geometric_loss(&target.depth, &target.normal, &sup.depth, &sup.normal, &sup.mask(), lambda_d)?;
            let up = RenderGrads { depth: Some(loss.grad_depth), normal: Some(loss.grad_normal), alpha: None };
            let grads = render::backward(&soup, cam, &self.settings, &up)?;
            for (i, tri) in soup.triangles.iter_mut().enumerate() {
                let k = [grads.opacity_logit[i], grads.sharpness_log[i], grads.smoothness_log[i]];
                self.geometry_step(tri, &grads.vertices[i], k, it);
            }
            window.push(loss.value);
            if (it + 1) % 100 == 0 || it + 1 == self.config.coarse_iters {
                self.log("coarse", it + 1, &mut window, soup.len());
            }
        }
        Ok(soup)
    }

    /// Joint triangle and appearance optimisation with density control.
    pub fn fine(&mut self, soup: TriangleSoup) -> Result<TriangleSoup> {
        let mut soup = soup;
        let iters = self.config.fine_iters;
        if iters == 0 {
            return Ok(soup);
        }
        let weights = self.config.loss_weights();
        let density = self.config.density();
        let mut stats = ContributionStats::default();
        let mut vis = VisibilityRecords::default();
        let mut window = Vec::new();
        let entropy_from = iters.saturating_sub(density.entropy_window);
        for it in 0..iters {
            let global = self.config.coarse_iters + it;
            let v = self.next_view();
            let cam = &self.bundle.cameras[v];
            let sup = &self.supervision[v];
            let gaussians = spawn_soup(&soup);
            let app = render_appearance(&gaussians, cam, &self.settings);
            let tri_out = render::render(&soup, cam, &self.settings);
            stats.record(&soup, &tri_out);
            vis.record(&soup, cam.id, &tri_out);
            let scales: Vec<[f64; 2]> = gaussians.iter().map(|g| g.scales).collect();
            let mask = sup.mask();
            let detail = detail_loss(
                &DetailInputs {
                    width: cam.width,
                    height: cam.height,
                    depth: &tri_out.depth,
                    normal: &tri_out.normal,
                    depth_gs: &app.depth,
                    normal_gs: &app.normal,
                    color_gs: &app.color,
                    depth_ref: &sup.depth,
                    normal_ref: &sup.normal,
                    color_gt: &sup.color,
                    weight_hf: &sup.weight_hf,
                    mask: &mask,
                    scales: &scales,
                },
                &weights,
            )?;
            let mut value = detail.value;
            let up = RenderGrads { depth: Some(detail.grad_depth), normal: Some(detail.grad_normal), alpha: None };
            let tri_grads = render::backward(&soup, cam, &self.settings, &up)?;
            let app_up = AppearanceGrads { color: Some(detail.grad_color_gs), depth: None, normal: None, alpha: None };
            let mut app_grads = backward_appearance(&soup, cam, &self.settings, &app_up)?;
            for (g, gs) in gaussians.iter().zip(&detail.grad_scales) {
                let o = &mut app_grads[g.parent].offsets[g.slot];
                o.scale_log[0] += gs[0] * g.scales[0];
                o.scale_log[1] += gs[1] * g.scales[1];
            }
            let mut g_opacity = tri_grads.opacity_logit.clone();
            if it >= entropy_from && self.config.lambda_entropy > 0.0 {
                let alphas: Vec<f64> = soup.triangles.iter().map(|t| t.alpha()).collect();
                let (h, dh) = opacity_entropy_loss(&alphas);
                value += self.config.lambda_entropy * h;
                for (g, (a, d)) in g_opacity.iter_mut().zip(alphas.iter().zip(&dh)) {
                    *g += self.config.lambda_entropy * d * a * (1.0 - a);
                }
            }
            for (i, tri) in soup.triangles.iter_mut().enumerate() {
                let ag = &app_grads[i];
                let gv = [tri_grads.vertices[i][0] + ag.vertices[0], tri_grads.vertices[i][1] + ag.vertices[1], tri_grads.vertices[i][2] + ag.vertices[2]];
                self.geometry_step(tri, &gv, [g_opacity[i], tri_grads.sharpness_log[i], tri_grads.smoothness_log[i]], global);
                if !tri.appearance.offsets.is_empty() {
                    self.appearance_step(tri, ag);
                }
            }
            window.push(value);

            let done = it + 1;
            if self.config.enable_splitting && done % density.split_interval == 0 && done < iters {
                let field = GaussianField::new(spawn_soup(&soup), density.normal_spread);
                let (next, report) = split_pass(&soup, &field, &density);
                soup = next;
                stats.inherit(&report.children);
                self.manifest.splits.push((done, report));
            }
            if self.config.enable_pruning && done % density.prune_interval == 0 && done < iters {
                let (next, report) = prune_pass(&soup, &mut stats, &density);
                soup = next;
                self.manifest.prunes.push((done, report));
                let keep: HashSet<u64> = soup.triangles.iter().map(|t| t.id).collect();
                self.adam.retain(&keep);
            }
            if done % 100 == 0 || done == iters {
                self.log("fine", done, &mut window, soup.len());
            }
        }
        let (soup, flips) = orient_normals(&soup, &self.bundle.cameras, &vis);
        self.manifest.final_flips = flips;
        Ok(soup)
    }
}

pub fn train_coarse(bundle: &SceneBundle, soup: TriangleSoup, config: &TrainConfig) -> Result<(TriangleSoup, RunManifest)> {
    let mut t = Trainer::new(bundle, config.clone())?;
    let soup = t.coarse(soup)?;
    Ok((soup, t.manifest))
}

pub fn train_fine(bundle: &SceneBundle, soup: TriangleSoup, config: &TrainConfig) -> Result<(TriangleSoup, RunManifest)> {
    let mut t = Trainer::new(bundle, config.clone())?;
    let soup = t.fine(soup)?;
    Ok((soup, t.manifest))
}

/// Both stages with one optimiser state.
pub fn train_both(bundle: &SceneBundle, soup: TriangleSoup, config: &TrainConfig) -> Result<(TriangleSoup, RunManifest)> {
    let mut t = Trainer::new(bundle, config.clone())?;
    let soup = t.coarse(soup)?;
    let soup = t.fine(soup)?;
    Ok((soup, t.manifest))
}

/// Fraction of triangles with opacity outside `(low, 1 - low)`.
pub fn binary_opacity_fraction(soup: &TriangleSoup, low: f64) -> f64 {
    if soup.is_empty() {
        return 1.0;
    }
    soup.triangles.iter().filter(|t| {
        let a = logistic(t.opacity_logit);
        a <= low || a >= 1.0 - low
    }).count() as f64
        / soup.len() as f64
}
