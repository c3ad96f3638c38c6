//! Experiment configuration: INI parsing, validation and a canonical form whose
//! SHA-256 identifies every artifact produced from it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ini::Ini;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryRegion, Circle, RegionSet, VentricleGeometry};
use crate::monodomain::{Inclusion, IonicParams};
use crate::tensor::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StimulusShape {
    /// Disk of `radius` around `center`.
    Disk,
    /// Layer of thickness `depth` along the boundary parts in `regions`.
    Layer,
    /// Layer limited to within `radius` of `center`.
    Patch,
}

/// Initial excitation; only the fields of the selected shape are used.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub shape: StimulusShape,
    pub center: Point,
    pub radius: f64,
    pub regions: RegionSet,
    pub depth: f64,
    pub amplitude: f64,
}

/// Fiber and cross-fiber conductivities of one tissue state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conductivity {
    pub fiber: f64,
    pub cross: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: VentricleGeometry,
    pub h_coarse: f64,
    pub h_fine: f64,
    /// Element size of the fine mesh around each prescribed inclusion.
    pub h_inclusion: f64,
    pub dt_coarse: f64,
    pub dt_fine: f64,
    pub t_end: f64,
    pub params: IonicParams,
    pub healthy: Conductivity,
    pub ischemic: Conductivity,
    pub stimulus: Stimulus,
    pub inclusions: Vec<Inclusion>,
    pub regions: RegionSet,
    pub noise: f64,
    pub seed: u64,
    /// Search mask: candidate centres at least this far from the boundary.
    pub d0: f64,
    /// Minimum gap between a prescribed inclusion and the boundary.
    pub margin: f64,
    pub minima: usize,
    pub min_separation: f64,
    /// Inclusion centre and strictly decreasing radii of the rate study.
    pub rate_center: Point,
    pub rate_radii: Vec<f64>,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: VentricleGeometry::default(),
            h_coarse: 0.1,
            h_fine: 0.05,
            h_inclusion: 0.025,
            dt_coarse: 0.025,
            dt_fine: 0.0125,
            t_end: 30.0,
            params: IonicParams::standard(),
            healthy: Conductivity {
                fiber: 1.2,
                cross: 0.2538,
            },
            ischemic: Conductivity {
                fiber: 0.2308,
                cross: 0.0062,
            },
            stimulus: Stimulus {
                shape: StimulusShape::Patch,
                center: [-0.65, -1.5],
                radius: 3.0,
                regions: BoundaryRegion::EndoLv.into(),
                depth: 0.3,
                amplitude: 1.0,
            },
            inclusions: Vec::new(),
            regions: BoundaryRegion::Epi.into(),
            noise: 0.0,
            seed: 0,
            d0: 0.3,
            margin: 0.1,
            minima: 1,
            min_separation: 1.0,
            rate_center: [-2.575, 0.0],
            rate_radii: vec![0.3, 0.2, 0.15, 0.1],
            output: PathBuf::from("out"),
        }
    }
}

fn is_multiple(t: f64, dt: f64) -> bool {
    let n = (t / dt).round();
    n >= 1.0 && (n * dt - t).abs() <= 1e-9 * t
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses INI text; missing keys keep their defaults, unknown keys are errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line,
            msg: e.msg.to_string(),
        })?;
        let mut cfg = Self::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                cfg.set(section, key, value.trim())
                    .map_err(|msg| Error::Config(format!("{}: [{section}] {key}: {msg}", path.display())))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        let num = |v: &str| -> std::result::Result<f64, String> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("'{v}' is not a finite number"))
        };
        let nums = |v: &str, n: usize| -> std::result::Result<Vec<f64>, String> {
            let xs: Vec<f64> = v
                .split([' ', ',', '\t'])
                .filter(|s| !s.is_empty())
                .map(num)
                .collect::<std::result::Result<_, _>>()?;
            if xs.len() != n {
                return Err(format!("expected {n} numbers, got {}", xs.len()));
            }
            Ok(xs)
        };
        let circle = |v: &str| nums(v, 3).map(|x| Circle::new([x[0], x[1]], x[2]));
        let int = |v: &str| v.parse::<u64>().map_err(|_| format!("'{v}' is not a nonnegative integer"));
        match (section, key) {
            ("geometry", "lv_outer") => self.geometry.lv_outer = circle(value)?,
            ("geometry", "rv_outer") => self.geometry.rv_outer = circle(value)?,
            ("geometry", "lv_cavity") => self.geometry.lv_cavity = circle(value)?,
            ("geometry", "rv_cavity") => self.geometry.rv_cavity = circle(value)?,
            ("discretization", "h_coarse") => self.h_coarse = num(value)?,
            ("discretization", "h_fine") => self.h_fine = num(value)?,
            ("discretization", "h_inclusion") => self.h_inclusion = num(value)?,
            ("discretization", "dt_coarse") => self.dt_coarse = num(value)?,
            ("discretization", "dt_fine") => self.dt_fine = num(value)?,
            ("discretization", "t_end") => self.t_end = num(value)?,
            ("ionic", "excitation") => self.params.excitation = num(value)?,
            ("ionic", "threshold") => self.params.threshold = num(value)?,
            ("ionic", "eps") => self.params.eps = num(value)?,
            ("conductivity", "healthy") => {
                let x = nums(value, 2)?;
                self.healthy = Conductivity { fiber: x[0], cross: x[1] };
            }
            ("conductivity", "ischemic") => {
                let x = nums(value, 2)?;
                self.ischemic = Conductivity { fiber: x[0], cross: x[1] };
            }
            ("stimulus", "center") => {
                let x = nums(value, 2)?;
                self.stimulus.center = [x[0], x[1]];
            }
            ("stimulus", "shape") => {
                self.stimulus.shape = match value {
                    "disk" => StimulusShape::Disk,
                    "layer" => StimulusShape::Layer,
                    "patch" => StimulusShape::Patch,
                    _ => return Err(format!("'{value}' is not one of disk, layer, patch")),
                }
            }
            ("stimulus", "radius") => self.stimulus.radius = num(value)?,
            ("stimulus", "regions") => self.stimulus.regions = value.parse().map_err(|e: Error| e.to_string())?,
            ("stimulus", "depth") => self.stimulus.depth = num(value)?,
            ("stimulus", "amplitude") => self.stimulus.amplitude = num(value)?,
            ("inclusions", _) => {
                let x = nums(value, 3)?;
                self.inclusions.push(Inclusion::new([x[0], x[1]], x[2]));
            }
            ("measurement", "regions") => self.regions = value.parse().map_err(|e: Error| e.to_string())?,
            ("measurement", "noise") => self.noise = num(value)?,
            ("measurement", "seed") => self.seed = int(value)?,
            ("reconstruction", "d0") => self.d0 = num(value)?,
            ("reconstruction", "margin") => self.margin = num(value)?,
            ("reconstruction", "minima") => self.minima = int(value)? as usize,
            ("reconstruction", "min_separation") => self.min_separation = num(value)?,
            ("rates", "center") => {
                let x = nums(value, 2)?;
                self.rate_center = [x[0], x[1]];
            }
            ("rates", "radii") => {
                self.rate_radii = value
                    .split([' ', ',', '\t'])
                    .filter(|s| !s.is_empty())
                    .map(num)
                    .collect::<std::result::Result<_, _>>()?;
            }
            ("output", "dir") => self.output = PathBuf::from(value),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        self.geometry.check()?;
        IonicParams::new(self.params.excitation, self.params.threshold, self.params.eps)?;
        for (name, v) in [
            ("h_coarse", self.h_coarse),
            ("h_fine", self.h_fine),
            ("h_inclusion", self.h_inclusion),
            ("dt_coarse", self.dt_coarse),
            ("dt_fine", self.dt_fine),
            ("t_end", self.t_end),
            ("d0", self.d0),
            ("min_separation", self.min_separation),
        ] {
            if !(v > 0.0) {
                return err(format!("{name} must be positive (got {v})"));
            }
        }
        if !(self.h_fine < self.h_coarse && self.dt_fine < self.dt_coarse) {
            return err("the fine discretization must be strictly finer than the coarse one in h and dt".into());
        }
        if self.h_inclusion > self.h_fine {
            return err("h_inclusion must not exceed h_fine".into());
        }
        if !is_multiple(self.t_end, self.dt_coarse) || !is_multiple(self.t_end, self.dt_fine) {
            return err(format!("t_end = {} must be a multiple of both time steps", self.t_end));
        }
        let (h, i) = (self.healthy, self.ischemic);
        if !(h.fiber >= h.cross && h.cross > 0.0 && i.fiber >= i.cross && i.cross > 0.0) {
            return err("conductivities need fiber >= cross > 0".into());
        }
        if i.fiber > h.fiber || i.cross > h.cross {
            return err("ischemic conductivities must not exceed the healthy ones".into());
        }
        let st = &self.stimulus;
        if !(st.amplitude > 0.0 && st.amplitude <= 1.0) || !(st.radius > 0.0) || !(st.depth > 0.0) {
            return err("stimulus needs amplitude in (0, 1] and a positive radius and depth".into());
        }
        if st.shape != StimulusShape::Disk && st.regions.is_empty() {
            return err("layer and patch stimuli need at least one region".into());
        }
        if let Some(inc) = self.inclusions.iter().find(|i| !(i.radius > 0.0)) {
            return err(format!("inclusion radius {} must be positive", inc.radius));
        }
        if self.regions.is_empty() {
            return err("measurement regions are empty".into());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return err(format!("noise level {} outside [0, 1]", self.noise));
        }
        if !(self.margin >= 0.0) || self.minima == 0 {
            return err("margin must be nonnegative and minima at least 1".into());
        }
        if self.rate_radii.len() < 3
            || self.rate_radii.iter().any(|&r| !(r > 0.0))
            || self.rate_radii.windows(2).any(|w| w[1] >= w[0])
        {
            return err("rate study needs at least three positive, strictly decreasing radii".into());
        }
        Ok(())
    }

    /// Canonical INI text. Everything except the output directory.
    pub fn canonical(&self) -> String {
        let c = |c: &Circle| format!("{:?} {:?} {:?}", c.center[0], c.center[1], c.radius);
        let mut s = String::new();
        let g = &self.geometry;
        let _ = writeln!(s, "[geometry]");
        let _ = writeln!(s, "lv_outer = {}", c(&g.lv_outer));
        let _ = writeln!(s, "rv_outer = {}", c(&g.rv_outer));
        let _ = writeln!(s, "lv_cavity = {}", c(&g.lv_cavity));
        let _ = writeln!(s, "rv_cavity = {}", c(&g.rv_cavity));
        let _ = writeln!(s, "\n[discretization]");
        let _ = writeln!(s, "h_coarse = {:?}", self.h_coarse);
        let _ = writeln!(s, "h_fine = {:?}", self.h_fine);
        let _ = writeln!(s, "h_inclusion = {:?}", self.h_inclusion);
        let _ = writeln!(s, "dt_coarse = {:?}", self.dt_coarse);
        let _ = writeln!(s, "dt_fine = {:?}", self.dt_fine);
        let _ = writeln!(s, "t_end = {:?}", self.t_end);
        let _ = writeln!(s, "\n[ionic]");
        let _ = writeln!(s, "excitation = {:?}", self.params.excitation);
        let _ = writeln!(s, "threshold = {:?}", self.params.threshold);
        let _ = writeln!(s, "eps = {:?}", self.params.eps);
        let _ = writeln!(s, "\n[conductivity]");
        let _ = writeln!(s, "healthy = {:?} {:?}", self.healthy.fiber, self.healthy.cross);
        let _ = writeln!(s, "ischemic = {:?} {:?}", self.ischemic.fiber, self.ischemic.cross);
        let _ = writeln!(s, "\n[stimulus]");
        let st = &self.stimulus;
        let shape = match st.shape {
            StimulusShape::Disk => "disk",
            StimulusShape::Layer => "layer",
            StimulusShape::Patch => "patch",
        };
        let _ = writeln!(s, "shape = {shape}");
        let _ = writeln!(s, "center = {:?} {:?}", st.center[0], st.center[1]);
        let _ = writeln!(s, "radius = {:?}", st.radius);
        let _ = writeln!(s, "regions = {}", st.regions);
        let _ = writeln!(s, "depth = {:?}", st.depth);
        let _ = writeln!(s, "amplitude = {:?}", st.amplitude);
        let _ = writeln!(s, "\n[inclusions]");
        for (k, i) in self.inclusions.iter().enumerate() {
            let _ = writeln!(s, "inclusion{} = {:?} {:?} {:?}", k + 1, i.center[0], i.center[1], i.radius);
        }
        let _ = writeln!(s, "\n[measurement]");
        let _ = writeln!(s, "regions = {}", self.regions);
        let _ = writeln!(s, "noise = {:?}", self.noise);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "\n[reconstruction]");
        let _ = writeln!(s, "d0 = {:?}", self.d0);
        let _ = writeln!(s, "margin = {:?}", self.margin);
        let _ = writeln!(s, "minima = {}", self.minima);
        let _ = writeln!(s, "min_separation = {:?}", self.min_separation);
        let _ = writeln!(s, "\n[rates]");
        let _ = writeln!(s, "center = {:?} {:?}", self.rate_center[0], self.rate_center[1]);
        let radii: Vec<String> = self.rate_radii.iter().map(|r| format!("{r:?}")).collect();
        let _ = writeln!(s, "radii = {}", radii.join(" "));
        s
    }

    /// Hex SHA-256 of [`ExperimentConfig::canonical`].
    pub fn hash(&self) -> String {
        hex_digest(&self.canonical())
    }

    /// Hash of the settings that determine the noise-free synthetic traces:
    /// everything except noise, seed, reconstruction and rate-study keys.
    pub fn data_hash(&self) -> String {
        let mut s = String::new();
        let mut skip = false;
        for line in self.canonical().lines() {
            if line.starts_with('[') {
                skip = line == "[reconstruction]" || line == "[rates]";
            }
            if skip || line.starts_with("noise = ") || line.starts_with("seed = ") {
                continue;
            }
            s.push_str(line);
            s.push('\n');
        }
        hex_digest(&s)
    }
}

fn hex_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(s, Path::new("test.ini"))
    }

    #[test]
    fn canonical_round_trip() {
        let mut c = ExperimentConfig::default();
        c.inclusions.push(Inclusion::new([1.3, 0.0], 0.15));
        c.inclusions.push(Inclusion::new([-2.575, 0.0], 0.1));
        c.regions = RegionSet::new([BoundaryRegion::Epi, BoundaryRegion::EndoLv]);
        c.noise = 0.1;
        c.seed = 7;
        c.stimulus.shape = StimulusShape::Disk;
        c.stimulus.radius = 0.6;
        let back = parse(&c.canonical()).unwrap();
        assert_eq!(back.canonical(), c.canonical());
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn hash_ignores_output_but_not_seed() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        b.noise = 0.1;
        b.d0 = 0.4;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.data_hash(), b.data_hash());
        b.regions = BoundaryRegion::EndoRv.into();
        assert_ne!(a.data_hash(), b.data_hash());
    }

    #[test]
    fn rejects_invalid() {
        assert!(matches!(parse("[measurement]\nnoise = 1.5\n"), Err(Error::Config(_))));
        assert!(matches!(parse("[discretization]\nh_fine = 0.2\n"), Err(Error::Config(_))));
        assert!(matches!(parse("[discretization]\ndt_fine = 0.05\n"), Err(Error::Config(_))));
        assert!(matches!(parse("[measurement]\nnoize = 0.1\n"), Err(Error::Config(_))));
        assert!(matches!(parse("[inclusions]\na = 1 2\n"), Err(Error::Config(_))));
        assert!(parse("[geometry]\nlv_cavity = -0.65 0 3.5\n").is_err());
        assert!(matches!(parse("[measurement\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("[rates]\nradii = 0.1 0.2 0.3\n"), Err(Error::Config(_))));
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = parse("[inclusions]\nseptum = 1.3 0 0.15\n[measurement]\nregions = ENDO_LV\n").unwrap();
        assert_eq!(c.inclusions, vec![Inclusion::new([1.3, 0.0], 0.15)]);
        assert_eq!(c.regions, BoundaryRegion::EndoLv.into());
        assert_eq!(c.h_coarse, 0.1);
    }
}
