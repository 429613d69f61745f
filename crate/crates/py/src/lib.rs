//! Python bindings. Clouds travel as lists of `(x, y, z, rcs, v)` tuples,
//! heatmaps as lists of rows, feature maps as `(c, h, w, flat data)`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use rcrobust::bench::{self, Pipeline};
use rcrobust::expand::{self, ExponentMode, Heatmap, KernelParams, Projector, ProjectorWeights};
use rcrobust::fusion;
use rcrobust::image::{self, DegradationMap, ImageDegradation, WeatherKind};
use rcrobust::radar::{CorruptionKind, CorruptionSpec, SpuriousMode};

type Tuple5 = (f64, f64, f64, f64, f64);

fn err(e: rcrobust::Error) -> PyErr {
    match e {
        rcrobust::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn mode(name: &str) -> PyResult<ExponentMode> {
    match name {
        "planar" => Ok(ExponentMode::PlanarXY),
        "isotropic" => Ok(ExponentMode::Isotropic3D),
        _ => Err(PyValueError::new_err(format!("unknown mode {name:?}, expected planar or isotropic"))),
    }
}

fn pipeline(name: &str) -> PyResult<Pipeline> {
    match name {
        "raw" => Ok(Pipeline::Raw),
        "3dge_planar" => Ok(Pipeline::ExpandPlanar),
        "3dge_isotropic" => Ok(Pipeline::ExpandIsotropic),
        _ => Err(PyValueError::new_err(format!("unknown pipeline {name:?}"))),
    }
}

fn rows(h: &Heatmap) -> Vec<Vec<f64>> {
    h.data.chunks(h.ny).map(<[f64]>::to_vec).collect()
}

#[pyclass(name = "PointCloud")]
struct PyPointCloud {
    inner: rcrobust::PointCloud,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    #[pyo3(signature = (points, frame_id = "frame".to_string()))]
    fn new(points: Vec<Tuple5>, frame_id: String) -> PyResult<Self> {
        let cloud = rcrobust::PointCloud::new(
            frame_id,
            points
                .into_iter()
                .map(|(x, y, z, r, v)| rcrobust::RadarPoint::new(x, y, z, r, v))
                .collect(),
        );
        cloud.validate().map_err(err)?;
        Ok(Self { inner: cloud })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: rcrobust::io::read_cloud(path).map_err(err)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        rcrobust::io::write_cloud(path, &self.inner).map_err(err)
    }

    #[getter]
    fn frame_id(&self) -> String {
        self.inner.frame_id.clone()
    }

    fn points(&self) -> Vec<Tuple5> {
        self.inner.points.iter().map(|p| (p.x, p.y, p.z, p.rcs, p.v)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PointCloud({:?}, {} points)", self.inner.frame_id, self.inner.len())
    }
}

#[pyclass(name = "BoxAnnotation")]
struct PyBox {
    inner: rcrobust::BoxAnnotation,
}

#[pymethods]
impl PyBox {
    #[new]
    fn new(center: [f64; 3], size: [f64; 3], yaw: f64) -> PyResult<Self> {
        Ok(Self {
            inner: rcrobust::BoxAnnotation::new(center, size, yaw).map_err(err)?,
        })
    }

    fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        self.inner.contains(&rcrobust::RadarPoint::new(x, y, z, 0.0, 0.0))
    }

    #[getter]
    fn center(&self) -> [f64; 3] {
        self.inner.center
    }

    #[getter]
    fn size(&self) -> [f64; 3] {
        self.inner.size
    }

    #[getter]
    fn yaw(&self) -> f64 {
        self.inner.yaw
    }
}

#[pyclass(name = "GridSpec")]
struct PyGridSpec {
    inner: rcrobust::GridSpec,
}

#[pymethods]
impl PyGridSpec {
    /// Defaults to the 128 × 128 × 8 grid over ±51.2 m and z in [−5, 3].
    #[new]
    #[pyo3(signature = (x_range = None, y_range = None, z_range = None, cells = None))]
    fn new(
        x_range: Option<[f64; 2]>,
        y_range: Option<[f64; 2]>,
        z_range: Option<[f64; 2]>,
        cells: Option<[usize; 3]>,
    ) -> PyResult<Self> {
        let d = rcrobust::GridSpec::default();
        let inner = rcrobust::GridSpec::new(
            x_range.unwrap_or(d.x_range),
            y_range.unwrap_or(d.y_range),
            z_range.unwrap_or(d.z_range),
            cells.unwrap_or(d.cells),
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    fn voxel_index(&self, x: f64, y: f64, z: f64) -> Option<[usize; 3]> {
        self.inner.voxel_index([x, y, z])
    }

    #[getter]
    fn cells(&self) -> [usize; 3] {
        self.inner.cells
    }
}

#[pyclass(name = "VoxelGrid")]
struct PyVoxelGrid {
    inner: rcrobust::VoxelGrid,
}

#[pymethods]
impl PyVoxelGrid {
    #[getter]
    fn shape(&self) -> [usize; 3] {
        self.inner.spec.cells
    }

    #[getter]
    fn rcs(&self) -> Vec<f64> {
        self.inner.rcs.clone()
    }

    #[getter]
    fn vel(&self) -> Vec<f64> {
        self.inner.vel.clone()
    }

    #[getter]
    fn count(&self) -> Vec<u32> {
        self.inner.count.clone()
    }

    fn total_rcs(&self) -> f64 {
        self.inner.total_rcs()
    }

    /// Top-down map: `|rcs|` summed over z.
    fn bev(&self) -> Vec<Vec<f64>> {
        rows(&expand::bev_project(&self.inner))
    }

    fn write(&self, path: &str) -> PyResult<()> {
        rcrobust::io::write_voxel_grid(path, &self.inner).map_err(err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: rcrobust::io::read_voxel_grid(path).map_err(err)?,
        })
    }
}

#[pyclass(name = "Rng")]
struct PyRng {
    inner: rcrobust::Rng,
}

#[pymethods]
impl PyRng {
    #[new]
    #[pyo3(signature = (seed, stream = 0))]
    fn new(seed: u64, stream: u64) -> Self {
        Self {
            inner: rcrobust::Rng::new(seed, stream),
        }
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.uniform(lo, hi)
    }

    fn normal(&mut self, mean: f64, std: f64) -> f64 {
        self.inner.normal(mean, std)
    }
}

/// Applies one corruption kind (`C1`..`C4` or a kind name) at `level`.
#[pyfunction]
#[pyo3(signature = (cloud, kind, level, seed, boxes = Vec::new(), gamma = 0, random_spurious = false, grid = None))]
#[allow(clippy::too_many_arguments)]
fn corrupt(
    cloud: &PyPointCloud,
    kind: &str,
    level: f64,
    seed: u64,
    boxes: Vec<PyRef<'_, PyBox>>,
    gamma: u8,
    random_spurious: bool,
    grid: Option<PyRef<'_, PyGridSpec>>,
) -> PyResult<PyPointCloud> {
    let kind: CorruptionKind = kind.parse().map_err(err)?;
    let mut spec = CorruptionSpec::new(kind);
    spec.gamma = gamma;
    if random_spurious {
        spec.mode = SpuriousMode::Random;
    }
    let spec = spec.with_level(level).map_err(err)?.with_seed(seed);
    let boxes: Vec<_> = boxes.iter().map(|b| b.inner).collect();
    let bounds = grid.map_or_else(rcrobust::GridSpec::default, |g| g.inner);
    Ok(PyPointCloud {
        inner: spec.apply(&cloud.inner, &boxes, &bounds).map_err(err)?,
    })
}

#[pyfunction]
fn voxelize(cloud: &PyPointCloud, grid: &PyGridSpec) -> PyVoxelGrid {
    PyVoxelGrid {
        inner: expand::voxelize(&cloud.inner, &grid.inner).grid,
    }
}

/// Gaussian expansion merged onto the raw grid. Uses the RCS-percentile
/// projector unless a weights JSON file is given.
#[pyfunction]
#[pyo3(signature = (cloud, grid, mode = "planar", weights_file = None))]
fn gaussian_expansion(
    cloud: &PyPointCloud,
    grid: &PyGridSpec,
    mode: &str,
    weights_file: Option<&str>,
) -> PyResult<PyVoxelGrid> {
    let projector = match weights_file {
        Some(p) => Projector::Learned(ProjectorWeights::load(p).map_err(err)?),
        None => Projector::heuristic_for(&cloud.inner),
    };
    let inner = expand::gaussian_expansion(&cloud.inner, &grid.inner, &projector, self::mode(mode)?)
        .map_err(err)?;
    Ok(PyVoxelGrid { inner })
}

/// Flat kernel weights, x-major.
#[pyfunction]
#[pyo3(signature = (side, sigma, mode = "planar"))]
fn build_kernel(side: usize, sigma: f64, mode: &str) -> PyResult<Vec<f64>> {
    let p = KernelParams::new(side, sigma).map_err(err)?;
    Ok(expand::build_kernel(p, self::mode(mode)?).weights().to_vec())
}

/// BEV heatmap of `cloud` after `pipeline` (`raw`, `3dge_planar`, `3dge_isotropic`).
#[pyfunction]
#[pyo3(signature = (cloud, grid, pipeline = "3dge_planar"))]
fn process(cloud: &PyPointCloud, grid: &PyGridSpec, pipeline: &str) -> PyResult<Vec<Vec<f64>>> {
    let h = bench::process(&cloud.inner, &grid.inner, self::pipeline(pipeline)?, None).map_err(err)?;
    Ok(rows(&h))
}

fn heatmap(rows: Vec<Vec<f64>>) -> PyResult<Heatmap> {
    Heatmap::from_rows(&rows).map_err(err)
}

#[pyfunction]
fn metric_snr(bev: Vec<Vec<f64>>, boxes: Vec<PyRef<'_, PyBox>>, grid: &PyGridSpec) -> PyResult<f64> {
    let boxes: Vec<_> = boxes.iter().map(|b| b.inner).collect();
    bench::metric_snr(&heatmap(bev)?, &boxes, &grid.inner).map_err(err)
}

/// `(consistent, l2_cells)` between the argmax cells of two heatmaps.
#[pyfunction]
fn metric_peak(clean: Vec<Vec<f64>>, processed: Vec<Vec<f64>>) -> PyResult<(bool, f64)> {
    let p = bench::metric_peak(&heatmap(clean)?, &heatmap(processed)?).map_err(err)?;
    Ok((p.consistent, p.l2_cells))
}

#[pyfunction]
fn metric_chamfer(a: &PyPointCloud, b: &PyPointCloud) -> PyResult<f64> {
    bench::metric_chamfer(&a.inner, &b.inner).map_err(err)
}

#[pyfunction]
fn emit_heatmap(bev: Vec<Vec<f64>>, path: &str) -> PyResult<()> {
    bench::emit_heatmap(&heatmap(bev)?, path).map_err(err)
}

/// The benchmark's one-cluster scene: `(cloud, boxes)`.
#[pyfunction]
fn scripted_scene(seed: u64) -> (PyPointCloud, Vec<PyBox>) {
    let s = bench::scripted_scene(seed);
    (
        PyPointCloud { inner: s.cloud },
        s.boxes.into_iter().map(|inner| PyBox { inner }).collect(),
    )
}

/// Runs a sweep from a JSON config (empty string for the defaults) and
/// returns the report as CSV text.
#[pyfunction]
#[pyo3(signature = (config_json = "", jobs = 1))]
fn run_sweep(py: Python<'_>, config_json: &str, jobs: usize) -> PyResult<String> {
    let cfg = if config_json.trim().is_empty() {
        bench::SweepConfig::default()
    } else {
        bench::SweepConfig::from_json(config_json).map_err(err)?
    };
    let opts = bench::SweepOptions {
        jobs,
        keep_heatmaps: false,
    };
    let out = py.detach(|| bench::run_sweep(&cfg, &opts)).map_err(err)?;
    out.report.to_csv_string(false).map_err(err)
}

/// Training-mix manifest as CSV text.
#[pyfunction]
#[pyo3(signature = (count = 100, clean_ratio = bench::NOISY_TRAIN_CLEAN_RATIO, seed = 0))]
fn gen_manifest(count: usize, clean_ratio: f64, seed: u64) -> PyResult<String> {
    let entries = bench::gen_manifest(count, clean_ratio, seed).map_err(err)?;
    let mut buf = Vec::new();
    bench::write_manifest(&mut buf, &entries).map_err(err)?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "ImagePlane")]
struct PyImage {
    inner: image::ImagePlane,
}

#[pymethods]
impl PyImage {
    /// Interleaved RGB samples in `[0, 1]`, row-major.
    #[new]
    fn new(height: usize, width: usize, data: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: image::ImagePlane::new(height, width, data).map_err(err)?,
        })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: image::ImagePlane::read(path).map_err(err)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        self.inner.write(path).map_err(err)
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }
}

fn weather(name: &str) -> PyResult<WeatherKind> {
    match name {
        "rain" => Ok(WeatherKind::Rain),
        "snow" => Ok(WeatherKind::Snow),
        "fog" => Ok(WeatherKind::Fog),
        _ => Err(PyValueError::new_err(format!("unknown weather {name:?}"))),
    }
}

fn degradation(name: &str) -> PyResult<ImageDegradation> {
    ImageDegradation::ALL
        .into_iter()
        .find(|d| d.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown degradation {name:?}")))
}

#[pyfunction]
fn gamma_lowlight(img: &PyImage, gamma: f64) -> PyResult<PyImage> {
    Ok(PyImage {
        inner: image::gamma_lowlight(&img.inner, gamma).map_err(err)?,
    })
}

/// Blends toward `atmosphere` (the weather default when omitted) with a 1- or
/// 3-channel map of the image's size.
#[pyfunction]
#[pyo3(signature = (img, kind, map_channels, map_data, atmosphere = None))]
fn composite_weather(
    img: &PyImage,
    kind: &str,
    map_channels: usize,
    map_data: Vec<f64>,
    atmosphere: Option<f64>,
) -> PyResult<PyImage> {
    let kind = weather(kind)?;
    let map = DegradationMap::new(kind, img.inner.height(), img.inner.width(), map_channels, map_data)
        .map_err(err)?;
    let a = atmosphere.unwrap_or_else(|| kind.default_atmosphere());
    Ok(PyImage {
        inner: image::composite_weather(&img.inner, &map, a).map_err(err)?,
    })
}

/// Degrades every frame of one timestamp with one draw. `degradation` is one
/// of `lowlight_mild`, `lowlight_heavy`, `rain_light`, `rain_heavy`, `snow`,
/// `fog_light`, `fog_heavy`; weather kinds need one map path per frame.
#[pyfunction]
#[pyo3(signature = (frames, degradation, seed, map_paths = None))]
fn degrade_timestamp(
    frames: Vec<PyRef<'_, PyImage>>,
    degradation: &str,
    seed: u64,
    map_paths: Option<Vec<String>>,
) -> PyResult<Vec<PyImage>> {
    let deg = self::degradation(degradation)?;
    let frames: Vec<_> = frames.iter().map(|f| f.inner.clone()).collect();
    let maps = match (deg, map_paths) {
        (ImageDegradation::Weather(kind, _), Some(paths)) => Some(
            paths
                .iter()
                .map(|p| DegradationMap::read(kind, p))
                .collect::<rcrobust::Result<Vec<_>>>()
                .map_err(err)?,
        ),
        _ => None,
    };
    let mut rng = rcrobust::Rng::new(seed, 0);
    let (out, _) = image::same_timestamp_consistency(&frames, maps.as_deref(), deg, &mut rng).map_err(err)?;
    Ok(out.into_iter().map(|inner| PyImage { inner }).collect())
}

#[pyclass(name = "FusionParams")]
struct PyFusionParams {
    inner: fusion::FusionParams,
}

#[pymethods]
impl PyFusionParams {
    #[staticmethod]
    #[pyo3(signature = (channels, seed, heads = fusion::DEFAULT_HEADS, points = fusion::DEFAULT_POINTS))]
    fn seeded(channels: usize, seed: u64, heads: usize, points: usize) -> Self {
        let mut rng = rcrobust::Rng::new(seed, 0);
        Self {
            inner: fusion::FusionParams::seeded(channels, heads, points, &mut rng),
        }
    }

    /// Identity layer norms, zero projections, identity output convolution.
    #[staticmethod]
    #[pyo3(signature = (channels, heads = fusion::DEFAULT_HEADS, points = fusion::DEFAULT_POINTS))]
    fn neutral(channels: usize, heads: usize, points: usize) -> Self {
        Self {
            inner: fusion::FusionParams::neutral(channels, heads, points),
        }
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        let (inner, _) = fusion::read_params(path).map_err(err)?;
        Ok(Self { inner })
    }

    fn write(&self, path: &str, height: usize, width: usize) -> PyResult<()> {
        fusion::write_params(path, &self.inner, height, width).map_err(err)
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels
    }
}

type Map = (usize, usize, usize, Vec<f64>);

fn feature(m: Map) -> PyResult<fusion::FeatureMap> {
    fusion::FeatureMap::new(m.0, m.1, m.2, m.3).map_err(err)
}

fn unfeature(f: fusion::FeatureMap) -> Map {
    (f.c, f.h, f.w, f.data)
}

/// Confidence-weighted camera/radar BEV fusion. Maps are `(c, h, w, data)`
/// with channel-major data.
#[pyfunction]
fn fuse_bev(f_image: Map, f_radar: Map, params: &PyFusionParams) -> PyResult<Map> {
    let out = fusion::fuse_bev(&feature(f_image)?, &feature(f_radar)?, &params.inner).map_err(err)?;
    Ok(unfeature(out))
}

/// Per-cell camera confidence in `(0, 1)`, row-major `h × w`.
#[pyfunction]
fn confidence_map(f_image: Map, params: &PyFusionParams) -> PyResult<Vec<f64>> {
    Ok(fusion::confidence_map(&feature(f_image)?, &params.inner.conf_mlp)
        .map_err(err)?
        .data)
}

/// Gradients of `sum(grad · fuse_bev(...))` with respect to both inputs.
#[pyfunction]
fn fuse_bev_vjp(f_image: Map, f_radar: Map, params: &PyFusionParams, grad: Map) -> PyResult<(Map, Map)> {
    let (gi, gp) = fusion::fuse_bev_vjp(&feature(f_image)?, &feature(f_radar)?, &params.inner, &feature(grad)?)
        .map_err(err)?;
    Ok((unfeature(gi), unfeature(gp)))
}

#[pymodule]
#[pyo3(name = "rcrobust")]
fn rcrobust_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyBox>()?;
    m.add_class::<PyGridSpec>()?;
    m.add_class::<PyVoxelGrid>()?;
    m.add_class::<PyRng>()?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyFusionParams>()?;
    m.add_function(wrap_pyfunction!(corrupt, m)?)?;
    m.add_function(wrap_pyfunction!(voxelize, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_expansion, m)?)?;
    m.add_function(wrap_pyfunction!(build_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(process, m)?)?;
    m.add_function(wrap_pyfunction!(metric_snr, m)?)?;
    m.add_function(wrap_pyfunction!(metric_peak, m)?)?;
    m.add_function(wrap_pyfunction!(metric_chamfer, m)?)?;
    m.add_function(wrap_pyfunction!(emit_heatmap, m)?)?;
    m.add_function(wrap_pyfunction!(scripted_scene, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(gen_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_lowlight, m)?)?;
    m.add_function(wrap_pyfunction!(composite_weather, m)?)?;
    m.add_function(wrap_pyfunction!(degrade_timestamp, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_bev, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_map, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_bev_vjp, m)?)?;
    Ok(())
}
