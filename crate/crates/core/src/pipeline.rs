//! Staged pipeline behind the `clintraj` command line.
//!
//! Every stage reads the artifacts of earlier stages from the output
//! directory, writes its own, and records input and output hashes in
//! `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{column_scale, load_table, MixedDataTable, NumericMatrix, VariableKind};
use crate::elpigraph::{
    explained_variance, extend_leaves, grow_tree, partition_points, prune_tree, squared_distance_to_graph, DataView,
    ElasticParams, GrowOptions, PrincipalGraph,
};
use crate::impute::{filter_missing, impute, FilterReport, ImputeSchema, MissingnessPolicy};
use crate::layout::{
    default_scattering, edge_widths, layout_graph, layout_points, node_composition, render_svg, Layout2D, SvgStyle,
};
use crate::pca::Pca;
use crate::quantify::{optimal_scale, quantify_table, ColumnInfo, OrdinalColumn};
use crate::stats::{
    anova_association, chi2_association, screen_trajectory_associations, AssociationResult, DeviationSign,
    RegressionKind,
};
use crate::survival::{cause_specific_hazards, cox_fit, nelson_aalen, EventTable};
use crate::treeanalysis::{
    compute_pseudotime, decompose_segments, partition_by_segments, select_root, PseudotimeMetric, Trajectory,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootChoice {
    /// Node most enriched in `class` of column `column`.
    Auto { column: String, class: String },
    /// Node most enriched in rows where every listed column equals `class`.
    AutoAll { columns: Vec<String>, class: String },
    Manual(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub r_squared: f64,
    pub p_value: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            r_squared: 0.3,
            p_value: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalConfig {
    /// Column whose non-censored levels are event causes.
    pub event_column: String,
    #[serde(default = "default_censored")]
    pub censored_levels: Vec<String>,
    /// Quantified columns used as Cox covariates.
    #[serde(default)]
    pub cox_covariates: Vec<String>,
}

fn default_censored() -> Vec<String> {
    vec!["0".into()]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    /// Column of the raw table used for point colors and node pies.
    pub color_by: Option<String>,
    /// Quantified column encoded as edge width.
    pub width_by: Option<String>,
    pub scattering: Option<f64>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("clintraj_out")
}

fn default_pca() -> usize {
    12
}

fn default_true() -> bool {
    true
}

fn default_root() -> RootChoice {
    RootChoice::Manual(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Rows whose token in a column is listed are dropped before
    /// anything else.
    #[serde(default)]
    pub exclude_rows: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub policy: MissingnessPolicy,
    #[serde(default = "default_true")]
    pub optimal_scaling: bool,
    /// Columns kept for analysis but not used to fit the tree.
    #[serde(default)]
    pub outcome_columns: Vec<String>,
    #[serde(default = "default_pca")]
    pub pca_components: usize,
    #[serde(default)]
    pub elastic: ElasticParams,
    #[serde(default = "default_root")]
    pub root: RootChoice,
    #[serde(default)]
    pub pseudotime_metric: PseudotimeMetric,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub survival: Option<SurvivalConfig>,
    #[serde(default)]
    pub layout: LayoutConfig,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    /// Reads a JSON config. Relative paths are resolved against the
    /// directory holding the config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::Config {
            field: "<file>".into(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.schema, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        self.elastic.validate()?;
        if self.pca_components == 0 {
            return Err(Error::Config {
                field: "pca_components".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.elastic.n_nodes_target < 2 {
            return Err(Error::Config {
                field: "elastic.n_nodes_target".into(),
                reason: "must be at least 2".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.thresholds.p_value) {
            return Err(Error::Config {
                field: "thresholds.p_value".into(),
                reason: "must lie in [0, 1]".into(),
            });
        }
        if let Some(s) = self.layout.scattering {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config {
                    field: "layout.scattering".into(),
                    reason: "must be finite and non-negative".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Quantify,
    Impute,
    Reduce,
    Fit,
    Segment,
    Pseudotime,
    Associate,
    Survival,
    Layout,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Quantify,
        Stage::Impute,
        Stage::Reduce,
        Stage::Fit,
        Stage::Segment,
        Stage::Pseudotime,
        Stage::Associate,
        Stage::Survival,
        Stage::Layout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Quantify => "quantify",
            Stage::Impute => "impute",
            Stage::Reduce => "reduce",
            Stage::Fit => "fit",
            Stage::Segment => "segment",
            Stage::Pseudotime => "pseudotime",
            Stage::Associate => "associate",
            Stage::Survival => "survival",
            Stage::Layout => "layout",
        }
    }
}

// artifact names
const FILTER_REPORT: &str = "filter_report.json";
const QUANTIFIED: &str = "quantified.csv";
const QUANTIFIED_MASK: &str = "quantified_mask.csv";
const QUANTIFICATION: &str = "quantification.json";
const IMPUTED: &str = "imputed.csv";
const IMPUTATION: &str = "imputation.json";
const REDUCED: &str = "reduced.csv";
const PCA_MODEL: &str = "pca.json";
const TREE: &str = "tree.json";
const FIT_REPORT: &str = "fit.json";
const SEGMENTS: &str = "segments.json";
const SEGMENT_LABELS: &str = "segment_labels.csv";
const PSEUDOTIME: &str = "pseudotime.csv";
const TRAJECTORIES: &str = "trajectories.json";
const ASSOCIATIONS: &str = "associations.csv";
const R_SQUARED: &str = "r_squared.csv";
const CURVES: &str = "regression_curves.json";
const SURVIVAL_SUMMARY: &str = "survival.json";
const LAYOUT: &str = "layout.json";
const SVG: &str = "tree.svg";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct QuantificationArtifact {
    columns: Vec<ColumnInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ImputationArtifact {
    svd_order: usize,
    imputed_cells: usize,
    converged: bool,
    warnings: Vec<String>,
    scaling_trace: Vec<f64>,
    scaled_columns: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_leaves: usize,
    pub n_branching: usize,
    /// Explained variance in the reduced space the tree was fitted in.
    pub explained_variance: f64,
    /// Explained variance relative to all standardized feature columns.
    pub explained_variance_full: f64,
    /// Variance carried by the first two principal components.
    pub pca2_variance: f64,
    pub energy_history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrajectoryArtifact {
    root: usize,
    trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct StageRecord {
    seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    parameters: serde_json::Value,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Manifest {
    stages: BTreeMap<String, StageRecord>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// A configured pipeline bound to an output directory.
pub struct Pipeline {
    pub config: PipelineConfig,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline { config })
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.output_dir
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn require(&self, name: &str, stage: &'static str) -> Result<PathBuf> {
        let p = self.out(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact {
                artifact: name.to_string(),
                stage,
            })
        }
    }

    /// Parameters recorded in the manifest: the config without machine
    /// specific paths.
    fn parameters(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(&self.config)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
            for key in ["data", "schema"] {
                if let Some(p) = obj.get(key).and_then(|p| p.as_str()) {
                    let name = Path::new(p).file_name().map(|n| n.to_string_lossy().into_owned());
                    obj.insert(key.into(), serde_json::Value::from(name));
                }
            }
        }
        Ok(v)
    }

    fn record(&self, stage: Stage, inputs: &[(&str, PathBuf)], outputs: &[&str]) -> Result<()> {
        let manifest_path = self.out(MANIFEST);
        let mut manifest: Manifest = if manifest_path.is_file() {
            read_json(&manifest_path)?
        } else {
            Manifest::default()
        };
        let mut rec = StageRecord {
            seed: self.config.seed,
            parameters: self.parameters()?,
            ..Default::default()
        };
        for (name, path) in inputs {
            rec.inputs.insert(name.to_string(), sha256_file(path)?);
        }
        for name in outputs {
            rec.outputs.insert(name.to_string(), sha256_file(&self.out(name))?);
        }
        manifest.stages.insert(stage.as_str().to_string(), rec);
        write_json(&manifest_path, &manifest)
    }

    fn load_raw(&self) -> Result<MixedDataTable> {
        let raw = load_table(&self.config.data, &self.config.schema)?;
        if self.config.exclude_rows.is_empty() {
            return Ok(raw);
        }
        let mut drop = vec![false; raw.n_rows()];
        for (column, tokens) in &self.config.exclude_rows {
            let values = self.csv_column(column)?;
            if values.len() != raw.n_rows() {
                return Err(Error::DimensionMismatch {
                    expected: raw.n_rows(),
                    found: values.len(),
                });
            }
            for (d, v) in drop.iter_mut().zip(&values) {
                if tokens.iter().any(|t| t == v.trim()) {
                    *d = true;
                }
            }
        }
        let rows: Vec<usize> = (0..raw.n_rows()).filter(|&r| !drop[r]).collect();
        log::info!("exclude_rows: dropped {} rows", raw.n_rows() - rows.len());
        let cols: Vec<usize> = (0..raw.n_cols()).collect();
        Ok(raw.select(&rows, &cols))
    }

    /// Tokens of one column of the data file, which need not be in the
    /// schema.
    fn csv_column(&self, column: &str) -> Result<Vec<String>> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(&self.config.data)?;
        let c = reader.headers()?.iter().position(|h| h.trim() == column).ok_or_else(|| Error::Config {
            field: format!("exclude_rows.{column}"),
            reason: format!("no column `{column}` in {}", self.config.data.display()),
        })?;
        let mut out = Vec::new();
        for rec in reader.records() {
            out.push(rec?.get(c).unwrap_or("").to_string());
        }
        Ok(out)
    }

    /// Raw table restricted to the rows kept by the missingness filter,
    /// with every schema column.
    fn kept_rows_table(&self) -> Result<MixedDataTable> {
        let report: FilterReport = read_json(&self.require(FILTER_REPORT, "quantify")?)?;
        let raw = self.load_raw()?;
        let cols: Vec<usize> = (0..raw.n_cols()).collect();
        Ok(raw.select(&report.kept_rows, &cols))
    }

    pub fn run(&self, stage: Stage) -> Result<()> {
        std::fs::create_dir_all(self.out_dir()).map_err(|e| Error::io(self.out_dir(), e))?;
        log::info!("stage {}", stage.as_str());
        match stage {
            Stage::Quantify => self.quantify(),
            Stage::Impute => self.impute(),
            Stage::Reduce => self.reduce(),
            Stage::Fit => self.fit(),
            Stage::Segment => self.segment(),
            Stage::Pseudotime => self.pseudotime(None),
            Stage::Associate => self.associate(),
            Stage::Survival => self.survival(),
            Stage::Layout => self.layout(),
        }
    }

    /// Runs the pseudotime stage with a manual root that overrides the
    /// config.
    pub fn run_pseudotime_with_root(&self, root: Option<usize>) -> Result<()> {
        std::fs::create_dir_all(self.out_dir()).map_err(|e| Error::io(self.out_dir(), e))?;
        self.pseudotime(root)
    }

    pub fn run_all(&self, root: Option<usize>) -> Result<()> {
        for stage in Stage::ALL {
            if stage == Stage::Pseudotime {
                self.run_pseudotime_with_root(root)?;
            } else {
                self.run(stage)?;
            }
        }
        Ok(())
    }

    fn quantify(&self) -> Result<()> {
        let raw = self.load_raw()?;
        let (_, report) = filter_missing(&raw.to_codes(), &self.config.policy)?;
        log::info!(
            "filter: dropped {} columns and {} rows; {} complete rows; {:.2}% missing",
            report.dropped_columns.len(),
            report.dropped_rows.len(),
            report.complete_rows,
            100.0 * report.residual_missing_fraction
        );
        let table = raw.select(&report.kept_rows, &report.kept_columns);
        let q = quantify_table(&table)?;
        write_json(&self.out(FILTER_REPORT), &report)?;
        q.matrix.write_csv(self.out(QUANTIFIED))?;
        q.matrix.write_mask_csv(self.out(QUANTIFIED_MASK))?;
        write_json(&self.out(QUANTIFICATION), &QuantificationArtifact { columns: q.columns })?;
        self.record(
            Stage::Quantify,
            &[("data", self.config.data.clone()), ("schema", self.config.schema.clone())],
            &[FILTER_REPORT, QUANTIFIED, QUANTIFIED_MASK, QUANTIFICATION],
        )
    }

    fn impute(&self) -> Result<()> {
        let qpath = self.require(QUANTIFIED, "quantify")?;
        let mpath = self.require(QUANTIFIED_MASK, "quantify")?;
        let cpath = self.require(QUANTIFICATION, "quantify")?;
        let m = NumericMatrix::read_csv(&qpath, Some(&mpath))?;
        let info: QuantificationArtifact = read_json(&cpath)?;
        let schema = ImputeSchema::from_columns(&info.columns);
        let imp = impute(&m, &self.config.policy, &schema)?;
        for w in &imp.warnings {
            log::warn!("{w}");
        }
        let mut matrix = imp.matrix;
        let mut scaling_trace = Vec::new();
        let mut scaled_columns = Vec::new();
        if self.config.optimal_scaling {
            // constant columns carry no correlation and stay as they are
            let varying: Vec<usize> = (0..matrix.cols()).filter(|&c| column_scale(&matrix, c).is_ok()).collect();
            let ordinal: Vec<OrdinalColumn> = varying
                .iter()
                .enumerate()
                .filter(|(_, &c)| info.columns[c].kind == VariableKind::Ordinal && info.columns[c].level_values.len() > 1)
                .map(|(index, &c)| OrdinalColumn {
                    index,
                    level_values: info.columns[c].level_values.clone(),
                })
                .collect();
            if !ordinal.is_empty() {
                let res = optimal_scale(&matrix.select_cols(&varying), &ordinal, 100, 1e-9)?;
                scaling_trace = res.trace;
                scaled_columns = ordinal.iter().map(|o| info.columns[varying[o.index]].name.clone()).collect();
                for (k, &c) in varying.iter().enumerate() {
                    for r in 0..matrix.rows() {
                        matrix.set(r, c, res.matrix.get(r, k));
                    }
                }
            }
        }
        matrix.write_csv(self.out(IMPUTED))?;
        write_json(
            &self.out(IMPUTATION),
            &ImputationArtifact {
                svd_order: imp.svd_order,
                imputed_cells: imp.cells.len(),
                converged: imp.converged,
                warnings: imp.warnings,
                scaling_trace,
                scaled_columns,
            },
        )?;
        self.record(
            Stage::Impute,
            &[(QUANTIFIED, qpath), (QUANTIFICATION, cpath)],
            &[IMPUTED, IMPUTATION],
        )
    }

    /// Standardized feature columns of the imputed matrix: outcome columns
    /// and constant columns removed.
    fn features(&self) -> Result<(NumericMatrix, PathBuf)> {
        let ipath = self.require(IMPUTED, "impute")?;
        let m = NumericMatrix::read_csv(&ipath, None)?;
        m.require_complete()?;
        let info: QuantificationArtifact = read_json(&self.require(QUANTIFICATION, "quantify")?)?;
        let mut keep = Vec::new();
        for (c, col) in info.columns.iter().enumerate() {
            if self.config.outcome_columns.contains(&col.source) {
                continue;
            }
            match column_scale(&m, c) {
                Ok(_) => keep.push(c),
                Err(Error::ConstantColumn(name)) => log::warn!("dropping constant column {name}"),
                Err(e) => return Err(e),
            }
        }
        let sub = m.select_cols(&keep);
        Ok((crate::dataset::standardize(&sub)?, ipath))
    }

    fn reduce(&self) -> Result<()> {
        let (features, ipath) = self.features()?;
        if self.config.pca_components > features.cols() {
            return Err(Error::Config {
                field: "pca_components".into(),
                reason: format!(
                    "{} exceeds the {} usable feature columns",
                    self.config.pca_components,
                    features.cols()
                ),
            });
        }
        let pca = Pca::fit(&features, self.config.pca_components)?;
        let reduced = pca.transform(&features)?;
        reduced.write_csv(self.out(REDUCED))?;
        write_json(&self.out(PCA_MODEL), &pca)?;
        self.record(Stage::Reduce, &[(IMPUTED, ipath)], &[REDUCED, PCA_MODEL])
    }

    fn reduced(&self) -> Result<(NumericMatrix, PathBuf)> {
        let p = self.require(REDUCED, "reduce")?;
        Ok((NumericMatrix::read_csv(&p, None)?, p))
    }

    fn tree(&self) -> Result<(PrincipalGraph, PathBuf)> {
        let p = self.require(TREE, "fit")?;
        Ok((PrincipalGraph::load(&p)?, p))
    }

    fn fit(&self) -> Result<()> {
        let (x, rpath) = self.reduced()?;
        let pca: Pca = read_json(&self.require(PCA_MODEL, "reduce")?)?;
        let view = DataView::from_matrix(&x)?;
        let opts = GrowOptions {
            seed: self.config.seed,
            ..Default::default()
        };
        let grown = grow_tree(view, self.config.elastic, opts)?;
        let pruned = prune_tree(&grown.graph)?;
        let tree = extend_leaves(view, &pruned)?;
        let ev = explained_variance(view, &tree)?;
        let residual: f64 = (0..x.rows())
            .map(|i| squared_distance_to_graph(x.row(i), &tree))
            .sum::<Result<f64>>()?;
        let total: f64 = pca.eigenvalues.iter().sum::<f64>() * (x.rows() as f64 - 1.0);
        let kept: f64 = pca.eigenvalues.iter().take(pca.n_components()).sum::<f64>() * (x.rows() as f64 - 1.0);
        let report = FitReport {
            n_nodes: tree.n_nodes(),
            n_edges: tree.n_edges(),
            n_leaves: tree.leaves().len(),
            n_branching: tree.branching_nodes().len(),
            explained_variance: ev,
            explained_variance_full: 1.0 - (residual + (total - kept)) / total,
            pca2_variance: pca.explained_variance_ratio(2),
            energy_history: grown.energy_history,
        };
        log::info!(
            "tree: {} nodes, {} leaves, explained variance {:.4} (reduced) {:.4} (full)",
            report.n_nodes,
            report.n_leaves,
            report.explained_variance,
            report.explained_variance_full
        );
        tree.save(self.out(TREE))?;
        write_json(&self.out(FIT_REPORT), &report)?;
        self.record(Stage::Fit, &[(REDUCED, rpath)], &[TREE, FIT_REPORT])
    }

    fn segment(&self) -> Result<()> {
        let (x, rpath) = self.reduced()?;
        let (tree, tpath) = self.tree()?;
        let seg = decompose_segments(&tree);
        let labels = partition_by_segments(DataView::from_matrix(&x)?, &tree, &seg)?;
        write_json(&self.out(SEGMENTS), &seg)?;
        let mut text = String::from("point_id,segment\n");
        for (i, s) in labels.iter().enumerate() {
            text.push_str(&format!("{i},{s}\n"));
        }
        let lpath = self.out(SEGMENT_LABELS);
        std::fs::write(&lpath, text).map_err(|e| Error::io(&lpath, e))?;
        self.record(Stage::Segment, &[(REDUCED, rpath), (TREE, tpath)], &[SEGMENTS, SEGMENT_LABELS])
    }

    fn pseudotime(&self, root_override: Option<usize>) -> Result<()> {
        let (x, rpath) = self.reduced()?;
        let (tree, tpath) = self.tree()?;
        let view = DataView::from_matrix(&x)?;
        let root = match (root_override, &self.config.root) {
            (Some(r), _) => r,
            (None, RootChoice::Manual(r)) => *r,
            (None, RootChoice::Auto { column, class }) => {
                let table = self.kept_rows_table()?;
                let c = table.column_index(column).ok_or_else(|| Error::Config {
                    field: "root.auto.column".into(),
                    reason: format!("unknown column `{column}`"),
                })?;
                let labels: Vec<Option<&str>> = (0..table.n_rows())
                    .map(|r| (!table.is_missing(r, c)).then(|| table.token(r, c)))
                    .collect();
                let partition = partition_points(view, &tree)?;
                select_root(&tree, &partition, &labels, &Some(class.as_str()))?
            }
            (None, RootChoice::AutoAll { columns, class }) => {
                let table = self.kept_rows_table()?;
                let idx = columns
                    .iter()
                    .map(|name| {
                        table.column_index(name).ok_or_else(|| Error::Config {
                            field: "root.auto_all.columns".into(),
                            reason: format!("unknown column `{name}`"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let labels: Vec<Option<&str>> = (0..table.n_rows())
                    .map(|r| {
                        let all = idx.iter().all(|&c| !table.is_missing(r, c) && table.token(r, c) == class);
                        Some(if all { "all" } else { "other" })
                    })
                    .collect();
                let partition = partition_points(view, &tree)?;
                select_root(&tree, &partition, &labels, &Some("all"))?
            }
        };
        let pt = compute_pseudotime(view, &tree, root, self.config.pseudotime_metric)?;
        log::info!("root {root}: {} trajectories", pt.trajectories.len());
        pt.write_csv(self.out(PSEUDOTIME))?;
        write_json(
            &self.out(TRAJECTORIES),
            &TrajectoryArtifact {
                root,
                trajectories: pt.trajectories.clone(),
            },
        )?;
        self.record(Stage::Pseudotime, &[(REDUCED, rpath), (TREE, tpath)], &[PSEUDOTIME, TRAJECTORIES])
    }

    fn segment_labels(&self) -> Result<(Vec<usize>, PathBuf)> {
        let p = self.require(SEGMENT_LABELS, "segment")?;
        let mut reader = csv::Reader::from_path(&p)?;
        let mut labels = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            labels.push(rec[1].parse().map_err(|_| Error::InvalidArgument(format!("bad segment label in {}", p.display())))?);
        }
        Ok((labels, p))
    }

    fn assignment(&self) -> Result<(crate::treeanalysis::PseudotimeAssignment, PathBuf)> {
        let ppath = self.require(PSEUDOTIME, "pseudotime")?;
        let traj: TrajectoryArtifact = read_json(&self.require(TRAJECTORIES, "pseudotime")?)?;
        let (x, _) = self.reduced()?;
        let (tree, _) = self.tree()?;
        let pt = compute_pseudotime(DataView::from_matrix(&x)?, &tree, traj.root, self.config.pseudotime_metric)?;
        Ok((pt, ppath))
    }

    fn associate(&self) -> Result<()> {
        let (labels, lpath) = self.segment_labels()?;
        let table = self.kept_rows_table()?;
        if table.n_rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: table.n_rows(),
                found: labels.len(),
            });
        }
        let codes = table.to_codes();
        let mut results: Vec<AssociationResult> = Vec::new();
        for (c, var) in table.schema().iter().enumerate() {
            let res = if var.kind == VariableKind::Continuous {
                anova_association(&var.name, &labels, &codes.column(c))
            } else {
                let values: Vec<Option<usize>> = (0..table.n_rows()).map(|r| table.level_index(r, c)).collect();
                chi2_association(&var.name, &labels, &values, table.levels(c), DeviationSign::default())
            };
            match res {
                Ok(r) => results.push(r),
                Err(e) => log::info!("no association test for {}: {e}", var.name),
            }
        }
        AssociationResult::write_csv(&results, self.out(ASSOCIATIONS))?;

        let ipath = self.require(IMPUTED, "impute")?;
        let imputed = NumericMatrix::read_csv(&ipath, None)?;
        let info: QuantificationArtifact = read_json(&self.require(QUANTIFICATION, "quantify")?)?;
        let kinds: Vec<RegressionKind> = info
            .columns
            .iter()
            .map(|c| match c.kind {
                VariableKind::Binary | VariableKind::Categorical => RegressionKind::Logistic,
                VariableKind::Continuous | VariableKind::Ordinal => RegressionKind::GaussianKernel,
            })
            .collect();
        let (assignment, ppath) = self.assignment()?;
        let screen = screen_trajectory_associations(&assignment, &imputed, &kinds, self.config.thresholds.r_squared)?;
        log::info!(
            "{} variables pass R^2 > {} on at least one trajectory",
            screen.passing_variables().len(),
            self.config.thresholds.r_squared
        );
        screen.write_csv(self.out(R_SQUARED))?;
        write_json(&self.out(CURVES), &screen.fits)?;
        self.record(
            Stage::Associate,
            &[(SEGMENT_LABELS, lpath), (IMPUTED, ipath), (PSEUDOTIME, ppath)],
            &[ASSOCIATIONS, R_SQUARED, CURVES],
        )
    }

    fn survival(&self) -> Result<()> {
        let (assignment, ppath) = self.assignment()?;
        let Some(cfg) = &self.config.survival else {
            write_json(&self.out(SURVIVAL_SUMMARY), &serde_json::json!({ "skipped": true }))?;
            return self.record(Stage::Survival, &[(PSEUDOTIME, ppath)], &[SURVIVAL_SUMMARY]);
        };
        let table = self.kept_rows_table()?;
        let c = table.column_index(&cfg.event_column).ok_or_else(|| Error::Config {
            field: "survival.event_column".into(),
            reason: format!("unknown column `{}`", cfg.event_column),
        })?;
        let causes: Vec<String> = table
            .levels(c)
            .iter()
            .filter(|l| !cfg.censored_levels.contains(l))
            .cloned()
            .collect();
        let cause: Vec<Option<String>> = (0..table.n_rows())
            .map(|r| {
                if table.is_missing(r, c) {
                    return None;
                }
                let tok = table.token(r, c);
                causes.iter().any(|k| k == tok).then(|| tok.to_string())
            })
            .collect();
        let event: Vec<bool> = cause.iter().map(Option::is_some).collect();
        let mut full = EventTable::new(assignment.pseudotime.clone(), event)?.with_causes(cause, causes.clone())?;
        let mut inputs = vec![(PSEUDOTIME, ppath)];
        if !cfg.cox_covariates.is_empty() {
            let ipath = self.require(IMPUTED, "impute")?;
            let imputed = NumericMatrix::read_csv(&ipath, None)?;
            let mut idx = Vec::new();
            for name in &cfg.cox_covariates {
                idx.push(imputed.column_names().iter().position(|n| n == name).ok_or_else(|| Error::Config {
                    field: "survival.cox_covariates".into(),
                    reason: format!("unknown column `{name}`"),
                })?);
            }
            let rows: Vec<Vec<f64>> = (0..imputed.rows()).map(|r| idx.iter().map(|&k| imputed.get(r, k)).collect()).collect();
            full = full.with_covariates(cfg.cox_covariates.clone(), rows)?;
            inputs.push((IMPUTED, ipath));
        }
        let mut outputs: Vec<String> = Vec::new();
        let mut summary = BTreeMap::new();
        for t in &assignment.trajectories {
            let members = assignment.members(t.id);
            let sub = full.subset(&members);
            let mut entry = serde_json::Map::new();
            entry.insert("leaf".into(), t.leaf().into());
            entry.insert("subjects".into(), sub.len().into());
            entry.insert("events".into(), sub.n_events().into());
            if sub.is_empty() {
                summary.insert(format!("trajectory_{}", t.id), serde_json::Value::Object(entry));
                continue;
            }
            let total = nelson_aalen(&sub)?;
            let name = format!("hazard_t{}.csv", t.id);
            total.write_csv(self.out(&name))?;
            outputs.push(name);
            for (k, curve) in cause_specific_hazards(&sub, &causes)? {
                let name = format!("hazard_t{}_{}.csv", t.id, sanitize(&k));
                curve.write_csv(self.out(&name))?;
                outputs.push(name);
            }
            if !cfg.cox_covariates.is_empty() {
                let mut standardized = sub.clone();
                standardize_covariates(&mut standardized);
                match cox_fit(&standardized) {
                    Ok(fit) => {
                        entry.insert("cox".into(), serde_json::to_value(&fit)?);
                    }
                    Err(e) => {
                        log::warn!("Cox fit on trajectory {} failed: {e}", t.id);
                        entry.insert("cox_error".into(), e.to_string().into());
                    }
                }
            }
            summary.insert(format!("trajectory_{}", t.id), serde_json::Value::Object(entry));
        }
        write_json(&self.out(SURVIVAL_SUMMARY), &summary)?;
        outputs.push(SURVIVAL_SUMMARY.into());
        let outs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        self.record(Stage::Survival, &inputs, &outs)
    }

    fn layout(&self) -> Result<()> {
        let (x, rpath) = self.reduced()?;
        let (tree, tpath) = self.tree()?;
        let view = DataView::from_matrix(&x)?;
        let g = layout_graph(&tree, self.config.seed)?;
        let s = match self.config.layout.scattering {
            Some(s) => s,
            None => default_scattering(view, &tree, &g.node_xy)?,
        };
        let pts = layout_points(view, &tree, &g.node_xy, s, self.config.seed)?;
        let partition = partition_points(view, &tree)?;
        let widths = match &self.config.layout.width_by {
            Some(name) => {
                let imputed = NumericMatrix::read_csv(self.require(IMPUTED, "impute")?, None)?;
                let k = imputed.column_names().iter().position(|n| n == name).ok_or_else(|| Error::Config {
                    field: "layout.width_by".into(),
                    reason: format!("unknown column `{name}`"),
                })?;
                edge_widths(&tree, &imputed.column(k), &partition, 1.0, 8.0)?
            }
            None => vec![2.0; tree.n_edges()],
        };
        let (compositions, classes) = match &self.config.layout.color_by {
            Some(name) => {
                let table = self.kept_rows_table()?;
                let c = table.column_index(name).ok_or_else(|| Error::Config {
                    field: "layout.color_by".into(),
                    reason: format!("unknown column `{name}`"),
                })?;
                let labels: Vec<String> = (0..table.n_rows())
                    .map(|r| if table.is_missing(r, c) { "NA".to_string() } else { table.token(r, c).to_string() })
                    .collect();
                (node_composition(&tree, &labels, &partition)?, labels)
            }
            None => (Vec::new(), Vec::new()),
        };
        let layout = Layout2D {
            node_xy: g.node_xy,
            edges: tree.edges().to_vec(),
            point_xy: pts.point_xy,
            sides: pts.sides,
            scattering: s,
            widths,
            compositions,
            point_classes: classes,
        };
        write_json(&self.out(LAYOUT), &layout)?;
        let svg_path = self.out(SVG);
        std::fs::write(&svg_path, render_svg(&layout, &SvgStyle::default())).map_err(|e| Error::io(&svg_path, e))?;
        self.record(Stage::Layout, &[(REDUCED, rpath), (TREE, tpath)], &[LAYOUT, SVG])
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn standardize_covariates(t: &mut EventTable) {
    let p = t.covariate_names.len();
    let n = t.len() as f64;
    for k in 0..p {
        let mean = t.covariates.iter().map(|r| r[k]).sum::<f64>() / n;
        let var = t.covariates.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for r in t.covariates.iter_mut() {
            r[k] = (r[k] - mean) / sd;
        }
    }
}
