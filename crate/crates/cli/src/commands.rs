//! Subcommand definitions and their implementations.

use std::collections::BTreeSet;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use palate::axes::{self, CrossReference, Transform};
use palate::corpus::{pairwise, EmbeddingMatrix, LabelSet};
use palate::crossval::{cv_evaluate, CvConfig};
use palate::culture::{self, CuisineTags};
use palate::curation::{apply_overrides, consolidate, variant_noise, ConsolidationMap, OverrideSet};
use palate::matchdb::{
    alternates_from_map, build_index, join_measurements, EMBED_BATCH, load_entries, EntryVectors, MatchConfig, Matcher, Measure,
    Synonyms, Vocabulary,
};
use palate::provider::{Cassette, ChatClient, HttpProvider, ProviderConfig, Recorded, TextEmbedder};
use palate::stats::Seed;
use palate::tagger::{tag_to_coverage, CoverageConfig, DimensionSchema};

use crate::provenance::{Provenance, ReportDir};

#[derive(Debug, Parser)]
#[command(name = "palate", version, about = "Semantic-axis analysis of entity embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a consolidation map (and overrides) to raw embeddings.
    Consolidate(ConsolidateArgs),
    /// Intra-group cosine scatter of the largest consolidation groups.
    Noise(NoiseArgs),
    /// Evaluate one labeled dimension against an embedding matrix.
    Analyze(AnalyzeArgs),
    /// Repeated k-fold cross-validation of one dimension.
    Crossval(CrossvalArgs),
    /// Cuisine purity, intra-cuisine similarity and axis profiles.
    Culture(CultureArgs),
    /// Match names to external database entries.
    Match(MatchArgs),
    /// Label names through a structured-output provider.
    Tag(TagArgs),
    /// All unordered pairwise cosines.
    Pairs(PairsArgs),
    /// Inter-axis geometry and the optional pole-plane projection.
    Geometry(GeometryArgs),
    /// Serve a workspace over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransformArg {
    Identity,
    Log10Positive,
}

impl From<TransformArg> for Transform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Identity => Transform::Identity,
            TransformArg::Log10Positive => Transform::Log10Positive,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConsolidateArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    /// Curated embeddings TSV to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "reports")]
    pub reports: PathBuf,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Name used for the report files; must match the label set.
    #[arg(long)]
    pub dimension: String,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "identity")]
    pub transform: TransformArg,
    /// Treat the labels as groups and report within- minus cross-group similarity.
    #[arg(long)]
    pub categorical: bool,
    /// With --categorical, compare against every other entity instead of out-of-group ones.
    #[arg(long, requires = "categorical")]
    pub all_others: bool,
    /// File of entity ids (one per line); reports the dimension inside and outside it.
    #[arg(long)]
    pub subset: Option<PathBuf>,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "identity")]
    pub transform: TransformArg,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CultureArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub tags: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Pool size for the subsampled estimates; skipped when absent.
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    /// Ordinal or binary label sets whose axes get cuisine profiles.
    #[arg(long = "axis-labels")]
    pub axis_labels: Vec<PathBuf>,
    #[arg(long, default_value_t = 999)]
    pub n_perm: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// Provider config JSON; without it only the rule layer runs.
    #[arg(long)]
    pub provider: Option<PathBuf>,
    /// Serve provider calls from the recorded fixtures only.
    #[arg(long)]
    pub offline: bool,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// One name per line.
    #[arg(long)]
    pub names: PathBuf,
    #[arg(long)]
    pub entries: PathBuf,
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    /// Consolidation map whose original names serve as alternates.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long, requires = "map")]
    pub catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 300.0)]
    pub threshold: f64,
    #[command(flatten)]
    pub provider: ProviderArgs,
    /// Measurement to join onto the matches, written as a label set.
    #[arg(long)]
    pub measure: Option<String>,
    /// Comma-separated parts summed into the measurement.
    #[arg(long, requires = "measure", value_delimiter = ',')]
    pub parts: Vec<String>,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    /// Shipped schema family (ground_truth, taste, texture, binary, cuisine).
    #[arg(long, conflicts_with = "schema", required_unless_present = "schema")]
    pub family: Option<String>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub names: PathBuf,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub max_rounds: usize,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// One label set per axis; at least two.
    #[arg(long, num_args = 1.., required = true)]
    pub labels: Vec<PathBuf>,
    /// 3D coordinates CSV (`id,x,y,z`) for the pole-plane projection.
    #[arg(long, requires_all = ["sweet", "savoury"])]
    pub coords: Option<PathBuf>,
    /// Ids (one per line) of the sweet pole.
    #[arg(long)]
    pub sweet: Option<PathBuf>,
    /// Ids (one per line) of the savoury pole.
    #[arg(long)]
    pub savoury: Option<PathBuf>,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub workspace: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Environment variable holding a shared bearer token.
    #[arg(long)]
    pub token_env: Option<String>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Consolidate(a) => run_consolidate(a),
        Command::Noise(a) => run_noise(a),
        Command::Analyze(a) => run_analyze(a),
        Command::Crossval(a) => run_crossval(a),
        Command::Culture(a) => run_culture(a),
        Command::Match(a) => run_match(a),
        Command::Tag(a) => run_tag(a),
        Command::Pairs(a) => run_pairs(a),
        Command::Geometry(a) => run_geometry(a),
        Command::Serve(a) => crate::service::serve(&a.workspace, a.bind, a.token_env.as_deref()),
    }
}

fn load_matrix(path: &Path, prov: &mut Provenance) -> Result<EmbeddingMatrix> {
    let m = EmbeddingMatrix::load_tsv(path)?;
    prov.input(path)?;
    Ok(m)
}

fn load_labels(path: &Path, prov: &mut Provenance) -> Result<LabelSet> {
    let l = LabelSet::load(path)?;
    prov.input(path)?;
    Ok(l)
}

fn load_map(map: &Path, catalog: Option<&Path>, overrides: Option<&Path>, prov: &mut Provenance) -> Result<MapState> {
    let base = ConsolidationMap::load(map, catalog)?;
    prov.input(map)?;
    if let Some(c) = catalog {
        prov.input(c)?;
    }
    let Some(o) = overrides else {
        return Ok(MapState { map: base, audit: Vec::new() });
    };
    let set = OverrideSet::load(o)?;
    prov.input(o)?;
    let (map, audit) = apply_overrides(&base, &set).with_context(|| format!("applying {}", o.display()))?;
    Ok(MapState { map, audit })
}

struct MapState {
    map: ConsolidationMap,
    audit: Vec<palate::curation::AuditEntry>,
}

fn read_lines(path: &Path, prov: &mut Provenance) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    prov.input(path)?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

fn read_ids(path: &Path, prov: &mut Provenance) -> Result<Vec<i64>> {
    read_lines(path, prov)?
        .iter()
        .map(|l| l.parse().with_context(|| format!("{}: {l:?} is not an integer id", path.display())))
        .collect()
}

fn run_consolidate(a: ConsolidateArgs) -> Result<()> {
    let mut prov = Provenance::new("consolidate", None);
    let raw = load_matrix(&a.embeddings, &mut prov)?;
    let state = load_map(&a.map, a.catalog.as_deref(), a.overrides.as_deref(), &mut prov)?;
    let curated = consolidate(&raw, &state.map)?;
    curated.save_tsv(&a.out)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        originals: usize,
        canonicals: usize,
        removed: usize,
        output: String,
        audit: &'a [palate::curation::AuditEntry],
    }
    let mut reports = ReportDir::create(&a.reports, prov)?;
    reports.json(
        "consolidate.json",
        &Summary {
            originals: raw.len(),
            canonicals: curated.len(),
            removed: state.map.removed().len(),
            output: a.out.display().to_string(),
            audit: &state.audit,
        },
    )?;
    eprintln!("{} originals -> {} canonical vectors in {}", raw.len(), curated.len(), a.out.display());
    Ok(())
}

fn run_noise(a: NoiseArgs) -> Result<()> {
    let mut prov = Provenance::new("noise", Some(a.seed));
    let raw = load_matrix(&a.embeddings, &mut prov)?;
    let state = load_map(&a.map, a.catalog.as_deref(), a.overrides.as_deref(), &mut prov)?;
    let report = variant_noise(&raw, &state.map, a.top_k, Seed::new(a.seed))?;
    let mut out = ReportDir::create(&a.out, prov)?;
    out.json("noise.json", &report)?;
    out.csv("noise.csv", |w| report.write_csv(w))?;
    Ok(())
}

fn check_dimension(name: &str, labels: &LabelSet, path: &Path) -> Result<()> {
    if labels.dimension != name {
        bail!(
            "{}: label set is for dimension {:?}, not {name:?}",
            path.display(),
            labels.dimension
        );
    }
    Ok(())
}

fn run_analyze(a: AnalyzeArgs) -> Result<()> {
    let mut prov = Provenance::new("analyze", None);
    let labels = load_labels(&a.labels, &mut prov)?;
    check_dimension(&a.dimension, &labels, &a.labels)?;
    let matrix = load_matrix(&a.embeddings, &mut prov)?;
    let subset = a.subset.as_deref().map(|p| read_ids(p, &mut prov)).transpose()?;
    let mut out = ReportDir::create(&a.out, prov)?;
    if a.categorical {
        let cross = if a.all_others { CrossReference::AllOthers } else { CrossReference::OutOfGroup };
        let delta = axes::categorical_delta(&matrix, &labels, cross)?;
        out.json(&format!("{}.delta.json", a.dimension), &delta)?;
        return Ok(());
    }
    let report = axes::evaluate(&matrix, &labels, a.transform.into())?;
    out.json(&format!("{}.report.json", a.dimension), &report)?;
    if let Some(ids) = subset {
        let ids: BTreeSet<i64> = ids.into_iter().collect();
        let (inside, outside) = axes::subset_report(&matrix, &labels, None, &ids, a.transform.into())?;

        #[derive(Serialize)]
        struct Split {
            inside: axes::DimensionReport,
            outside: axes::DimensionReport,
        }
        out.json(&format!("{}.subset.json", a.dimension), &Split { inside, outside })?;
    }
    if let Some(h) = report.headline() {
        eprintln!("{}: n = {}, headline = {h:.4}", report.dimension, report.n);
    }
    Ok(())
}

fn run_crossval(a: CrossvalArgs) -> Result<()> {
    let mut prov = Provenance::new("crossval", Some(a.seed));
    let labels = load_labels(&a.labels, &mut prov)?;
    let matrix = load_matrix(&a.embeddings, &mut prov)?;
    let mut config = CvConfig::for_labels(&labels, Seed::new(a.seed))?;
    config.recipe = config.recipe.with_transform(a.transform.into());
    config.k = a.k;
    config.repeats = a.repeats;
    let report = cv_evaluate(&matrix, &labels, &config)?;
    let mut out = ReportDir::create(&a.out, prov)?;
    out.json(&format!("{}.cv.json", labels.dimension), &report)?;
    eprintln!(
        "{}: in-sample {:.4}, cross-validated {:.4} ± {:.4}",
        report.dimension, report.in_sample, report.mean, report.sd
    );
    Ok(())
}

#[derive(Serialize)]
struct CultureReport {
    purity: culture::PurityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    subsampled_purity: Option<culture::SubsampledPurity>,
    intra: culture::IntraReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    subsampled_intra: Option<culture::SubsampledIntra>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profiles: Option<culture::ProfileReport>,
}

fn run_culture(a: CultureArgs) -> Result<()> {
    let mut prov = Provenance::new("culture", Some(a.seed));
    let matrix = load_matrix(&a.embeddings, &mut prov)?;
    let tags = CuisineTags::load(&a.tags)?;
    prov.input(&a.tags)?;
    let labels = a
        .axis_labels
        .iter()
        .map(|p| load_labels(p, &mut prov))
        .collect::<Result<Vec<_>>>()?;
    let seed = Seed::new(a.seed);

    let purity = culture::knn_purity(&matrix, &tags, a.k)?;
    let intra = culture::intra_cluster_similarity(&matrix, &tags)?;
    let (subsampled_purity, subsampled_intra) = match a.subsample {
        Some(n) => (
            Some(culture::subsampled_purity(&matrix, &tags, n, a.iterations, a.k, seed.derive("purity"))?),
            Some(culture::subsampled_intra_similarity(&matrix, &tags, n, a.iterations, seed.derive("intra"))?),
        ),
        None => (None, None),
    };
    let profiles = if labels.is_empty() {
        None
    } else {
        let built = labels
            .iter()
            .map(|l| axes::build_axis(&matrix, l, axes::AxisRecipe::for_labels(l)?))
            .collect::<palate::Result<Vec<_>>>()?;
        Some(culture::cuisine_profiles(&matrix, &tags, &built, a.n_perm, seed.derive("profiles"))?)
    };

    let mut out = ReportDir::create(&a.out, prov)?;
    out.csv("purity.csv", |w| purity.write_csv(w))?;
    out.csv("intra.csv", |w| intra.write_csv(w))?;
    if let Some(s) = &subsampled_purity {
        out.csv("purity_subsampled.csv", |w| s.write_csv(w))?;
    }
    if let Some(p) = &profiles {
        out.csv("profiles.csv", |w| p.write_csv(w))?;
    }
    eprintln!("mean purity {:.4}, mean lift {:.2}", purity.mean_purity, purity.mean_lift);
    out.json(
        "culture.json",
        &CultureReport {
            purity,
            subsampled_purity,
            intra,
            subsampled_intra,
            profiles,
        },
    )?;
    Ok(())
}

/// A provider usable for both text vectors and chat.
pub trait Provider: TextEmbedder + ChatClient {}
impl<T: TextEmbedder + ChatClient> Provider for T {}

/// Builds the provider described by `args`: live, live with recording when
/// the config names a fixtures directory, or replay-only with `--offline`.
pub fn provider(args: &ProviderArgs, prov: &mut Provenance) -> Result<Option<Box<dyn Provider>>> {
    let Some(path) = &args.provider else {
        if args.offline {
            bail!("--offline needs --provider to locate the fixtures");
        }
        return Ok(None);
    };
    let config = ProviderConfig::load(path)?;
    prov.input(path)?;
    let model = config.model.clone();
    let out: Box<dyn Provider> = match (&config.fixtures_dir, args.offline) {
        (None, true) => bail!("{}: --offline needs `fixtures_dir` in the provider config", path.display()),
        (Some(dir), true) => {
            let dir = resolve(path, dir);
            Box::new(Recorded::<HttpProvider>::replay(model, Cassette::new(dir)))
        }
        (Some(dir), false) => {
            let dir = resolve(path, dir);
            Box::new(Recorded::record(model, HttpProvider::new(config), Cassette::new(dir)))
        }
        (None, false) => Box::new(HttpProvider::new(config)),
    };
    Ok(Some(out))
}

/// Relative fixture directories are taken relative to the config file.
fn resolve(config: &Path, dir: &Path) -> PathBuf {
    if dir.is_absolute() {
        dir.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(dir)
    }
}

fn run_match(a: MatchArgs) -> Result<()> {
    let mut prov = Provenance::new("match", None);
    let names = read_lines(&a.names, &mut prov)?;
    let entries = load_entries(&a.entries)?;
    prov.input(&a.entries)?;
    let synonyms = match &a.synonyms {
        Some(p) => {
            prov.input(p)?;
            Synonyms::load(p)?
        }
        None => Synonyms::builtin(),
    };
    let alternates = match &a.map {
        Some(m) => Some(alternates_from_map(&load_map(m, a.catalog.as_deref(), None, &mut prov)?.map)),
        None => None,
    };
    let provider = provider(&a.provider, &mut prov)?;
    let index = build_index(&entries, Vocabulary::builtin());
    for w in &index.warnings {
        eprintln!("warning: {w}");
    }
    let vectors = match &provider {
        Some(p) => Some(EntryVectors::build(&entries, p.as_ref(), EMBED_BATCH)?),
        None => None,
    };
    let matcher = Matcher {
        index: &index,
        synonyms: &synonyms,
        alternates: alternates.as_ref(),
        embedder: provider.as_deref().zip(vectors.as_ref()).map(|(p, v)| (p as &dyn TextEmbedder, v)),
        llm: provider.as_deref().map(|p| p as &dyn ChatClient),
        config: MatchConfig {
            rule_threshold: a.threshold,
            ..MatchConfig::default()
        },
    };
    let table = matcher.match_all(&names)?;
    let mut out = ReportDir::create(&a.out, prov)?;
    out.csv("matches.csv", |w| table.write_csv(w))?;
    out.json("matches.json", &table)?;
    if let Some(measure) = &a.measure {
        let m = if a.parts.is_empty() {
            Measure::single(measure.clone())
        } else {
            let parts: Vec<&str> = a.parts.iter().map(String::as_str).collect();
            Measure::sum(measure.clone(), &parts)
        };
        let labels = join_measurements(&table, &entries, &m)?;
        out.bytes(&format!("{measure}.labels.json"), labels.to_json_string()?.as_bytes())?;
    }
    eprintln!("matched {}/{} names ({:.1}%)", table.matched(), table.rows.len(), 100.0 * table.match_rate());
    Ok(())
}

fn run_tag(a: TagArgs) -> Result<()> {
    let mut prov = Provenance::new("tag", None);
    let mut schema = match (&a.family, &a.schema) {
        (_, Some(p)) => {
            prov.input(p)?;
            DimensionSchema::load(p)?
        }
        (Some(f), None) => DimensionSchema::builtin(f)?,
        (None, None) => unreachable!("clap requires one of --family/--schema"),
    };
    if let Some(b) = a.batch_size {
        schema = schema.with_batch_size(b);
    }
    schema.validate()?;
    let names = read_lines(&a.names, &mut prov)?;
    let Some(provider) = provider(&a.provider, &mut prov)? else {
        bail!("tagging needs --provider");
    };
    let run = tag_to_coverage(
        &names,
        &schema,
        provider.as_ref(),
        CoverageConfig {
            max_rounds: a.max_rounds,
            ..CoverageConfig::default()
        },
    )?;
    let mut out = ReportDir::create(&a.out, prov)?;
    for set in run.label_sets(&schema)? {
        out.bytes(&format!("{}.labels.json", set.dimension), set.to_json_string()?.as_bytes())?;
    }
    let mut transcript = run.transcripts.join("\n");
    transcript.push('\n');
    out.bytes(&format!("{}.transcripts.jsonl", schema.family), transcript.as_bytes())?;

    #[derive(Serialize)]
    struct Summary<'a> {
        family: &'a str,
        requested: usize,
        labeled: usize,
        rounds: usize,
        rejects: &'a [palate::tagger::Reject],
    }
    out.json(
        &format!("{}.tag.json", schema.family),
        &Summary {
            family: &schema.family,
            requested: run.requested.len(),
            labeled: run.records.len(),
            rounds: run.rounds,
            rejects: &run.rejects,
        },
    )?;
    Ok(())
}

fn run_pairs(a: PairsArgs) -> Result<()> {
    let matrix = EmbeddingMatrix::load_tsv(&a.embeddings)?;
    let table = pairwise(&matrix)?;
    table.save_csv(&a.out)?;
    eprintln!("{} pairs written to {}", table.len(), a.out.display());
    Ok(())
}

fn run_geometry(a: GeometryArgs) -> Result<()> {
    let mut prov = Provenance::new("geometry", None);
    let matrix = load_matrix(&a.embeddings, &mut prov)?;
    let labels = a
        .labels
        .iter()
        .map(|p| load_labels(p, &mut prov))
        .collect::<Result<Vec<_>>>()?;
    let built = labels
        .iter()
        .map(|l| axes::build_axis(&matrix, l, axes::AxisRecipe::for_labels(l)?))
        .collect::<palate::Result<Vec<_>>>()?;
    let slots: Vec<Option<&LabelSet>> = labels.iter().map(Some).collect();
    let report = axes::axis_geometry(&matrix, &built, &slots)?;
    let plane = match (&a.coords, &a.sweet, &a.savoury) {
        (Some(c), Some(sw), Some(sv)) => {
            let file = fs::File::open(c).with_context(|| format!("reading {}", c.display()))?;
            let coords = axes::read_coords_csv(file)?;
            prov.input(c)?;
            let sweet = read_ids(sw, &mut prov)?;
            let savoury = read_ids(sv, &mut prov)?;
            Some(axes::pole_plane_projection(&coords, &sweet, &savoury)?)
        }
        _ => None,
    };
    let mut out = ReportDir::create(&a.out, prov)?;
    out.json("geometry.json", &report)?;
    out.csv("axis_cosines.csv", |w| report.write_cosine_csv(w))?;
    if let Some(p) = plane {
        out.json("projection3d.json", &p)?;
    }
    Ok(())
}
