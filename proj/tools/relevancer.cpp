// relevancer: command-line front end for the labeling pipeline.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "relevancer/annotate.hpp"
#include "relevancer/dataset.hpp"
#include "relevancer/eval.hpp"
#include "relevancer/runner.hpp"
#include "relevancer/vectorstore.hpp"

namespace fs = std::filesystem;
using namespace relevancer;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kBackend = 3 };

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::kInvalidConfig:
    case Errc::kUnknownScheme:
    case Errc::kInvalidScheme:
    case Errc::kBadLambda:
    case Errc::kDuplicateConfig:
      return kUsage;
    case Errc::kBackendUnavailable:
    case Errc::kRemoteUnavailable:
      return kBackend;
    default:
      return kData;
  }
}

ColumnMapping mapping_or_default(const std::string& path) {
  return path.empty() ? ColumnMapping{} : load_mapping_file(path);
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  file.open(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(Errc::kOutputUnwritable, "cannot write " + path);
  return file;
}

// --- index -----------------------------------------------------------------

struct IndexArgs {
  std::string pool, scheme = "wands", mapping, embedder = "hash", endpoint, model, out, exclude, exclude_mapping;
  std::size_t dim = kDefaultEmbeddingDim;
};

int cmd_index(const IndexArgs& a) {
  LabelScheme scheme = resolve_scheme(a.scheme);
  Dataset pool = load_dataset(a.pool, mapping_or_default(a.mapping), scheme);
  if (!a.exclude.empty()) {
    pool = exclude_overlap(pool, load_test_set(a.exclude, mapping_or_default(a.exclude_mapping), scheme));
  }
  EmbedderSpec spec{parse_embedder_kind(a.embedder), a.dim, a.endpoint, a.model};
  auto embedder = make_embedder(spec);
  Store store = build_store(pool, *embedder);
  store.save(a.out);
  std::cerr << fmt::format("indexed {} examples ({}-dim {}) into {}\n", store.size(), store.dim(),
                           to_string(spec.kind), a.out);
  return kOk;
}

// --- label -----------------------------------------------------------------

struct LabelArgs {
  std::string test, test_mapping, store, config, only, out, cache_dir;
  std::size_t concurrency = 0;
  bool keep_prompts = false;
};

int cmd_label(const LabelArgs& a) {
  ExperimentGrid grid = load_grid_file(a.config);
  if (!a.test.empty()) grid.test_set = a.test;
  if (!a.test_mapping.empty()) grid.test_mapping = a.test_mapping;
  if (!a.cache_dir.empty()) grid.cache_dir = a.cache_dir;
  if (a.concurrency > 0) grid.concurrency = a.concurrency;
  if (a.keep_prompts) grid.keep_prompts = true;
  grid.validate();

  auto configs = expand_grid(grid);
  auto it = std::find_if(configs.begin(), configs.end(), [&](const auto& c) { return c.config_id == a.only; });
  if (it == configs.end()) throw Error(Errc::kInvalidConfig, "no config '" + a.only + "' in " + a.config);

  PreparedData data;
  if (!a.store.empty()) {
    Store store = Store::load(a.store);
    data.scheme = resolve_scheme(grid.scheme);
    if (!(store.scheme() == data.scheme)) {
      throw Error(Errc::kSchemeMismatch, "store scheme " + store.scheme().name + " differs from " + data.scheme.name);
    }
    ColumnMapping test_map = grid.test_mapping ? load_mapping_file(*grid.test_mapping) : ColumnMapping{};
    data.test = load_test_set(grid.test_set, test_map, data.scheme);
    data.pool = store_to_dataset(store);
    data.embedder = make_embedder(store.embedder());
    data.store.emplace(std::move(store));
  } else {
    data = prepare_data(grid, it->prompt.uses_store());
  }

  RunOptions options;
  BatchResult r = run_config(*it, data, grid, options, a.out);
  const auto& s = r.summary;
  std::cerr << fmt::format("{}: {} pairs, {} errors ({} backend), {} calls, {} cached, {:.2f}s, {:.1f} ms/record\n",
                           it->config_id, s.n, s.errors, s.backend_failures, s.backend_calls, s.cache_hits,
                           s.wall_clock_s, s.mean_latency_ms);
  bool scored = std::all_of(r.predictions.begin(), r.predictions.end(), [](const auto& p) { return p.gold; });
  if (scored && !r.predictions.empty()) {
    auto m = metrics(confusion(r.predictions, data.scheme));
    std::cerr << fmt::format("accuracy {} macro_f1 {} weighted_f1 {}\n", format_metric(m.accuracy),
                             format_metric(m.macro_f1), format_metric(m.weighted_f1));
  }
  return s.backend_failures > 0 ? kBackend : kOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string preds, scheme = "wands", out, format = "table";
  bool show_confusion = false;
};

int cmd_eval(const EvalArgs& a) {
  LabelScheme scheme = resolve_scheme(a.scheme);
  auto preds = load_predictions(a.preds);
  if (preds.empty()) throw Error(Errc::kEmptyMatrix, a.preds + " holds no predictions");

  std::vector<std::string> order;
  std::map<std::string, std::vector<Prediction>> groups;
  for (auto& p : preds) {
    if (!groups.contains(p.config_id)) order.push_back(p.config_id);
    groups[p.config_id].push_back(std::move(p));
  }
  std::vector<ReportRow> rows;
  for (const auto& id : order) {
    auto cm = confusion(groups[id], scheme);
    if (a.show_confusion) {
      std::cout << id << '\n';
      write_confusion(std::cout, cm);
      std::cout << '\n';
    }
    rows.push_back({id, metrics(cm)});
  }

  if (!a.out.empty()) {
    std::ofstream file;
    write_metrics_csv(open_out(a.out, file), rows, scheme);
  }
  std::vector<std::vector<std::string>> cells{metrics_csv_header(scheme)};
  for (const auto& r : rows) cells.push_back(metrics_csv_fields(r));
  if (a.format == "md") {
    write_markdown_table(std::cout, cells);
  } else if (a.format == "csv") {
    write_metrics_csv(std::cout, rows, scheme);
  } else if (a.format == "tex") {
    for (const auto& r : rows) std::cout << latex_row(r) << '\n';
  } else {
    write_aligned_table(std::cout, cells);
  }
  return kOk;
}

// --- grid ------------------------------------------------------------------

struct GridArgs {
  std::string config, cache_dir, report, output_dir;
  std::vector<std::string> only;
  std::size_t concurrency = 0;
  bool keep_prompts = false;
  bool quiet = false;
};

int cmd_grid(const GridArgs& a) {
  ExperimentGrid grid = load_grid_file(a.config);
  if (!a.cache_dir.empty()) grid.cache_dir = a.cache_dir;
  if (!a.report.empty()) grid.report = a.report;
  if (!a.output_dir.empty()) grid.output_dir = a.output_dir;
  if (a.concurrency > 0) grid.concurrency = a.concurrency;
  if (a.keep_prompts) grid.keep_prompts = true;

  RunOptions options;
  options.only = a.only;
  if (!a.quiet) options.log = &std::cerr;
  GridResult result = run_grid(grid, options);
  if (!a.quiet) std::cerr << fmt::format("wrote {} rows to {}\n", result.rows.size(), grid.report.string());
  if (result.backend_failures > 0) {
    std::cerr << fmt::format("{} predictions failed at the backend\n", result.backend_failures);
    return kBackend;
  }
  return kOk;
}

// --- report ----------------------------------------------------------------

struct ReportArgs {
  std::string in, sort = "weighted_f1", format = "md";
};

int cmd_report(const ReportArgs& a) {
  auto rows = sort_report(load_report(a.in), parse_sort_key(a.sort));
  render_report(std::cout, rows, parse_report_format(a.format));
  return kOk;
}

// --- sample ----------------------------------------------------------------

struct SampleArgs {
  std::string in, scheme = "wands", mapping, out, exclude, exclude_mapping;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& a) {
  LabelScheme scheme = resolve_scheme(a.scheme);
  Dataset ds = load_dataset(a.in, mapping_or_default(a.mapping), scheme);
  if (!a.exclude.empty()) {
    ds = exclude_overlap(ds, load_test_set(a.exclude, mapping_or_default(a.exclude_mapping), scheme));
  }
  Dataset sample = stratified_sample(ds, a.n, a.seed);
  std::ofstream file;
  write_dataset(open_out(a.out, file), sample);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-product relevance labeling with retrieval-augmented few-shot prompts"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "relevancer 0.1.0");

  IndexArgs ia;
  auto* index = app.add_subcommand("index", "Embed a labeled pool into a vector store file");
  index->add_option("--pool", ia.pool, "Labeled pool CSV")->required()->check(CLI::ExistingFile);
  index->add_option("--scheme", ia.scheme, "Builtin scheme name or scheme file")->capture_default_str();
  index->add_option("--mapping", ia.mapping, "Column mapping file for the pool");
  index->add_option("--embedder", ia.embedder, "hash | remote")->capture_default_str();
  index->add_option("--dim", ia.dim, "Embedding dimension")->capture_default_str();
  index->add_option("--endpoint", ia.endpoint, "Remote embedding endpoint");
  index->add_option("--model", ia.model, "Remote embedding model");
  index->add_option("--exclude", ia.exclude, "Drop pool pairs that occur in this test CSV");
  index->add_option("--exclude-mapping", ia.exclude_mapping, "Column mapping for --exclude");
  index->add_option("--out", ia.out, "Store file to write")->required();

  LabelArgs la;
  auto* label = app.add_subcommand("label", "Label a test set with one grid configuration");
  label->add_option("--config", la.config, "Grid file")->required()->check(CLI::ExistingFile);
  label->add_option("--only", la.only, "Config id to run, e.g. 'LLM2 + 16_FS_RAG'")->required();
  label->add_option("--test", la.test, "Test CSV (overrides the grid)");
  label->add_option("--test-mapping", la.test_mapping, "Column mapping for the test CSV");
  label->add_option("--store", la.store, "Prebuilt store; its examples become the pool");
  label->add_option("--cache-dir", la.cache_dir, "Completion cache directory");
  label->add_option("--concurrency", la.concurrency, "Backend calls in flight");
  label->add_flag("--keep-prompts", la.keep_prompts, "Store full prompts in the output");
  label->add_option("--out", la.out, "Predictions JSONL")->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score a predictions file");
  eval->add_option("--preds", ea.preds, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--scheme", ea.scheme, "Builtin scheme name or scheme file")->capture_default_str();
  eval->add_option("--out", ea.out, "Metrics CSV to write");
  eval->add_option("--format", ea.format, "Console format: table | md | csv | tex")
      ->check(CLI::IsMember({"table", "md", "csv", "tex"}))
      ->capture_default_str();
  eval->add_flag("--confusion", ea.show_confusion, "Print confusion matrices");

  GridArgs ga;
  auto* grid = app.add_subcommand("grid", "Run every configuration of an experiment grid");
  grid->add_option("--config", ga.config, "Grid file")->required()->check(CLI::ExistingFile);
  grid->add_option("--cache-dir", ga.cache_dir, "Completion cache directory");
  grid->add_option("--report", ga.report, "Consolidated report CSV");
  grid->add_option("--output-dir", ga.output_dir, "Directory for per-config predictions");
  grid->add_option("--only", ga.only, "Run only these config ids");
  grid->add_option("--concurrency", ga.concurrency, "Backend calls in flight per config");
  grid->add_flag("--keep-prompts", ga.keep_prompts, "Store full prompts in the predictions");
  grid->add_flag("-q,--quiet", ga.quiet, "No progress output");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Render a consolidated report");
  report->add_option("--in", ra.in, "Report CSV written by 'grid'")->required()->check(CLI::ExistingFile);
  report->add_option("--sort", ra.sort, "weighted_f1 | macro_f1 | accuracy | config_id")
      ->check(CLI::IsMember({"weighted_f1", "macro_f1", "accuracy", "config_id"}))
      ->capture_default_str();
  report->add_option("--format", ra.format, "md | csv | table | tex")
      ->check(CLI::IsMember({"md", "csv", "table", "tex"}))
      ->capture_default_str();

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Draw a class-balanced sample from a labeled CSV");
  sample->add_option("--in", sa.in, "Labeled CSV")->required()->check(CLI::ExistingFile);
  sample->add_option("--scheme", sa.scheme, "Builtin scheme name or scheme file")->capture_default_str();
  sample->add_option("--mapping", sa.mapping, "Column mapping file");
  sample->add_option("-n,--n", sa.n, "Total size; must divide by the number of labels")->required();
  sample->add_option("--seed", sa.seed, "Sampling seed")->capture_default_str();
  sample->add_option("--exclude", sa.exclude, "Skip pairs that occur in this CSV");
  sample->add_option("--exclude-mapping", sa.exclude_mapping, "Column mapping for --exclude");
  sample->add_option("--out", sa.out, "Output CSV (stdout when omitted)");

  std::string scheme_name;
  auto* scheme = app.add_subcommand("scheme", "Print a builtin scheme as a scheme file");
  scheme->add_option("name", scheme_name, "esci | wands | five_level")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*index) return cmd_index(ia);
    if (*label) return cmd_label(la);
    if (*eval) return cmd_eval(ea);
    if (*grid) return cmd_grid(ga);
    if (*report) return cmd_report(ra);
    if (*sample) return cmd_sample(sa);
    if (*scheme) {
      std::cout << scheme_to_toml(builtin_scheme(scheme_name));
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "relevancer: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "relevancer: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
