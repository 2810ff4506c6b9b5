#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "phigrade/backend.hpp"
#include "phigrade/corpus.hpp"
#include "phigrade/error.hpp"
#include "phigrade/metrics.hpp"
#include "phigrade/paths.hpp"
#include "phigrade/pipeline.hpp"
#include "phigrade/prompt.hpp"
#include "phigrade/report.hpp"
#include "phigrade/rules.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitBelowFloor = 2;
constexpr int kExitRecordFailures = 3;

struct DataPaths {
  std::string taxonomy;
  std::string rules;
  std::string exemplars;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--taxonomy", taxonomy, "Taxonomy JSON (default: bundled)");
    cmd->add_option("--rules", rules, "Rule pack JSON (default: bundled)");
    cmd->add_option("--exemplars", exemplars, "Few-shot exemplars JSONL (default: bundled)");
  }
  std::filesystem::path taxonomy_path() const {
    return taxonomy.empty() ? phigrade::data_file("taxonomy.json") : std::filesystem::path(taxonomy);
  }
  std::filesystem::path rules_path() const {
    return rules.empty() ? phigrade::data_file("rules.json") : std::filesystem::path(rules);
  }
  std::filesystem::path exemplars_path() const {
    return exemplars.empty() ? phigrade::data_file("exemplars.jsonl")
                             : std::filesystem::path(exemplars);
  }
};

std::optional<phigrade::FileFormat> format_option(const std::string& name) {
  if (name.empty()) return std::nullopt;
  const auto format = phigrade::parse_format(name);
  if (!format) throw phigrade::ConfigError("unknown format '" + name + "'");
  return format;
}

phigrade::ReplayTable read_replay(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw phigrade::IoError("cannot open " + path);
  return phigrade::load_replay_table(in);
}

phigrade::FaultPlan read_faults(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw phigrade::IoError("cannot open " + path);
  return phigrade::load_fault_plan(in);
}

// ---- extract ---------------------------------------------------------------

struct ExtractArgs {
  DataPaths data;
  std::string input;
  std::string input_format;
  std::string output;
  std::string output_format;
  phigrade::ColumnMap columns;
  std::string providers;
  std::string backend;
  std::string replay;
  std::string fault_plan;
  bool no_few_shot = false;
  bool no_schema = false;
  bool no_rules = false;
  phigrade::ChunkingParams chunking;
  std::size_t concurrency = 0;
  std::string audit_log;
  std::string rejection_log;
  bool fill_names = false;
  std::uint64_t name_seed = 2020;
  bool quiet = false;
};

int run_extract(const ExtractArgs& args) {
  const auto taxonomy = phigrade::load_taxonomy_file(args.data.taxonomy_path());
  const phigrade::AblationFlags flags{!args.no_few_shot, !args.no_schema, !args.no_rules};
  std::vector<phigrade::Exemplar> exemplars;
  if (flags.few_shot) exemplars = phigrade::load_exemplars_file(args.data.exemplars_path(), taxonomy);
  const auto bundle = phigrade::build_prompt(taxonomy, std::move(exemplars), flags);
  std::optional<phigrade::RulePack> rules;
  if (flags.rules) rules = phigrade::load_rule_pack_file(args.data.rules_path(), taxonomy);

  std::ofstream audit_stream;
  std::shared_ptr<phigrade::AuditLog> audit;
  if (!args.audit_log.empty()) {
    audit_stream.open(args.audit_log, std::ios::binary | std::ios::trunc);
    if (!audit_stream) throw phigrade::IoError("cannot write " + args.audit_log);
    audit = std::make_shared<phigrade::AuditLog>(audit_stream);
  }

  std::shared_ptr<phigrade::CompletionClient> client;
  if (!args.replay.empty()) {
    phigrade::BackendConfig config;
    config.provider_name = "stub";
    config.provider_kind = "stub";
    config.endpoint_url = "stub://replay";
    client = std::make_shared<phigrade::CompletionClient>(
        config,
        std::make_shared<phigrade::StubTransport>(read_replay(args.replay), read_faults(args.fault_plan)),
        [](std::chrono::milliseconds) {}, audit);
  } else {
    if (args.providers.empty() || args.backend.empty()) {
      throw phigrade::ConfigError("extract needs --replay, or --providers with --backend");
    }
    const auto configs = phigrade::load_provider_configs(args.providers);
    const auto it = std::find_if(configs.begin(), configs.end(), [&](const auto& c) {
      return c.provider_name == args.backend;
    });
    if (it == configs.end()) {
      throw phigrade::ConfigError("no provider named '" + args.backend + "' in " + args.providers);
    }
    client = phigrade::make_client(*it, audit);
  }

  auto records = phigrade::read_corpus(
      phigrade::CorpusFile{args.input, format_option(args.input_format), args.columns});
  if (args.fill_names) {
    records = phigrade::fill_names(std::move(records), phigrade::NamePool(args.name_seed));
  }

  phigrade::PipelineContext ctx;
  ctx.taxonomy = &taxonomy;
  ctx.bundle = &bundle;
  ctx.backend = client.get();
  ctx.rules = rules ? &*rules : nullptr;
  ctx.chunking = args.chunking;
  const std::size_t concurrency =
      args.concurrency > 0 ? args.concurrency
                           : static_cast<std::size_t>(client->config().max_in_flight);

  const auto run = phigrade::process_corpus(
      records, ctx, concurrency,
      [&](std::size_t done, std::size_t total, const phigrade::RecordResult& r) {
        if (r.failed) std::cerr << "record " << r.record_id << " failed: " << r.error << "\n";
        if (!args.quiet && (done % 100 == 0 || done == total)) {
          std::cerr << "processed " << done << "/" << total << "\n";
        }
      });

  phigrade::write_results(run.results, args.output, taxonomy, format_option(args.output_format));

  if (!args.rejection_log.empty()) {
    std::ofstream log(args.rejection_log, std::ios::binary | std::ios::trunc);
    if (!log) throw phigrade::IoError("cannot write " + args.rejection_log);
    for (const auto& r : run.results) {
      for (const auto& rej : r.rejections) {
        nlohmann::json row = {{"record_id", r.record_id},
                              {"reason", phigrade::reason_name(rej.reason)},
                              {"item", rej.item}};
        log << row.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << "\n";
      }
    }
  }

  std::size_t triples = 0;
  std::size_t rejections = 0;
  std::size_t chunks = 0;
  for (const auto& r : run.results) {
    triples += r.triples.size();
    rejections += r.rejection_count;
    chunks += r.chunk_count;
  }
  std::cerr << "records: " << run.results.size() << ", chunks: " << chunks
            << ", triples: " << triples << ", rejected items: " << rejections
            << ", failed records: " << run.failed_ids.size() << "\n";
  return run.failed_ids.empty() ? 0 : kExitRecordFailures;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string taxonomy;
  std::string gold;
  std::string predictions;
  std::string report;
  bool no_records = false;
  std::optional<double> min_mcif;
  std::optional<double> min_mccr;
  std::optional<double> min_msgr;
  std::optional<double> min_micro_f1;
};

int run_evaluate(const EvaluateArgs& args) {
  const auto taxonomy = phigrade::load_taxonomy_file(
      args.taxonomy.empty() ? phigrade::data_file("taxonomy.json") : std::filesystem::path(args.taxonomy));
  auto gold = phigrade::read_gold(args.gold, taxonomy);
  const auto predictions = phigrade::read_predictions(args.predictions, taxonomy);
  const auto report = phigrade::evaluate(std::move(gold), predictions);

  std::cout << phigrade::render_table(report);
  if (!args.report.empty()) {
    std::ofstream out(args.report, std::ios::binary | std::ios::trunc);
    if (!out) throw phigrade::IoError("cannot write " + args.report);
    out << phigrade::to_json(report, !args.no_records).dump(2) << "\n";
  }

  int status = 0;
  auto gate = [&](const char* name, double value, const std::optional<double>& floor) {
    if (floor && value < *floor) {
      std::cerr << name << " " << value << " is below the floor " << *floor << "\n";
      status = kExitBelowFloor;
    }
  };
  gate("MCIF", report.mcif, args.min_mcif);
  gate("MCCR", report.mccr, args.min_mccr);
  gate("MSGR", report.msgr, args.min_msgr);
  gate("micro-F1", report.micro_f1, args.min_micro_f1);
  return status;
}

// ---- report ----------------------------------------------------------------

struct ReportArgs {
  std::string taxonomy;
  std::string input;
  std::string output;
  std::string json;
  std::size_t top_k = 10;
};

int run_report(const ReportArgs& args) {
  const auto taxonomy = phigrade::load_taxonomy_file(
      args.taxonomy.empty() ? phigrade::data_file("taxonomy.json") : std::filesystem::path(args.taxonomy));
  std::vector<phigrade::Triple> triples;
  for (const auto& record : phigrade::read_predictions(args.input, taxonomy)) {
    triples.insert(triples.end(), record.triples.begin(), record.triples.end());
  }
  const auto distributions = phigrade::stratify(triples, args.top_k);
  if (args.output.empty()) {
    std::cout << phigrade::render_plot_data(distributions);
  } else {
    phigrade::emit_plot_data(distributions, args.output);
  }
  if (!args.json.empty()) {
    std::ofstream out(args.json, std::ios::binary | std::ios::trunc);
    if (!out) throw phigrade::IoError("cannot write " + args.json);
    out << phigrade::to_json(distributions).dump(2) << "\n";
  }
  return 0;
}

// ---- prompt / schema -------------------------------------------------------

struct PromptArgs {
  DataPaths data;
  std::string text;
  std::string text_file;
  bool no_few_shot = false;
  bool no_schema = false;
};

int run_prompt(const PromptArgs& args) {
  const auto taxonomy = phigrade::load_taxonomy_file(args.data.taxonomy_path());
  const phigrade::AblationFlags flags{!args.no_few_shot, !args.no_schema, true};
  std::vector<phigrade::Exemplar> exemplars;
  if (flags.few_shot) exemplars = phigrade::load_exemplars_file(args.data.exemplars_path(), taxonomy);
  const auto bundle = phigrade::build_prompt(taxonomy, std::move(exemplars), flags);
  std::string input = args.text;
  if (!args.text_file.empty()) {
    std::ifstream in(args.text_file, std::ios::binary);
    if (!in) throw phigrade::IoError("cannot open " + args.text_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    input = buf.str();
  }
  nlohmann::ordered_json doc;
  doc["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : phigrade::render_messages(bundle, input)) {
    doc["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  doc["output_schema"] = bundle.output_schema ? nlohmann::ordered_json(*bundle.output_schema)
                                              : nlohmann::ordered_json();
  std::cout << doc.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Health-data privacy triple extraction, grading and evaluation"};
  app.require_subcommand(1);

  ExtractArgs extract;
  auto* ex = app.add_subcommand("extract", "Extract (entity, category, level) triples from a corpus");
  extract.data.add_to(ex);
  ex->add_option("-i,--input", extract.input, "Corpus file (.jsonl, .csv, .tsv, .xlsx)")->required();
  ex->add_option("--input-format", extract.input_format, "Override input format (jsonl|csv|xlsx)");
  ex->add_option("-o,--output", extract.output, "Predictions file")->required();
  ex->add_option("--output-format", extract.output_format, "Override output format (jsonl|csv|xlsx)");
  ex->add_option("--id-column", extract.columns.record_id, "Record id column")->capture_default_str();
  ex->add_option("--description-column", extract.columns.description, "Description column")
      ->capture_default_str();
  ex->add_option("--providers", extract.providers, "Provider configuration JSON");
  ex->add_option("--backend", extract.backend, "Provider name from --providers");
  ex->add_option("--replay", extract.replay, "Use the stub backend with this replay table");
  ex->add_option("--fault-plan", extract.fault_plan, "Stub fault plan (with --replay)");
  ex->add_flag("--no-few-shot", extract.no_few_shot, "Drop the exemplar turns");
  ex->add_flag("--no-schema", extract.no_schema, "Do not request structured output");
  ex->add_flag("--no-rules", extract.no_rules, "Disable the deterministic rule layer");
  ex->add_option("--max-chunk-chars", extract.chunking.max_chunk_chars)->capture_default_str();
  ex->add_option("--overlap-chars", extract.chunking.overlap_chars)->capture_default_str();
  ex->add_option("--concurrency", extract.concurrency,
                 "Records processed concurrently (default: provider max_in_flight)");
  ex->add_option("--audit-log", extract.audit_log, "JSON-lines request audit log");
  ex->add_option("--rejection-log", extract.rejection_log, "JSON-lines log of rejected items");
  ex->add_flag("--fill-names", extract.fill_names, "Replace name placeholders with synthetic names");
  ex->add_option("--name-seed", extract.name_seed, "Seed for --fill-names")->capture_default_str();
  ex->add_flag("-q,--quiet", extract.quiet, "No progress output");

  EvaluateArgs evaluate;
  auto* ev = app.add_subcommand("evaluate", "Score predictions against a gold file");
  ev->add_option("--taxonomy", evaluate.taxonomy, "Taxonomy JSON (default: bundled)");
  ev->add_option("-g,--gold", evaluate.gold, "Gold rows file")->required();
  ev->add_option("-p,--predictions", evaluate.predictions, "Prediction rows file")->required();
  ev->add_option("-r,--report", evaluate.report, "Write the JSON report here");
  ev->add_flag("--no-records", evaluate.no_records, "Omit per-record diagnostics from the JSON");
  ev->add_option("--min-mcif", evaluate.min_mcif, "Fail (exit 2) below this MCIF");
  ev->add_option("--min-mccr", evaluate.min_mccr, "Fail (exit 2) below this MCCR");
  ev->add_option("--min-msgr", evaluate.min_msgr, "Fail (exit 2) below this MSGR");
  ev->add_option("--min-micro-f1", evaluate.min_micro_f1, "Fail (exit 2) below this micro-F1");

  ReportArgs report;
  auto* rp = app.add_subcommand("report", "Category counts stratified by sensitivity level");
  rp->add_option("--taxonomy", report.taxonomy, "Taxonomy JSON (default: bundled)");
  rp->add_option("-i,--input", report.input, "Prediction or gold rows file")->required();
  rp->add_option("-o,--output", report.output, "Plot-data CSV (default: stdout)");
  rp->add_option("--json", report.json, "Also write the distributions as JSON");
  rp->add_option("-k,--top-k", report.top_k, "Categories kept per level")->capture_default_str()
      ->check(CLI::PositiveNumber);

  PromptArgs prompt;
  auto* pr = app.add_subcommand("prompt", "Print the messages that would be sent for a text");
  prompt.data.add_to(pr);
  pr->add_option("-t,--text", prompt.text, "Input text");
  pr->add_option("-f,--text-file", prompt.text_file, "Read the input text from a file");
  pr->add_flag("--no-few-shot", prompt.no_few_shot, "Drop the exemplar turns");
  pr->add_flag("--no-schema", prompt.no_schema, "Do not attach the output schema");

  std::string schema_taxonomy;
  auto* sc = app.add_subcommand("schema", "Print the structured-output JSON schema");
  sc->add_option("--taxonomy", schema_taxonomy, "Taxonomy JSON (default: bundled)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ex->parsed()) return run_extract(extract);
    if (ev->parsed()) return run_evaluate(evaluate);
    if (rp->parsed()) return run_report(report);
    if (pr->parsed()) return run_prompt(prompt);
    if (sc->parsed()) {
      const auto taxonomy = phigrade::load_taxonomy_file(
          schema_taxonomy.empty() ? phigrade::data_file("taxonomy.json")
                                  : std::filesystem::path(schema_taxonomy));
      std::cout << phigrade::output_schema(taxonomy).dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
