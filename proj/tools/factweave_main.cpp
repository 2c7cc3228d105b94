// Command-line surface for the fact-verification pipeline: retrieval dumps,
// training, evaluation, ablation tables, attention inspection, gradient
// checking and synthetic benchmark generation.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "factweave/checkpoint.hpp"
#include "factweave/data_io.hpp"
#include "factweave/error.hpp"
#include "factweave/run_config.hpp"
#include "factweave/synth.hpp"

namespace fw = factweave;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::int64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key = value config file");
  cmd->add_option("--out", args.out_dir, "output directory (overrides config 'out')");
  cmd->add_option("--set", args.overrides, "config override key=value (repeatable)");
  cmd->add_option("--seed", args.seed, "seed override");
}

fw::RunConfig resolve_config(const CommonArgs& args) {
  fw::RunConfig config =
      args.config_path.empty() ? fw::RunConfig() : fw::RunConfig::from_file(args.config_path);
  for (const std::string& kv : args.overrides) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw fw::ContractError("override must be key=value, got '" + kv + "'");
    }
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed.has_value()) config.set("seed", std::to_string(*args.seed));
  if (!args.out_dir.empty()) config.set("out", args.out_dir);
  return config;
}

fs::path prepare_out_dir(const fw::RunConfig& config) {
  fs::path out = config.path("out");
  fs::create_directories(out);
  config.write_snapshot(out / "config.snapshot");
  return out;
}

struct LoadedStores {
  fw::KnowledgeGraph kg;
  fw::FactIndex facts;
};

LoadedStores load_stores(const fw::RunConfig& config) {
  LoadedStores stores;
  if (config.has_path("kg")) {
    stores.kg = fw::KnowledgeGraph::load(config.path("kg"));
  }
  if (config.has_path("facts")) {
    if (config.has_path("fact_embeddings")) {
      stores.facts = fw::FactIndex::load(config.path("facts"), config.path("fact_embeddings"));
    } else {
      fw::HashEmbedder embedder = fw::Pipeline::make_retrieval_embedder(
          256, static_cast<std::uint64_t>(config.get_int("embedder_seed")));
      stores.facts = fw::FactIndex::build(fw::load_facts_jsonl(config.path("facts")), embedder);
    }
  }
  return stores;
}

fw::Pipeline make_pipeline(const LoadedStores& stores, const fw::RunConfig& config) {
  fw::Pipeline pipeline(stores.kg, stores.facts, config.model_config(),
                        static_cast<std::uint64_t>(config.get_int("embedder_seed")));
  if (config.has_path("concept_embeddings")) {
    pipeline.set_concept_table(fw::load_concept_table(config.path("concept_embeddings")));
  }
  return pipeline;
}

json subgraph_to_json(const fw::Subgraph& sub, const fw::KnowledgeGraph& kg) {
  json nodes = json::array();
  std::set<int> seed_set(sub.seeds.begin(), sub.seeds.end());
  for (int id : sub.nodes) {
    nodes.push_back(json{{"id", id},
                         {"surface", kg.surface(id)},
                         {"seed", seed_set.count(id) > 0}});
  }
  json edges = json::array();
  for (const auto& [h, t] : sub.edges) edges.push_back(json::array({h, t}));
  return json{{"nodes", nodes}, {"edges", edges}};
}

json retrieval_dump(const fw::Pipeline& pipeline, const fw::Claim& claim) {
  fw::PreparedClaim prepared = pipeline.prepare(claim);
  json facts = json::array();
  for (std::size_t i = 0; i < prepared.retrieved.size(); ++i) {
    facts.push_back(json{{"id", prepared.retrieved[i].id},
                         {"score", prepared.retrieved[i].score},
                         {"text", prepared.facts[i].text}});
  }
  return json{{"claim_id", claim.id},
              {"claim", claim.text},
              {"subgraph", subgraph_to_json(prepared.sub, pipeline.kg())},
              {"facts", facts}};
}

int cmd_retrieve(const CommonArgs& common, const std::string& claim_text,
                 const std::string& claims_file) {
  fw::RunConfig config = resolve_config(common);
  LoadedStores stores = load_stores(config);
  fw::Pipeline pipeline = make_pipeline(stores, config);
  fs::path out = prepare_out_dir(config);

  std::vector<fw::Claim> claims;
  if (!claim_text.empty()) {
    claims.push_back(fw::Claim{0, claim_text, 0});
  } else if (!claims_file.empty()) {
    claims = fw::load_claims_jsonl(claims_file);
  } else {
    throw fw::ContractError("retrieve needs --claim or --claims");
  }

  std::ofstream file(out / "retrieval.jsonl", std::ios::trunc);
  for (const fw::Claim& c : claims) {
    json dump = retrieval_dump(pipeline, c);
    std::cout << dump.dump(2) << "\n";
    file << dump.dump() << "\n";
  }
  return kExitOk;
}

int cmd_train(const CommonArgs& common) {
  fw::RunConfig config = resolve_config(common);
  LoadedStores stores = load_stores(config);
  fw::Pipeline pipeline = make_pipeline(stores, config);
  fs::path out = prepare_out_dir(config);

  std::vector<fw::Claim> train_set = fw::load_claims_jsonl(config.path("train"));
  std::vector<fw::Claim> dev_set;
  if (config.has_path("dev")) dev_set = fw::load_claims_jsonl(config.path("dev"));

  fw::TrainResult result = fw::train(pipeline, train_set, dev_set, config.train_config());
  result.report.config_snapshot = config.values();

  fw::save_checkpoint(out / "model.ckpt", result.params.tensors);
  fw::save_report(out / "train_report.json", result.report);
  std::cout << "accuracy " << result.report.accuracy << " over " << result.report.total
            << " claims; checkpoint at " << (out / "model.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonArgs& common, const std::string& checkpoint) {
  fw::RunConfig config = resolve_config(common);
  LoadedStores stores = load_stores(config);
  fw::Pipeline pipeline = make_pipeline(stores, config);
  fs::path out = prepare_out_dir(config);

  fw::ModelParams params;
  params.tensors = fw::load_checkpoint(checkpoint);
  std::vector<fw::Claim> dataset = fw::load_claims_jsonl(config.path("test"));

  fw::EvalReport report = fw::evaluate(pipeline, dataset, params);
  report.seed = config.train_config().seed;
  report.config_snapshot = config.values();
  fw::save_report(out / "eval_report.json", report);
  fw::save_predictions_jsonl(out / "predictions.jsonl", report.predictions);
  std::cout << "accuracy " << report.accuracy << " (" << report.correct << "/" << report.total
            << ")\n";
  return kExitOk;
}

struct VariantSpec {
  std::string name;
  std::map<std::string, std::string> overrides;
};

std::vector<VariantSpec> ablation_variants() {
  return {
      {"full", {}},
      {"no_facts", {{"no_facts", "true"}}},
      {"no_kg", {{"no_kg", "true"}}},
      {"no_both", {{"no_facts", "true"}, {"no_kg", "true"}}},
      {"no_edge_types", {{"no_edge_types", "true"}}},
      {"drop_c2f", {{"drop_relations", "c2f"}}},
      {"drop_c2c", {{"drop_relations", "c2c"}}},
      {"drop_q2f", {{"drop_relations", "q2f"}}},
      {"drop_q2c", {{"drop_relations", "q2c"}}},
      {"pool_max", {{"pool", "max"}}},
      {"pool_mean", {{"pool", "mean"}}},
      {"pool_attention", {{"pool", "attention"}}},
  };
}

int cmd_ablate(const CommonArgs& common, const std::string& seeds_csv) {
  fw::RunConfig base = resolve_config(common);
  LoadedStores stores = load_stores(base);
  fs::path out = prepare_out_dir(base);

  std::vector<std::uint64_t> seeds;
  std::istringstream ss(seeds_csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) seeds.push_back(base.train_config().seed);

  std::vector<fw::Claim> train_set = fw::load_claims_jsonl(base.path("train"));
  std::vector<fw::Claim> dev_set;
  if (base.has_path("dev")) dev_set = fw::load_claims_jsonl(base.path("dev"));
  std::vector<fw::Claim> test_set = fw::load_claims_jsonl(base.path("test"));

  json table = json::array();
  std::cout << std::left << std::setw(16) << "variant" << std::setw(10) << "mean_acc"
            << "per-seed\n";
  for (const VariantSpec& variant : ablation_variants()) {
    fw::RunConfig config = base;
    for (const auto& [k, v] : variant.overrides) config.set(k, v);

    std::vector<double> accs;
    for (std::uint64_t seed : seeds) {
      config.set("seed", std::to_string(seed));
      fw::Pipeline pipeline = make_pipeline(stores, config);
      fw::TrainResult trained = fw::train(pipeline, train_set, dev_set, config.train_config());
      fw::EvalReport report = fw::evaluate(pipeline, test_set, trained.params);
      accs.push_back(report.accuracy);
      fw::save_checkpoint(out / ("model_" + variant.name + "_s" + std::to_string(seed) + ".ckpt"),
                          trained.params.tensors);
    }
    const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) /
                        static_cast<double>(accs.size());
    table.push_back(json{{"variant", variant.name}, {"mean_accuracy", mean}, {"per_seed", accs}});

    std::ostringstream per_seed;
    for (double a : accs) per_seed << std::fixed << std::setprecision(3) << a << " ";
    std::cout << std::left << std::setw(16) << variant.name << std::setw(10)
              << std::fixed << std::setprecision(3) << mean << per_seed.str() << "\n";
  }
  std::ofstream table_file(out / "ablation_table.json", std::ios::trunc);
  table_file << table.dump(2) << "\n";
  return kExitOk;
}

int cmd_inspect(const CommonArgs& common, const std::string& checkpoint,
                const std::string& claim_text) {
  fw::RunConfig config = resolve_config(common);
  LoadedStores stores = load_stores(config);
  fw::Pipeline pipeline = make_pipeline(stores, config);
  fs::path out = prepare_out_dir(config);

  fw::ModelParams params;
  params.tensors = fw::load_checkpoint(checkpoint);

  fw::Claim claim{0, claim_text, 0};
  fw::Tape tape;
  fw::RegisteredParams reg = fw::register_params(tape, params);
  fw::ForwardResult fwd = fw::forward_claim(tape, pipeline, claim, reg, std::nullopt);

  const fw::Tensor& logits = tape.value(fwd.logits);
  std::cout << "logits [" << logits.data()[0] << ", " << logits.data()[1] << "] -> "
            << (logits.data()[1] > logits.data()[0] ? "true" : "false") << "\n";

  // Rank knowledge nodes by mean attention weight across heads.
  const fw::AttentionTrace& trace = fwd.trace;
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t n = 0; n < trace.nodes.size(); ++n) {
    double mean = 0.0;
    for (const auto& head : trace.head_weights) mean += head[n];
    if (!trace.head_weights.empty()) mean /= static_cast<double>(trace.head_weights.size());
    ranked.emplace_back(mean, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (const auto& [weight, n] : ranked) {
    std::cout << std::fixed << std::setprecision(4) << weight << "  "
              << (trace.nodes[n].kind == fw::NodeKind::Fact ? "fact   " : "concept") << "  "
              << trace.nodes[n].label << "\n";
  }
  fw::save_trace_jsonl(out / "trace.jsonl", claim.id, trace);
  return kExitOk;
}

int cmd_gradcheck(const CommonArgs& common) {
  fw::RunConfig config = resolve_config(common);

  // Use configured stores when present, else a self-contained fixture.
  fw::SynthBenchmark fixture;
  LoadedStores stores;
  std::vector<fw::Claim> claims;
  if (config.has_path("kg") && config.has_path("facts") && config.has_path("train")) {
    stores = load_stores(config);
    claims = fw::load_claims_jsonl(config.path("train"));
  } else {
    fixture = fw::synth_xor_benchmark(7, 4, 0, 0);
    stores.kg = fw::KnowledgeGraph::from_triples(fixture.triples);
    fw::HashEmbedder embedder(64, 99);
    stores.facts = fw::FactIndex::build(fixture.facts, embedder);
    claims = fixture.train;
  }
  fw::Pipeline pipeline = make_pipeline(stores, config);

  fw::PreparedClaim prepared = pipeline.prepare(claims.front());
  fw::Rng init_rng(fw::Rng::derive(config.train_config().seed, 0x1717));
  fw::ModelParams params = fw::init_params(pipeline.config(), init_rng);
  fw::Rng mask_rng(fw::Rng::derive(config.train_config().seed, 0x3a3a));
  std::vector<fw::Tensor> masks;
  if (pipeline.config().dropout > 0.0) {
    masks = fw::make_dropout_masks(prepared, pipeline.config(), mask_rng);
  }

  constexpr double kTol = 1e-4;
  fw::GradCheckReport report = fw::finite_diff_check(prepared, params, pipeline.config(), masks);
  for (const fw::GradCheckEntry& entry : report.entries) {
    std::cout << std::left << std::setw(28) << entry.name << std::scientific
              << std::setprecision(3) << entry.max_rel_err << "\n";
  }
  const bool ok = report.passed(kTol);
  std::cout << (ok ? "PASS" : "FAIL") << ": worst relative error " << std::scientific
            << std::setprecision(3) << report.worst << " against tolerance " << kTol << "\n";
  return ok ? kExitOk : kExitNumerical;
}

int cmd_synth(const CommonArgs& common, std::int64_t n) {
  fw::RunConfig config = resolve_config(common);
  fs::path out = prepare_out_dir(config);
  const std::uint64_t seed = config.train_config().seed;
  const std::size_t n_train = static_cast<std::size_t>(n);
  const std::size_t n_side = std::max<std::size_t>(16, n_train / 4);

  fw::SynthBenchmark bench = fw::synth_xor_benchmark(seed, n_train, n_side, n_side);
  fw::write_synth_files(out, bench);

  // A ready-to-run config pointing at the generated files.
  fw::RunConfig run = config;
  run.set("kg", (out / "kg.tsv").string());
  run.set("facts", (out / "facts.jsonl").string());
  run.set("train", (out / "train.jsonl").string());
  run.set("dev", (out / "dev.jsonl").string());
  run.set("test", (out / "test.jsonl").string());
  run.write_snapshot(out / "synth.cfg");
  std::cout << "wrote " << n_train << "/" << n_side << "/" << n_side
            << " train/dev/test claims under " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fact verification over heterogeneous knowledge"};
  app.require_subcommand(1);

  CommonArgs retrieve_args, train_args, eval_args, ablate_args, inspect_args, gradcheck_args,
      synth_args;
  std::string claim_text, claims_file, checkpoint, seeds_csv;
  std::int64_t synth_n = 256;

  CLI::App* retrieve = app.add_subcommand("retrieve", "dump subgraph + top-k facts for claims");
  add_common(retrieve, retrieve_args);
  retrieve->add_option("--claim", claim_text, "single claim text");
  retrieve->add_option("--claims", claims_file, "claims JSONL file");

  CLI::App* train = app.add_subcommand("train", "train a model from a config");
  add_common(train, train_args);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "train and score every ablation variant");
  add_common(ablate, ablate_args);
  ablate->add_option("--seeds", seeds_csv, "comma-separated seeds");

  CLI::App* inspect = app.add_subcommand("inspect", "attention trace for one claim");
  add_common(inspect, inspect_args);
  inspect->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  inspect->add_option("--claim", claim_text, "claim text")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gradcheck, gradcheck_args);

  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic XOR benchmark");
  add_common(synth, synth_args);
  synth->add_option("--n", synth_n, "training claims to generate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (retrieve->parsed()) return cmd_retrieve(retrieve_args, claim_text, claims_file);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args, checkpoint);
    if (ablate->parsed()) return cmd_ablate(ablate_args, seeds_csv);
    if (inspect->parsed()) return cmd_inspect(inspect_args, checkpoint, claim_text);
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_args);
    if (synth->parsed()) return cmd_synth(synth_args, synth_n);
  } catch (const fw::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const fw::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const fw::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
