#include "factweave/data_io.hpp"

#include <fstream>

#include <json.hpp>

#include "factweave/error.hpp"

namespace factweave {

using nlohmann::json;

namespace {

int parse_label(const json& j, const std::filesystem::path& path, std::size_t line_no) {
  if (j.is_number_integer()) {
    const int v = j.get<int>();
    if (v == 0 || v == 1) return v;
  } else if (j.is_boolean()) {
    return j.get<bool>() ? 1 : 0;
  } else if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "true" || s == "yes" || s == "1") return 1;
    if (s == "false" || s == "no" || s == "0") return 0;
  }
  throw ParseError("bad label at " + path.string() + ":" + std::to_string(line_no));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  return os;
}

}  // namespace

std::vector<Claim> load_claims_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open claims file: " + path.string());
  std::vector<Claim> claims;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw ParseError("malformed claim at " + path.string() + ":" + std::to_string(line_no));
    }
    Claim c;
    if (j.contains("id")) {
      c.id = j["id"].is_string() ? static_cast<long>(line_no - 1) : j["id"].get<long>();
    } else if (j.contains("ex_id")) {
      c.id = static_cast<long>(line_no - 1);
    } else {
      c.id = static_cast<long>(line_no - 1);
    }
    const char* text_keys[] = {"claim", "sentence", "question"};
    for (const char* key : text_keys) {
      if (j.contains(key)) {
        c.text = j[key].get<std::string>();
        break;
      }
    }
    if (c.text.empty()) {
      throw ParseError("claim without text at " + path.string() + ":" + std::to_string(line_no));
    }
    const char* label_keys[] = {"label", "answer"};
    bool labeled = false;
    for (const char* key : label_keys) {
      if (j.contains(key)) {
        c.label = parse_label(j[key], path, line_no);
        labeled = true;
        break;
      }
    }
    if (!labeled) {
      throw ParseError("claim without label at " + path.string() + ":" + std::to_string(line_no));
    }
    claims.push_back(std::move(c));
  }
  return claims;
}

void save_claims_jsonl(const std::filesystem::path& path, const std::vector<Claim>& claims) {
  std::ofstream os = open_out(path);
  for (const Claim& c : claims) {
    json j{{"id", c.id}, {"claim", c.text}, {"label", c.label}};
    os << j.dump() << "\n";
  }
}

void save_facts_jsonl(const std::filesystem::path& path, const std::vector<Fact>& facts) {
  std::ofstream os = open_out(path);
  for (const Fact& f : facts) {
    json j{{"id", f.id}, {"text", f.text}};
    os << j.dump() << "\n";
  }
}

void save_kg_tsv(const std::filesystem::path& path,
                 const std::vector<std::array<std::string, 3>>& triples) {
  std::ofstream os = open_out(path);
  for (const auto& [h, r, t] : triples) os << h << "\t" << r << "\t" << t << "\n";
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["accuracy"] = report.accuracy;
  j["correct"] = report.correct;
  j["total"] = report.total;
  j["seed"] = report.seed;
  j["loss_curve"] = report.loss_curve;
  j["dev_accuracy"] = report.dev_accuracy;
  j["config"] = report.config_snapshot;
  json preds = json::array();
  for (const Prediction& p : report.predictions) {
    preds.push_back(json{{"id", p.id},
                         {"label", p.label},
                         {"pred", p.pred},
                         {"logits", {p.logit0, p.logit1}}});
  }
  j["predictions"] = preds;
  return j.dump(2);
}

void save_report(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream os = open_out(path);
  os << report_to_json(report) << "\n";
}

void save_predictions_jsonl(const std::filesystem::path& path,
                            const std::vector<Prediction>& predictions) {
  std::ofstream os = open_out(path);
  for (const Prediction& p : predictions) {
    json j{{"id", p.id}, {"label", p.label}, {"pred", p.pred}, {"logits", {p.logit0, p.logit1}}};
    os << j.dump() << "\n";
  }
}

std::string trace_to_jsonl(long claim_id, const AttentionTrace& trace) {
  std::string out;
  for (std::size_t h = 0; h < trace.head_weights.size(); ++h) {
    for (std::size_t n = 0; n < trace.nodes.size(); ++n) {
      json j{{"claim_id", claim_id},
             {"head", h},
             {"node_label", trace.nodes[n].label},
             {"node_kind", trace.nodes[n].kind == NodeKind::Fact ? "fact" : "concept"},
             {"weight", trace.head_weights[h][n]}};
      out += j.dump();
      out += "\n";
    }
  }
  return out;
}

void save_trace_jsonl(const std::filesystem::path& path, long claim_id,
                      const AttentionTrace& trace) {
  std::ofstream os = open_out(path);
  os << trace_to_jsonl(claim_id, trace);
}

void write_synth_files(const std::filesystem::path& out_dir, const SynthBenchmark& bench) {
  std::filesystem::create_directories(out_dir);
  save_kg_tsv(out_dir / "kg.tsv", bench.triples);
  save_facts_jsonl(out_dir / "facts.jsonl", bench.facts);
  save_claims_jsonl(out_dir / "train.jsonl", bench.train);
  save_claims_jsonl(out_dir / "dev.jsonl", bench.dev);
  save_claims_jsonl(out_dir / "test.jsonl", bench.test);
  json meta = json::array();
  for (const SynthClaimMeta& m : bench.meta) {
    meta.push_back(json{{"id", m.id}, {"kg_bit", m.kg_bit}, {"fact_bit", m.fact_bit}});
  }
  std::ofstream os = open_out(out_dir / "meta.json");
  os << meta.dump(2) << "\n";
}

}  // namespace factweave
