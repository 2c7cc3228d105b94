#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "factweave/model.hpp"
#include "factweave/synth.hpp"
#include "factweave/trainer.hpp"

namespace factweave {

/// JSON Lines, one claim per line: {"id", "claim", "label"} with label in
/// {0, 1}. Adapters: "sentence" or "question" stand in for "claim",
/// "ex_id" for "id", and string labels "true"/"false" (or "yes"/"no")
/// for 1/0.
std::vector<Claim> load_claims_jsonl(const std::filesystem::path& path);

void save_claims_jsonl(const std::filesystem::path& path, const std::vector<Claim>& claims);
void save_facts_jsonl(const std::filesystem::path& path, const std::vector<Fact>& facts);
void save_kg_tsv(const std::filesystem::path& path,
                 const std::vector<std::array<std::string, 3>>& triples);

std::string report_to_json(const EvalReport& report);
void save_report(const std::filesystem::path& path, const EvalReport& report);

/// Predictions: JSON Lines {"id", "label", "pred", "logits": [l0, l1]}.
void save_predictions_jsonl(const std::filesystem::path& path,
                            const std::vector<Prediction>& predictions);

/// Attention trace: JSON Lines
/// {"claim_id", "head", "node_label", "node_kind", "weight"}.
void save_trace_jsonl(const std::filesystem::path& path, long claim_id,
                      const AttentionTrace& trace);
std::string trace_to_jsonl(long claim_id, const AttentionTrace& trace);

void write_synth_files(const std::filesystem::path& out_dir, const SynthBenchmark& bench);

}  // namespace factweave
