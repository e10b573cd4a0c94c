#pragma once

#include "tier/executor.hpp"
#include "tier/reward.hpp"
#include "tier/schema.hpp"

#include <map>
#include <string>
#include <vector>

namespace tier {

enum class Structure { None, Single, Chain, Funnel, Tree, Conjunctive, Mixed };

std::optional<Structure> parse_structure(const std::string& name);
std::string structure_name(Structure s);

struct BenchItem {
    std::string id;
    std::string query;
    int depth = 0; // 0..6; 0 means no available tool applies
    Structure structure = Structure::None;
    std::vector<std::string> tool_names; // targets plus distractors
    GoldSpec gold;
    std::optional<std::string> gold_trajectory; // JSON AST payload text
    ReturnMode return_mode = ReturnMode::One;
};

struct DepthBucket {
    int n = 0;
    int correct = 0;
    double accuracy = 0.0;
};

struct DepthReport {
    std::map<int, DepthBucket> per_depth;
    double overall = 0.0; // population-weighted: total correct / total n

    Json to_json() const;
};

/// Parses a line-delimited dataset, checking the depth-0 <=> no-call
/// invariant and that every referenced tool resolves in the registry.
/// Errors: MalformedDataset, UnknownToolReference, DepthGoldConflict.
std::vector<BenchItem> load_dataset(const std::string& source, const ToolRegistry& registry);

struct ItemEvaluation {
    bool correct = false;
    RewardBreakdown breakdown;
};

/// Full pipeline for one item; any stage failure becomes correct=false with
/// the gated breakdown as the diagnostic.
ItemEvaluation evaluate_item(const BenchItem& item, const std::string& model_response,
                             const ToolRegistry& registry, const ToolBackend& backend,
                             const RewardConfig& config);

DepthReport aggregate_by_depth(const std::vector<std::pair<int, bool>>& results);

/// Deterministically samples k non-target tool names, preferring candidates
/// whose declared return type matches some target's.
std::vector<std::string> sample_distractors(const ToolRegistry& registry,
                                            const std::vector<std::string>& targets, std::size_t k,
                                            std::uint64_t seed);

/// Tool names referenced by both splits, in any role (target or
/// distractor). Empty means the splits are tool-disjoint.
std::vector<std::string> split_tool_overlap(const std::vector<BenchItem>& train_split,
                                            const std::vector<BenchItem>& eval_split);

/// Line-delimited {item_id, response} records keyed by item id.
/// Errors: MalformedRollouts, DuplicateRollout.
std::map<std::string, std::string> load_rollouts(const std::string& source);

/// Scores a rollout set against a dataset. Every item needs exactly one
/// rollout and every rollout must name a known item; violations raise
/// Error("OrphanedRollouts") listing the offending ids.
struct EvaluationRun {
    DepthReport report;
    std::vector<std::pair<std::string, ItemEvaluation>> per_item; // dataset order
};

EvaluationRun evaluate_rollouts(const std::vector<BenchItem>& items,
                                const std::map<std::string, std::string>& rollouts,
                                const ToolRegistry& registry, const ToolBackend& backend,
                                const RewardConfig& config);

} // namespace tier
